#include "smile/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace smile {

std::string to_string(SubsetStrategy s) {
    switch (s) {
        case SubsetStrategy::full: return "full";
        case SubsetStrategy::smile: return "smile";
        case SubsetStrategy::reverse: return "reverse";
        case SubsetStrategy::random: return "random";
    }
    return "full";
}

SubsetStrategy parse_subset_strategy(const std::string& s) {
    if (s == "full") return SubsetStrategy::full;
    if (s == "smile") return SubsetStrategy::smile;
    if (s == "reverse") return SubsetStrategy::reverse;
    if (s == "random") return SubsetStrategy::random;
    throw std::invalid_argument("unknown subset strategy '" + s + "'");
}

std::string to_string(FirstToken f) {
    switch (f) {
        case FirstToken::none: return "none";
        case FirstToken::mle: return "mle";
        case FirstToken::shift: return "shift";
    }
    return "none";
}

FirstToken parse_first_token(const std::string& s) {
    if (s == "none") return FirstToken::none;
    if (s == "mle") return FirstToken::mle;
    if (s == "shift") return FirstToken::shift;
    throw std::invalid_argument("unknown first-token strategy '" + s + "'");
}

TeacherBatch make_teacher_batch(const std::vector<const Sample*>& samples) {
    TeacherBatch tb;
    std::size_t T = 0;
    for (const Sample* s : samples) {
        T = std::max(T, s->caption.size() - 1);
    }
    tb.labels = LabelBatch(samples.size(), T);
    for (std::size_t b = 0; b < samples.size(); ++b) {
        const auto& c = samples[b]->caption;
        tb.features.push_back(samples[b]->features);
        tb.inputs.emplace_back(c.begin(), c.end() - 1);
        for (std::size_t t = 0; t + 1 < c.size(); ++t) {
            tb.labels.at(b, t) = c[t + 1];
        }
    }
    return tb;
}

SubsetMask build_mask(const LabelBatch& labels, std::size_t vocab_size, SubsetStrategy strategy,
                      FirstToken first_token, std::mt19937_64& rng, int random_k) {
    SubsetMask m;
    m.batch = labels.batch;
    m.positions = labels.positions;
    m.vocab = vocab_size;
    m.strategy = strategy;
    m.first_token = first_token;
    m.admit.assign(m.batch * m.positions * vocab_size, 1);
    if (strategy == SubsetStrategy::full) {
        return m;
    }
    std::vector<std::uint8_t> seq_set(vocab_size);
    std::vector<TokenId> pool;
    for (std::size_t b = 0; b < labels.batch; ++b) {
        // Base admission row shared by every position of this sequence.
        std::fill(seq_set.begin(), seq_set.end(), 0);
        for (std::size_t t = 0; t < labels.positions; ++t) {
            const TokenId y = labels.at(b, t);
            if (y != labels.pad) {
                seq_set[static_cast<std::size_t>(y)] = 1;
            }
        }
        std::vector<std::uint8_t> base(vocab_size, 0);
        switch (strategy) {
            case SubsetStrategy::smile:
                base = seq_set;
                break;
            case SubsetStrategy::reverse:
                for (std::size_t j = 0; j < vocab_size; ++j) base[j] = seq_set[j] ? 0 : 1;
                break;
            case SubsetStrategy::random: {
                pool.clear();
                for (std::size_t j = 0; j < vocab_size; ++j) {
                    if (static_cast<TokenId>(j) != labels.pad) pool.push_back(static_cast<TokenId>(j));
                }
                const std::size_t k = std::min(pool.size(), static_cast<std::size_t>(std::max(random_k, 0)));
                for (std::size_t i = 0; i < k; ++i) {
                    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
                    std::swap(pool[i], pool[pick(rng)]);
                    base[static_cast<std::size_t>(pool[i])] = 1;
                }
                break;
            }
            case SubsetStrategy::full:
                break;
        }
        for (std::size_t t = 0; t < labels.positions; ++t) {
            const TokenId y = labels.at(b, t);
            if (y == labels.pad) {
                continue;  // PAD rows stay fully admitted
            }
            if (t == 0 && first_token == FirstToken::mle) {
                continue;
            }
            std::uint8_t* row = m.admit.data() + (b * m.positions + t) * vocab_size;
            std::copy(base.begin(), base.end(), row);
            row[static_cast<std::size_t>(y)] = 1;
        }
    }
    return m;
}

namespace {

void check_shapes(const LogitsBatch& logits, const LabelBatch& labels) {
    if (logits.batch != labels.batch || logits.positions != labels.positions) {
        throw std::invalid_argument("logits and labels shapes differ");
    }
}

void check_finite(std::span<const double> row) {
    for (double z : row) {
        if (!std::isfinite(z)) {
            throw std::domain_error("non-finite logit");
        }
    }
}

std::size_t count_targets(const LabelBatch& labels) {
    return static_cast<std::size_t>(
        std::count_if(labels.ids.begin(), labels.ids.end(), [&](TokenId y) { return y != labels.pad; }));
}

LossReport make_report(const LogitsBatch& logits, const LabelBatch& labels) {
    LossReport r;
    r.count = count_targets(labels);
    r.per_token.assign(labels.batch * labels.positions, 0.0);
    r.label_prob.assign(labels.batch * labels.positions, 0.0);
    r.grad = LogitsBatch(logits.batch, logits.positions, logits.vocab);
    r.grad.lengths = logits.lengths;
    return r;
}

}  // namespace

LossReport mle_loss(const LogitsBatch& logits, const LabelBatch& labels) {
    check_shapes(logits, labels);
    LossReport r = make_report(logits, labels);
    if (r.count == 0) {
        return r;
    }
    const double inv_n = 1.0 / static_cast<double>(r.count);
    double sum = 0.0;
    for (std::size_t b = 0; b < labels.batch; ++b) {
        for (std::size_t t = 0; t < labels.positions; ++t) {
            const TokenId y = labels.at(b, t);
            if (y == labels.pad) {
                continue;
            }
            const auto z = logits.at(b, t);
            check_finite(z);
            const double mx = *std::max_element(z.begin(), z.end());
            double denom = 0.0;
            for (double v : z) denom += std::exp(v - mx);
            const double log_denom = std::log(denom);
            const double loss = -(z[static_cast<std::size_t>(y)] - mx - log_denom);
            r.per_token[b * labels.positions + t] = loss;
            r.label_prob[b * labels.positions + t] = std::exp(-loss);
            sum += loss;
            auto g = r.grad.at(b, t);
            for (std::size_t j = 0; j < z.size(); ++j) {
                g[j] = std::exp(z[j] - mx - log_denom) * inv_n;
            }
            g[static_cast<std::size_t>(y)] -= inv_n;
        }
    }
    r.total = sum * inv_n;
    return r;
}

LossReport smile_loss(const LogitsBatch& logits, const LabelBatch& labels, const SubsetMask& mask) {
    check_shapes(logits, labels);
    if (mask.batch != labels.batch || mask.positions != labels.positions || mask.vocab != logits.vocab) {
        throw std::invalid_argument("mask shape does not match logits");
    }
    LossReport r = make_report(logits, labels);
    if (r.count == 0) {
        return r;
    }
    const double inv_n = 1.0 / static_cast<double>(r.count);
    double sum = 0.0;
    for (std::size_t b = 0; b < labels.batch; ++b) {
        for (std::size_t t = 0; t < labels.positions; ++t) {
            const TokenId y = labels.at(b, t);
            if (y == labels.pad) {
                continue;
            }
            const auto admit = mask.row(b, t);
            if (!admit[static_cast<std::size_t>(y)]) {
                throw std::invalid_argument("label token is not admitted by the subset mask");
            }
            const auto z = logits.at(b, t);
            // Only admitted logits are read: the rest cannot influence the result.
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < z.size(); ++j) {
                if (admit[j]) {
                    if (!std::isfinite(z[j])) {
                        throw std::domain_error("non-finite logit");
                    }
                    mx = std::max(mx, z[j]);
                }
            }
            double denom = 0.0;
            for (std::size_t j = 0; j < z.size(); ++j) {
                if (admit[j]) denom += std::exp(z[j] - mx);
            }
            const double log_denom = std::log(denom);
            const double loss = -(z[static_cast<std::size_t>(y)] - mx - log_denom);
            r.per_token[b * labels.positions + t] = loss;
            r.label_prob[b * labels.positions + t] = std::exp(-loss);
            sum += loss;
            auto g = r.grad.at(b, t);
            for (std::size_t j = 0; j < z.size(); ++j) {
                if (admit[j]) g[j] = std::exp(z[j] - mx - log_denom) * inv_n;
            }
            g[static_cast<std::size_t>(y)] -= inv_n;
        }
    }
    r.total = sum * inv_n;
    return r;
}

LossReport mixed_loss(const LogitsBatch& logits, const LabelBatch& labels, const SubsetMask& mask, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("lambda must lie in [0, 1]");
    }
    LossReport full = mle_loss(logits, labels);
    LossReport sub = smile_loss(logits, labels, mask);
    const double mu = 1.0 - lambda;
    LossReport r = std::move(sub);
    r.total = lambda * full.total + mu * r.total;
    for (std::size_t i = 0; i < r.per_token.size(); ++i) {
        r.per_token[i] = lambda * full.per_token[i] + mu * r.per_token[i];
        r.label_prob[i] = lambda * full.label_prob[i] + mu * r.label_prob[i];
    }
    for (std::size_t i = 0; i < r.grad.values.size(); ++i) {
        r.grad.values[i] = lambda * full.grad.values[i] + mu * r.grad.values[i];
    }
    return r;
}

ShiftResult apply_first_token_shift(const LabelBatch& labels, const Vocabulary& vocab) {
    ShiftResult out{labels, std::vector<bool>(labels.batch, false)};
    if (labels.positions == 0) {
        return out;
    }
    for (std::size_t b = 0; b < labels.batch; ++b) {
        const TokenId first = labels.at(b, 0);
        if (first == labels.pad) {
            continue;
        }
        if (auto alias = vocab.alias_of(first)) {
            out.labels.at(b, 0) = *alias;
        } else {
            out.unshifted[b] = true;
        }
    }
    return out;
}

}  // namespace smile
