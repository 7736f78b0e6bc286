#include "smile/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace smile {

void DecodeConfig::validate(int model_max_len) const {
    if (width < 1) {
        throw std::invalid_argument("decode width must be >= 1");
    }
    if (max_len < 2) {
        throw std::invalid_argument("decode max_len must be >= 2");
    }
    if (model_max_len > 0 && max_len > model_max_len) {
        throw std::invalid_argument("decode max_len " + std::to_string(max_len) + " exceeds model max_len " +
                                    std::to_string(model_max_len));
    }
    if (!std::isfinite(length_penalty) || length_penalty < 0.0) {
        throw std::invalid_argument("length_penalty must be finite and non-negative");
    }
}

nlohmann::json to_json(const DecodeConfig& c) {
    return {{"mode", c.mode == DecodeConfig::Mode::greedy ? "greedy" : "beam"},
            {"width", c.width},
            {"max_len", c.max_len},
            {"length_penalty", c.length_penalty}};
}

DecodeConfig decode_config_from_json(const nlohmann::json& j) {
    DecodeConfig c;
    const std::string mode = j.value("mode", std::string("beam"));
    if (mode == "greedy") {
        c.mode = DecodeConfig::Mode::greedy;
    } else if (mode == "beam") {
        c.mode = DecodeConfig::Mode::beam;
    } else {
        throw std::invalid_argument("unknown decode mode '" + mode + "'");
    }
    c.width = j.value("width", c.width);
    c.max_len = j.value("max_len", c.max_len);
    c.length_penalty = j.value("length_penalty", c.length_penalty);
    c.validate();
    return c;
}

namespace {

void log_softmax_inplace(std::vector<double>& z) {
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (double& v : z) v -= lse;
}

TokenId apply_fold(const DecodeTokens& t, TokenId id) { return t.fold ? t.fold(id) : id; }

Decoded greedy(std::unique_ptr<StepScorer> scorer, const DecodeConfig& config, const DecodeTokens& tok) {
    Decoded out;
    out.tokens.push_back(tok.bos);
    TokenId next = tok.bos;
    const int steps = config.max_len - 1;
    for (int step = 0; step < steps; ++step) {
        auto lp = scorer->push(next);
        log_softmax_inplace(lp);
        // max_element returns the first maximum, i.e. the lowest id on ties.
        const auto best = static_cast<TokenId>(std::max_element(lp.begin(), lp.end()) - lp.begin());
        out.logprob += lp[static_cast<std::size_t>(best)];
        if (best == tok.eos) {
            out.tokens.push_back(tok.eos);
            return out;
        }
        next = apply_fold(tok, best);
        out.tokens.push_back(next);
    }
    out.truncated = true;
    return out;
}

struct Hypothesis {
    TokenSeq tokens;
    double logprob = 0.0;
    std::unique_ptr<StepScorer> scorer;  // has consumed every token except the last
};

struct Candidate {
    double logprob;
    std::size_t parent;
    TokenId token;
};

double normalized(double logprob, std::size_t generated, double penalty) {
    return logprob / std::pow(static_cast<double>(std::max<std::size_t>(generated, 1)), penalty);
}

Decoded beam(std::unique_ptr<StepScorer> scorer, const DecodeConfig& config, const DecodeTokens& tok) {
    const auto width = static_cast<std::size_t>(config.width);
    std::vector<Hypothesis> alive;
    alive.push_back({{tok.bos}, 0.0, std::move(scorer)});
    std::vector<Hypothesis> finished;

    const int steps = config.max_len - 1;
    for (int step = 0; step < steps && !alive.empty(); ++step) {
        std::vector<Candidate> cands;
        for (std::size_t i = 0; i < alive.size(); ++i) {
            auto lp = alive[i].scorer->push(alive[i].tokens.back());
            log_softmax_inplace(lp);
            for (std::size_t j = 0; j < lp.size(); ++j) {
                cands.push_back({alive[i].logprob + lp[j], i, static_cast<TokenId>(j)});
            }
        }
        const std::size_t keep = std::min(width, cands.size());
        std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                          [](const Candidate& x, const Candidate& y) {
                              if (x.logprob != y.logprob) return x.logprob > y.logprob;
                              if (x.parent != y.parent) return x.parent < y.parent;
                              return x.token < y.token;
                          });
        std::vector<Hypothesis> next;
        for (std::size_t c = 0; c < keep; ++c) {
            const Candidate& cand = cands[c];
            const Hypothesis& parent = alive[cand.parent];
            Hypothesis h;
            h.tokens = parent.tokens;
            h.logprob = cand.logprob;
            if (cand.token == tok.eos) {
                h.tokens.push_back(tok.eos);
                finished.push_back(std::move(h));
                continue;
            }
            h.tokens.push_back(apply_fold(tok, cand.token));
            h.scorer = parent.scorer->clone();
            next.push_back(std::move(h));
        }
        alive = std::move(next);
    }

    const std::vector<Hypothesis>& pool = finished.empty() ? alive : finished;
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double s = normalized(pool[i].logprob, pool[i].tokens.size() - 1, config.length_penalty);
        if (s > best_score) {
            best_score = s;
            best = i;
        }
    }
    Decoded out;
    out.tokens = pool[best].tokens;
    out.logprob = pool[best].logprob;
    out.truncated = finished.empty();
    return out;
}

}  // namespace

Decoded decode(std::unique_ptr<StepScorer> scorer, const DecodeConfig& config, const DecodeTokens& tokens) {
    config.validate();
    if (config.mode == DecodeConfig::Mode::greedy) {
        return greedy(std::move(scorer), config, tokens);
    }
    return beam(std::move(scorer), config, tokens);
}

Decoded decode(const Parameters& params, const FeatureVec& features, const DecodeConfig& config,
               const Vocabulary* vocab) {
    config.validate(params.config.max_len);
    DecodeTokens tok;
    if (vocab) {
        tok.bos = vocab->specials().bos;
        tok.eos = vocab->specials().eos;
        tok.fold = [vocab](TokenId id) { return vocab->canonical(id); };
    }
    return decode(std::make_unique<ModelScorer>(params, features), config, tok);
}

}  // namespace smile
