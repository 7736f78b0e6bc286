#include "smile/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace smile {

std::vector<std::string> content_words(const TokenSeq& caption, const Vocabulary& vocab) {
    std::vector<std::string> out;
    for (TokenId id : caption) {
        const TokenId c = vocab.canonical(id);
        if (!vocab.is_special(c)) {
            out.push_back(vocab.token(c));
        }
    }
    return out;
}

void RetrievalPool::validate() const {
    std::set<int> seen;
    for (const auto* list : {&entries, &hard_distractors}) {
        for (const auto& e : *list) {
            if (!seen.insert(e.scene_id).second) {
                throw std::invalid_argument("duplicate scene id " + std::to_string(e.scene_id) + " in retrieval pool");
            }
        }
    }
}

std::vector<PoolEntry> make_hard_distractors(const std::vector<PoolEntry>& entries, const ConceptInventory& concepts,
                                             std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<PoolEntry> out;
    const std::size_t subj_lo = concepts.adjective_begin();
    const std::size_t obj_lo = concepts.object_adjective_begin();
    const std::size_t obj_hi = concepts.verb_begin();
    for (std::size_t i = 0; i < entries.size() && out.size() < count; ++i) {
        const FeatureVec& f = entries[i].features;
        std::vector<std::size_t> set_bits;
        for (std::size_t b = subj_lo; b < obj_hi; ++b) {
            if (f.at(b)) set_bits.push_back(b);
        }
        if (set_bits.empty()) {
            continue;
        }
        std::uniform_int_distribution<std::size_t> pick_set(0, set_bits.size() - 1);
        const std::size_t old_bit = set_bits[pick_set(rng)];
        const auto [lo, hi] = old_bit < obj_lo ? std::pair{subj_lo, obj_lo} : std::pair{obj_lo, obj_hi};
        std::vector<std::size_t> free_bits;
        for (std::size_t b = lo; b < hi; ++b) {
            if (!f[b]) free_bits.push_back(b);
        }
        if (free_bits.empty()) {
            continue;
        }
        std::uniform_int_distribution<std::size_t> pick_free(0, free_bits.size() - 1);
        PoolEntry d{kDistractorIdBase + static_cast<int>(out.size()), f};
        d.features[old_bit] = 0;
        d.features[free_bits[pick_free(rng)]] = 1;
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<double> concept_bag(const TokenSeq& caption, const Vocabulary& vocab, const ConceptInventory& concepts) {
    std::vector<double> bag(concepts.size(), 0.0);
    for (TokenId id : caption) {
        if (auto c = concept_of(id, vocab, concepts)) {
            bag[static_cast<std::size_t>(*c)] += 1.0;
        }
    }
    return bag;
}

double cosine(const std::vector<double>& bag, const FeatureVec& features) {
    if (bag.size() != features.size()) {
        throw std::invalid_argument("concept bag and feature vector sizes differ");
    }
    double num = 0.0, nb = 0.0, nf = 0.0;
    for (std::size_t i = 0; i < bag.size(); ++i) {
        const double f = features[i];
        num += bag[i] * f;
        nb += bag[i] * bag[i];
        nf += f * f;
    }
    if (nb == 0.0 || nf == 0.0) {
        return 0.0;
    }
    return num / (std::sqrt(nb) * std::sqrt(nf));
}

RetrievalResult self_retrieval(const std::vector<ScoredCaption>& captions, const RetrievalPool& pool,
                               const Vocabulary& vocab, const ConceptInventory& concepts) {
    std::vector<const PoolEntry*> all;
    for (const auto& e : pool.entries) all.push_back(&e);
    for (const auto& e : pool.hard_distractors) all.push_back(&e);

    RetrievalResult res;
    std::size_t hit1 = 0, hit5 = 0;
    for (const auto& cap : captions) {
        auto truth = std::find_if(pool.entries.begin(), pool.entries.end(),
                                  [&](const PoolEntry& e) { return e.scene_id == cap.scene_id; });
        if (truth == pool.entries.end()) {
            throw std::invalid_argument("caption scene " + std::to_string(cap.scene_id) + " is not in the pool");
        }
        const auto bag = concept_bag(cap.caption, vocab, concepts);
        std::size_t rank = all.size();
        if (std::any_of(bag.begin(), bag.end(), [](double v) { return v != 0.0; })) {
            const double own = cosine(bag, truth->features);
            rank = 1;
            for (const PoolEntry* e : all) {
                if (e->scene_id == cap.scene_id) continue;
                const double s = cosine(bag, e->features);
                if (s > own || (s == own && e->scene_id < cap.scene_id)) ++rank;
            }
        }
        res.ranks.push_back(rank);
        hit1 += rank <= 1;
        hit5 += rank <= 5;
    }
    if (!captions.empty()) {
        res.r_at_1 = static_cast<double>(hit1) / static_cast<double>(captions.size());
        res.r_at_5 = static_cast<double>(hit5) / static_cast<double>(captions.size());
    }
    return res;
}

BigramModel::BigramModel(std::size_t vocab_size, const Vocabulary* vocab) : vocab_size_(vocab_size), vocab_(vocab) {}

void BigramModel::fit(const std::vector<TokenSeq>& captions) {
    for (const auto& c : captions) {
        for (std::size_t i = 1; i < c.size(); ++i) {
            const TokenId a = fold(c[i - 1]);
            pair_counts_[{a, fold(c[i])}] += 1.0;
            prev_counts_[a] += 1.0;
        }
    }
}

double BigramModel::log_prob(TokenId prev, TokenId next) const {
    const TokenId a = fold(prev), b = fold(next);
    auto pc = pair_counts_.find({a, b});
    auto uc = prev_counts_.find(a);
    const double num = 1.0 + (pc == pair_counts_.end() ? 0.0 : pc->second);
    const double den = static_cast<double>(vocab_size_) + (uc == prev_counts_.end() ? 0.0 : uc->second);
    return std::log(num / den);
}

double BigramModel::perplexity(const std::vector<TokenSeq>& captions) const {
    double nll = 0.0;
    std::size_t n = 0;
    for (const auto& c : captions) {
        for (std::size_t i = 1; i < c.size(); ++i) {
            nll -= log_prob(c[i - 1], c[i]);
            ++n;
        }
    }
    return n == 0 ? 1.0 : std::exp(nll / static_cast<double>(n));
}

nlohmann::json to_json(const EvalReport& r) {
    return {{"mean_caption_length", r.mean_caption_length},
            {"lexical_diversity", r.lexical_diversity},
            {"r_at_1", r.r_at_1},
            {"r_at_5", r.r_at_5},
            {"oracle_precision", r.oracle_precision},
            {"ppl_proxy", r.ppl_proxy},
            {"captions", r.captions},
            {"truncated", r.truncated}};
}

std::string eval_csv_header() {
    return "mean_caption_length,lexical_diversity,r_at_1,r_at_5,oracle_precision,ppl_proxy,captions,truncated";
}

std::string to_csv_row(const EvalReport& r) {
    std::ostringstream os;
    os << std::setprecision(17) << r.mean_caption_length << ',' << r.lexical_diversity << ',' << r.r_at_1 << ','
       << r.r_at_5 << ',' << r.oracle_precision << ',' << r.ppl_proxy << ',' << r.captions << ',' << r.truncated;
    return os.str();
}

double mean_caption_length(const std::vector<TokenSeq>& captions, const Vocabulary& vocab) {
    if (captions.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& c : captions) {
        total += static_cast<double>(content_words(c, vocab).size());
    }
    return total / static_cast<double>(captions.size());
}

std::size_t lexical_diversity(const std::vector<TokenSeq>& captions, const Vocabulary& vocab) {
    std::set<std::string> words;
    for (const auto& c : captions) {
        for (auto& w : content_words(c, vocab)) words.insert(std::move(w));
    }
    return words.size();
}

double oracle_precision(const std::vector<ScoredCaption>& captions, const std::map<int, FeatureVec>& scenes,
                        const Vocabulary& vocab, const ConceptInventory& concepts) {
    std::size_t hits = 0, total = 0;
    for (const auto& cap : captions) {
        const FeatureVec& f = scenes.at(cap.scene_id);
        for (TokenId id : cap.caption) {
            if (auto c = concept_of(id, vocab, concepts)) {
                ++total;
                hits += f.at(static_cast<std::size_t>(*c)) != 0;
            }
        }
    }
    return total == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(total);
}

EvalReport evaluate_captions(const std::vector<ScoredCaption>& captions, const RetrievalPool& pool,
                             const std::vector<TokenSeq>& reference, const Vocabulary& vocab,
                             const ConceptInventory& concepts) {
    std::vector<TokenSeq> texts;
    for (const auto& c : captions) texts.push_back(c.caption);
    std::map<int, FeatureVec> scenes;
    for (const auto& e : pool.entries) scenes[e.scene_id] = e.features;

    EvalReport r;
    r.captions = captions.size();
    r.mean_caption_length = mean_caption_length(texts, vocab);
    r.lexical_diversity = lexical_diversity(texts, vocab);
    const auto ret = self_retrieval(captions, pool, vocab, concepts);
    r.r_at_1 = ret.r_at_1;
    r.r_at_5 = ret.r_at_5;
    r.oracle_precision = oracle_precision(captions, scenes, vocab, concepts);
    BigramModel bigram(vocab.size(), &vocab);
    bigram.fit(reference);
    r.ppl_proxy = bigram.perplexity(texts);
    return r;
}

RetrievalPool pool_from_samples(const std::vector<Sample>& samples) {
    std::map<int, FeatureVec> scenes;
    for (const auto& s : samples) scenes.emplace(s.scene_id, s.features);
    RetrievalPool pool;
    for (auto& [id, f] : scenes) pool.entries.push_back({id, f});
    return pool;
}

EvalReport descriptiveness_report(const Parameters& params, const std::vector<Sample>& samples,
                                  const RetrievalPool& pool, const DecodeConfig& decode_config,
                                  const Vocabulary& vocab, const ConceptInventory& concepts,
                                  std::vector<ScoredCaption>* generated) {
    std::vector<ScoredCaption> captions;
    std::size_t truncated = 0;
    for (const auto& e : pool.entries) {
        Decoded d = decode(params, e.features, decode_config, &vocab);
        truncated += d.truncated;
        captions.push_back({e.scene_id, std::move(d.tokens)});
    }
    std::vector<TokenSeq> reference;
    for (const auto& s : samples) reference.push_back(s.caption);
    EvalReport r = evaluate_captions(captions, pool, reference, vocab, concepts);
    r.truncated = truncated;
    if (generated) {
        *generated = std::move(captions);
    }
    return r;
}

namespace {

nlohmann::json top_k(std::span<const double> z, std::span<const std::uint8_t> admit, const Vocabulary& vocab,
                     std::size_t k) {
    // Softmax over admitted ids (all ids when admit is empty).
    std::vector<std::size_t> ids;
    for (std::size_t j = 0; j < z.size(); ++j) {
        if (admit.empty() || admit[j]) ids.push_back(j);
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (auto j : ids) mx = std::max(mx, z[j]);
    double s = 0.0;
    for (auto j : ids) s += std::exp(z[j] - mx);
    std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < std::min(k, ids.size()); ++i) {
        const auto j = ids[i];
        out.push_back({{"id", j}, {"token", vocab.token(static_cast<TokenId>(j))}, {"prob", std::exp(z[j] - mx) / s}});
    }
    return out;
}

}  // namespace

nlohmann::json export_token_viz(const LogitsBatch& logits, const LabelBatch& labels, const SubsetMask& mask,
                                const Vocabulary& vocab) {
    // Only the first sequence is exported.
    LogitsBatch one(1, logits.positions, logits.vocab);
    std::copy_n(logits.values.begin(), logits.positions * logits.vocab, one.values.begin());
    LabelBatch lab(1, labels.positions, labels.pad);
    std::copy_n(labels.ids.begin(), labels.positions, lab.ids.begin());
    SubsetMask m = mask;
    m.batch = 1;
    m.admit.assign(mask.admit.begin(), mask.admit.begin() + static_cast<std::ptrdiff_t>(mask.positions * mask.vocab));

    const LossReport full = mle_loss(one, lab);
    const LossReport sub = smile_loss(one, lab, m);

    nlohmann::json positions = nlohmann::json::array();
    for (std::size_t t = 0; t < lab.positions; ++t) {
        const TokenId y = lab.at(0, t);
        if (y == lab.pad) continue;
        const auto admit = m.row(0, t);
        std::size_t admitted = 0;
        for (auto a : admit) admitted += a != 0;
        positions.push_back({{"position", t},
                             {"label", y},
                             {"label_token", vocab.token(y)},
                             {"mle_loss", full.per_token[t]},
                             {"smile_loss", sub.per_token[t]},
                             {"admitted_count", admitted},
                             {"top_full", top_k(one.at(0, t), {}, vocab, 5)},
                             {"top_admitted", top_k(one.at(0, t), admit, vocab, 5)}});
    }
    return {{"schema", "viz_v1"},
            {"strategy", to_string(mask.strategy)},
            {"first_token", to_string(mask.first_token)},
            {"positions", std::move(positions)}};
}

}  // namespace smile
