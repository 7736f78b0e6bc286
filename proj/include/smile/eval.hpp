#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "smile/corpus.hpp"
#include "smile/decoder.hpp"
#include "smile/model.hpp"
#include "smile/objectives.hpp"

namespace smile {

/// Words counted by length and diversity: every token except specials.
/// Alias tokens are folded to their source word first.
std::vector<std::string> content_words(const TokenSeq& caption, const Vocabulary& vocab);

struct PoolEntry {
    int scene_id = 0;
    FeatureVec features;
};

struct RetrievalPool {
    std::vector<PoolEntry> entries;
    std::vector<PoolEntry> hard_distractors;

    /// Throws std::invalid_argument on duplicate ids across entries and distractors.
    void validate() const;
};

/// First id handed to synthetic distractors; real scene ids must stay below it.
inline constexpr int kDistractorIdBase = 1'000'000;

/// One distractor per entry (up to `count`): the entry's scene with exactly one
/// attribute swapped for another attribute of the same class.
std::vector<PoolEntry> make_hard_distractors(const std::vector<PoolEntry>& entries, const ConceptInventory& concepts,
                                             std::size_t count, std::uint64_t seed);

struct RetrievalResult {
    double r_at_1 = 0.0;
    double r_at_5 = 0.0;
    std::vector<std::size_t> ranks;  // 1-based rank of each caption's true scene
};

struct ScoredCaption {
    int scene_id = 0;
    TokenSeq caption;
};

/// Concept-count vector of a caption (non-concept tokens ignored).
std::vector<double> concept_bag(const TokenSeq& caption, const Vocabulary& vocab, const ConceptInventory& concepts);

double cosine(const std::vector<double>& bag, const FeatureVec& features);

/// Ranks pool entries by cosine(caption bag, features), ties by ascending scene id.
/// A caption without any concept word matches nothing and ranks last.
/// Throws std::invalid_argument if a caption's scene is not in the pool.
RetrievalResult self_retrieval(const std::vector<ScoredCaption>& captions, const RetrievalPool& pool,
                               const Vocabulary& vocab, const ConceptInventory& concepts);

/// Add-one smoothed bigram model over folded token ids, BOS/EOS included.
class BigramModel {
public:
    BigramModel(std::size_t vocab_size, const Vocabulary* vocab = nullptr);
    void fit(const std::vector<TokenSeq>& captions);
    double log_prob(TokenId prev, TokenId next) const;
    /// exp of the mean negative log-probability per predicted token.
    double perplexity(const std::vector<TokenSeq>& captions) const;

private:
    TokenId fold(TokenId id) const { return vocab_ ? vocab_->canonical(id) : id; }

    std::size_t vocab_size_;
    const Vocabulary* vocab_;
    std::map<std::pair<TokenId, TokenId>, double> pair_counts_;
    std::map<TokenId, double> prev_counts_;
};

struct EvalReport {
    double mean_caption_length = 0.0;
    std::size_t lexical_diversity = 0;
    double r_at_1 = 0.0;
    double r_at_5 = 0.0;
    double oracle_precision = 0.0;
    double ppl_proxy = 0.0;
    std::size_t captions = 0;
    std::size_t truncated = 0;
};

nlohmann::json to_json(const EvalReport& r);
std::string eval_csv_header();
std::string to_csv_row(const EvalReport& r);

double mean_caption_length(const std::vector<TokenSeq>& captions, const Vocabulary& vocab);
std::size_t lexical_diversity(const std::vector<TokenSeq>& captions, const Vocabulary& vocab);

/// Fraction of concept words, over all captions, whose bit is set in their scene.
/// Returns 1 when no caption contains a concept word.
double oracle_precision(const std::vector<ScoredCaption>& captions, const std::map<int, FeatureVec>& scenes,
                        const Vocabulary& vocab, const ConceptInventory& concepts);

/// Metrics of already generated captions. `reference` feeds the bigram proxy.
EvalReport evaluate_captions(const std::vector<ScoredCaption>& captions, const RetrievalPool& pool,
                             const std::vector<TokenSeq>& reference, const Vocabulary& vocab,
                             const ConceptInventory& concepts);

/// One scene per distinct scene id in `samples`, in ascending id order.
RetrievalPool pool_from_samples(const std::vector<Sample>& samples);

/// Decodes one caption per pool entry and scores them; the ground-truth captions of
/// `samples` are the bigram reference.
EvalReport descriptiveness_report(const Parameters& params, const std::vector<Sample>& samples,
                                  const RetrievalPool& pool, const DecodeConfig& decode_config,
                                  const Vocabulary& vocab, const ConceptInventory& concepts,
                                  std::vector<ScoredCaption>* generated = nullptr);

/// Per-position record for one sequence (batch row 0): top-5 full and admitted
/// probabilities plus both losses. Schema "viz_v1".
nlohmann::json export_token_viz(const LogitsBatch& logits, const LabelBatch& labels, const SubsetMask& mask,
                                const Vocabulary& vocab);

}  // namespace smile
