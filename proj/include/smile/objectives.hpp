#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "smile/corpus.hpp"
#include "smile/model.hpp"

namespace smile {

/// Which tokens take part in the softmax normalization at each position.
enum class SubsetStrategy {
    full,     // whole vocabulary (plain MLE)
    smile,    // unique tokens of the target sequence
    reverse,  // complement of the target token set, plus the current label
    random,   // K random tokens per sequence, plus the current label
};

/// Treatment of the first predicted token (the one right after BOS).
enum class FirstToken { none, mle, shift };

std::string to_string(SubsetStrategy s);
SubsetStrategy parse_subset_strategy(const std::string& s);
std::string to_string(FirstToken f);
FirstToken parse_first_token(const std::string& s);

/// Target ids, batch x positions, right-padded with PAD. Row t is the label for logits row t.
struct LabelBatch {
    std::size_t batch = 0;
    std::size_t positions = 0;
    std::vector<TokenId> ids;
    TokenId pad = SpecialIds{}.pad;

    LabelBatch() = default;
    LabelBatch(std::size_t b, std::size_t t, TokenId pad_id = SpecialIds{}.pad)
        : batch(b), positions(t), ids(b * t, pad_id), pad(pad_id) {}

    TokenId& at(std::size_t b, std::size_t t) { return ids[b * positions + t]; }
    TokenId at(std::size_t b, std::size_t t) const { return ids[b * positions + t]; }
};

/// Inputs (BOS .. w_{n-1}) and next-token labels (w_1 .. EOS) for teacher forcing.
struct TeacherBatch {
    std::vector<FeatureVec> features;
    std::vector<TokenSeq> inputs;
    LabelBatch labels;
};

TeacherBatch make_teacher_batch(const std::vector<const Sample*>& samples);

/// Per-position admission mask over the vocabulary.
struct SubsetMask {
    std::size_t batch = 0;
    std::size_t positions = 0;
    std::size_t vocab = 0;
    std::vector<std::uint8_t> admit;  // batch x positions x vocab
    SubsetStrategy strategy = SubsetStrategy::full;
    FirstToken first_token = FirstToken::none;

    bool admits(std::size_t b, std::size_t t, TokenId j) const {
        return admit[(b * positions + t) * vocab + static_cast<std::size_t>(j)] != 0;
    }
    std::span<const std::uint8_t> row(std::size_t b, std::size_t t) const {
        return {admit.data() + (b * positions + t) * vocab, vocab};
    }
};

/// Builds the admission mask. PAD positions admit everything. With first_token=mle
/// row 0 admits the full vocabulary. random_k tokens are redrawn for every sequence
/// on every call (non-PAD ids only).
SubsetMask build_mask(const LabelBatch& labels, std::size_t vocab_size, SubsetStrategy strategy,
                      FirstToken first_token, std::mt19937_64& rng, int random_k = 10);

struct LossReport {
    double total = 0.0;                // mean over non-PAD positions
    std::size_t count = 0;             // number of non-PAD positions
    std::vector<double> per_token;     // batch x positions, 0 at PAD
    std::vector<double> label_prob;    // probability given to the label under the loss's softmax
    LogitsBatch grad;                  // d total / d logits
};

/// Cross-entropy over the full vocabulary. Throws std::domain_error on non-finite logits.
LossReport mle_loss(const LogitsBatch& logits, const LabelBatch& labels);

/// Cross-entropy with the softmax restricted to admitted tokens; non-admitted logits
/// get exactly zero gradient. Throws std::invalid_argument if a label is not admitted.
LossReport smile_loss(const LogitsBatch& logits, const LabelBatch& labels, const SubsetMask& mask);

/// lambda * MLE + (1 - lambda) * restricted loss. Throws std::invalid_argument unless 0 <= lambda <= 1.
LossReport mixed_loss(const LogitsBatch& logits, const LabelBatch& labels, const SubsetMask& mask, double lambda);

struct ShiftResult {
    LabelBatch labels;
    std::vector<bool> unshifted;  // per sequence: first label had no alias and was left as is
};

/// Replaces each sequence's first label with its rare alias when one exists.
ShiftResult apply_first_token_shift(const LabelBatch& labels, const Vocabulary& vocab);

}  // namespace smile
