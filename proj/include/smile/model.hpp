#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "smile/corpus.hpp"
#include "smile/tensor.hpp"

namespace smile {

struct ModelConfig {
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int max_len = 32;  // longest caption including BOS and EOS
    int vocab_size = 0;
    int feature_dim = 0;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct BlockParams {
    Matrix ln1_g, ln1_b;
    Matrix w_qkv, b_qkv;    // d x 3d, 1 x 3d
    Matrix w_proj, b_proj;  // d x d
    Matrix ln2_g, ln2_b;
    Matrix w_ff1, b_ff1;    // d x 4d
    Matrix w_ff2, b_ff2;    // 4d x d

    bool operator==(const BlockParams&) const = default;
};

/// All trainable arrays. The same type doubles as a gradient container.
struct Parameters {
    ModelConfig config;
    Matrix tok_emb;  // vocab x d
    Matrix pos_emb;  // max_len x d; slot 0 is the feature slot
    Matrix feat_w;   // feature_dim x d
    Matrix feat_b;   // 1 x d
    std::vector<BlockParams> blocks;
    Matrix lnf_g, lnf_b;
    Matrix w_out;  // d x vocab
    Matrix b_out;  // 1 x vocab

    /// Allocates zero-filled arrays with the shapes implied by the config.
    static Parameters zeros(const ModelConfig& config);

    template <class F>
    void visit(F&& f) {
        visit_impl(*this, f);
    }
    template <class F>
    void visit(F&& f) const {
        visit_impl(*this, f);
    }

    std::size_t count() const;
    bool operator==(const Parameters&) const = default;

private:
    template <class Self, class F>
    static void visit_impl(Self& p, F& f) {
        f("tok_emb", p.tok_emb);
        f("pos_emb", p.pos_emb);
        f("feat_w", p.feat_w);
        f("feat_b", p.feat_b);
        for (std::size_t i = 0; i < p.blocks.size(); ++i) {
            auto& b = p.blocks[i];
            const std::string pre = "block" + std::to_string(i) + ".";
            f(pre + "ln1_g", b.ln1_g);
            f(pre + "ln1_b", b.ln1_b);
            f(pre + "w_qkv", b.w_qkv);
            f(pre + "b_qkv", b.b_qkv);
            f(pre + "w_proj", b.w_proj);
            f(pre + "b_proj", b.b_proj);
            f(pre + "ln2_g", b.ln2_g);
            f(pre + "ln2_b", b.ln2_b);
            f(pre + "w_ff1", b.w_ff1);
            f(pre + "b_ff1", b.b_ff1);
            f(pre + "w_ff2", b.w_ff2);
            f(pre + "b_ff2", b.b_ff2);
        }
        f("lnf_g", p.lnf_g);
        f("lnf_b", p.lnf_b);
        f("w_out", p.w_out);
        f("b_out", p.b_out);
    }
};

/// Closed-form parameter count for a config.
std::size_t parameter_count(const ModelConfig& config);

/// Weights ~ U(-s, s) with s = 1/sqrt(fan_in); embeddings use s = 0.1; residual
/// output projections are further scaled by 1/sqrt(2 * n_layers). LayerNorm gains
/// start at 1 and every bias at 0.
Parameters init_parameters(const ModelConfig& config);

/// Logits for a batch of ragged sequences, padded to the longest one.
/// Position t of sequence b scores the token that follows input token t.
struct LogitsBatch {
    std::size_t batch = 0;
    std::size_t positions = 0;
    std::size_t vocab = 0;
    std::vector<double> values;       // batch x positions x vocab
    std::vector<std::size_t> lengths; // valid positions per sequence

    LogitsBatch() = default;
    LogitsBatch(std::size_t b, std::size_t t, std::size_t v)
        : batch(b), positions(t), vocab(v), values(b * t * v, 0.0), lengths(b, t) {}

    std::span<double> at(std::size_t b, std::size_t t) { return {values.data() + (b * positions + t) * vocab, vocab}; }
    std::span<const double> at(std::size_t b, std::size_t t) const {
        return {values.data() + (b * positions + t) * vocab, vocab};
    }
};

/// Activations recorded by forward() and consumed by backward().
struct SequenceTape;
class Tape {
public:
    Tape();
    ~Tape();
    Tape(Tape&&) noexcept;
    Tape& operator=(Tape&&) noexcept;

    std::vector<SequenceTape>& sequences() { return *seqs_; }
    const std::vector<SequenceTape>& sequences() const { return *seqs_; }

private:
    std::unique_ptr<std::vector<SequenceTape>> seqs_;
};

/// inputs[b] holds BOS w1 .. w_{n-1}; trailing PAD tokens are treated as padding.
/// Throws std::invalid_argument on length overflow, bad ids or feature size mismatch.
LogitsBatch forward(const Parameters& params, const std::vector<FeatureVec>& features,
                    const std::vector<TokenSeq>& inputs, Tape* tape = nullptr);

/// Exact reverse-mode gradient of sum(upstream * logits) w.r.t. every parameter.
/// Positions past each sequence's length are ignored.
Parameters backward(const Parameters& params, const Tape& tape, const LogitsBatch& upstream);

/// KV-cached single-sequence evaluation used by the decoder. Produces the same
/// logits as forward() on the same prefix.
class IncrementalState {
public:
    IncrementalState(const Parameters& params, const FeatureVec& features);

    /// Appends a token and returns the logits for the token that follows it.
    std::vector<double> push(TokenId token);
    std::size_t slots() const { return slots_; }

private:
    std::vector<double> run_slot(std::vector<double> x);

    const Parameters* params_;
    std::vector<std::vector<double>> keys_;    // per layer, slots x d
    std::vector<std::vector<double>> values_;  // per layer, slots x d
    std::size_t slots_ = 0;
};

/// Binary checkpoint: magic, JSON header (config + array names/shapes), raw doubles.
void save_checkpoint(const std::filesystem::path& path, const Parameters& params);
Parameters load_checkpoint(const std::filesystem::path& path);

}  // namespace smile
