#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <json.hpp>

#include "smile/corpus.hpp"
#include "smile/model.hpp"

namespace smile {

struct DecodeConfig {
    enum class Mode { greedy, beam };

    Mode mode = Mode::beam;
    int width = 3;
    int max_len = 32;  // caption tokens including BOS and EOS
    double length_penalty = 1.0;

    /// Throws std::invalid_argument; model_max_len = 0 skips the model bound check.
    void validate(int model_max_len = 0) const;
    bool operator==(const DecodeConfig&) const = default;
};

nlohmann::json to_json(const DecodeConfig& c);
DecodeConfig decode_config_from_json(const nlohmann::json& j);

struct Decoded {
    TokenSeq tokens;        // BOS ... EOS (no EOS when truncated)
    double logprob = 0.0;   // sum over generated tokens
    bool truncated = false; // hit max_len without emitting EOS
};

/// Next-token scorer for a single running sequence. Implementations must be
/// cheap to clone since beam search forks them.
class StepScorer {
public:
    virtual ~StepScorer() = default;
    virtual std::unique_ptr<StepScorer> clone() const = 0;
    /// Consumes a token, returns logits for the next one.
    virtual std::vector<double> push(TokenId token) = 0;
};

class ModelScorer : public StepScorer {
public:
    ModelScorer(const Parameters& params, const FeatureVec& features) : state_(params, features) {}
    std::unique_ptr<StepScorer> clone() const override { return std::make_unique<ModelScorer>(*this); }
    std::vector<double> push(TokenId token) override { return state_.push(token); }

private:
    IncrementalState state_;
};

struct DecodeTokens {
    TokenId bos = SpecialIds{}.bos;
    TokenId eos = SpecialIds{}.eos;
    /// Applied to every emitted token before it is recorded and fed back.
    std::function<TokenId(TokenId)> fold;
};

/// Generic search over a scorer; `scorer` is consumed.
Decoded decode(std::unique_ptr<StepScorer> scorer, const DecodeConfig& config, const DecodeTokens& tokens);

/// Decodes over the full vocabulary. Emitted alias tokens are folded to their
/// source word when a vocabulary is given.
Decoded decode(const Parameters& params, const FeatureVec& features, const DecodeConfig& config,
               const Vocabulary* vocab = nullptr);

}  // namespace smile
