#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smile/corpus.hpp"
#include "smile/decoder.hpp"
#include "smile/eval.hpp"
#include "smile/model.hpp"
#include "smile/objectives.hpp"

namespace smile {

enum class Objective { mle, smile, reverse, random, mixed };
enum class OptimizerKind { sgd, adam };
enum class CheckpointMetric { val_retrieval_r1, val_loss };

std::string to_string(Objective o);
Objective parse_objective(const std::string& s);
std::string to_string(CheckpointMetric m);
CheckpointMetric parse_checkpoint_metric(const std::string& s);

struct TrainConfig {
    Objective objective = Objective::mle;
    double lambda = 0.5;  // weight of the full-vocabulary term, mixed only
    FirstToken first_token = FirstToken::mle;
    int epochs = 10;
    int batch_size = 32;
    double learning_rate = 3e-4;
    /// Epoch e trains at learning_rate * lr_decay^(e-1).
    double lr_decay = 1.0;
    OptimizerKind optimizer = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    CheckpointMetric checkpoint_metric = CheckpointMetric::val_retrieval_r1;
    double clip_norm = 5.0;  // <= 0 disables clipping
    int random_k = 10;
    /// Stop once val loss fails to improve by plateau_tolerance (relative) and by
    /// plateau_min_delta (absolute) for this many consecutive epochs. 0 disables
    /// early stopping.
    int patience = 0;
    double plateau_tolerance = 0.01;
    double plateau_min_delta = 1e-3;
    /// Decode the validation scenes after every epoch. Forced on when the
    /// checkpoint metric needs it.
    bool track_generation = true;
    DecodeConfig decode;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep `base` values.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct EpochMetrics {
    int epoch = 0;            // 0 is the untrained starting point
    double train_loss = 0.0;  // NaN for epoch 0
    double val_loss = 0.0;
    bool evaluated = false;   // generation metrics present
    EvalReport eval;
};

struct RunMetrics {
    std::vector<EpochMetrics> epochs;
    int best_epoch = 0;
    bool aborted = false;
    std::string abort_reason;
};

std::string metrics_csv_header();
std::string to_csv(const RunMetrics& m);
void write_metrics_csv(const std::filesystem::path& path, const RunMetrics& m);

struct Split {
    std::vector<Sample> train;
    std::vector<Sample> val;
};

Split split_corpus(const std::vector<Sample>& samples);

struct TrainResult {
    Parameters best;
    Parameters last;
    RunMetrics metrics;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Teacher-forced training on the train split, model selection on the validation
/// split. Deterministic for a given (init, corpus, config). A non-finite loss stops
/// the run and returns the last good checkpoint with metrics.aborted set.
TrainResult train(const Parameters& init, const Corpus& corpus, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Mean validation loss under the config's objective (fixed mask draws).
double validation_loss(const Parameters& params, const std::vector<Sample>& val, const Vocabulary& vocab,
                       const TrainConfig& config);

struct TwoStageResult {
    TrainResult stage1;
    TrainResult stage2;
};

/// MLE until the val-loss plateau, then `further` starting from the stage-one checkpoint.
/// Throws std::invalid_argument unless base.objective is mle.
TwoStageResult two_stage(const Parameters& init, const Corpus& corpus, TrainConfig base, const TrainConfig& further,
                         const EpochCallback& on_epoch = {});

}  // namespace smile
