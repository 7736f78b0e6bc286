#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smile/corpus.hpp"
#include "smile/model.hpp"
#include "smile/trainer.hpp"

namespace smile {

/// Bundled configuration for one of the comparison experiments.
struct ExperimentPreset {
    std::string name;  // subsetting_compare | absorption | lambda_sweep | icr_ablation
    CorpusConfig corpus;
    ModelConfig model;     // vocab_size / feature_dim are filled from the corpus
    TrainConfig stage1;    // mle with plateau stopping
    TrainConfig further;   // template for every arm
    std::vector<double> lambdas{1.0, 0.5, 0.1, 0.05, 0.01, 0.0};
};

const std::vector<std::string>& preset_names();
/// Throws std::invalid_argument for unknown names.
ExperimentPreset make_preset(const std::string& name, std::uint64_t seed = 0);

nlohmann::json to_json(const ExperimentPreset& p);
/// Missing keys fall back to make_preset(name, seed).
ExperimentPreset preset_from_json(const nlohmann::json& j);

/// Corpus configuration for a mode with the matching detail distribution.
CorpusConfig corpus_for_mode(CorpusConfig base, CorpusMode mode);

struct StageOne {
    Corpus corpus;
    TrainResult result;
    double ground_truth_length = 0.0;  // mean content words of validation references
};

StageOne run_stage_one(const CorpusConfig& corpus, const ModelConfig& model, const TrainConfig& stage1,
                       const EpochCallback& on_epoch = {});

struct ArmResult {
    std::string arm;
    CorpusMode mode = CorpusMode::full;
    TrainConfig config;
    RunMetrics metrics;
    double ground_truth_length = 0.0;

    const EpochMetrics& baseline() const { return metrics.epochs.front(); }
    const EpochMetrics& final_epoch() const { return metrics.epochs.back(); }
    const EpochMetrics& best() const { return metrics.epochs.at(static_cast<std::size_t>(metrics.best_epoch)); }
};

struct ExperimentResult {
    std::string name;
    std::vector<ArmResult> arms;
    std::vector<std::pair<CorpusMode, RunMetrics>> stage1;

    const ArmResult& arm(const std::string& name) const;
};

using Logger = std::function<void(const std::string&)>;

/// Runs every arm. `shared` lets callers reuse a stage-one run on the preset's own
/// corpus (ignored by absorption, which trains on two derived corpora).
ExperimentResult run_experiment(const ExperimentPreset& preset, const StageOne* shared = nullptr,
                                const Logger& log = {});

/// One row per arm, final-epoch metrics plus baseline and best-checkpoint columns.
std::string summary_csv_header();
std::string summary_csv(const ExperimentResult& r);

/// Writes summary.csv, stage1_<mode>.csv and one <arm>.csv per arm into `dir`.
void write_experiment(const std::filesystem::path& dir, const ExperimentResult& r);

}  // namespace smile
