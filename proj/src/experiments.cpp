#include "smile/experiments.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace smile {

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"subsetting_compare", "absorption", "lambda_sweep", "icr_ablation"};
    return names;
}

ExperimentPreset make_preset(const std::string& name, std::uint64_t seed) {
    if (std::find(preset_names().begin(), preset_names().end(), name) == preset_names().end()) {
        throw std::invalid_argument("unknown experiment preset '" + name + "'");
    }
    ExperimentPreset p;
    p.name = name;
    p.corpus.seed = seed;
    p.corpus.n_scenes = 5000;
    p.corpus.paraphrases = 4;
    p.model.d_model = 32;
    p.model.seed = seed + 1;

    p.stage1.objective = Objective::mle;
    p.stage1.epochs = 40;
    p.stage1.learning_rate = 1e-3;
    p.stage1.patience = 5;
    p.stage1.checkpoint_metric = CheckpointMetric::val_loss;
    p.stage1.track_generation = false;
    p.stage1.seed = seed + 2;

    p.further.epochs = 3;
    p.further.learning_rate = 1e-4;
    p.further.checkpoint_metric = CheckpointMetric::val_retrieval_r1;
    p.further.seed = seed + 3;
    return p;
}

nlohmann::json to_json(const ExperimentPreset& p) {
    return {{"name", p.name},
            {"corpus", to_json(p.corpus)},
            {"model", to_json(p.model)},
            {"stage1", to_json(p.stage1)},
            {"further", to_json(p.further)},
            {"lambdas", p.lambdas}};
}

ExperimentPreset preset_from_json(const nlohmann::json& j) {
    ExperimentPreset p = make_preset(j.at("name").get<std::string>(), j.value("seed", std::uint64_t{0}));
    if (j.contains("corpus")) p.corpus = corpus_config_from_json(j.at("corpus"));
    if (j.contains("model")) {
        // vocab/feature sizes come from the corpus, so only the shape knobs are read here.
        const auto& m = j.at("model");
        p.model.d_model = m.value("d_model", p.model.d_model);
        p.model.n_layers = m.value("n_layers", p.model.n_layers);
        p.model.n_heads = m.value("n_heads", p.model.n_heads);
        p.model.max_len = m.value("max_len", p.model.max_len);
        p.model.seed = m.value("seed", p.model.seed);
    }
    if (j.contains("stage1")) p.stage1 = train_config_from_json(j.at("stage1"), p.stage1);
    if (j.contains("further")) p.further = train_config_from_json(j.at("further"), p.further);
    if (j.contains("lambdas")) p.lambdas = j.at("lambdas").get<std::vector<double>>();
    return p;
}

CorpusConfig corpus_for_mode(CorpusConfig base, CorpusMode mode) {
    base.mode = mode;
    if (mode == CorpusMode::simplest) {
        base.detail_distribution = {1.0, 0.0, 0.0, 0.0};
    } else if (mode == CorpusMode::simpler) {
        base.detail_distribution = {0.0, 1.0, 0.0, 0.0};
    }
    return base;
}

StageOne run_stage_one(const CorpusConfig& corpus, const ModelConfig& model, const TrainConfig& stage1,
                       const EpochCallback& on_epoch) {
    StageOne s;
    s.corpus = generate_corpus(corpus);
    ModelConfig mc = model;
    mc.vocab_size = static_cast<int>(s.corpus.vocab.size());
    mc.feature_dim = static_cast<int>(s.corpus.concepts.size());
    TrainConfig cfg = stage1;
    if (cfg.objective != Objective::mle) {
        throw std::invalid_argument("stage one must train with the mle objective");
    }
    if (cfg.patience == 0) cfg.patience = 3;
    s.result = train(init_parameters(mc), s.corpus, cfg, on_epoch);
    std::vector<TokenSeq> refs;
    for (const auto& x : split_corpus(s.corpus.samples).val) refs.push_back(x.caption);
    s.ground_truth_length = mean_caption_length(refs, s.corpus.vocab);
    return s;
}

const ArmResult& ExperimentResult::arm(const std::string& arm_name) const {
    for (const auto& a : arms) {
        if (a.arm == arm_name) return a;
    }
    throw std::out_of_range("no arm named '" + arm_name + "' in " + name);
}

namespace {

std::string number(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

struct ArmSpec {
    std::string name;
    TrainConfig config;
};

std::vector<ArmSpec> arms_for(const ExperimentPreset& p) {
    std::vector<ArmSpec> out;
    auto with = [&](const std::string& name, Objective o, FirstToken f = FirstToken::mle, double lambda = 0.5) {
        TrainConfig c = p.further;
        c.objective = o;
        c.first_token = f;
        c.lambda = lambda;
        out.push_back({name, c});
    };
    if (p.name == "subsetting_compare") {
        with("mle", Objective::mle);
        with("smile", Objective::smile);
        with("reverse", Objective::reverse);
        with("random", Objective::random);
    } else if (p.name == "lambda_sweep") {
        for (double l : p.lambdas) with("lambda_" + number(l), Objective::mixed, FirstToken::mle, l);
    } else if (p.name == "icr_ablation") {
        with("none", Objective::smile, FirstToken::none);
        with("mle", Objective::smile, FirstToken::mle);
        with("shift", Objective::smile, FirstToken::shift);
    } else if (p.name == "absorption") {
        with("smile", Objective::smile);
    }
    return out;
}

EpochCallback epoch_logger(const Logger& log, const std::string& tag) {
    if (!log) return {};
    return [log, tag](const EpochMetrics& e) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(4) << tag << " epoch " << e.epoch << " val_loss " << e.val_loss;
        if (e.evaluated) {
            os << " len " << e.eval.mean_caption_length << " r@1 " << e.eval.r_at_1;
        }
        log(os.str());
    };
}

}  // namespace

ExperimentResult run_experiment(const ExperimentPreset& preset, const StageOne* shared, const Logger& log) {
    ExperimentResult res;
    res.name = preset.name;
    std::vector<CorpusMode> modes{preset.corpus.mode};
    if (preset.name == "absorption") {
        modes = {CorpusMode::simplest, CorpusMode::simpler};
        shared = nullptr;
    }
    for (CorpusMode mode : modes) {
        StageOne own;
        const StageOne* s1 = shared;
        if (!s1) {
            own = run_stage_one(corpus_for_mode(preset.corpus, mode), preset.model, preset.stage1,
                                epoch_logger(log, "stage1/" + to_string(mode)));
            s1 = &own;
        }
        res.stage1.emplace_back(mode, s1->result.metrics);
        for (const auto& spec : arms_for(preset)) {
            ArmResult a;
            a.arm = preset.name == "absorption" ? to_string(mode) : spec.name;
            a.mode = mode;
            a.config = spec.config;
            a.ground_truth_length = s1->ground_truth_length;
            a.metrics = train(s1->result.best, s1->corpus, spec.config, epoch_logger(log, a.arm)).metrics;
            res.arms.push_back(std::move(a));
        }
    }
    return res;
}

std::string summary_csv_header() {
    return "experiment,arm,corpus_mode,objective,first_token,lambda,epochs,mean_caption_length,lexical_diversity,"
           "r_at_1,r_at_5,oracle_precision,ppl_proxy,best_epoch,best_r_at_1,baseline_length,baseline_r_at_1,"
           "ground_truth_length";
}

std::string summary_csv(const ExperimentResult& r) {
    std::ostringstream os;
    os << summary_csv_header() << '\n' << std::setprecision(17);
    for (const auto& a : r.arms) {
        const auto& f = a.final_epoch().eval;
        os << r.name << ',' << a.arm << ',' << to_string(a.mode) << ',' << to_string(a.config.objective) << ','
           << to_string(a.config.first_token) << ',' << (a.config.objective == Objective::mixed ? a.config.lambda : 0.0)
           << ',' << a.final_epoch().epoch << ',' << f.mean_caption_length << ',' << f.lexical_diversity << ','
           << f.r_at_1 << ',' << f.r_at_5 << ',' << f.oracle_precision << ',' << f.ppl_proxy << ','
           << a.metrics.best_epoch << ',' << a.best().eval.r_at_1 << ',' << a.baseline().eval.mean_caption_length
           << ',' << a.baseline().eval.r_at_1 << ',' << a.ground_truth_length << '\n';
    }
    return os.str();
}

void write_experiment(const std::filesystem::path& dir, const ExperimentResult& r) {
    std::filesystem::create_directories(dir);
    auto put = [&](const std::string& file, const std::string& text) {
        std::ofstream out(dir / file, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir / file).string());
        out << text;
    };
    put("summary.csv", summary_csv(r));
    for (const auto& [mode, m] : r.stage1) put("stage1_" + to_string(mode) + ".csv", to_csv(m));
    for (const auto& a : r.arms) put(a.arm + ".csv", to_csv(a.metrics));
}

}  // namespace smile
