#include "smile/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace smile {

std::string to_string(Objective o) {
    switch (o) {
        case Objective::mle: return "mle";
        case Objective::smile: return "smile";
        case Objective::reverse: return "reverse";
        case Objective::random: return "random";
        case Objective::mixed: return "mixed";
    }
    return "mle";
}

Objective parse_objective(const std::string& s) {
    if (s == "mle") return Objective::mle;
    if (s == "smile") return Objective::smile;
    if (s == "reverse") return Objective::reverse;
    if (s == "random") return Objective::random;
    if (s == "mixed") return Objective::mixed;
    throw std::invalid_argument("unknown objective '" + s + "'");
}

std::string to_string(CheckpointMetric m) {
    return m == CheckpointMetric::val_loss ? "val_loss" : "val_retrieval_r1";
}

CheckpointMetric parse_checkpoint_metric(const std::string& s) {
    if (s == "val_loss") return CheckpointMetric::val_loss;
    if (s == "val_retrieval_r1") return CheckpointMetric::val_retrieval_r1;
    throw std::invalid_argument("unknown checkpoint metric '" + s + "'");
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("learning_rate must be a finite non-negative number");
    }
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw std::invalid_argument("lr_decay must lie in (0, 1]");
    if (objective == Objective::mixed && !(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("lambda must lie in [0, 1]");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0)) {
        throw std::invalid_argument("adam parameters out of range");
    }
    if (random_k < 0) throw std::invalid_argument("random_k must be >= 0");
    if (patience < 0) throw std::invalid_argument("patience must be >= 0");
    if (!(plateau_tolerance >= 0.0) || !(plateau_min_delta >= 0.0)) {
        throw std::invalid_argument("plateau thresholds must be >= 0");
    }
    decode.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"objective", to_string(c.objective)},
            {"lambda", c.lambda},
            {"first_token", to_string(c.first_token)},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"lr_decay", c.lr_decay},
            {"optimizer", c.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"eps", c.eps},
            {"seed", c.seed},
            {"checkpoint_metric", to_string(c.checkpoint_metric)},
            {"clip_norm", c.clip_norm},
            {"random_k", c.random_k},
            {"patience", c.patience},
            {"plateau_tolerance", c.plateau_tolerance},
            {"plateau_min_delta", c.plateau_min_delta},
            {"track_generation", c.track_generation},
            {"decode", to_json(c.decode)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    if (j.contains("objective")) c.objective = parse_objective(j.at("objective").get<std::string>());
    c.lambda = j.value("lambda", c.lambda);
    if (j.contains("first_token")) c.first_token = parse_first_token(j.at("first_token").get<std::string>());
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    if (j.contains("optimizer")) {
        const auto o = j.at("optimizer").get<std::string>();
        if (o == "adam") {
            c.optimizer = OptimizerKind::adam;
        } else if (o == "sgd") {
            c.optimizer = OptimizerKind::sgd;
        } else {
            throw std::invalid_argument("unknown optimizer '" + o + "'");
        }
    }
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.seed = j.value("seed", c.seed);
    if (j.contains("checkpoint_metric")) {
        c.checkpoint_metric = parse_checkpoint_metric(j.at("checkpoint_metric").get<std::string>());
    }
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.random_k = j.value("random_k", c.random_k);
    c.patience = j.value("patience", c.patience);
    c.plateau_tolerance = j.value("plateau_tolerance", c.plateau_tolerance);
    c.plateau_min_delta = j.value("plateau_min_delta", c.plateau_min_delta);
    c.track_generation = j.value("track_generation", c.track_generation);
    if (j.contains("decode")) c.decode = decode_config_from_json(j.at("decode"));
    c.validate();
    return c;
}

std::string metrics_csv_header() {
    return "epoch,train_loss,val_loss,mean_caption_length,lexical_diversity,r_at_1,r_at_5,oracle_precision,ppl_proxy";
}

std::string to_csv(const RunMetrics& m) {
    std::ostringstream os;
    os << metrics_csv_header() << '\n' << std::setprecision(17);
    for (const auto& e : m.epochs) {
        os << e.epoch << ',';
        if (std::isfinite(e.train_loss)) os << e.train_loss;
        os << ',' << e.val_loss << ',';
        if (e.evaluated) {
            os << e.eval.mean_caption_length << ',' << e.eval.lexical_diversity << ',' << e.eval.r_at_1 << ','
               << e.eval.r_at_5 << ',' << e.eval.oracle_precision << ',' << e.eval.ppl_proxy;
        } else {
            os << ",,,,,";
        }
        os << '\n';
    }
    return os.str();
}

void write_metrics_csv(const std::filesystem::path& path, const RunMetrics& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_csv(m);
}

Split split_corpus(const std::vector<Sample>& samples) {
    Split s;
    for (const auto& x : samples) {
        (is_validation_scene(x.scene_id) ? s.val : s.train).push_back(x);
    }
    return s;
}

namespace {

std::vector<Matrix*> arrays(Parameters& p) {
    std::vector<Matrix*> out;
    p.visit([&](const std::string&, Matrix& m) { out.push_back(&m); });
    return out;
}

struct PreparedBatch {
    TeacherBatch teacher;
    SubsetMask mask;
};

SubsetStrategy strategy_of(Objective o) {
    switch (o) {
        case Objective::mle: return SubsetStrategy::full;
        case Objective::smile:
        case Objective::mixed: return SubsetStrategy::smile;
        case Objective::reverse: return SubsetStrategy::reverse;
        case Objective::random: return SubsetStrategy::random;
    }
    return SubsetStrategy::full;
}

PreparedBatch prepare(const std::vector<const Sample*>& samples, const Vocabulary& vocab, const TrainConfig& cfg,
                      std::mt19937_64& mask_rng) {
    PreparedBatch pb;
    pb.teacher = make_teacher_batch(samples);
    if (cfg.objective != Objective::mle && cfg.first_token == FirstToken::shift) {
        pb.teacher.labels = apply_first_token_shift(pb.teacher.labels, vocab).labels;
    }
    pb.mask = build_mask(pb.teacher.labels, vocab.size(), strategy_of(cfg.objective), cfg.first_token, mask_rng,
                         cfg.random_k);
    return pb;
}

LossReport objective_loss(const LogitsBatch& logits, const PreparedBatch& pb, const TrainConfig& cfg) {
    switch (cfg.objective) {
        case Objective::mle: return mle_loss(logits, pb.teacher.labels);
        case Objective::mixed: return mixed_loss(logits, pb.teacher.labels, pb.mask, cfg.lambda);
        default: return smile_loss(logits, pb.teacher.labels, pb.mask);
    }
}

std::uint64_t mask_seed(std::uint64_t seed, std::uint64_t stream) { return seed * 0x9E3779B97F4A7C15ULL + stream; }

class Optimizer {
public:
    Optimizer(const Parameters& like, const TrainConfig& cfg)
        : cfg_(cfg), lr_(cfg.learning_rate), m_(Parameters::zeros(like.config)), v_(Parameters::zeros(like.config)) {}

    void set_learning_rate(double lr) { lr_ = lr; }

    void step(Parameters& params, Parameters& grad) {
        ++t_;
        auto p = arrays(params);
        auto g = arrays(grad);
        const double lr = lr_;
        if (cfg_.optimizer == OptimizerKind::sgd) {
            for (std::size_t a = 0; a < p.size(); ++a) {
                for (std::size_t i = 0; i < p[a]->data.size(); ++i) p[a]->data[i] -= lr * g[a]->data[i];
            }
            return;
        }
        auto m = arrays(m_);
        auto v = arrays(v_);
        const double b1 = cfg_.beta1, b2 = cfg_.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        for (std::size_t a = 0; a < p.size(); ++a) {
            auto& pd = p[a]->data;
            const auto& gd = g[a]->data;
            auto& md = m[a]->data;
            auto& vd = v[a]->data;
            for (std::size_t i = 0; i < pd.size(); ++i) {
                md[i] = b1 * md[i] + (1.0 - b1) * gd[i];
                vd[i] = b2 * vd[i] + (1.0 - b2) * gd[i] * gd[i];
                pd[i] -= lr * (md[i] / c1) / (std::sqrt(vd[i] / c2) + cfg_.eps);
            }
        }
    }

private:
    const TrainConfig& cfg_;
    double lr_;
    Parameters m_, v_;
    long t_ = 0;
};

/// Returns the pre-clip global norm.
double clip_gradient(Parameters& grad, double max_norm) {
    double sq = 0.0;
    for (Matrix* m : arrays(grad)) {
        for (double x : m->data) sq += x * x;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (Matrix* m : arrays(grad)) {
            for (double& x : m->data) x *= s;
        }
    }
    return norm;
}

bool better(const EpochMetrics& a, const EpochMetrics& b, CheckpointMetric metric) {
    if (metric == CheckpointMetric::val_loss) return a.val_loss < b.val_loss;
    return a.eval.r_at_1 > b.eval.r_at_1;
}

}  // namespace

double validation_loss(const Parameters& params, const std::vector<Sample>& val, const Vocabulary& vocab,
                       const TrainConfig& config) {
    std::mt19937_64 rng(mask_seed(config.seed, 2));
    double sum = 0.0;
    std::size_t count = 0;
    const auto bs = static_cast<std::size_t>(config.batch_size);
    for (std::size_t lo = 0; lo < val.size(); lo += bs) {
        std::vector<const Sample*> batch;
        for (std::size_t i = lo; i < std::min(val.size(), lo + bs); ++i) batch.push_back(&val[i]);
        const PreparedBatch pb = prepare(batch, vocab, config, rng);
        const LogitsBatch logits = forward(params, pb.teacher.features, pb.teacher.inputs);
        const LossReport r = objective_loss(logits, pb, config);
        sum += r.total * static_cast<double>(r.count);
        count += r.count;
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

TrainResult train(const Parameters& init, const Corpus& corpus, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    config.validate();
    if (static_cast<std::size_t>(init.config.vocab_size) != corpus.vocab.size()) {
        throw std::invalid_argument("model vocab_size " + std::to_string(init.config.vocab_size) +
                                    " does not match corpus vocabulary size " + std::to_string(corpus.vocab.size()));
    }
    const bool track = config.track_generation || config.checkpoint_metric == CheckpointMetric::val_retrieval_r1;
    const Split split = split_corpus(corpus.samples);
    if (split.train.empty() || split.val.empty()) {
        throw std::invalid_argument("corpus needs both training and validation scenes");
    }
    const RetrievalPool pool = pool_from_samples(split.val);

    auto measure = [&](const Parameters& p, int epoch, double train_loss) {
        EpochMetrics e;
        e.epoch = epoch;
        e.train_loss = train_loss;
        e.val_loss = validation_loss(p, split.val, corpus.vocab, config);
        if (track) {
            e.evaluated = true;
            e.eval = descriptiveness_report(p, split.val, pool, config.decode, corpus.vocab, corpus.concepts);
        }
        return e;
    };

    TrainResult res;
    res.last = init;
    res.best = init;
    res.metrics.epochs.push_back(measure(init, 0, std::numeric_limits<double>::quiet_NaN()));
    if (on_epoch) on_epoch(res.metrics.epochs.back());

    std::mt19937_64 shuffle_rng(config.seed);
    std::mt19937_64 mask_rng(mask_seed(config.seed, 1));
    Optimizer opt(init, config);
    std::vector<std::size_t> order(split.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::size_t best = 0;  // index into history; 0 means none yet
    double plateau_ref = std::numeric_limits<double>::infinity();
    int stale = 0;
    const auto bs = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        opt.set_learning_rate(config.learning_rate * std::pow(config.lr_decay, epoch - 1));
        double sum = 0.0;
        std::size_t count = 0;
        Parameters params = res.last;
        bool diverged = false;
        for (std::size_t lo = 0; lo < order.size() && !diverged; lo += bs) {
            std::vector<const Sample*> batch;
            for (std::size_t i = lo; i < std::min(order.size(), lo + bs); ++i) batch.push_back(&split.train[order[i]]);
            const PreparedBatch pb = prepare(batch, corpus.vocab, config, mask_rng);
            Tape tape;
            const LogitsBatch logits = forward(params, pb.teacher.features, pb.teacher.inputs, &tape);
            LossReport loss;
            try {
                loss = objective_loss(logits, pb, config);
            } catch (const std::domain_error&) {
                diverged = true;
                break;
            }
            Parameters grad = backward(params, tape, loss.grad);
            const double norm = clip_gradient(grad, config.clip_norm);
            if (!std::isfinite(loss.total) || !std::isfinite(norm)) {
                diverged = true;
                break;
            }
            opt.step(params, grad);
            sum += loss.total * static_cast<double>(loss.count);
            count += loss.count;
        }
        if (diverged) {
            res.metrics.aborted = true;
            res.metrics.abort_reason = "non-finite loss in epoch " + std::to_string(epoch);
            break;
        }
        res.last = std::move(params);
        res.metrics.epochs.push_back(measure(res.last, epoch, count ? sum / static_cast<double>(count) : 0.0));
        const EpochMetrics& cur = res.metrics.epochs.back();
        if (on_epoch) on_epoch(cur);
        if (!std::isfinite(cur.val_loss)) {
            res.metrics.aborted = true;
            res.metrics.abort_reason = "non-finite validation loss in epoch " + std::to_string(epoch);
            break;
        }
        if (best == 0 || better(cur, res.metrics.epochs[best], config.checkpoint_metric)) {
            best = res.metrics.epochs.size() - 1;
            res.best = res.last;
            res.metrics.best_epoch = epoch;
        }
        if (config.patience > 0) {
            const double gain = plateau_ref - cur.val_loss;
            if (std::isinf(plateau_ref) ||
                (gain > plateau_ref * config.plateau_tolerance && gain > config.plateau_min_delta)) {
                plateau_ref = cur.val_loss;
                stale = 0;
            } else if (++stale >= config.patience) {
                break;
            }
        }
    }
    return res;
}

TwoStageResult two_stage(const Parameters& init, const Corpus& corpus, TrainConfig base, const TrainConfig& further,
                         const EpochCallback& on_epoch) {
    if (base.objective != Objective::mle) {
        throw std::invalid_argument("two_stage expects an mle base config");
    }
    if (base.patience == 0) base.patience = 3;
    TwoStageResult r;
    r.stage1 = train(init, corpus, base, on_epoch);
    r.stage2 = train(r.stage1.best, corpus, further, on_epoch);
    return r;
}

}  // namespace smile
