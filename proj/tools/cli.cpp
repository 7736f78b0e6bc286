#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "smile/corpus.hpp"
#include "smile/decoder.hpp"
#include "smile/eval.hpp"
#include "smile/experiments.hpp"
#include "smile/model.hpp"
#include "smile/objectives.hpp"
#include "smile/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace smile::cli {
namespace {

struct CliError : std::runtime_error {
    CliError(int c, const std::string& what) : std::runtime_error(what), code(c) {}
    int code;
};

void require_file(const fs::path& p) {
    if (!fs::exists(p)) throw CliError(kMissingFile, "file not found: " + p.string());
}

json read_json(const fs::path& p) {
    require_file(p);
    std::ifstream in(p);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw CliError(kInvalidConfig, "cannot parse " + p.string() + ": " + e.what());
    }
}

/// A config file is either a plain object or a run manifest, whose "config" is used.
json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    json j = read_json(path);
    if (!j.is_object()) throw CliError(kInvalidConfig, path + ": config must be a JSON object");
    if (j.value("schema", "") == "run_v1") return j.at("config");
    return j;
}

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str().substr(0, 10);
}

fs::path run_dir(const std::string& out, const std::string& command, const json& config) {
    if (!out.empty()) return out;
    const char* root = std::getenv(kRunRootEnv);
    return fs::path(root && *root ? root : "runs") / (command + "-" + fnv1a_hex(config.dump()));
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw CliError(kRuntimeError, "cannot write " + p.string());
    out << text;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const std::vector<std::string>& outputs) {
    json m{{"schema", "run_v1"}, {"command", command}, {"config", config}, {"outputs", outputs}};
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

// Flags only override the config when they were given explicitly.
template <class T>
void override(json& j, const char* key, const CLI::Option* opt, const T& value) {
    if (opt->count() > 0) j[key] = value;
}

struct Data {
    Corpus corpus;
    CorpusConfig config;
};

/// Loads a gen-data run directory; the concept inventory is rebuilt from its manifest.
Data load_data(const fs::path& dir) {
    const json manifest = read_json(dir / "manifest.json");
    if (manifest.value("command", "") != "gen-data") {
        throw CliError(kBadData, dir.string() + " is not a gen-data run directory");
    }
    Data d;
    try {
        d.config = corpus_config_from_json(manifest.at("config").at("corpus"));
    } catch (const std::exception& e) {
        throw CliError(kBadData, dir.string() + ": bad corpus config in manifest: " + e.what());
    }
    auto [vocab, concepts] = build_vocabulary(d.config.vocab_concepts);
    require_file(dir / "vocab.json");
    require_file(dir / "corpus.jsonl");
    d.corpus.vocab = read_vocabulary(dir / "vocab.json");
    if (!(d.corpus.vocab == vocab)) {
        throw CliError(kBadData, "vocabulary in " + dir.string() + " does not match its corpus config");
    }
    d.corpus.concepts = std::move(concepts);
    try {
        d.corpus.samples = read_corpus(dir / "corpus.jsonl");
    } catch (const ParseError& e) {
        throw CliError(kBadData, (dir / "corpus.jsonl").string() + ": " + e.what());
    }
    return d;
}

Parameters load_params(const fs::path& p, const Vocabulary& vocab) {
    require_file(p);
    Parameters params = load_checkpoint(p);
    if (static_cast<std::size_t>(params.config.vocab_size) != vocab.size()) {
        throw CliError(kBadData, "checkpoint vocabulary size does not match the data");
    }
    return params;
}

std::vector<Sample> pick_split(const std::vector<Sample>& samples, const std::string& split) {
    if (split == "all") return samples;
    const Split s = split_corpus(samples);
    if (split == "val") return s.val;
    if (split == "train") return s.train;
    throw CliError(kInvalidConfig, "unknown split '" + split + "' (expected train, val or all)");
}

struct DecodeFlags {
    bool greedy = false;
    int width = 3;
    int max_len = 32;
    double length_penalty = 1.0;
    CLI::Option *greedy_opt, *width_opt, *max_len_opt, *penalty_opt;

    void add(CLI::App* app) {
        greedy_opt = app->add_flag("--greedy", greedy, "greedy decoding instead of beam search");
        width_opt = app->add_option("--beam-width", width, "beam width");
        max_len_opt = app->add_option("--max-len", max_len, "maximum caption length including BOS/EOS");
        penalty_opt = app->add_option("--length-penalty", length_penalty, "beam length normalization exponent");
    }
    void apply(json& j) const {
        if (greedy_opt->count()) j["mode"] = "greedy";
        override(j, "width", width_opt, width);
        override(j, "max_len", max_len_opt, max_len);
        override(j, "length_penalty", penalty_opt, length_penalty);
    }
};

// ---------------------------------------------------------------------------

struct Common {
    std::uint64_t seed = 0;
    std::string config;
    std::string out;
    CLI::Option* seed_opt = nullptr;

    void add(CLI::App* app) {
        seed_opt = app->add_option("--seed", seed, "random seed");
        app->add_option("--config", config, "JSON config file or run manifest");
        app->add_option("--out", out, "run directory (default: $" + std::string(kRunRootEnv) + "/<command>-<hash>)");
    }
};

int cmd_gen_data(const Common& c, const std::string& mode, CLI::Option* mode_opt, int n_scenes,
                 CLI::Option* n_opt, int paraphrases, CLI::Option* para_opt) {
    json cfg = load_config(c.config);
    json corpus = cfg.value("corpus", json::object());
    const bool has_dist = corpus.contains("detail_distribution");
    CorpusConfig cc;
    try {
        cc = corpus_config_from_json(corpus);
        if (mode_opt->count()) {
            // Without an explicit distribution the mode picks its own detail levels.
            const CorpusMode m = parse_corpus_mode(mode);
            if (has_dist) {
                cc.mode = m;
            } else {
                cc = corpus_for_mode(cc, m);
            }
        }
        if (n_opt->count()) cc.n_scenes = n_scenes;
        if (para_opt->count()) cc.paraphrases = paraphrases;
        if (c.seed_opt->count()) cc.seed = c.seed;
        cc.validate();
    } catch (const std::invalid_argument& e) {
        throw CliError(kInvalidConfig, std::string("invalid corpus config: ") + e.what());
    }
    const json resolved{{"corpus", to_json(cc)}};
    const fs::path dir = run_dir(c.out, "gen-data", resolved);
    fs::create_directories(dir);
    const Corpus corpusdata = generate_corpus(cc);
    write_corpus(dir / "corpus.jsonl", corpusdata.samples);
    write_vocabulary(dir / "vocab.json", corpusdata.vocab);
    write_manifest(dir, "gen-data", resolved, {"corpus.jsonl", "vocab.json"});
    std::cout << dir.string() << "\n";
    return kOk;
}

struct TrainFlags {
    std::string data, init, objective, first_token, metric;
    double lambda = 0.5, lr = 3e-4;
    int epochs = 10, batch = 32, d_model = 64, layers = 2, heads = 4, patience = 0;
    CLI::Option *data_o, *init_o, *obj_o, *ft_o, *metric_o, *lambda_o, *lr_o, *epochs_o, *batch_o, *d_o, *l_o, *h_o,
        *pat_o;
    DecodeFlags decode;

    void add(CLI::App* app) {
        data_o = app->add_option("--data", data, "gen-data run directory");
        init_o = app->add_option("--init", init, "checkpoint to start from (default: fresh init)");
        obj_o = app->add_option("--objective", objective, "mle | smile | reverse | random | mixed");
        ft_o = app->add_option("--first-token", first_token, "none | mle | shift");
        lambda_o = app->add_option("--lambda", lambda, "MLE weight for the mixed objective");
        lr_o = app->add_option("--lr", lr, "learning rate");
        epochs_o = app->add_option("--epochs", epochs, "training epochs");
        batch_o = app->add_option("--batch-size", batch, "batch size");
        metric_o = app->add_option("--checkpoint-metric", metric, "val_retrieval_r1 | val_loss");
        pat_o = app->add_option("--patience", patience, "early-stop patience on val loss (0 disables)");
        d_o = app->add_option("--d-model", d_model, "model width (fresh init only)");
        l_o = app->add_option("--layers", layers, "transformer blocks (fresh init only)");
        h_o = app->add_option("--heads", heads, "attention heads (fresh init only)");
        decode.add(app);
    }
};

int cmd_train(const Common& c, const TrainFlags& f) {
    json cfg = load_config(c.config);
    override(cfg, "data", f.data_o, f.data);
    override(cfg, "init", f.init_o, f.init);
    json train_cfg = cfg.value("train", json::object());
    override(train_cfg, "objective", f.obj_o, f.objective);
    override(train_cfg, "first_token", f.ft_o, f.first_token);
    override(train_cfg, "lambda", f.lambda_o, f.lambda);
    override(train_cfg, "learning_rate", f.lr_o, f.lr);
    override(train_cfg, "epochs", f.epochs_o, f.epochs);
    override(train_cfg, "batch_size", f.batch_o, f.batch);
    override(train_cfg, "checkpoint_metric", f.metric_o, f.metric);
    override(train_cfg, "patience", f.pat_o, f.patience);
    override(train_cfg, "seed", c.seed_opt, c.seed);
    json dec = train_cfg.value("decode", json::object());
    f.decode.apply(dec);
    train_cfg["decode"] = dec;
    json model = cfg.value("model", json::object());
    override(model, "d_model", f.d_o, f.d_model);
    override(model, "n_layers", f.l_o, f.layers);
    override(model, "n_heads", f.h_o, f.heads);
    override(model, "seed", c.seed_opt, c.seed);

    if (!cfg.contains("data")) throw CliError(kInvalidConfig, "train needs --data (or \"data\" in the config)");
    const Data data = load_data(cfg.at("data").get<std::string>());

    TrainConfig tc;
    Parameters init;
    try {
        tc = train_config_from_json(train_cfg);
        if (cfg.contains("init") && !cfg.at("init").get<std::string>().empty()) {
            init = load_params(cfg.at("init").get<std::string>(), data.corpus.vocab);
        } else {
            ModelConfig mc;
            mc.d_model = model.value("d_model", mc.d_model);
            mc.n_layers = model.value("n_layers", mc.n_layers);
            mc.n_heads = model.value("n_heads", mc.n_heads);
            mc.max_len = model.value("max_len", mc.max_len);
            mc.seed = model.value("seed", mc.seed);
            mc.vocab_size = static_cast<int>(data.corpus.vocab.size());
            mc.feature_dim = static_cast<int>(data.corpus.concepts.size());
            mc.validate();
            init = init_parameters(mc);
        }
        tc.decode.validate(init.config.max_len);
    } catch (const std::invalid_argument& e) {
        throw CliError(kInvalidConfig, std::string("invalid training config: ") + e.what());
    }
    json resolved = cfg;
    resolved["train"] = to_json(tc);
    resolved["model"] = to_json(init.config);
    const fs::path dir = run_dir(c.out, "train", resolved);
    fs::create_directories(dir);

    const TrainResult r = train(init, data.corpus, tc, [](const EpochMetrics& e) {
        std::cerr << "epoch " << e.epoch << " val_loss " << e.val_loss;
        if (e.evaluated) std::cerr << " len " << e.eval.mean_caption_length << " r@1 " << e.eval.r_at_1;
        std::cerr << "\n";
    });
    save_checkpoint(dir / "best.ckpt", r.best);
    save_checkpoint(dir / "last.ckpt", r.last);
    write_metrics_csv(dir / "metrics.csv", r.metrics);
    resolved["result"] = {{"best_epoch", r.metrics.best_epoch},
                          {"aborted", r.metrics.aborted},
                          {"abort_reason", r.metrics.abort_reason}};
    write_manifest(dir, "train", resolved, {"best.ckpt", "last.ckpt", "metrics.csv"});
    if (r.metrics.aborted) std::cerr << "warning: " << r.metrics.abort_reason << "\n";
    std::cout << dir.string() << "\n";
    return kOk;
}

struct EvalFlags {
    std::string checkpoint, data, split = "val";
    int limit = 0, distractors = 0;
    CLI::Option *ckpt_o, *data_o, *split_o, *limit_o, *dist_o;
    DecodeFlags decode;

    void add(CLI::App* app, bool with_distractors) {
        ckpt_o = app->add_option("--checkpoint", checkpoint, "model checkpoint");
        data_o = app->add_option("--data", data, "gen-data run directory");
        split_o = app->add_option("--split", split, "train | val | all");
        limit_o = app->add_option("--limit", limit, "at most this many scenes (0 = all)");
        if (with_distractors) {
            dist_o = app->add_option("--hard-distractors", distractors, "one-attribute-flip distractors to add");
        }
        decode.add(app);
    }

    json resolve(const Common& c, bool with_distractors) const {
        json cfg = load_config(c.config);
        override(cfg, "checkpoint", ckpt_o, checkpoint);
        override(cfg, "data", data_o, data);
        override(cfg, "split", split_o, split);
        override(cfg, "limit", limit_o, limit);
        if (with_distractors) override(cfg, "hard_distractors", dist_o, distractors);
        override(cfg, "seed", c.seed_opt, c.seed);
        json dec = cfg.value("decode", json::object());
        decode.apply(dec);
        cfg["decode"] = dec;
        for (const char* key : {"checkpoint", "data"}) {
            if (!cfg.contains(key)) throw CliError(kInvalidConfig, std::string("missing --") + key);
        }
        return cfg;
    }
};

struct Prepared {
    Data data;
    Parameters params;
    DecodeConfig decode;
    RetrievalPool pool;
    std::vector<Sample> samples;
};

Prepared prepare_eval(const json& cfg) {
    Prepared p;
    p.data = load_data(cfg.at("data").get<std::string>());
    p.params = load_params(cfg.at("checkpoint").get<std::string>(), p.data.corpus.vocab);
    try {
        p.decode = decode_config_from_json(cfg.at("decode"));
        p.decode.validate(p.params.config.max_len);
    } catch (const std::invalid_argument& e) {
        throw CliError(kInvalidConfig, std::string("invalid decode config: ") + e.what());
    }
    p.samples = pick_split(p.data.corpus.samples, cfg.value("split", std::string("val")));
    p.pool = pool_from_samples(p.samples);
    const int limit = cfg.value("limit", 0);
    if (limit > 0 && static_cast<std::size_t>(limit) < p.pool.entries.size()) {
        p.pool.entries.resize(static_cast<std::size_t>(limit));
    }
    return p;
}

int cmd_decode(const Common& c, const EvalFlags& f) {
    const json cfg = f.resolve(c, false);
    const Prepared p = prepare_eval(cfg);
    const fs::path dir = run_dir(c.out, "decode", cfg);
    fs::create_directories(dir);
    std::ostringstream lines;
    for (const auto& e : p.pool.entries) {
        const Decoded d = decode(p.params, e.features, p.decode, &p.data.corpus.vocab);
        const std::string text = detokenize(d.tokens, p.data.corpus.vocab);
        lines << json{{"scene_id", e.scene_id}, {"caption", text}, {"tokens", d.tokens}, {"truncated", d.truncated}}
                     .dump()
              << "\n";
        std::cout << e.scene_id << "\t" << text << (d.truncated ? "\t[truncated]" : "") << "\n";
    }
    write_text(dir / "captions.jsonl", lines.str());
    write_manifest(dir, "decode", cfg, {"captions.jsonl"});
    return kOk;
}

int cmd_eval(const Common& c, const EvalFlags& f) {
    const json cfg = f.resolve(c, true);
    Prepared p = prepare_eval(cfg);
    const int n_distractors = cfg.value("hard_distractors", 0);
    if (n_distractors > 0) {
        p.pool.hard_distractors = make_hard_distractors(p.pool.entries, p.data.corpus.concepts,
                                                        static_cast<std::size_t>(n_distractors),
                                                        cfg.value("seed", std::uint64_t{0}));
    }
    p.pool.validate();
    const EvalReport r =
        descriptiveness_report(p.params, p.samples, p.pool, p.decode, p.data.corpus.vocab, p.data.corpus.concepts);
    const fs::path dir = run_dir(c.out, "eval", cfg);
    fs::create_directories(dir);
    write_text(dir / "eval.json", to_json(r).dump(2) + "\n");
    write_text(dir / "eval.csv", eval_csv_header() + "\n" + to_csv_row(r) + "\n");
    write_manifest(dir, "eval", cfg, {"eval.json", "eval.csv"});
    std::cout << to_json(r).dump(2) << "\n";
    return kOk;
}

int cmd_viz(const Common& c, const std::string& checkpoint, CLI::Option* ckpt_o, const std::string& data,
            CLI::Option* data_o, int sample, CLI::Option* sample_o, const std::string& strategy,
            CLI::Option* strat_o, const std::string& first_token, CLI::Option* ft_o) {
    json cfg = load_config(c.config);
    override(cfg, "checkpoint", ckpt_o, checkpoint);
    override(cfg, "data", data_o, data);
    override(cfg, "sample", sample_o, sample);
    override(cfg, "strategy", strat_o, strategy);
    override(cfg, "first_token", ft_o, first_token);
    override(cfg, "seed", c.seed_opt, c.seed);
    for (const char* key : {"checkpoint", "data"}) {
        if (!cfg.contains(key)) throw CliError(kInvalidConfig, std::string("missing --") + key);
    }
    const Data d = load_data(cfg.at("data").get<std::string>());
    const Parameters params = load_params(cfg.at("checkpoint").get<std::string>(), d.corpus.vocab);
    const int index = cfg.value("sample", 0);
    if (index < 0 || static_cast<std::size_t>(index) >= d.corpus.samples.size()) {
        throw CliError(kInvalidConfig, "sample index " + std::to_string(index) + " out of range");
    }
    SubsetStrategy strat;
    FirstToken ft;
    try {
        strat = parse_subset_strategy(cfg.value("strategy", std::string("smile")));
        ft = parse_first_token(cfg.value("first_token", std::string("mle")));
    } catch (const std::invalid_argument& e) {
        throw CliError(kInvalidConfig, e.what());
    }
    const Sample& s = d.corpus.samples[static_cast<std::size_t>(index)];
    TeacherBatch tb = make_teacher_batch({&s});
    if (ft == FirstToken::shift) tb.labels = apply_first_token_shift(tb.labels, d.corpus.vocab).labels;
    std::mt19937_64 rng(cfg.value("seed", std::uint64_t{0}));
    const SubsetMask mask = build_mask(tb.labels, d.corpus.vocab.size(), strat, ft, rng);
    const LogitsBatch logits = forward(params, tb.features, tb.inputs);
    json viz = export_token_viz(logits, tb.labels, mask, d.corpus.vocab);
    viz["scene_id"] = s.scene_id;
    viz["caption"] = detokenize(s.caption, d.corpus.vocab);

    const fs::path dir = run_dir(c.out, "viz", cfg);
    fs::create_directories(dir);
    write_text(dir / "viz.json", viz.dump(2) + "\n");
    write_manifest(dir, "viz", cfg, {"viz.json"});
    std::cout << (dir / "viz.json").string() << "\n";
    return kOk;
}

int cmd_experiment(const Common& c, const std::string& name, bool quiet) {
    json cfg = load_config(c.config);
    ExperimentPreset preset;
    try {
        if (cfg.contains("name") && cfg.at("name").get<std::string>() != name) {
            throw std::invalid_argument("config is for preset '" + cfg.at("name").get<std::string>() + "', not '" +
                                        name + "'");
        }
        cfg["name"] = name;
        if (c.seed_opt->count()) {
            // A seed flag reseeds every stream of the preset.
            const ExperimentPreset seeded = make_preset(name, c.seed);
            cfg["corpus"]["seed"] = seeded.corpus.seed;
            cfg["model"]["seed"] = seeded.model.seed;
            cfg["stage1"]["seed"] = seeded.stage1.seed;
            cfg["further"]["seed"] = seeded.further.seed;
        }
        preset = preset_from_json(cfg);
    } catch (const std::invalid_argument& e) {
        throw CliError(kInvalidConfig, std::string("invalid experiment config: ") + e.what());
    }
    const json resolved = to_json(preset);
    const fs::path dir = run_dir(c.out, "experiment-" + name, resolved);
    fs::create_directories(dir);
    Logger log;
    if (!quiet) log = [](const std::string& line) { std::cerr << line << "\n"; };
    const ExperimentResult r = run_experiment(preset, nullptr, log);
    write_experiment(dir, r);
    std::vector<std::string> outputs{"summary.csv"};
    for (const auto& [mode, m] : r.stage1) outputs.push_back("stage1_" + to_string(mode) + ".csv");
    for (const auto& a : r.arms) outputs.push_back(a.arm + ".csv");
    write_manifest(dir, "experiment", resolved, outputs);
    if (!quiet) std::cout << summary_csv(r);
    std::cout << dir.string() << "\n";
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"SMILE training laboratory"};
    app.require_subcommand(1);

    Common gen_c, train_c, dec_c, eval_c, viz_c, exp_c;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic caption corpus");
    gen_c.add(gen);
    std::string mode = "full";
    int n_scenes = 2000, paraphrases = 1;
    auto* mode_o = gen->add_option("--mode", mode, "full | simplest | simpler");
    auto* n_o = gen->add_option("--n-scenes", n_scenes, "number of scenes");
    auto* para_o = gen->add_option("--paraphrases", paraphrases, "captions per scene");

    auto* tr = app.add_subcommand("train", "train a captioner");
    train_c.add(tr);
    TrainFlags tf;
    tf.add(tr);

    auto* dec = app.add_subcommand("decode", "caption scenes with a checkpoint");
    dec_c.add(dec);
    EvalFlags df;
    df.add(dec, false);

    auto* ev = app.add_subcommand("eval", "descriptiveness metrics for a checkpoint");
    eval_c.add(ev);
    EvalFlags ef;
    ef.add(ev, true);

    auto* viz = app.add_subcommand("viz", "token-level loss visualization record");
    viz_c.add(viz);
    std::string v_ckpt, v_data, v_strategy = "smile", v_ft = "mle";
    int v_sample = 0;
    auto* v_ckpt_o = viz->add_option("--checkpoint", v_ckpt, "model checkpoint");
    auto* v_data_o = viz->add_option("--data", v_data, "gen-data run directory");
    auto* v_sample_o = viz->add_option("--sample", v_sample, "sample index in the corpus");
    auto* v_strat_o = viz->add_option("--strategy", v_strategy, "full | smile | reverse | random");
    auto* v_ft_o = viz->add_option("--first-token", v_ft, "none | mle | shift");

    auto* exp = app.add_subcommand("experiment", "run a comparison preset");
    exp_c.add(exp);
    std::string preset;
    bool quiet = false;
    exp->add_option("preset", preset, "subsetting_compare | absorption | lambda_sweep | icr_ablation")->required();
    exp->add_flag("--quiet", quiet, "no per-epoch progress or summary table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsageError;
    }

    try {
        if (*gen) return cmd_gen_data(gen_c, mode, mode_o, n_scenes, n_o, paraphrases, para_o);
        if (*tr) return cmd_train(train_c, tf);
        if (*dec) return cmd_decode(dec_c, df);
        if (*ev) return cmd_eval(eval_c, ef);
        if (*viz) {
            return cmd_viz(viz_c, v_ckpt, v_ckpt_o, v_data, v_data_o, v_sample, v_sample_o, v_strategy, v_strat_o,
                           v_ft, v_ft_o);
        }
        if (*exp) return cmd_experiment(exp_c, preset, quiet);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code;
    } catch (const json::exception& e) {
        std::cerr << "error: invalid configuration: " << e.what() << "\n";
        return kInvalidConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: invalid configuration: " << e.what() << "\n";
        return kInvalidConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kRuntimeError;
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace smile::cli
