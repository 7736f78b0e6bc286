#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <sstream>

#include "smile/trainer.hpp"

using namespace smile;

namespace {

struct Small {
    Corpus corpus;
    ModelConfig model;

    explicit Small(int scenes = 60) {
        CorpusConfig c;
        c.seed = 5;
        c.n_scenes = scenes;
        corpus = generate_corpus(c);
        model.d_model = 8;
        model.n_layers = 1;
        model.n_heads = 2;
        model.max_len = 16;
        model.vocab_size = static_cast<int>(corpus.vocab.size());
        model.feature_dim = static_cast<int>(corpus.concepts.size());
        model.seed = 2;
    }
};

TrainConfig quick(Objective o, int epochs = 2) {
    TrainConfig c;
    c.objective = o;
    c.epochs = epochs;
    c.batch_size = 8;
    c.learning_rate = 3e-3;
    c.seed = 9;
    c.decode.max_len = 16;
    return c;
}

}  // namespace

TEST_CASE("split follows the scene id rule") {
    Small s(55);
    const auto sp = split_corpus(s.corpus.samples);
    CHECK(sp.train.size() + sp.val.size() == s.corpus.samples.size());
    CHECK(sp.val.size() == 6);
    for (const auto& x : sp.val) CHECK(x.scene_id % 10 == 0);
    for (const auto& x : sp.train) CHECK(x.scene_id % 10 != 0);
}

TEST_CASE("zero learning rate leaves parameters and validation loss unchanged") {
    Small s;
    for (auto opt : {OptimizerKind::adam, OptimizerKind::sgd}) {
        auto cfg = quick(Objective::smile, 1);
        cfg.learning_rate = 0.0;
        cfg.optimizer = opt;
        const auto init = init_parameters(s.model);
        const auto r = train(init, s.corpus, cfg);
        CHECK(r.last == init);
        CHECK(r.best == init);
        REQUIRE(r.metrics.epochs.size() == 2);
        CHECK(r.metrics.epochs[0].val_loss == r.metrics.epochs[1].val_loss);
    }
}

TEST_CASE("training is deterministic for every objective") {
    Small s;
    for (auto o : {Objective::mle, Objective::smile, Objective::reverse, Objective::random, Objective::mixed}) {
        const auto cfg = quick(o);
        const auto init = init_parameters(s.model);
        const auto a = train(init, s.corpus, cfg);
        const auto b = train(init, s.corpus, cfg);
        CHECK(a.best == b.best);
        CHECK(a.last == b.last);
        CHECK(to_csv(a.metrics) == to_csv(b.metrics));
        CHECK_FALSE(a.last == init);
    }
    auto cfg = quick(Objective::random);
    const auto init = init_parameters(s.model);
    const auto a = train(init, s.corpus, cfg);
    cfg.seed += 1;
    CHECK_FALSE(train(init, s.corpus, cfg).last == a.last);
}

TEST_CASE("history has one row per epoch and the best epoch attains the metric optimum") {
    Small s(80);
    for (auto metric : {CheckpointMetric::val_loss, CheckpointMetric::val_retrieval_r1}) {
        auto cfg = quick(Objective::mle, 4);
        cfg.checkpoint_metric = metric;
        const auto r = train(init_parameters(s.model), s.corpus, cfg);
        REQUIRE(r.metrics.epochs.size() == 5);
        for (std::size_t i = 0; i < r.metrics.epochs.size(); ++i) CHECK(r.metrics.epochs[i].epoch == static_cast<int>(i));
        CHECK(std::isnan(r.metrics.epochs[0].train_loss));
        const int best = r.metrics.best_epoch;
        REQUIRE(best >= 1);
        for (std::size_t i = 1; i < r.metrics.epochs.size(); ++i) {
            const auto& e = r.metrics.epochs[i];
            const auto& b = r.metrics.epochs[static_cast<std::size_t>(best)];
            if (metric == CheckpointMetric::val_loss) {
                CHECK(b.val_loss <= e.val_loss);
                if (static_cast<int>(i) < best) CHECK(b.val_loss < e.val_loss);
            } else {
                CHECK(b.eval.r_at_1 >= e.eval.r_at_1);
                if (static_cast<int>(i) < best) CHECK(b.eval.r_at_1 > e.eval.r_at_1);
            }
        }
        // The returned best parameters reproduce the recorded validation loss.
        const auto sp = split_corpus(s.corpus.samples);
        CHECK(validation_loss(r.best, sp.val, s.corpus.vocab, cfg) ==
              r.metrics.epochs[static_cast<std::size_t>(best)].val_loss);
    }
}

TEST_CASE("training reduces the validation loss on a tiny corpus") {
    Small s(120);
    auto cfg = quick(Objective::mle, 5);
    cfg.track_generation = false;
    cfg.checkpoint_metric = CheckpointMetric::val_loss;
    const auto r = train(init_parameters(s.model), s.corpus, cfg);
    CHECK(r.metrics.epochs.back().val_loss < 0.7 * r.metrics.epochs.front().val_loss);
}

TEST_CASE("plateau stopping ends the run early") {
    Small s;
    auto cfg = quick(Objective::mle, 30);
    cfg.learning_rate = 0.0;
    cfg.patience = 2;
    cfg.track_generation = false;
    cfg.checkpoint_metric = CheckpointMetric::val_loss;
    const auto r = train(init_parameters(s.model), s.corpus, cfg);
    // Epoch 1 sets the reference, epochs 2 and 3 fail to improve.
    CHECK(r.metrics.epochs.size() == 4);

    // Real progress smaller than the absolute threshold counts as a plateau too.
    cfg.learning_rate = 3e-3;
    cfg.plateau_min_delta = 1e9;
    CHECK(train(init_parameters(s.model), s.corpus, cfg).metrics.epochs.size() == 4);
}

TEST_CASE("divergence aborts with the last good checkpoint") {
    Small s;
    auto cfg = quick(Objective::mle, 3);
    cfg.optimizer = OptimizerKind::sgd;
    cfg.clip_norm = 0.0;
    cfg.learning_rate = 1e300;
    const auto init = init_parameters(s.model);
    const auto r = train(init, s.corpus, cfg);
    CHECK(r.metrics.aborted);
    CHECK_FALSE(r.metrics.abort_reason.empty());
    CHECK(r.best == init);
    CHECK(r.metrics.epochs.size() == 1);
}

TEST_CASE("metrics csv layout") {
    Small s;
    const auto r = train(init_parameters(s.model), s.corpus, quick(Objective::smile, 1));
    const auto text = to_csv(r.metrics);
    std::istringstream in(text);
    std::string header, row0, row1;
    std::getline(in, header);
    std::getline(in, row0);
    std::getline(in, row1);
    CHECK(header == metrics_csv_header());
    CHECK(header == "epoch,train_loss,val_loss,mean_caption_length,lexical_diversity,r_at_1,r_at_5,oracle_precision,ppl_proxy");
    CHECK(row0.rfind("0,,", 0) == 0);
    CHECK(row1.rfind("1,", 0) == 0);
    CHECK(std::count(row1.begin(), row1.end(), ',') == 8);
}

TEST_CASE("config validation and json round trip") {
    TrainConfig c;
    c.objective = Objective::mixed;
    c.lambda = 0.05;
    c.first_token = FirstToken::shift;
    c.lr_decay = 0.9;
    c.optimizer = OptimizerKind::sgd;
    const auto back = train_config_from_json(to_json(c));
    CHECK(back.objective == Objective::mixed);
    CHECK(back.lambda == 0.05);
    CHECK(back.first_token == FirstToken::shift);
    CHECK(back.lr_decay == 0.9);
    CHECK(back.optimizer == OptimizerKind::sgd);
    CHECK(to_json(back) == to_json(c));

    auto bad = c;
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.lambda = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.learning_rate = -1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(parse_objective("smiles"), std::invalid_argument);
    CHECK_THROWS_AS(train_config_from_json({{"optimizer", "rmsprop"}}), std::invalid_argument);
}

TEST_CASE("mismatched model and corpus are rejected") {
    Small s;
    auto m = s.model;
    m.vocab_size += 1;
    CHECK_THROWS_AS(train(init_parameters(m), s.corpus, quick(Objective::mle, 1)), std::invalid_argument);
}

TEST_CASE("two stage protocol") {
    Small s;
    auto base = quick(Objective::smile, 2);
    CHECK_THROWS_AS(two_stage(init_parameters(s.model), s.corpus, base, quick(Objective::smile, 1)),
                    std::invalid_argument);
    base.objective = Objective::mle;
    base.track_generation = false;
    base.checkpoint_metric = CheckpointMetric::val_loss;
    const auto r = two_stage(init_parameters(s.model), s.corpus, base, quick(Objective::smile, 1));
    CHECK(r.stage2.metrics.epochs.front().val_loss ==
          validation_loss(r.stage1.best, split_corpus(s.corpus.samples).val, s.corpus.vocab, quick(Objective::smile, 1)));
    CHECK(r.stage2.metrics.epochs.size() == 2);
}
