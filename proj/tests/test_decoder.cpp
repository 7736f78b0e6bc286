#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "smile/decoder.hpp"

using namespace smile;

namespace {

constexpr double kNever = -1e9;

// Logits are a fixed function of the token prefix.
class TableScorer : public StepScorer {
public:
    using Table = std::function<std::vector<double>(const TokenSeq&)>;
    explicit TableScorer(Table t) : table_(std::move(t)) {}
    std::unique_ptr<StepScorer> clone() const override { return std::make_unique<TableScorer>(*this); }
    std::vector<double> push(TokenId token) override {
        prefix_.push_back(token);
        return table_(prefix_);
    }
    const TokenSeq& prefix() const { return prefix_; }

private:
    Table table_;
    TokenSeq prefix_;
};

// Pseudo-random logits keyed by prefix; PAD and BOS can never be emitted.
TableScorer::Table random_table(std::uint64_t seed, std::size_t vocab) {
    return [seed, vocab](const TokenSeq& prefix) {
        std::uint64_t h = seed;
        for (TokenId t : prefix) h = h * 1000003u + static_cast<std::uint64_t>(t) + 1;
        std::mt19937_64 rng(h);
        std::normal_distribution<double> n(0.0, 1.5);
        std::vector<double> z(vocab);
        for (auto& x : z) x = n(rng);
        z[0] = kNever;
        z[1] = kNever;
        return z;
    };
}

double log_softmax_at(const std::vector<double>& z, TokenId j) {
    double m = -INFINITY;
    for (double x : z) m = std::max(m, x);
    double s = 0;
    for (double x : z) s += std::exp(x - m);
    return z[static_cast<std::size_t>(j)] - m - std::log(s);
}

struct Best {
    TokenSeq tokens;
    double score = -INFINITY;
    double logprob = 0;
};

// Exhaustive search over completed sequences with at most `steps` generated tokens.
void brute_force(const TableScorer::Table& table, std::size_t vocab, std::size_t steps, double penalty,
                 TokenSeq& prefix, double logprob, Best& best) {
    const auto z = table(prefix);
    for (TokenId j = 2; j < static_cast<TokenId>(vocab); ++j) {
        const double lp = logprob + log_softmax_at(z, j);
        const std::size_t generated = prefix.size();  // prefix holds BOS plus generated tokens
        if (j == 2) {
            const double score = lp / std::pow(static_cast<double>(generated), penalty);
            if (score > best.score) {
                best.score = score;
                best.logprob = lp;
                best.tokens = prefix;
                best.tokens.push_back(j);
            }
        } else if (generated < steps) {
            prefix.push_back(j);
            brute_force(table, vocab, steps, penalty, prefix, lp, best);
            prefix.pop_back();
        }
    }
}

Decoded run(const TableScorer::Table& table, DecodeConfig::Mode mode, int width, int max_len, double penalty = 1.0,
            std::function<TokenId(TokenId)> fold = {}) {
    DecodeConfig c;
    c.mode = mode;
    c.width = width;
    c.max_len = max_len;
    c.length_penalty = penalty;
    DecodeTokens tokens;
    tokens.fold = std::move(fold);
    return decode(std::make_unique<TableScorer>(table), c, tokens);
}

std::vector<double> one_hot_logits(std::size_t vocab, TokenId hot, double gap = 10.0) {
    std::vector<double> z(vocab, 0.0);
    z[static_cast<std::size_t>(hot)] = gap;
    return z;
}

}  // namespace

TEST_CASE("hand-built table emits a cat EOS") {
    // 0 pad, 1 bos, 2 eos, 3 unk, 4 a, 5 cat, 6 dog
    const TableScorer::Table table = [](const TokenSeq& p) {
        if (p.back() == 1) return one_hot_logits(7, 4);
        if (p.back() == 4) return one_hot_logits(7, 5);
        return one_hot_logits(7, 2);
    };
    for (auto mode : {DecodeConfig::Mode::greedy, DecodeConfig::Mode::beam}) {
        const auto d = run(table, mode, 3, 8);
        CHECK(d.tokens == TokenSeq{1, 4, 5, 2});
        CHECK_FALSE(d.truncated);
        CHECK(d.logprob < 0.0);
        CHECK(d.logprob > -1e-3);
    }
}

TEST_CASE("greedy breaks ties toward the lowest id") {
    const TableScorer::Table table = [](const TokenSeq& p) {
        std::vector<double> z(6, 0.0);
        z[0] = z[1] = kNever;
        if (p.size() >= 2) z[2] = 5.0;
        return z;
    };
    CHECK(run(table, DecodeConfig::Mode::greedy, 1, 8).tokens == TokenSeq{1, 2});
    const TableScorer::Table tie = [](const TokenSeq& p) {
        std::vector<double> z(6, kNever);
        if (p.size() == 1) {
            z[4] = 1.0;
            z[5] = 1.0;
        } else {
            z[2] = 0.0;
        }
        return z;
    };
    CHECK(run(tie, DecodeConfig::Mode::greedy, 1, 8).tokens == TokenSeq{1, 4, 2});
    CHECK(run(tie, DecodeConfig::Mode::beam, 3, 8).tokens == TokenSeq{1, 4, 2});
}

TEST_CASE("generation without EOS is truncated and flagged") {
    const TableScorer::Table table = [](const TokenSeq&) { return one_hot_logits(6, 4); };
    for (auto mode : {DecodeConfig::Mode::greedy, DecodeConfig::Mode::beam}) {
        const auto d = run(table, mode, 2, 6);
        CHECK(d.truncated);
        CHECK(d.tokens.size() == 6);
        CHECK(d.tokens.back() == 4);
    }
}

TEST_CASE("beam escapes a greedy trap and matches exhaustive search") {
    // Greedy takes "x" first, but "y y" is the only strong continuation.
    // 0 pad, 1 bos, 2 eos, 3 x, 4 y
    const TableScorer::Table table = [](const TokenSeq& p) {
        std::vector<double> z(5, kNever);
        if (p.size() == 1) {
            z[3] = 1.0;
            z[4] = 0.5;
        } else if (p.back() == 3) {
            z[2] = 0.0;
            z[3] = 0.0;
            z[4] = 0.0;
        } else {
            z[2] = p.size() >= 3 ? 8.0 : 0.0;
            z[4] = p.size() >= 3 ? 0.0 : 8.0;
        }
        return z;
    };
    const auto g = run(table, DecodeConfig::Mode::greedy, 1, 5);
    const auto b = run(table, DecodeConfig::Mode::beam, 3, 5);
    Best best;
    TokenSeq prefix{1};
    brute_force(table, 5, 4, 1.0, prefix, 0.0, best);
    CHECK(b.tokens == best.tokens);
    CHECK(b.logprob == doctest::Approx(best.logprob).epsilon(1e-12));
    CHECK(best.tokens == TokenSeq{1, 4, 4, 2});
    CHECK(g.tokens != best.tokens);
}

TEST_CASE("width-3 beam matches exhaustive search on a four-step toy model") {
    // Three content tokens plus EOS. The table below pins a unique best path
    // that beam 3 must keep alive at every step.
    // 0 pad, 1 bos, 2 eos, 3 p, 4 q, 5 r
    std::map<TokenSeq, std::vector<double>> t;
    auto row = [](double e, double p, double q, double r) { return std::vector<double>{kNever, kNever, e, p, q, r}; };
    t[{1}] = row(-2.0, 1.0, 0.9, 0.8);
    t[{1, 3}] = row(0.0, 0.1, 0.2, 0.0);
    t[{1, 4}] = row(-1.0, 0.0, 0.0, 2.0);
    t[{1, 5}] = row(0.3, 0.0, 0.0, 0.0);
    t[{1, 4, 5}] = row(-1.0, 3.0, 0.0, 0.0);
    t[{1, 4, 5, 3}] = row(5.0, 0.0, 0.0, 0.0);
    const TableScorer::Table table = [t](const TokenSeq& p) {
        auto it = t.find(p);
        return it != t.end() ? it->second : std::vector<double>{kNever, kNever, 0.0, 0.0, 0.0, 0.0};
    };
    Best best;
    TokenSeq prefix{1};
    brute_force(table, 6, 4, 1.0, prefix, 0.0, best);
    const auto b = run(table, DecodeConfig::Mode::beam, 3, 5);
    CHECK(b.tokens == best.tokens);
    CHECK(b.logprob == doctest::Approx(best.logprob).epsilon(1e-12));
}

TEST_CASE("a beam wide enough to keep every prefix is exhaustive") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        for (double penalty : {0.0, 1.0, 2.0}) {
            const auto table = random_table(seed, 5);
            Best best;
            TokenSeq prefix{1};
            brute_force(table, 5, 4, penalty, prefix, 0.0, best);
            const auto b = run(table, DecodeConfig::Mode::beam, 64, 5, penalty);
            CHECK(b.tokens == best.tokens);
            CHECK(b.logprob == doctest::Approx(best.logprob).epsilon(1e-12));
        }
    }
}

TEST_CASE("width-1 beam equals greedy") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto table = random_table(seed, 7);
        const auto g = run(table, DecodeConfig::Mode::greedy, 1, 10);
        const auto b = run(table, DecodeConfig::Mode::beam, 1, 10);
        CHECK(g.tokens == b.tokens);
        CHECK(g.truncated == b.truncated);
        CHECK(g.logprob == doctest::Approx(b.logprob).epsilon(1e-12));
    }
    ModelConfig mc;
    mc.d_model = 8;
    mc.n_layers = 1;
    mc.n_heads = 2;
    mc.max_len = 10;
    mc.vocab_size = 9;
    mc.feature_dim = 4;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        mc.seed = seed;
        const auto p = init_parameters(mc);
        DecodeConfig g;
        g.mode = DecodeConfig::Mode::greedy;
        g.max_len = 10;
        DecodeConfig b = g;
        b.mode = DecodeConfig::Mode::beam;
        b.width = 1;
        const FeatureVec f{1, 0, static_cast<std::uint8_t>(seed % 2), 1};
        CHECK(decode(p, f, g).tokens == decode(p, f, b).tokens);
    }
}

TEST_CASE("emitted aliases are folded before being fed back") {
    // 0 pad, 1 bos, 2 eos, 3 unk, 4 a, 5 cat, 6 ##a
    TokenSeq seen;
    const TableScorer::Table table = [&seen](const TokenSeq& p) {
        seen = p;
        if (p.size() == 1) return one_hot_logits(7, 6);
        if (p.back() == 4) return one_hot_logits(7, 5);
        return one_hot_logits(7, 2);
    };
    const auto fold = [](TokenId t) { return t == 6 ? 4 : t; };
    const auto d = run(table, DecodeConfig::Mode::greedy, 1, 8, 1.0, fold);
    CHECK(d.tokens == TokenSeq{1, 4, 5, 2});
    CHECK(seen == TokenSeq{1, 4, 5});
}

TEST_CASE("decode config validation") {
    DecodeConfig c;
    CHECK_NOTHROW(c.validate(32));
    c.width = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.max_len = 40;
    CHECK_THROWS_AS(c.validate(32), std::invalid_argument);
    CHECK_NOTHROW(c.validate());
    c = {};
    c.max_len = 1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.length_penalty = -1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.mode = DecodeConfig::Mode::greedy;
    c.width = 5;
    CHECK(decode_config_from_json(to_json(c)) == c);
}
