#include "smile/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

namespace smile {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double gelu(double u) { return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + kGeluA * u * u * u))); }

double gelu_grad(double u) {
    const double inner = kGeluC * (u + kGeluA * u * u * u);
    const double t = std::tanh(inner);
    return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * u * u);
}

// Row-wise LayerNorm. Stores the normalized input and 1/std for backward.
void layer_norm(std::span<const double> x, std::span<double> xhat, std::span<double> rstd, std::span<double> y,
                const Matrix& g, const Matrix& b, std::size_t rows, std::size_t d) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * d;
        double mean = 0.0;
        for (std::size_t i = 0; i < d; ++i) mean += xr[i];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
        var /= static_cast<double>(d);
        const double rs = 1.0 / std::sqrt(var + kLnEps);
        rstd[r] = rs;
        for (std::size_t i = 0; i < d; ++i) {
            const double h = (xr[i] - mean) * rs;
            xhat[r * d + i] = h;
            y[r * d + i] = h * g.data[i] + b.data[i];
        }
    }
}

// dx += LayerNorm backward of dy.
void layer_norm_backward(std::span<const double> dy, std::span<const double> xhat, std::span<const double> rstd,
                         const Matrix& g, Matrix& dg, Matrix& db, std::span<double> dx, std::size_t rows,
                         std::size_t d) {
    std::vector<double> dxhat(d);
    for (std::size_t r = 0; r < rows; ++r) {
        double sum_dxhat = 0.0;
        double sum_dxhat_xhat = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double gy = dy[r * d + i];
            const double h = xhat[r * d + i];
            dg.data[i] += gy * h;
            db.data[i] += gy;
            dxhat[i] = gy * g.data[i];
            sum_dxhat += dxhat[i];
            sum_dxhat_xhat += dxhat[i] * h;
        }
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t i = 0; i < d; ++i) {
            dx[r * d + i] += rstd[r] * (dxhat[i] - sum_dxhat * inv_d - xhat[r * d + i] * sum_dxhat_xhat * inv_d);
        }
    }
}

void fill_uniform(Matrix& m, double scale, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (double& v : m.data) v = dist(rng);
}

void fill_value(Matrix& m, double v) { std::fill(m.data.begin(), m.data.end(), v); }

}  // namespace

// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
    if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || max_len < 3 || vocab_size <= 0 || feature_dim <= 0) {
        throw std::invalid_argument("model config sizes must be positive (max_len >= 3)");
    }
    if (d_model % n_heads != 0) {
        throw std::invalid_argument("d_model must be divisible by n_heads");
    }
}

nlohmann::json to_json(const ModelConfig& c) {
    return {{"d_model", c.d_model},       {"n_layers", c.n_layers},       {"n_heads", c.n_heads},
            {"max_len", c.max_len},       {"vocab_size", c.vocab_size},   {"feature_dim", c.feature_dim},
            {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.d_model = j.value("d_model", c.d_model);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.max_len = j.value("max_len", c.max_len);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.seed = j.value("seed", c.seed);
    return c;
}

Parameters Parameters::zeros(const ModelConfig& config) {
    config.validate();
    const auto d = static_cast<std::size_t>(config.d_model);
    const auto v = static_cast<std::size_t>(config.vocab_size);
    Parameters p;
    p.config = config;
    p.tok_emb = Matrix(v, d);
    p.pos_emb = Matrix(static_cast<std::size_t>(config.max_len), d);
    p.feat_w = Matrix(static_cast<std::size_t>(config.feature_dim), d);
    p.feat_b = Matrix(1, d);
    p.blocks.resize(static_cast<std::size_t>(config.n_layers));
    for (auto& b : p.blocks) {
        b.ln1_g = Matrix(1, d);
        b.ln1_b = Matrix(1, d);
        b.w_qkv = Matrix(d, 3 * d);
        b.b_qkv = Matrix(1, 3 * d);
        b.w_proj = Matrix(d, d);
        b.b_proj = Matrix(1, d);
        b.ln2_g = Matrix(1, d);
        b.ln2_b = Matrix(1, d);
        b.w_ff1 = Matrix(d, 4 * d);
        b.b_ff1 = Matrix(1, 4 * d);
        b.w_ff2 = Matrix(4 * d, d);
        b.b_ff2 = Matrix(1, d);
    }
    p.lnf_g = Matrix(1, d);
    p.lnf_b = Matrix(1, d);
    p.w_out = Matrix(d, v);
    p.b_out = Matrix(1, v);
    return p;
}

std::size_t Parameters::count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Matrix& m) { n += m.size(); });
    return n;
}

std::size_t parameter_count(const ModelConfig& c) {
    const auto d = static_cast<std::size_t>(c.d_model);
    const auto v = static_cast<std::size_t>(c.vocab_size);
    const auto f = static_cast<std::size_t>(c.feature_dim);
    const auto len = static_cast<std::size_t>(c.max_len);
    const std::size_t per_block = 2 * d + (3 * d * d + 3 * d) + (d * d + d) + 2 * d + (4 * d * d + 4 * d) + (4 * d * d + d);
    return v * d + len * d + f * d + d + static_cast<std::size_t>(c.n_layers) * per_block + 2 * d + d * v + v;
}

Parameters init_parameters(const ModelConfig& config) {
    Parameters p = Parameters::zeros(config);
    std::mt19937_64 rng(config.seed);
    const auto d = static_cast<double>(config.d_model);
    const double resid = 1.0 / std::sqrt(2.0 * config.n_layers);
    fill_uniform(p.tok_emb, 0.1, rng);
    fill_uniform(p.pos_emb, 0.1, rng);
    fill_uniform(p.feat_w, 1.0 / std::sqrt(static_cast<double>(config.feature_dim)), rng);
    for (auto& b : p.blocks) {
        fill_value(b.ln1_g, 1.0);
        fill_uniform(b.w_qkv, 1.0 / std::sqrt(d), rng);
        fill_uniform(b.w_proj, resid / std::sqrt(d), rng);
        fill_value(b.ln2_g, 1.0);
        fill_uniform(b.w_ff1, 1.0 / std::sqrt(d), rng);
        fill_uniform(b.w_ff2, resid / std::sqrt(4.0 * d), rng);
    }
    fill_value(p.lnf_g, 1.0);
    fill_uniform(p.w_out, 1.0 / std::sqrt(d), rng);
    return p;
}

// ---------------------------------------------------------------------------
// Forward / backward

struct LayerTape {
    Matrix x_in;     // S x d
    Matrix xhat1;    // S x d
    std::vector<double> rstd1;
    Matrix a1;       // S x d
    Matrix qkv;      // S x 3d
    std::vector<Matrix> probs;  // per head, S x S (lower triangular)
    Matrix att;      // S x d
    Matrix x_mid;    // S x d
    Matrix xhat2;
    std::vector<double> rstd2;
    Matrix a2;
    Matrix u;        // S x 4d
    Matrix g;        // S x 4d
};

struct SequenceTape {
    std::size_t slots = 0;
    std::vector<double> features;
    TokenSeq tokens;
    std::vector<LayerTape> layers;
    Matrix x_final;
    Matrix xhatf;
    std::vector<double> rstdf;
    Matrix hf;
};

Tape::Tape() : seqs_(std::make_unique<std::vector<SequenceTape>>()) {}
Tape::~Tape() = default;
Tape::Tape(Tape&&) noexcept = default;
Tape& Tape::operator=(Tape&&) noexcept = default;

namespace {

void attention_forward(const Matrix& qkv, std::vector<Matrix>& probs, Matrix& att, std::size_t S, std::size_t d,
                       std::size_t heads) {
    const std::size_t dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    probs.assign(heads, Matrix(S, S));
    std::vector<double> scores(S);
    for (std::size_t h = 0; h < heads; ++h) {
        Matrix& P = probs[h];
        for (std::size_t i = 0; i < S; ++i) {
            const double* q = qkv.data.data() + i * 3 * d + h * dh;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j <= i; ++j) {
                const double* k = qkv.data.data() + j * 3 * d + d + h * dh;
                double s = 0.0;
                for (std::size_t e = 0; e < dh; ++e) s += q[e] * k[e];
                scores[j] = s * scale;
                mx = std::max(mx, scores[j]);
            }
            double z = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                scores[j] = std::exp(scores[j] - mx);
                z += scores[j];
            }
            double* out = att.data.data() + i * d + h * dh;
            std::fill(out, out + dh, 0.0);
            for (std::size_t j = 0; j <= i; ++j) {
                const double p = scores[j] / z;
                P(i, j) = p;
                const double* v = qkv.data.data() + j * 3 * d + 2 * d + h * dh;
                for (std::size_t e = 0; e < dh; ++e) out[e] += p * v[e];
            }
        }
    }
}

void attention_backward(const Matrix& qkv, const std::vector<Matrix>& probs, const Matrix& datt, Matrix& dqkv,
                        std::size_t S, std::size_t d, std::size_t heads) {
    const std::size_t dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> dP(S);
    for (std::size_t h = 0; h < heads; ++h) {
        const Matrix& P = probs[h];
        for (std::size_t i = 0; i < S; ++i) {
            const double* dout = datt.data.data() + i * d + h * dh;
            double acc = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                const double* v = qkv.data.data() + j * 3 * d + 2 * d + h * dh;
                double* dv = dqkv.data.data() + j * 3 * d + 2 * d + h * dh;
                double s = 0.0;
                for (std::size_t e = 0; e < dh; ++e) {
                    s += dout[e] * v[e];
                    dv[e] += P(i, j) * dout[e];
                }
                dP[j] = s;
                acc += P(i, j) * s;
            }
            const double* q = qkv.data.data() + i * 3 * d + h * dh;
            double* dq = dqkv.data.data() + i * 3 * d + h * dh;
            for (std::size_t j = 0; j <= i; ++j) {
                const double ds = P(i, j) * (dP[j] - acc) * scale;
                const double* k = qkv.data.data() + j * 3 * d + d + h * dh;
                double* dk = dqkv.data.data() + j * 3 * d + d + h * dh;
                for (std::size_t e = 0; e < dh; ++e) {
                    dq[e] += ds * k[e];
                    dk[e] += ds * q[e];
                }
            }
        }
    }
}

std::size_t effective_length(const TokenSeq& seq, TokenId pad) {
    std::size_t n = seq.size();
    while (n > 0 && seq[n - 1] == pad) --n;
    return n;
}

void embed_slot(const Parameters& p, std::size_t slot, std::span<const double> features, TokenId token,
                std::span<double> out) {
    const auto d = static_cast<std::size_t>(p.config.d_model);
    const auto pos = p.pos_emb.row(slot);
    if (slot == 0) {
        for (std::size_t i = 0; i < d; ++i) out[i] = p.feat_b.data[i] + pos[i];
        for (std::size_t f = 0; f < features.size(); ++f) {
            if (features[f] == 0.0) continue;
            const auto w = p.feat_w.row(f);
            for (std::size_t i = 0; i < d; ++i) out[i] += features[f] * w[i];
        }
    } else {
        const auto e = p.tok_emb.row(static_cast<std::size_t>(token));
        for (std::size_t i = 0; i < d; ++i) out[i] = e[i] + pos[i];
    }
}

SequenceTape forward_sequence(const Parameters& p, const FeatureVec& features, const TokenSeq& tokens,
                              std::span<double> logits_out) {
    const auto d = static_cast<std::size_t>(p.config.d_model);
    const auto V = static_cast<std::size_t>(p.config.vocab_size);
    const auto H = static_cast<std::size_t>(p.config.n_heads);
    SequenceTape t;
    t.slots = tokens.size() + 1;
    t.tokens = tokens;
    t.features.assign(features.begin(), features.end());
    const std::size_t S = t.slots;

    Matrix x(S, d);
    embed_slot(p, 0, t.features, 0, x.row(0));
    for (std::size_t s = 1; s < S; ++s) embed_slot(p, s, {}, tokens[s - 1], x.row(s));

    t.layers.resize(p.blocks.size());
    for (std::size_t l = 0; l < p.blocks.size(); ++l) {
        const BlockParams& b = p.blocks[l];
        LayerTape& lt = t.layers[l];
        lt.x_in = x;
        lt.xhat1 = Matrix(S, d);
        lt.rstd1.resize(S);
        lt.a1 = Matrix(S, d);
        layer_norm(x.data, lt.xhat1.data, lt.rstd1, lt.a1.data, b.ln1_g, b.ln1_b, S, d);
        lt.qkv = Matrix(S, 3 * d);
        matmul(lt.a1.data, b.w_qkv.data, lt.qkv.data, S, d, 3 * d, b.b_qkv.data);
        lt.att = Matrix(S, d);
        attention_forward(lt.qkv, lt.probs, lt.att, S, d, H);
        Matrix y(S, d);
        matmul(lt.att.data, b.w_proj.data, y.data, S, d, d, b.b_proj.data);
        lt.x_mid = Matrix(S, d);
        for (std::size_t i = 0; i < S * d; ++i) lt.x_mid.data[i] = x.data[i] + y.data[i];
        lt.xhat2 = Matrix(S, d);
        lt.rstd2.resize(S);
        lt.a2 = Matrix(S, d);
        layer_norm(lt.x_mid.data, lt.xhat2.data, lt.rstd2, lt.a2.data, b.ln2_g, b.ln2_b, S, d);
        lt.u = Matrix(S, 4 * d);
        matmul(lt.a2.data, b.w_ff1.data, lt.u.data, S, d, 4 * d, b.b_ff1.data);
        lt.g = Matrix(S, 4 * d);
        for (std::size_t i = 0; i < lt.u.size(); ++i) lt.g.data[i] = gelu(lt.u.data[i]);
        Matrix z(S, d);
        matmul(lt.g.data, b.w_ff2.data, z.data, S, 4 * d, d, b.b_ff2.data);
        for (std::size_t i = 0; i < S * d; ++i) x.data[i] = lt.x_mid.data[i] + z.data[i];
    }
    t.x_final = x;
    t.xhatf = Matrix(S, d);
    t.rstdf.resize(S);
    t.hf = Matrix(S, d);
    layer_norm(x.data, t.xhatf.data, t.rstdf, t.hf.data, p.lnf_g, p.lnf_b, S, d);
    // Slot s >= 1 predicts the token after input s-1.
    matmul(std::span<const double>(t.hf.data).subspan(d), p.w_out.data, logits_out, S - 1, d, V, p.b_out.data);
    return t;
}

void backward_sequence(const Parameters& p, const SequenceTape& t, std::span<const double> dlogits, Parameters& grad) {
    const auto d = static_cast<std::size_t>(p.config.d_model);
    const auto V = static_cast<std::size_t>(p.config.vocab_size);
    const auto H = static_cast<std::size_t>(p.config.n_heads);
    const std::size_t S = t.slots;
    const std::size_t L = S - 1;

    matmul_at_b_acc(std::span<const double>(t.hf.data).subspan(d), dlogits, grad.w_out.data, L, d, V);
    column_sum_acc(dlogits, grad.b_out.data, L, V);
    Matrix dhf(S, d);
    matmul_a_bt(dlogits, p.w_out.data, std::span<double>(dhf.data).subspan(d), L, V, d);

    Matrix dx(S, d);
    layer_norm_backward(dhf.data, t.xhatf.data, t.rstdf, p.lnf_g, grad.lnf_g, grad.lnf_b, dx.data, S, d);

    for (std::size_t l = p.blocks.size(); l-- > 0;) {
        const BlockParams& b = p.blocks[l];
        BlockParams& gb = grad.blocks[l];
        const LayerTape& lt = t.layers[l];

        // feed-forward branch: x_out = x_mid + gelu(a2 W1 + b1) W2 + b2
        matmul_at_b_acc(lt.g.data, dx.data, gb.w_ff2.data, S, 4 * d, d);
        column_sum_acc(dx.data, gb.b_ff2.data, S, d);
        Matrix du(S, 4 * d);
        matmul_a_bt(dx.data, b.w_ff2.data, du.data, S, d, 4 * d);
        for (std::size_t i = 0; i < du.size(); ++i) du.data[i] *= gelu_grad(lt.u.data[i]);
        matmul_at_b_acc(lt.a2.data, du.data, gb.w_ff1.data, S, d, 4 * d);
        column_sum_acc(du.data, gb.b_ff1.data, S, 4 * d);
        Matrix da2(S, d);
        matmul_a_bt(du.data, b.w_ff1.data, da2.data, S, 4 * d, d);
        Matrix dmid = dx;
        layer_norm_backward(da2.data, lt.xhat2.data, lt.rstd2, b.ln2_g, gb.ln2_g, gb.ln2_b, dmid.data, S, d);

        // attention branch: x_mid = x_in + attn(ln1(x_in)) Wp + bp
        matmul_at_b_acc(lt.att.data, dmid.data, gb.w_proj.data, S, d, d);
        column_sum_acc(dmid.data, gb.b_proj.data, S, d);
        Matrix datt(S, d);
        matmul_a_bt(dmid.data, b.w_proj.data, datt.data, S, d, d);
        Matrix dqkv(S, 3 * d);
        attention_backward(lt.qkv, lt.probs, datt, dqkv, S, d, H);
        matmul_at_b_acc(lt.a1.data, dqkv.data, gb.w_qkv.data, S, d, 3 * d);
        column_sum_acc(dqkv.data, gb.b_qkv.data, S, 3 * d);
        Matrix da1(S, d);
        matmul_a_bt(dqkv.data, b.w_qkv.data, da1.data, S, 3 * d, d);
        dx = std::move(dmid);
        layer_norm_backward(da1.data, lt.xhat1.data, lt.rstd1, b.ln1_g, gb.ln1_g, gb.ln1_b, dx.data, S, d);
    }

    for (std::size_t s = 0; s < S; ++s) {
        const auto g = dx.row(s);
        auto gp = grad.pos_emb.row(s);
        for (std::size_t i = 0; i < d; ++i) gp[i] += g[i];
        if (s == 0) {
            for (std::size_t i = 0; i < d; ++i) grad.feat_b.data[i] += g[i];
            for (std::size_t f = 0; f < t.features.size(); ++f) {
                if (t.features[f] == 0.0) continue;
                auto gw = grad.feat_w.row(f);
                for (std::size_t i = 0; i < d; ++i) gw[i] += t.features[f] * g[i];
            }
        } else {
            auto ge = grad.tok_emb.row(static_cast<std::size_t>(t.tokens[s - 1]));
            for (std::size_t i = 0; i < d; ++i) ge[i] += g[i];
        }
    }
}

}  // namespace

LogitsBatch forward(const Parameters& params, const std::vector<FeatureVec>& features,
                    const std::vector<TokenSeq>& inputs, Tape* tape) {
    if (features.size() != inputs.size()) {
        throw std::invalid_argument("features and inputs batch sizes differ");
    }
    const auto& cfg = params.config;
    const TokenId pad = SpecialIds{}.pad;
    std::vector<std::size_t> lengths(inputs.size());
    std::size_t T = 0;
    for (std::size_t b = 0; b < inputs.size(); ++b) {
        lengths[b] = effective_length(inputs[b], pad);
        if (lengths[b] == 0) {
            throw std::invalid_argument("empty input sequence");
        }
        // Inputs exclude the final EOS, so a caption of max_len tokens gives max_len - 1 inputs.
        if (lengths[b] + 1 > static_cast<std::size_t>(cfg.max_len)) {
            throw std::invalid_argument("sequence length " + std::to_string(lengths[b] + 1) + " exceeds max_len " +
                                        std::to_string(cfg.max_len));
        }
        if (features[b].size() != static_cast<std::size_t>(cfg.feature_dim)) {
            throw std::invalid_argument("feature vector size mismatch");
        }
        for (std::size_t i = 0; i < lengths[b]; ++i) {
            if (inputs[b][i] < 0 || inputs[b][i] >= cfg.vocab_size) {
                throw std::invalid_argument("token id out of range");
            }
        }
        T = std::max(T, lengths[b]);
    }
    LogitsBatch out(inputs.size(), T, static_cast<std::size_t>(cfg.vocab_size));
    out.lengths = lengths;
    if (tape) {
        tape->sequences().clear();
        tape->sequences().reserve(inputs.size());
    }
    for (std::size_t b = 0; b < inputs.size(); ++b) {
        TokenSeq tokens(inputs[b].begin(), inputs[b].begin() + static_cast<std::ptrdiff_t>(lengths[b]));
        std::span<double> dst(out.values.data() + b * T * out.vocab, lengths[b] * out.vocab);
        SequenceTape st = forward_sequence(params, features[b], tokens, dst);
        if (tape) {
            tape->sequences().push_back(std::move(st));
        }
    }
    return out;
}

Parameters backward(const Parameters& params, const Tape& tape, const LogitsBatch& upstream) {
    const auto& seqs = tape.sequences();
    if (upstream.batch != seqs.size() || upstream.vocab != static_cast<std::size_t>(params.config.vocab_size)) {
        throw std::invalid_argument("upstream gradient shape does not match the recorded forward pass");
    }
    Parameters grad = Parameters::zeros(params.config);
    for (std::size_t b = 0; b < seqs.size(); ++b) {
        const std::size_t L = seqs[b].slots - 1;
        if (L > upstream.positions) {
            throw std::invalid_argument("upstream gradient has too few positions");
        }
        std::span<const double> g(upstream.values.data() + b * upstream.positions * upstream.vocab, L * upstream.vocab);
        backward_sequence(params, seqs[b], g, grad);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Incremental decoding

IncrementalState::IncrementalState(const Parameters& params, const FeatureVec& features)
    : params_(&params), keys_(params.blocks.size()), values_(params.blocks.size()) {
    if (features.size() != static_cast<std::size_t>(params.config.feature_dim)) {
        throw std::invalid_argument("feature vector size mismatch");
    }
    const auto d = static_cast<std::size_t>(params.config.d_model);
    std::vector<double> f(features.begin(), features.end());
    std::vector<double> x(d);
    embed_slot(params, 0, f, 0, x);
    run_slot(std::move(x));
}

std::vector<double> IncrementalState::push(TokenId token) {
    const auto& cfg = params_->config;
    if (token < 0 || token >= cfg.vocab_size) {
        throw std::invalid_argument("token id out of range");
    }
    if (slots_ + 1 > static_cast<std::size_t>(cfg.max_len)) {
        throw std::invalid_argument("sequence exceeds max_len");
    }
    std::vector<double> x(static_cast<std::size_t>(cfg.d_model));
    embed_slot(*params_, slots_, {}, token, x);
    return run_slot(std::move(x));
}

std::vector<double> IncrementalState::run_slot(std::vector<double> x) {
    const Parameters& p = *params_;
    const auto d = static_cast<std::size_t>(p.config.d_model);
    const auto H = static_cast<std::size_t>(p.config.n_heads);
    const std::size_t dh = d / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const std::size_t n = slots_ + 1;

    std::vector<double> xhat(d), rstd(1), a(d), qkv(3 * d), att(d), y(d), a2(d), u(4 * d), z(d), scores(n);
    for (std::size_t l = 0; l < p.blocks.size(); ++l) {
        const BlockParams& b = p.blocks[l];
        layer_norm(x, xhat, rstd, a, b.ln1_g, b.ln1_b, 1, d);
        matmul(a, b.w_qkv.data, qkv, 1, d, 3 * d, b.b_qkv.data);
        keys_[l].insert(keys_[l].end(), qkv.begin() + static_cast<std::ptrdiff_t>(d), qkv.begin() + static_cast<std::ptrdiff_t>(2 * d));
        values_[l].insert(values_[l].end(), qkv.begin() + static_cast<std::ptrdiff_t>(2 * d), qkv.end());
        for (std::size_t h = 0; h < H; ++h) {
            const double* q = qkv.data() + h * dh;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n; ++j) {
                const double* k = keys_[l].data() + j * d + h * dh;
                double s = 0.0;
                for (std::size_t e = 0; e < dh; ++e) s += q[e] * k[e];
                scores[j] = s * scale;
                mx = std::max(mx, scores[j]);
            }
            double zsum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                scores[j] = std::exp(scores[j] - mx);
                zsum += scores[j];
            }
            double* out = att.data() + h * dh;
            std::fill(out, out + dh, 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                const double pj = scores[j] / zsum;
                const double* v = values_[l].data() + j * d + h * dh;
                for (std::size_t e = 0; e < dh; ++e) out[e] += pj * v[e];
            }
        }
        matmul(att, b.w_proj.data, y, 1, d, d, b.b_proj.data);
        for (std::size_t i = 0; i < d; ++i) x[i] += y[i];
        layer_norm(x, xhat, rstd, a2, b.ln2_g, b.ln2_b, 1, d);
        matmul(a2, b.w_ff1.data, u, 1, d, 4 * d, b.b_ff1.data);
        for (double& v : u) v = gelu(v);
        matmul(u, b.w_ff2.data, z, 1, 4 * d, d, b.b_ff2.data);
        for (std::size_t i = 0; i < d; ++i) x[i] += z[i];
    }
    ++slots_;
    std::vector<double> hf(d);
    layer_norm(x, xhat, rstd, hf, p.lnf_g, p.lnf_b, 1, d);
    std::vector<double> logits(static_cast<std::size_t>(p.config.vocab_size));
    matmul(hf, p.w_out.data, logits, 1, d, logits.size(), p.b_out.data);
    return logits;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr char kMagic[8] = {'S', 'M', 'I', 'L', 'E', 'C', 'K', '1'};
}

void save_checkpoint(const std::filesystem::path& path, const Parameters& params) {
    nlohmann::json header;
    header["config"] = to_json(params.config);
    header["arrays"] = nlohmann::json::array();
    params.visit([&](const std::string& name, const Matrix& m) {
        header["arrays"].push_back({{"name", name}, {"rows", m.rows}, {"cols", m.cols}});
    });
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    params.visit([&](const std::string&, const Matrix& m) {
        out.write(reinterpret_cast<const char*>(m.data.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    });
    if (!out) {
        throw std::runtime_error("failed writing checkpoint " + path.string());
    }
}

Parameters load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open checkpoint " + path.string());
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("not a checkpoint file: " + path.string());
    }
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    const auto header = nlohmann::json::parse(text);
    Parameters p = Parameters::zeros(model_config_from_json(header.at("config")));
    std::size_t idx = 0;
    const auto& arrays = header.at("arrays");
    p.visit([&](const std::string& name, Matrix& m) {
        if (idx >= arrays.size() || arrays[idx].at("name") != name || arrays[idx].at("rows") != m.rows ||
            arrays[idx].at("cols") != m.cols) {
            throw std::runtime_error("checkpoint layout mismatch at array " + name);
        }
        in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
        ++idx;
    });
    if (!in) {
        throw std::runtime_error("truncated checkpoint " + path.string());
    }
    return p;
}

}  // namespace smile
