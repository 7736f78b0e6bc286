#pragma once

// Helpers shared by the test files. The reference computations here are written
// independently of the library code they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include "smile/model.hpp"
#include "smile/objectives.hpp"

namespace support {

/// -log of the softmax probability of `label` among `admitted`, in long double.
inline double reference_ce(const std::vector<double>& z, smile::TokenId label, const std::set<smile::TokenId>& admitted) {
    long double m = -INFINITY;
    for (auto j : admitted) m = std::max<long double>(m, z[static_cast<std::size_t>(j)]);
    long double s = 0;
    for (auto j : admitted) s += std::exp(static_cast<long double>(z[static_cast<std::size_t>(j)]) - m);
    return static_cast<double>(std::log(s) + m - z[static_cast<std::size_t>(label)]);
}

inline smile::LogitsBatch random_logits(std::mt19937_64& rng, std::size_t b, std::size_t t, std::size_t v,
                                        double scale) {
    smile::LogitsBatch l(b, t, v);
    std::normal_distribution<double> n(0.0, scale);
    for (auto& x : l.values) x = n(rng);
    return l;
}

/// Labels drawn from 1..v-1 (0 is PAD). With `ragged`, each row keeps a random
/// non-empty prefix and the rest is PAD.
inline smile::LabelBatch random_labels(std::mt19937_64& rng, std::size_t b, std::size_t t, std::size_t v,
                                       bool ragged) {
    smile::LabelBatch lb(b, t);
    std::uniform_int_distribution<int> tok(1, static_cast<int>(v) - 1);
    std::uniform_int_distribution<std::size_t> len(1, t);
    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t n = ragged ? len(rng) : t;
        for (std::size_t j = 0; j < n; ++j) lb.at(i, j) = tok(rng);
    }
    return lb;
}

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, floor) over all logits.
/// With `five_point` the numeric side uses the fourth-order stencil, whose error
/// sits far below 1e-8 at h = 1e-3.
inline double max_fd_error(const smile::LogitsBatch& at, const smile::LogitsBatch& grad,
                           const std::function<double(const smile::LogitsBatch&)>& f, double h = 1e-5,
                           double floor = 1e-2, bool five_point = false) {
    double worst = 0.0;
    smile::LogitsBatch x = at;
    auto eval_at = [&](std::size_t i, double keep, double step) {
        x.values[i] = keep + step;
        const double y = f(x);
        x.values[i] = keep;
        return y;
    };
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        const double keep = x.values[i];
        const double d1 = eval_at(i, keep, h) - eval_at(i, keep, -h);
        double fd = d1 / (2 * h);
        if (five_point) fd = (8 * d1 - (eval_at(i, keep, 2 * h) - eval_at(i, keep, -2 * h))) / (12 * h);
        const double g = grad.values[i];
        worst = std::max(worst, std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), floor}));
    }
    return worst;
}

}  // namespace support
