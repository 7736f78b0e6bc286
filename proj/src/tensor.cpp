#include "smile/tensor.hpp"

#include <algorithm>
#include <cassert>

namespace smile {

void Matrix::zero() { std::fill(data.begin(), data.end(), 0.0); }

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t n, std::span<const double> bias) {
    assert(a.size() >= m * k && b.size() >= k * n && out.size() >= m * n);
    for (std::size_t i = 0; i < m; ++i) {
        double* o = out.data() + i * n;
        if (bias.empty()) {
            std::fill(o, o + n, 0.0);
        } else {
            std::copy(bias.begin(), bias.begin() + static_cast<std::ptrdiff_t>(n), o);
        }
        const double* ai = a.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                o[j] += av * bp[j];
            }
        }
    }
}

void matmul_at_b_acc(std::span<const double> a, std::span<const double> b, std::span<double> out,
                     std::size_t m, std::size_t k, std::size_t n) {
    assert(a.size() >= m * k && b.size() >= m * n && out.size() >= k * n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a.data() + i * k;
        const double* bi = b.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) {
                continue;
            }
            double* op = out.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                op[j] += av * bi[j];
            }
        }
    }
}

void matmul_a_bt(std::span<const double> a, std::span<const double> b, std::span<double> out,
                 std::size_t m, std::size_t n, std::size_t k) {
    assert(a.size() >= m * n && b.size() >= k * n && out.size() >= m * k);
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a.data() + i * n;
        for (std::size_t j = 0; j < k; ++j) {
            const double* bj = b.data() + j * n;
            double s = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                s += ai[p] * bj[p];
            }
            out[i * k + j] = s;
        }
    }
}

void column_sum_acc(std::span<const double> a, std::span<double> out, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out[j] += a[i * n + j];
        }
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

}  // namespace smile
