#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace smile {

/// Dense row-major matrix of doubles. Vectors are stored as 1 x n.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    std::size_t size() const { return data.size(); }
    void zero();

    bool operator==(const Matrix&) const = default;
};

// Kernels below take raw row-major spans; shapes are (m x k) * (k x n).

/// out = a * b (+ bias broadcast over rows when bias is non-empty).
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t n, std::span<const double> bias = {});

/// out += a^T * b, with a (m x k) and b (m x n); out is (k x n).
void matmul_at_b_acc(std::span<const double> a, std::span<const double> b, std::span<double> out,
                     std::size_t m, std::size_t k, std::size_t n);

/// out = a * b^T, with a (m x n) and b (k x n); out is (m x k).
void matmul_a_bt(std::span<const double> a, std::span<const double> b, std::span<double> out,
                 std::size_t m, std::size_t n, std::size_t k);

/// Column sums of an (m x n) block accumulated into out (length n).
void column_sum_acc(std::span<const double> a, std::span<double> out, std::size_t m, std::size_t n);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace smile
