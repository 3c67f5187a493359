// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sgc/error.hpp"
#include "sgc/rng.hpp"

namespace sgc {

/// Dense real vector. Holds gradients, weights, update directions and the
/// compressed moments.
class DenseVector {
public:
    DenseVector() = default;
    explicit DenseVector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
    DenseVector(std::initializer_list<double> values) : data_(values) {}
    explicit DenseVector(std::vector<double> values) : data_(std::move(values)) {}
    explicit DenseVector(std::span<const double> values) : data_(values.begin(), values.end()) {}

    static DenseVector zeros(std::size_t n) { return DenseVector(n, 0.0); }

    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> span() noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    void fill(double value) { std::fill(data_.begin(), data_.end(), value); }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
    }

    double squared_norm() const noexcept {
        return std::inner_product(data_.begin(), data_.end(), data_.begin(), 0.0);
    }
    double norm() const noexcept { return std::sqrt(squared_norm()); }

    friend bool operator==(const DenseVector&, const DenseVector&) = default;

private:
    std::vector<double> data_;
};

/// Row-major dense matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        require(data_.size() == rows_ * cols_, ErrorKind::InvalidDimension,
                "matrix data length " + std::to_string(data_.size()) + " != " +
                    std::to_string(rows_) + "x" + std::to_string(cols_));
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    DenseVector column(std::size_t c) const {
        DenseVector out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }

    DenseMatrix transpose() const {
        DenseMatrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<const double> span() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// k x d matrix with i.i.d. N(0, 1/k) entries, filled row-major from `rng`.
inline DenseMatrix gaussian_matrix(std::size_t k, std::size_t d, Rng& rng) {
    require(k >= 1 && d >= 1, ErrorKind::InvalidDimension,
            "gaussian_matrix needs k >= 1 and d >= 1, got " + std::to_string(k) + "x" +
                std::to_string(d));
    DenseMatrix a(k, d);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(k));
    double* p = a.data();
    for (std::size_t i = 0, n = a.size(); i < n; ++i) p[i] = stddev * rng.normal();
    return a;
}

inline DenseVector matvec(const DenseMatrix& m, std::span<const double> v) {
    require(m.cols() == v.size(), ErrorKind::InvalidDimension,
            "matvec: matrix has " + std::to_string(m.cols()) + " columns, vector has " +
                std::to_string(v.size()));
    DenseVector out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        out[r] = std::inner_product(row.begin(), row.end(), v.begin(), 0.0);
    }
    return out;
}

inline DenseVector matvec(const DenseMatrix& m, const DenseVector& v) { return matvec(m, v.span()); }

/// mᵀ v.
inline DenseVector matvec_transposed(const DenseMatrix& m, std::span<const double> v) {
    require(m.rows() == v.size(), ErrorKind::InvalidDimension,
            "matvec_transposed: matrix has " + std::to_string(m.rows()) + " rows, vector has " +
                std::to_string(v.size()));
    DenseVector out(m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double scale = v[r];
        if (scale == 0.0) continue;
        const auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) out[c] += scale * row[c];
    }
    return out;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols() == b.rows(), ErrorKind::InvalidDimension,
            "matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                std::to_string(b.rows()) + " differ");
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out_row = out.row(i);
        for (std::size_t p = 0; p < a.cols(); ++p) {
            const double x = a(i, p);
            if (x == 0.0) continue;
            const auto b_row = b.row(p);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += x * b_row[j];
        }
    }
    return out;
}

/// aᵀ b without forming the transpose.
inline DenseMatrix matmul_transposed_lhs(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.rows() == b.rows(), ErrorKind::InvalidDimension,
            "matmul_transposed_lhs: row counts " + std::to_string(a.rows()) + " and " +
                std::to_string(b.rows()) + " differ");
    DenseMatrix out(a.cols(), b.cols());
    for (std::size_t p = 0; p < a.rows(); ++p) {
        const auto a_row = a.row(p);
        const auto b_row = b.row(p);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double x = a_row[i];
            if (x == 0.0) continue;
            auto out_row = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += x * b_row[j];
        }
    }
    return out;
}

/// Splits `v` into `c` contiguous views of length size/c. No padding.
inline std::vector<std::span<const double>> chunk_views(std::span<const double> v, std::size_t c) {
    require(c >= 1 && !v.empty() && v.size() % c == 0, ErrorKind::InvalidChunking,
            "cannot split length " + std::to_string(v.size()) + " into " + std::to_string(c) +
                " equal chunks");
    const std::size_t len = v.size() / c;
    std::vector<std::span<const double>> views;
    views.reserve(c);
    for (std::size_t i = 0; i < c; ++i) views.push_back(v.subspan(i * len, len));
    return views;
}

inline std::vector<std::span<const double>> chunk_views(const DenseVector& v, std::size_t c) {
    return chunk_views(v.span(), c);
}

inline DenseVector elementwise_square(const DenseVector& v) {
    DenseVector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * v[i];
    return out;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorKind::InvalidDimension, "max_abs_diff: length mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

} // namespace sgc
