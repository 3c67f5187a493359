// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sgc/error.hpp"
#include "sgc/linalg.hpp"
#include "sgc/sparse_vector.hpp"
#include "sgc/tensor.hpp"

namespace sgc {

/// Early-stop tolerance used when the caller does not supply one: 1e-10 ‖y‖.
inline constexpr double kDefaultRelativeTol = 1e-10;

inline double default_tol(std::span<const double> y) {
    double sq = 0.0;
    for (double x : y) sq += x * x;
    return kDefaultRelativeTol * std::sqrt(sq);
}

struct RecoveryResult {
    SparseVector estimate;                 // support sorted ascending
    std::vector<std::size_t> support;      // selection order
    double residual_norm = 0.0;            // ‖y − A·estimate‖
    std::size_t iterations = 0;
    std::vector<double> residual_history;  // ‖r‖ after each iteration, r⁰ first
};

/// Column norms of A and, optionally, the Gram matrix AᵀA. Read-only after
/// construction and shareable between recoveries that use the same A.
class GramCache {
public:
    /// Precompute the Gram matrix only when d² ≤ this many entries.
    static constexpr std::size_t kDefaultBudget = std::size_t{1} << 24;

    GramCache() = default;

    explicit GramCache(const DenseMatrix& a, std::size_t budget = kDefaultBudget)
        : dim_(a.cols()), column_norms_(a.cols()) {
        const std::size_t d = a.cols();
        if (d * d <= budget) {
            gram_ = matmul_transposed_lhs(a, a);
            for (std::size_t i = 0; i < d; ++i) column_norms_[i] = std::sqrt((*gram_)(i, i));
        } else {
            for (std::size_t r = 0; r < a.rows(); ++r) {
                const auto row = a.row(r);
                for (std::size_t i = 0; i < d; ++i) column_norms_[i] += row[i] * row[i];
            }
            for (double& x : column_norms_) x = std::sqrt(x);
        }
    }

    std::size_t dim() const noexcept { return dim_; }
    bool has_gram() const noexcept { return gram_.has_value(); }
    const DenseMatrix& gram() const { return *gram_; }
    const std::vector<double>& column_norms() const noexcept { return column_norms_; }

    /// Column λ of AᵀA, from the cache or computed on demand in O(k·d).
    DenseVector gram_column(const DenseMatrix& a, std::size_t lambda) const {
        DenseVector col(dim_);
        if (gram_) {
            for (std::size_t i = 0; i < dim_; ++i) col[i] = (*gram_)(i, lambda);
            return col;
        }
        for (std::size_t r = 0; r < a.rows(); ++r) {
            const auto row = a.row(r);
            const double x = row[lambda];
            if (x == 0.0) continue;
            for (std::size_t i = 0; i < dim_; ++i) col[i] += x * row[i];
        }
        return col;
    }

private:
    std::size_t dim_ = 0;
    std::optional<DenseMatrix> gram_;
    std::vector<double> column_norms_;
};

namespace detail {

inline void check_recovery_args(const DenseMatrix& a, std::size_t y_len, std::size_t s) {
    require(y_len == a.rows(), ErrorKind::InvalidDimension,
            "measurement length " + std::to_string(y_len) + " != matrix rows " + std::to_string(a.rows()));
    require(s <= a.rows() && a.rows() <= a.cols(), ErrorKind::InvalidSparsity,
            "recovery needs s <= k <= d, got s=" + std::to_string(s) + " k=" + std::to_string(a.rows()) +
                " d=" + std::to_string(a.cols()));
}

inline void check_columns(std::span<const double> norms) {
    for (std::size_t i = 0; i < norms.size(); ++i) {
        require(norms[i] > 0.0, ErrorKind::DegenerateMatrix,
                "column " + std::to_string(i) + " of the measurement matrix is zero");
    }
}

/// argmax_i |p_i| / norm_i over unselected i; lowest index on ties.
inline std::size_t select_atom(std::span<const double> p, std::span<const double> norms,
                               const std::vector<char>& taken) {
    std::size_t best = p.size();
    double best_score = -1.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (taken[i]) continue;
        const double score = std::abs(p[i]) / norms[i];
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

inline double residual_norm(const DenseMatrix& a, std::span<const double> y,
                            const std::vector<std::size_t>& support, std::span<const double> coef) {
    double sq = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double acc = y[r];
        const auto row = a.row(r);
        for (std::size_t j = 0; j < support.size(); ++j) acc -= row[support[j]] * coef[j];
        sq += acc * acc;
    }
    return std::sqrt(sq);
}

inline SparseVector sorted_estimate(std::size_t dim, const std::vector<std::size_t>& support,
                                    std::span<const double> coef) {
    std::vector<std::size_t> order(support.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return support[l] < support[r]; });
    std::vector<std::size_t> idx;
    std::vector<double> val;
    idx.reserve(order.size());
    val.reserve(order.size());
    for (std::size_t o : order) {
        idx.push_back(support[o]);
        val.push_back(coef[o]);
    }
    return SparseVector(dim, std::move(idx), std::move(val));
}

inline DenseMatrix gather_columns(const DenseMatrix& a, const std::vector<std::size_t>& support) {
    DenseMatrix cols(a.rows(), support.size());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t j = 0; j < support.size(); ++j) cols(r, j) = a(r, support[j]);
    return cols;
}

} // namespace detail

/// Reference OMP: correlate, pick the best normalized column, re-fit all
/// selected coefficients by least squares (Householder QR), repeat s times or
/// until ‖r‖ ≤ tol.
inline RecoveryResult omp_naive(const DenseMatrix& a, std::span<const double> y, std::size_t s, double tol) {
    detail::check_recovery_args(a, y.size(), s);
    const std::size_t d = a.cols();
    std::vector<double> norms(d, 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t i = 0; i < d; ++i) norms[i] += a(r, i) * a(r, i);
    for (double& x : norms) x = std::sqrt(x);
    detail::check_columns(norms);

    RecoveryResult out;
    std::vector<char> taken(d, 0);
    std::vector<double> residual(y.begin(), y.end());
    std::vector<double> coef;
    double rnorm = detail::residual_norm(a, y, {}, {});
    out.residual_history.push_back(rnorm);

    while (out.support.size() < s && rnorm > tol) {
        const DenseVector corr = matvec_transposed(a, residual);
        const std::size_t lambda = detail::select_atom(corr.span(), norms, taken);
        taken[lambda] = 1;
        out.support.push_back(lambda);
        coef = least_squares(detail::gather_columns(a, out.support), y);
        for (std::size_t r = 0; r < a.rows(); ++r) {
            double acc = y[r];
            for (std::size_t j = 0; j < out.support.size(); ++j) acc -= a(r, out.support[j]) * coef[j];
            residual[r] = acc;
        }
        rnorm = std::sqrt(std::inner_product(residual.begin(), residual.end(), residual.begin(), 0.0));
        out.residual_history.push_back(rnorm);
    }

    out.iterations = out.support.size();
    out.residual_norm = rnorm;
    out.estimate = detail::sorted_estimate(d, out.support, coef);
    return out;
}

inline RecoveryResult omp_naive(const DenseMatrix& a, const DenseVector& y, std::size_t s, double tol) {
    return omp_naive(a, y.span(), s, tol);
}

/// OMP by inverse Cholesky factorization.
///
/// Keeps p = Aᵀr implicitly through rank-one downdates p ← p − b·a, the
/// columns b of B = G_{:,Λ} F and the upper-triangular inverse Cholesky factor
/// F of A_Λᵀ A_Λ, so each iteration costs O(d·|Λ|) given Gram columns. The
/// estimate is x̂ = F a. Real arithmetic: Hermitian transposes are transposes.
inline RecoveryResult omp_cholesky(const DenseMatrix& a, const GramCache& cache, std::span<const double> y,
                                   std::size_t s, double tol) {
    detail::check_recovery_args(a, y.size(), s);
    require(cache.dim() == a.cols(), ErrorKind::InvalidDimension, "gram cache built for a different matrix");
    const std::size_t d = a.cols();
    const auto& norms = cache.column_norms();
    detail::check_columns(norms);

    RecoveryResult out;
    std::vector<char> taken(d, 0);
    DenseVector p = matvec_transposed(a, y);
    std::vector<DenseVector> b_cols;   // B_k, column j has length d
    std::vector<double> alpha;         // a_k
    std::vector<std::vector<double>> f_cols; // F_k by columns; column j has j+1 entries
    std::vector<double> coef;

    double rnorm = detail::residual_norm(a, y, {}, {});
    out.residual_history.push_back(rnorm);

    for (std::size_t k = 1; k <= s && rnorm > tol; ++k) {
        if (k > 1) {
            const DenseVector& b_prev = b_cols.back();
            const double a_prev = alpha.back();
            for (std::size_t i = 0; i < d; ++i) p[i] -= b_prev[i] * a_prev;
        }
        const std::size_t lambda = detail::select_atom(p.span(), norms, taken);
        taken[lambda] = 1;

        // c_{k-1}: row λ of B_{k-1}.
        std::vector<double> c(k - 1);
        for (std::size_t j = 0; j + 1 < k; ++j) c[j] = b_cols[j][lambda];
        const DenseVector g_col = cache.gram_column(a, lambda);
        const double ctc = std::inner_product(c.begin(), c.end(), c.begin(), 0.0);
        const double pivot = g_col[lambda] - ctc;
        if (!(pivot > 1e-14 * g_col[lambda])) throw CholeskyBreakdownError(k, pivot);
        const double gamma = 1.0 / std::sqrt(pivot);

        alpha.push_back(gamma * p[lambda]);

        DenseVector b_new(d);
        for (std::size_t i = 0; i < d; ++i) {
            double acc = g_col[i];
            for (std::size_t j = 0; j + 1 < k; ++j) acc -= b_cols[j][i] * c[j];
            b_new[i] = gamma * acc;
        }
        b_cols.push_back(std::move(b_new));

        // New last column of F: [−γ F_{k−1} c ; γ].
        std::vector<double> f_new(k, 0.0);
        for (std::size_t j = 0; j + 1 < k; ++j) {
            const auto& fj = f_cols[j];
            for (std::size_t i = 0; i <= j; ++i) f_new[i] -= gamma * fj[i] * c[j];
        }
        f_new[k - 1] = gamma;
        f_cols.push_back(std::move(f_new));
        out.support.push_back(lambda);

        // x̂ = F a, used for the residual-based early stop.
        coef.assign(k, 0.0);
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t i = 0; i <= j; ++i) coef[i] += f_cols[j][i] * alpha[j];
        rnorm = detail::residual_norm(a, y, out.support, coef);
        out.residual_history.push_back(rnorm);
    }

    out.iterations = out.support.size();
    out.residual_norm = rnorm;
    out.estimate = detail::sorted_estimate(d, out.support, coef);
    return out;
}

inline RecoveryResult omp_cholesky(const DenseMatrix& a, const GramCache& cache, const DenseVector& y,
                                   std::size_t s, double tol) {
    return omp_cholesky(a, cache, y.span(), s, tol);
}

/// Recovers two measurement vectors that share a sparsity pattern: OMP on `m`
/// fixes the support S, then `v` is fitted by least squares on A_S.
inline std::pair<RecoveryResult, RecoveryResult> joint_recover(const DenseMatrix& a, const GramCache& cache,
                                                               std::span<const double> m,
                                                               std::span<const double> v, std::size_t s,
                                                               double tol) {
    require(v.size() == a.rows(), ErrorKind::InvalidDimension, "second moment length mismatch");
    RecoveryResult first = omp_cholesky(a, cache, m, s, tol);

    RecoveryResult second;
    second.support = first.support;
    second.iterations = first.iterations;
    std::vector<double> coef;
    if (!first.support.empty()) coef = least_squares(detail::gather_columns(a, first.support), v);
    second.residual_norm = detail::residual_norm(a, v, second.support, coef);
    second.residual_history.push_back(second.residual_norm);
    second.estimate = detail::sorted_estimate(a.cols(), second.support, coef);
    return {std::move(first), std::move(second)};
}

inline std::pair<RecoveryResult, RecoveryResult> joint_recover(const DenseMatrix& a, const GramCache& cache,
                                                               const DenseVector& m, const DenseVector& v,
                                                               std::size_t s, double tol) {
    return joint_recover(a, cache, m.span(), v.span(), s, tol);
}

} // namespace sgc
