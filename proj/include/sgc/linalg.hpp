// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sgc/error.hpp"
#include "sgc/rng.hpp"
#include "sgc/tensor.hpp"

namespace sgc {

struct SvdResult {
    DenseMatrix left_vectors;            // m x r, orthonormal columns
    std::vector<double> singular_values; // length r, non-increasing
    DenseMatrix right_vectors;           // n x r
    std::size_t iterations = 0;
};

struct SvdOptions {
    std::size_t max_iters = 200;
    double tol = 1e-10;            // relative change of the top-r singular values
    std::size_t oversample = 8;    // extra block columns beyond r
    std::uint64_t seed = 0x5eed5eedULL;
};

namespace detail {

inline double column_dot(const DenseMatrix& m, std::size_t a, std::size_t b) {
    double acc = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) acc += m(r, a) * m(r, b);
    return acc;
}

} // namespace detail

/// Modified Gram-Schmidt with one re-orthogonalization pass. Columns that
/// collapse (rank deficiency) are replaced by random directions orthogonal to
/// the ones already accepted, so the result always has orthonormal columns.
inline void orthonormalize_columns(DenseMatrix& q, Rng& rng) {
    const std::size_t rows = q.rows();
    require(q.cols() <= rows, ErrorKind::InvalidDimension,
            "cannot orthonormalize more columns than rows");
    for (std::size_t j = 0; j < q.cols(); ++j) {
        const double original = std::sqrt(detail::column_dot(q, j, j));
        for (int attempt = 0;; ++attempt) {
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t p = 0; p < j; ++p) {
                    const double proj = detail::column_dot(q, p, j);
                    for (std::size_t r = 0; r < rows; ++r) q(r, j) -= proj * q(r, p);
                }
            }
            const double norm = std::sqrt(detail::column_dot(q, j, j));
            const double floor = 1e-12 * std::max(original, 1e-300);
            if (norm > floor && norm > 1e-300) {
                for (std::size_t r = 0; r < rows; ++r) q(r, j) /= norm;
                break;
            }
            require(attempt < 16, ErrorKind::DegenerateMatrix,
                    "failed to complete an orthonormal basis");
            for (std::size_t r = 0; r < rows; ++r) q(r, j) = rng.normal();
        }
    }
}

/// Dense SVD by one-sided (Hestenes) Jacobi rotations. Intended for the small
/// projected problems inside truncated_svd; fine up to a few hundred columns.
inline SvdResult jacobi_svd(const DenseMatrix& a) {
    // Work on x = aᵀ when a is wide so the rotated matrix is tall.
    const bool wide = a.rows() < a.cols();
    DenseMatrix x = wide ? a.transpose() : a;
    const std::size_t rows = x.rows();
    const std::size_t cols = x.cols();
    DenseMatrix v = DenseMatrix::identity(cols);

    const double eps = std::numeric_limits<double>::epsilon();
    for (int sweep = 0; sweep < 80; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                const double alpha = detail::column_dot(x, p, p);
                const double beta = detail::column_dot(x, q, q);
                const double gamma = detail::column_dot(x, p, q);
                if (std::abs(gamma) <= eps * std::sqrt(alpha * beta) || gamma == 0.0) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t r = 0; r < rows; ++r) {
                    const double xp = x(r, p);
                    const double xq = x(r, q);
                    x(r, p) = c * xp - s * xq;
                    x(r, q) = s * xp + c * xq;
                }
                for (std::size_t r = 0; r < cols; ++r) {
                    const double vp = v(r, p);
                    const double vq = v(r, q);
                    v(r, p) = c * vp - s * vq;
                    v(r, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }

    std::vector<double> sigma(cols);
    for (std::size_t j = 0; j < cols; ++j) sigma[j] = std::sqrt(detail::column_dot(x, j, j));
    std::vector<std::size_t> order(cols);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t l, std::size_t r) { return sigma[l] > sigma[r]; });

    // x = U Σ (columns of x are σ_j u_j), so x_j/σ_j are the singular vectors on
    // the x side and v holds the other side.
    DenseMatrix u_side(rows, cols);
    DenseMatrix v_side(cols, cols);
    std::vector<double> sorted(cols);
    for (std::size_t k = 0; k < cols; ++k) {
        const std::size_t j = order[k];
        sorted[k] = sigma[j];
        for (std::size_t r = 0; r < rows; ++r) u_side(r, k) = sigma[j] > 0.0 ? x(r, j) / sigma[j] : 0.0;
        for (std::size_t r = 0; r < cols; ++r) v_side(r, k) = v(r, j);
    }
    if (std::any_of(sorted.begin(), sorted.end(), [](double s) { return s == 0.0; })) {
        Rng completion(0x0c0ffeeULL);
        orthonormalize_columns(u_side, completion);
    }

    SvdResult out;
    out.singular_values = std::move(sorted);
    if (wide) {
        out.left_vectors = std::move(v_side);
        out.right_vectors = std::move(u_side);
    } else {
        out.left_vectors = std::move(u_side);
        out.right_vectors = std::move(v_side);
    }
    return out;
}

/// Top-r singular triplets by block power (subspace) iteration with
/// Rayleigh-Ritz extraction.
///
/// Iterates U = orth(M Q), Q = orth(Mᵀ U) with a block of r + oversample
/// columns and stops when the top-r singular values change by at most
/// tol · σ₁ between iterations.
inline SvdResult truncated_svd(const DenseMatrix& m, std::size_t r, const SvdOptions& opts = {}) {
    const std::size_t small = std::min(m.rows(), m.cols());
    require(r >= 1 && r <= small, ErrorKind::InvalidRank,
            "rank " + std::to_string(r) + " outside [1, " + std::to_string(small) + "]");
    const std::size_t block = std::min(small, r + opts.oversample);

    Rng rng(opts.seed);
    DenseMatrix q(m.cols(), block);
    for (std::size_t i = 0; i < q.size(); ++i) q.data()[i] = rng.normal();
    orthonormalize_columns(q, rng);

    std::vector<double> previous(r, -1.0);
    double change = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 1; iter <= opts.max_iters; ++iter) {
        DenseMatrix u = matmul(m, q);
        orthonormalize_columns(u, rng);
        DenseMatrix projected = matmul_transposed_lhs(u, m); // block x n
        SvdResult small_svd = jacobi_svd(projected);

        const double top = small_svd.singular_values.front();
        change = 0.0;
        for (std::size_t i = 0; i < r; ++i) {
            change = std::max(change, std::abs(small_svd.singular_values[i] - previous[i]));
            previous[i] = small_svd.singular_values[i];
        }
        change = top > 0.0 ? change / top : 0.0;

        // A full-width block spans the whole range of m, so Rayleigh-Ritz is exact.
        if ((iter >= 2 && change <= opts.tol) || top == 0.0 || block == small) {
            SvdResult out;
            out.iterations = iter;
            out.left_vectors = DenseMatrix(m.rows(), r);
            out.right_vectors = DenseMatrix(m.cols(), r);
            out.singular_values.assign(small_svd.singular_values.begin(),
                                       small_svd.singular_values.begin() + static_cast<long>(r));
            for (std::size_t i = 0; i < m.rows(); ++i)
                for (std::size_t k = 0; k < r; ++k) {
                    double acc = 0.0;
                    for (std::size_t p = 0; p < block; ++p) acc += u(i, p) * small_svd.left_vectors(p, k);
                    out.left_vectors(i, k) = acc;
                }
            for (std::size_t i = 0; i < m.cols(); ++i)
                for (std::size_t k = 0; k < r; ++k) out.right_vectors(i, k) = small_svd.right_vectors(i, k);
            return out;
        }

        q = projected.transpose();
        orthonormalize_columns(q, rng);
    }
    throw ConvergenceError("truncated_svd did not converge in " + std::to_string(opts.max_iters) +
                               " iterations",
                           change);
}

/// Least squares min ‖cols · x − y‖ by Householder QR. `cols` is k x s with
/// s ≤ k. Throws DegenerateSupport when the columns are numerically dependent.
inline std::vector<double> least_squares(const DenseMatrix& cols, std::span<const double> y) {
    const std::size_t k = cols.rows();
    const std::size_t s = cols.cols();
    require(y.size() == k, ErrorKind::InvalidDimension, "least_squares: rhs length mismatch");
    require(s <= k, ErrorKind::DegenerateSupport, "least_squares: more unknowns than equations");

    DenseMatrix r = cols;
    std::vector<double> rhs(y.begin(), y.end());
    std::vector<double> col_norms(s);
    for (std::size_t j = 0; j < s; ++j) col_norms[j] = std::sqrt(detail::column_dot(r, j, j));

    for (std::size_t j = 0; j < s; ++j) {
        double norm = 0.0;
        for (std::size_t i = j; i < k; ++i) norm += r(i, j) * r(i, j);
        norm = std::sqrt(norm);
        if (norm <= 1e-12 * std::max(col_norms[j], 1e-300)) {
            throw Error(ErrorKind::DegenerateSupport,
                        "selected columns are linearly dependent at position " + std::to_string(j));
        }
        const double alpha = r(j, j) > 0.0 ? -norm : norm;
        std::vector<double> v(k - j);
        for (std::size_t i = j; i < k; ++i) v[i - j] = r(i, j);
        v[0] -= alpha;
        const double vnorm2 = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
        if (vnorm2 > 0.0) {
            for (std::size_t c = j; c < s; ++c) {
                double dot = 0.0;
                for (std::size_t i = j; i < k; ++i) dot += v[i - j] * r(i, c);
                const double f = 2.0 * dot / vnorm2;
                for (std::size_t i = j; i < k; ++i) r(i, c) -= f * v[i - j];
            }
            double dot = 0.0;
            for (std::size_t i = j; i < k; ++i) dot += v[i - j] * rhs[i];
            const double f = 2.0 * dot / vnorm2;
            for (std::size_t i = j; i < k; ++i) rhs[i] -= f * v[i - j];
        }
    }

    std::vector<double> x(s);
    for (std::size_t jj = s; jj-- > 0;) {
        double acc = rhs[jj];
        for (std::size_t c = jj + 1; c < s; ++c) acc -= r(jj, c) * x[c];
        x[jj] = acc / r(jj, jj);
    }
    return x;
}

} // namespace sgc
