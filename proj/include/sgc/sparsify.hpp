// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sgc/error.hpp"
#include "sgc/sparse_vector.hpp"
#include "sgc/tensor.hpp"

namespace sgc {

namespace detail {

/// Indices of the s largest |v_i| (ties: lower index wins), ascending, with
/// exact zeros dropped. Indices are offset by `base`.
inline void top_s_indices(std::span<const double> v, std::size_t s, std::size_t base,
                          std::vector<std::size_t>& support, std::vector<double>& values) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto before = [&](std::size_t a, std::size_t b) {
        const double ma = std::abs(v[a]);
        const double mb = std::abs(v[b]);
        return ma > mb || (ma == mb && a < b);
    };
    if (s < idx.size()) {
        std::nth_element(idx.begin(), idx.begin() + static_cast<long>(s), idx.end(), before);
        idx.resize(s);
    }
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) {
        if (v[i] == 0.0) continue;
        support.push_back(base + i);
        values.push_back(v[i]);
    }
}

} // namespace detail

/// Keeps the s largest-magnitude entries; ties go to the lowest index. Exact
/// zeros are not stored, so nnz() can be below s.
inline SparseVector sparsify_top_s(std::span<const double> v, std::size_t s) {
    require(s >= 1 && s <= v.size(), ErrorKind::InvalidSparsity,
            "sparsity " + std::to_string(s) + " outside [1, " + std::to_string(v.size()) + "]");
    std::vector<std::size_t> support;
    std::vector<double> values;
    support.reserve(s);
    values.reserve(s);
    detail::top_s_indices(v, s, 0, support, values);
    return SparseVector(v.size(), std::move(support), std::move(values));
}

inline SparseVector sparsify_top_s(const DenseVector& v, std::size_t s) {
    return sparsify_top_s(v.span(), s);
}

/// Same support, squared values: the sparsified G² shares G̃'s pattern.
inline SparseVector square_support(const SparseVector& g) {
    std::vector<double> squared(g.values());
    for (double& x : squared) x *= x;
    return SparseVector(g.dim(), g.support(), std::move(squared));
}

/// Top-s_c per chunk over c equal chunks (s = c · s_c overall).
inline SparseVector chunked_sparsify(std::span<const double> v, std::size_t c, std::size_t s_c) {
    const auto views = chunk_views(v, c);
    const std::size_t len = v.size() / c;
    require(s_c >= 1 && s_c <= len, ErrorKind::InvalidChunking,
            "per-chunk sparsity " + std::to_string(s_c) + " outside [1, " + std::to_string(len) + "]");
    std::vector<std::size_t> support;
    std::vector<double> values;
    support.reserve(c * s_c);
    values.reserve(c * s_c);
    for (std::size_t i = 0; i < c; ++i) detail::top_s_indices(views[i], s_c, i * len, support, values);
    return SparseVector(v.size(), std::move(support), std::move(values));
}

inline SparseVector chunked_sparsify(const DenseVector& v, std::size_t c, std::size_t s_c) {
    return chunked_sparsify(v.span(), c, s_c);
}

/// Worst-case expected gap between chunked and global sparsification:
/// 2 (1 - s/d) G_max.
inline double chunking_error_bound(std::size_t d, std::size_t s, double g_max) {
    require(s >= 1 && s <= d, ErrorKind::InvalidSparsity, "chunking_error_bound needs 1 <= s <= d");
    return 2.0 * (1.0 - static_cast<double>(s) / static_cast<double>(d)) * g_max;
}

/// ‖chunked_sparsify(v, c, s_c) − sparsify_top_s(v, c·s_c)‖².
inline double chunking_error(std::span<const double> v, std::size_t c, std::size_t s_c) {
    const SparseVector chunked = chunked_sparsify(v, c, s_c);
    const SparseVector global = sparsify_top_s(v, c * s_c);
    // Both are restrictions of v, so the difference is v on the symmetric
    // difference of the two supports.
    const auto& a = chunked.support();
    const auto& b = global.support();
    double err = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i] < b[j])) {
            err += v[a[i]] * v[a[i]];
            ++i;
        } else if (i == a.size() || b[j] < a[i]) {
            err += v[b[j]] * v[b[j]];
            ++j;
        } else {
            ++i;
            ++j;
        }
    }
    return err;
}

inline double chunking_error(const DenseVector& v, std::size_t c, std::size_t s_c) {
    return chunking_error(v.span(), c, s_c);
}

} // namespace sgc
