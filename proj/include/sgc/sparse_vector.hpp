// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sgc/error.hpp"
#include "sgc/tensor.hpp"

namespace sgc {

/// s-sparse vector of dimension `dim`: strictly increasing support indices and
/// their values.
class SparseVector {
public:
    SparseVector() = default;
    explicit SparseVector(std::size_t dim) : dim_(dim) {}

    SparseVector(std::size_t dim, std::vector<std::size_t> support, std::vector<double> values)
        : dim_(dim), support_(std::move(support)), values_(std::move(values)) {
        require(support_.size() == values_.size(), ErrorKind::InvalidDimension,
                "sparse vector support/value length mismatch");
        require(support_.size() <= dim_, ErrorKind::InvalidSparsity,
                "sparse vector has more entries than its dimension");
        for (std::size_t i = 0; i < support_.size(); ++i) {
            require(support_[i] < dim_, ErrorKind::InvalidDimension,
                    "support index " + std::to_string(support_[i]) + " out of range " +
                        std::to_string(dim_));
            require(i == 0 || support_[i - 1] < support_[i], ErrorKind::InvalidSparsity,
                    "support indices must be strictly increasing");
            require(std::isfinite(values_[i]), ErrorKind::InvalidGradient,
                    "sparse vector value is not finite");
        }
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t nnz() const noexcept { return support_.size(); }
    const std::vector<std::size_t>& support() const noexcept { return support_; }
    const std::vector<double>& values() const noexcept { return values_; }

    DenseVector densify() const {
        DenseVector out(dim_);
        for (std::size_t i = 0; i < support_.size(); ++i) out[support_[i]] = values_[i];
        return out;
    }

    friend bool operator==(const SparseVector&, const SparseVector&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<std::size_t> support_;
    std::vector<double> values_;
};

/// m · x touching only the columns in x's support: O(rows · nnz).
inline DenseVector sparse_matvec(const DenseMatrix& m, const SparseVector& x) {
    require(m.cols() == x.dim(), ErrorKind::InvalidDimension,
            "sparse_matvec: matrix has " + std::to_string(m.cols()) + " columns, vector dim " +
                std::to_string(x.dim()));
    DenseVector out(m.rows());
    const auto& idx = x.support();
    const auto& val = x.values();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        double acc = 0.0;
        for (std::size_t j = 0; j < idx.size(); ++j) acc += row[idx[j]] * val[j];
        out[r] = acc;
    }
    return out;
}

} // namespace sgc
