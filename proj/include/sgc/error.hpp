// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sgc {

enum class ErrorKind {
    InvalidDimension,
    InvalidRank,
    InvalidSparsity,
    InvalidChunking,
    InvalidGradient,
    InvalidSpec,
    Convergence,
    DegenerateMatrix,
    DegenerateSupport,
    CholeskyBreakdown,
    Parse,
    Io,
    Config,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::InvalidDimension: return "invalid-dimension";
    case ErrorKind::InvalidRank: return "invalid-rank";
    case ErrorKind::InvalidSparsity: return "invalid-sparsity";
    case ErrorKind::InvalidChunking: return "invalid-chunking";
    case ErrorKind::InvalidGradient: return "invalid-gradient";
    case ErrorKind::InvalidSpec: return "invalid-spec";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::DegenerateMatrix: return "degenerate-matrix";
    case ErrorKind::DegenerateSupport: return "degenerate-support";
    case ErrorKind::CholeskyBreakdown: return "cholesky-breakdown";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
    }
    return "unknown";
}

/// Every failure raised by the library. `kind()` is stable and is what the CLI
/// maps onto exit codes; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Thrown by truncated_svd when the block iteration does not settle.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(ErrorKind::Convergence, what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Inverse-Cholesky OMP hit a non-positive pivot.
class CholeskyBreakdownError : public Error {
public:
    CholeskyBreakdownError(std::size_t iteration, double pivot)
        : Error(ErrorKind::CholeskyBreakdown,
                "non-positive pivot " + std::to_string(pivot) + " at iteration " +
                    std::to_string(iteration)),
          iteration_(iteration) {}

    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

/// Optimizer failure annotated with the training step at which it happened.
class StepError : public Error {
public:
    StepError(const Error& cause, std::size_t step)
        : Error(cause.kind(), "step " + std::to_string(step) + ": " + cause.what()), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

inline void require(bool ok, ErrorKind kind, const std::string& what) {
    if (!ok) throw Error(kind, what);
}

} // namespace sgc
