// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sgc/error.hpp"
#include "sgc/optimizer.hpp"
#include "sgc/rng.hpp"
#include "sgc/tensor.hpp"
#include "sgc/text_io.hpp"

namespace sgc {

enum class ProblemKind { Quadratic, LinearRegression, LogisticRegression, Mlp2 };

constexpr std::string_view to_string(ProblemKind k) noexcept {
    switch (k) {
    case ProblemKind::Quadratic: return "quadratic";
    case ProblemKind::LinearRegression: return "linear-regression";
    case ProblemKind::LogisticRegression: return "logistic-regression";
    case ProblemKind::Mlp2: return "mlp2";
    }
    return "unknown";
}

inline ProblemKind parse_problem_kind(std::string_view name) {
    if (name == "quadratic") return ProblemKind::Quadratic;
    if (name == "linear-regression" || name == "linear") return ProblemKind::LinearRegression;
    if (name == "logistic-regression" || name == "logistic") return ProblemKind::LogisticRegression;
    if (name == "mlp2") return ProblemKind::Mlp2;
    throw Error(ErrorKind::Config, "unknown problem kind '" + std::string(name) + "'");
}

struct ProblemSpec {
    ProblemKind kind = ProblemKind::Quadratic;
    std::size_t dim = 8;       // parameters; input features for mlp2
    std::size_t samples = 200; // ignored by quadratic
    std::size_t hidden = 8;    // mlp2 only
    std::uint64_t seed = 0;
    double l2 = 0.0;           // ridge term (λ/2)‖w‖² added to the loss
    // Feature j is scaled by tail_scale^(j / (dim - 1)): a geometric decay from
    // 1 to tail_scale along the parameter vector. Values below 1 put most of
    // the gradient energy in the leading chunks.
    double tail_scale = 1.0;
};

/// Synthetic differentiable problem with an analytic gradient.
///
///   quadratic            ½‖w − w*‖²
///   linear-regression    (1/2n) Σ (xᵢ·w − yᵢ)²
///   logistic-regression  (1/n) Σ log(1 + exp(−yᵢ xᵢ·w)), yᵢ ∈ {±1},
///                        separable with margin ≥ 0.1 under a unit-norm w
///   mlp2                 (1/2n) Σ (w2·tanh(W1 xᵢ + b1) + b2 − yᵢ)², teacher targets
///
/// mlp2 parameters are packed [W1 (h x f, row-major), b1 (h), w2 (h), b2].
struct Problem {
    ProblemSpec spec;
    std::size_t d = 0;
    DenseMatrix x;           // samples x features
    DenseVector y;           // targets
    DenseVector w_star;      // quadratic optimum; generating weights otherwise

    std::size_t samples() const noexcept { return spec.kind == ProblemKind::Quadratic ? 1 : x.rows(); }
};

inline constexpr double kLogisticMargin = 0.1;

namespace detail {

inline double feature_scale(const ProblemSpec& spec, std::size_t j) {
    if (spec.tail_scale == 1.0 || spec.dim == 1) return 1.0;
    return std::pow(spec.tail_scale, static_cast<double>(j) / static_cast<double>(spec.dim - 1));
}

inline std::size_t mlp2_params(std::size_t f, std::size_t h) { return h * f + 2 * h + 1; }

inline double mlp2_forward(const Problem& p, std::span<const double> w, std::span<const double> xi,
                           std::vector<double>* hidden_out) {
    const std::size_t f = p.spec.dim;
    const std::size_t h = p.spec.hidden;
    const double* w1 = w.data();
    const double* b1 = w1 + h * f;
    const double* w2 = b1 + h;
    const double b2 = w2[h];
    double out = b2;
    for (std::size_t j = 0; j < h; ++j) {
        double z = b1[j];
        for (std::size_t q = 0; q < f; ++q) z += w1[j * f + q] * xi[q];
        const double a = std::tanh(z);
        if (hidden_out) (*hidden_out)[j] = a;
        out += w2[j] * a;
    }
    return out;
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace detail

inline Problem make_problem(const ProblemSpec& spec) {
    require(spec.dim >= 1, ErrorKind::InvalidDimension, "problem dimension must be >= 1");
    require(spec.kind == ProblemKind::Quadratic || spec.samples >= 1, ErrorKind::InvalidDimension,
            "problem needs at least one sample");
    require(spec.kind != ProblemKind::Mlp2 || spec.hidden >= 1, ErrorKind::InvalidDimension,
            "mlp2 needs at least one hidden unit");
    require(spec.l2 >= 0.0 && spec.tail_scale > 0.0, ErrorKind::Config, "l2 must be >= 0 and tail_scale > 0");

    Rng rng(spec.seed);
    Problem p;
    p.spec = spec;
    const std::size_t f = spec.dim;
    switch (spec.kind) {
    case ProblemKind::Quadratic:
        p.d = f;
        p.w_star = DenseVector(f);
        for (auto& w : p.w_star) w = rng.normal();
        break;
    case ProblemKind::LinearRegression: {
        p.d = f;
        p.w_star = DenseVector(f);
        for (auto& w : p.w_star) w = rng.normal();
        p.x = DenseMatrix(spec.samples, f);
        p.y = DenseVector(spec.samples);
        for (std::size_t i = 0; i < spec.samples; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < f; ++j) {
                p.x(i, j) = rng.normal() * detail::feature_scale(spec, j);
                dot += p.x(i, j) * p.w_star[j];
            }
            p.y[i] = dot + 0.01 * rng.normal();
        }
        break;
    }
    case ProblemKind::LogisticRegression: {
        p.d = f;
        p.w_star = DenseVector(f);
        for (auto& w : p.w_star) w = rng.normal();
        const double norm = p.w_star.norm();
        for (auto& w : p.w_star) w /= norm;
        p.x = DenseMatrix(spec.samples, f);
        p.y = DenseVector(spec.samples);
        std::vector<double> row(f);
        for (std::size_t i = 0; i < spec.samples; ++i) {
            // Rejection sampling enforces the margin.
            for (std::size_t attempt = 0;; ++attempt) {
                require(attempt < 100000, ErrorKind::Config, "could not draw a sample with the required margin");
                double dot = 0.0;
                for (std::size_t j = 0; j < f; ++j) {
                    row[j] = rng.normal() * detail::feature_scale(spec, j);
                    dot += row[j] * p.w_star[j];
                }
                if (std::abs(dot) < kLogisticMargin) continue;
                std::copy(row.begin(), row.end(), p.x.row(i).begin());
                p.y[i] = dot > 0 ? 1.0 : -1.0;
                break;
            }
        }
        break;
    }
    case ProblemKind::Mlp2: {
        const std::size_t h = spec.hidden;
        p.d = detail::mlp2_params(f, h);
        p.w_star = DenseVector(p.d);
        for (std::size_t i = 0; i < h * f; ++i) p.w_star[i] = rng.normal() / std::sqrt(static_cast<double>(f));
        for (std::size_t i = h * f; i < p.d; ++i) p.w_star[i] = 0.5 * rng.normal();
        p.x = DenseMatrix(spec.samples, f);
        p.y = DenseVector(spec.samples);
        for (std::size_t i = 0; i < spec.samples; ++i) {
            for (std::size_t j = 0; j < f; ++j) p.x(i, j) = rng.normal() * detail::feature_scale(spec, j);
            p.y[i] = detail::mlp2_forward(p, p.w_star.span(), p.x.row(i), nullptr);
        }
        break;
    }
    }
    return p;
}

inline Problem make_problem(ProblemKind kind, std::size_t dim, std::size_t samples, std::uint64_t seed) {
    ProblemSpec spec;
    spec.kind = kind;
    spec.dim = dim;
    spec.samples = samples;
    spec.seed = seed;
    return make_problem(spec);
}

/// Starting point: zeros, except mlp2 which needs small random weights to
/// break the tanh symmetry.
inline DenseVector initial_params(const Problem& p, std::uint64_t seed) {
    DenseVector w(p.d);
    if (p.spec.kind == ProblemKind::Mlp2) {
        Rng rng(derive_seed(seed, 0x1417));
        for (auto& x : w) x = 0.1 * rng.normal();
    }
    return w;
}

/// Half-open sample range.
struct Batch {
    std::size_t begin = 0;
    std::size_t end = 0;
};

inline Batch full_batch(const Problem& p) { return {0, p.samples()}; }

/// Analytic loss and gradient over samples [batch.begin, batch.end).
inline std::pair<double, DenseVector> loss_and_grad(const Problem& p, std::span<const double> w, Batch batch,
                                                    bool want_grad = true) {
    require(w.size() == p.d, ErrorKind::InvalidDimension,
            "parameter length " + std::to_string(w.size()) + " != problem dimension " + std::to_string(p.d));
    require(batch.begin < batch.end && batch.end <= p.samples(), ErrorKind::InvalidDimension, "empty or out-of-range batch");
    DenseVector grad(want_grad ? p.d : 0);
    double loss = 0.0;
    const std::size_t f = p.spec.dim;
    const double inv_n = 1.0 / static_cast<double>(batch.end - batch.begin);

    switch (p.spec.kind) {
    case ProblemKind::Quadratic:
        for (std::size_t i = 0; i < p.d; ++i) {
            const double diff = w[i] - p.w_star[i];
            loss += 0.5 * diff * diff;
            if (want_grad) grad[i] = diff;
        }
        break;
    case ProblemKind::LinearRegression:
        for (std::size_t i = batch.begin; i < batch.end; ++i) {
            const auto xi = p.x.row(i);
            double r = -p.y[i];
            for (std::size_t j = 0; j < f; ++j) r += xi[j] * w[j];
            loss += 0.5 * r * r * inv_n;
            if (want_grad)
                for (std::size_t j = 0; j < f; ++j) grad[j] += r * xi[j] * inv_n;
        }
        break;
    case ProblemKind::LogisticRegression:
        for (std::size_t i = batch.begin; i < batch.end; ++i) {
            const auto xi = p.x.row(i);
            double z = 0.0;
            for (std::size_t j = 0; j < f; ++j) z += xi[j] * w[j];
            const double yz = p.y[i] * z;
            loss += detail::softplus(-yz) * inv_n;
            if (want_grad) {
                const double coef = -p.y[i] * detail::sigmoid(-yz) * inv_n;
                for (std::size_t j = 0; j < f; ++j) grad[j] += coef * xi[j];
            }
        }
        break;
    case ProblemKind::Mlp2: {
        const std::size_t h = p.spec.hidden;
        std::vector<double> hidden(h);
        const double* w2 = w.data() + h * f + h;
        for (std::size_t i = batch.begin; i < batch.end; ++i) {
            const auto xi = p.x.row(i);
            const double r = detail::mlp2_forward(p, w, xi, &hidden) - p.y[i];
            loss += 0.5 * r * r * inv_n;
            if (!want_grad) continue;
            const double dr = r * inv_n;
            double* g_w1 = grad.data();
            double* g_b1 = g_w1 + h * f;
            double* g_w2 = g_b1 + h;
            g_w2[h] += dr;
            for (std::size_t j = 0; j < h; ++j) {
                g_w2[j] += dr * hidden[j];
                const double dz = dr * w2[j] * (1.0 - hidden[j] * hidden[j]);
                g_b1[j] += dz;
                for (std::size_t q = 0; q < f; ++q) g_w1[j * f + q] += dz * xi[q];
            }
        }
        break;
    }
    }

    if (p.spec.l2 > 0.0) {
        for (std::size_t i = 0; i < p.d; ++i) {
            loss += 0.5 * p.spec.l2 * w[i] * w[i];
            if (want_grad) grad[i] += p.spec.l2 * w[i];
        }
    }
    return {loss, std::move(grad)};
}

inline std::pair<double, DenseVector> loss_and_grad(const Problem& p, const DenseVector& w, Batch batch) {
    return loss_and_grad(p, w.span(), batch);
}

inline double full_loss(const Problem& p, const DenseVector& w) {
    return loss_and_grad(p, w.span(), full_batch(p), false).first;
}

/// ‖g_fd − g‖ / max(‖g‖, ‖g_fd‖, 1e-12) with central differences,
/// h = 1e-5·(1 + |w_i|).
inline double gradient_check(const Problem& p, const DenseVector& w) {
    const Batch all = full_batch(p);
    const DenseVector g = loss_and_grad(p, w.span(), all).second;
    DenseVector probe = w;
    double diff_sq = 0.0;
    double fd_sq = 0.0;
    for (std::size_t i = 0; i < p.d; ++i) {
        const double h = 1e-5 * (1.0 + std::abs(w[i]));
        probe[i] = w[i] + h;
        const double up = loss_and_grad(p, probe.span(), all, false).first;
        probe[i] = w[i] - h;
        const double down = loss_and_grad(p, probe.span(), all, false).first;
        probe[i] = w[i];
        const double fd = (up - down) / (2.0 * h);
        diff_sq += (fd - g[i]) * (fd - g[i]);
        fd_sq += fd * fd;
    }
    const double scale = std::max({std::sqrt(g.squared_norm()), std::sqrt(fd_sq), 1e-12});
    return std::sqrt(diff_sq) / scale;
}

// ---------------------------------------------------------------------------
// Training loop

enum class OptimizerKind { SGD, AdamW, SGC, MESGC, CESGC };

constexpr std::string_view to_string(OptimizerKind k) noexcept {
    switch (k) {
    case OptimizerKind::SGD: return "sgd";
    case OptimizerKind::AdamW: return "adamw";
    case OptimizerKind::SGC: return "sgc";
    case OptimizerKind::MESGC: return "mesgc";
    case OptimizerKind::CESGC: return "cesgc";
    }
    return "unknown";
}

inline OptimizerKind parse_optimizer_kind(std::string_view name) {
    for (OptimizerKind k : {OptimizerKind::SGD, OptimizerKind::AdamW, OptimizerKind::SGC, OptimizerKind::MESGC,
                            OptimizerKind::CESGC}) {
        if (name == to_string(k)) return k;
    }
    throw Error(ErrorKind::Config, "unknown optimizer '" + std::string(name) + "'");
}

struct TrainOptions {
    OptimizerKind optimizer = OptimizerKind::AdamW;
    std::size_t steps = 100;
    std::size_t batch_size = 0;     // 0 = full batch
    std::size_t matrix_rows = 0;    // CESGC view of the parameters; 0 = largest divisor of d <= √d
    std::uint64_t init_seed = 0;
};

struct TrainReport {
    std::vector<double> losses; // batch loss at w_t, before step t+1
    DenseVector final_params;
    double final_loss = 0.0;    // full loss after the last step
    std::size_t steps = 0;
    SgcConfig config_echo;
    TrainOptions options_echo;
};

inline std::size_t default_matrix_rows(std::size_t d) {
    std::size_t best = 1;
    for (std::size_t r = 1; r * r <= d; ++r)
        if (d % r == 0) best = r;
    return best;
}

inline TrainReport train(const Problem& p, const SgcConfig& cfg, const TrainOptions& opts) {
    TrainReport rep;
    rep.config_echo = cfg;
    rep.options_echo = opts;
    rep.steps = opts.steps;
    rep.losses.reserve(opts.steps);

    DenseVector w = initial_params(p, opts.init_seed);
    const std::size_t n = p.samples();
    const std::size_t b = opts.batch_size == 0 ? n : std::min(opts.batch_size, n);

    std::optional<AdamWState> adam;
    std::optional<SgcState> sgc;
    std::size_t rows = 0;
    switch (opts.optimizer) {
    case OptimizerKind::SGD: break;
    case OptimizerKind::AdamW: adam.emplace(p.d); break;
    case OptimizerKind::SGC:
        require(cfg.chunks == 1, ErrorKind::Config, "sgc runs unchunked; set chunks = 1 or use mesgc");
        sgc = SgcState::create(p.d, cfg);
        break;
    case OptimizerKind::MESGC: sgc = SgcState::create(p.d, cfg); break;
    case OptimizerKind::CESGC:
        rows = opts.matrix_rows == 0 ? default_matrix_rows(p.d) : opts.matrix_rows;
        require(rows >= 1 && p.d % rows == 0, ErrorKind::InvalidDimension,
                "matrix_rows must divide the parameter count");
        sgc = SgcState::create_cesgc(rows, p.d / rows, cfg);
        break;
    }

    for (std::size_t t = 0; t < opts.steps; ++t) {
        const std::size_t start = (t * b) % n;
        const Batch batch{start, std::min(start + b, n)};
        auto [loss, g] = loss_and_grad(p, w.span(), batch);
        require(std::isfinite(loss), ErrorKind::InvalidGradient, "loss became non-finite at step " + std::to_string(t + 1));
        rep.losses.push_back(loss);
        try {
            switch (opts.optimizer) {
            case OptimizerKind::SGD:
                require(g.all_finite(), ErrorKind::InvalidGradient, "gradient has non-finite entries");
                apply_update_inplace(w, g, cfg.eta, cfg.weight_decay);
                break;
            case OptimizerKind::AdamW:
                apply_update_inplace(w, adamw_step(g, *adam, cfg).n, cfg.eta, cfg.weight_decay);
                break;
            case OptimizerKind::SGC:
            case OptimizerKind::MESGC:
                apply_update_inplace(w, mesgc_step(g, *sgc, cfg).n, cfg.eta, cfg.weight_decay);
                break;
            case OptimizerKind::CESGC: {
                const DenseMatrix gm(rows, p.d / rows, std::vector<double>(g.begin(), g.end()));
                apply_update_inplace(w, cesgc_step(gm, *sgc, cfg).n, cfg.eta, cfg.weight_decay);
                break;
            }
            }
        } catch (const StepError&) {
            throw;
        } catch (const Error& e) {
            throw StepError(e, t + 1);
        }
    }
    rep.final_loss = full_loss(p, w);
    rep.final_params = std::move(w);
    return rep;
}

/// `step,loss` rows (1-based steps), shortest round-trip reals.
inline void write_loss_csv(std::ostream& out, const TrainReport& rep) {
    out << "step,loss\n";
    for (std::size_t t = 0; t < rep.losses.size(); ++t) out << (t + 1) << ',' << format_double(rep.losses[t]) << '\n';
}

} // namespace sgc
