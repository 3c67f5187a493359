// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "sgc/error.hpp"
#include "sgc/linalg.hpp"
#include "sgc/omp.hpp"
#include "sgc/rng.hpp"
#include "sgc/sparse_vector.hpp"
#include "sgc/sparsify.hpp"
#include "sgc/tensor.hpp"

namespace sgc {

/// Where the measurement matrix A comes from.
enum class ProjectionKind {
    Gaussian, // N(0, 1/k) entries drawn from (seed, epoch)
    Identity, // A = I; only valid when κ·s_c = d/c (lossless configuration)
    Explicit, // supplied by the caller
};

inline std::string_view to_string(ProjectionKind kind) noexcept {
    switch (kind) {
    case ProjectionKind::Gaussian: return "gaussian";
    case ProjectionKind::Identity: return "identity";
    case ProjectionKind::Explicit: return "explicit";
    }
    return "unknown";
}

struct SgcConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double alpha = 1.0;   // scaling factor on the recovered update
    double eta = 1e-3;    // learning rate
    double weight_decay = 0.0;
    std::size_t sparsity_per_chunk = 1; // s_c
    std::size_t chunks = 1;             // c
    std::size_t kappa = 8;              // measurements per unit of sparsity
    std::size_t rank = 1;               // CESGC projection rank r
    std::size_t svd_refresh = 200;      // CESGC: recompute B every this many steps
    std::size_t resample = 0;           // SGCA: redraw A every this many steps, 0 = never
    std::uint64_t seed = 0;
    ProjectionKind projection = ProjectionKind::Gaussian;
    double recovery_tol = kDefaultRelativeTol;   // OMP early stop, relative to ‖y‖
    std::size_t recovery_budget_multiplier = 1;  // OMP sparsity budget = s_c · multiplier
    bool skip_nonpositive_v = false; // emit N_i = 0 where the recovered V_i <= 0
    double update_clip = 0.0;        // |N_i| <= update_clip when > 0
    std::size_t gram_budget = GramCache::kDefaultBudget;
    SvdOptions svd{};

    std::size_t total_sparsity() const noexcept { return chunks * sparsity_per_chunk; }
    /// Rows of the shared chunk matrix A.
    std::size_t chunk_measurements() const noexcept { return kappa * sparsity_per_chunk; }
    /// k = κ · c · s_c, the length of each compressed moment.
    std::size_t state_size() const noexcept { return kappa * chunks * sparsity_per_chunk; }
    std::size_t recovery_budget() const noexcept {
        return std::min(sparsity_per_chunk * recovery_budget_multiplier, chunk_measurements());
    }

    /// Parameters for parameter group `group`: same hyperparameters, seed
    /// derived from (seed, group) so groups can be stepped in any order.
    SgcConfig for_group(std::uint64_t group) const {
        SgcConfig out = *this;
        out.seed = derive_seed(seed, group);
        return out;
    }

    /// Checks the invariants that depend on the compressed dimension d.
    void validate(std::size_t d) const {
        require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorKind::Config,
                "beta1 and beta2 must lie in [0, 1)");
        require(epsilon > 0.0 && alpha > 0.0 && eta >= 0.0, ErrorKind::Config,
                "epsilon and alpha must be positive, eta non-negative");
        require(kappa >= 1 && sparsity_per_chunk >= 1 && chunks >= 1 && recovery_budget_multiplier >= 1,
                ErrorKind::Config, "kappa, chunks, sparsity_per_chunk and the budget multiplier must be >= 1");
        require(d >= 1 && d % chunks == 0, ErrorKind::InvalidChunking,
                "dimension " + std::to_string(d) + " is not divisible into " + std::to_string(chunks) + " chunks");
        const std::size_t len = d / chunks;
        require(sparsity_per_chunk <= len, ErrorKind::InvalidChunking,
                "sparsity_per_chunk exceeds the chunk length " + std::to_string(len));
        require(chunk_measurements() <= len, ErrorKind::Config,
                "kappa * sparsity_per_chunk = " + std::to_string(chunk_measurements()) +
                    " exceeds the chunk length " + std::to_string(len));
        require(projection != ProjectionKind::Identity || chunk_measurements() == len, ErrorKind::Config,
                "identity projection needs kappa * sparsity_per_chunk == chunk length");
        require(resample == 0 || projection != ProjectionKind::Identity, ErrorKind::Config,
                "projection resampling needs a random projection");
    }
};

struct StepOutput {
    DenseVector n;                                  // update direction N_t
    std::size_t recovered_support_size = 0;
    std::pair<double, double> residual_norms{0.0, 0.0}; // (first, second) moment recovery
};

/// Uncompressed AdamW moments (the baseline).
struct AdamWState {
    DenseVector m;
    DenseVector v;
    std::size_t step_t = 0;

    explicit AdamWState(std::size_t d = 0) : m(d), v(d) {}
};

/// Compressed optimizer state for one parameter group.
class SgcState {
public:
    DenseVector m;            // k = κ·c·s_c, chunk i owns [i·κs_c, (i+1)·κs_c)
    DenseVector v;
    std::size_t step_t = 0;
    std::size_t dim = 0;      // length of the vector the compressed step consumes
    DenseMatrix a;            // (κ·s_c) x (dim / c), shared by every chunk
    GramCache gram;
    ProjectionKind projection = ProjectionKind::Gaussian;
    std::uint64_t projection_epoch = 0; // bumped by every resample

    // CESGC only.
    std::optional<DenseMatrix> b;       // r x rows
    std::size_t b_version = 0;
    std::size_t b_refreshed_at = 0;
    std::size_t matrix_rows = 0;
    std::size_t matrix_cols = 0;

    /// State for MESGC/SGC over vectors of length d.
    static SgcState create(std::size_t d, const SgcConfig& cfg) {
        cfg.validate(d);
        SgcState st;
        st.dim = d;
        st.m = DenseVector(cfg.state_size());
        st.v = DenseVector(cfg.state_size());
        st.projection = cfg.projection;
        require(cfg.projection != ProjectionKind::Explicit, ErrorKind::Config,
                "explicit projection needs SgcState::with_projection");
        st.a = cfg.projection == ProjectionKind::Identity ? DenseMatrix::identity(d / cfg.chunks)
                                                          : draw_projection(cfg, d, 0);
        st.gram = GramCache(st.a, cfg.gram_budget);
        return st;
    }

    /// State with a caller-supplied shared chunk matrix.
    static SgcState with_projection(std::size_t d, const SgcConfig& cfg, DenseMatrix a) {
        SgcConfig checked = cfg;
        checked.projection = ProjectionKind::Gaussian;
        checked.validate(d);
        require(a.rows() == cfg.chunk_measurements() && a.cols() == d / cfg.chunks, ErrorKind::InvalidDimension,
                "projection must be " + std::to_string(cfg.chunk_measurements()) + "x" +
                    std::to_string(d / cfg.chunks));
        SgcState st;
        st.dim = d;
        st.m = DenseVector(cfg.state_size());
        st.v = DenseVector(cfg.state_size());
        st.projection = ProjectionKind::Explicit;
        st.a = std::move(a);
        st.gram = GramCache(st.a, cfg.gram_budget);
        return st;
    }

    /// State for CESGC on rows x cols gradients: SGC runs on the r x cols
    /// projected gradient.
    static SgcState create_cesgc(std::size_t rows, std::size_t cols, const SgcConfig& cfg) {
        require(cfg.rank >= 1 && cfg.rank <= rows, ErrorKind::InvalidRank,
                "rank " + std::to_string(cfg.rank) + " outside [1, " + std::to_string(rows) + "]");
        require(cfg.rank <= cols, ErrorKind::InvalidRank, "rank exceeds the column count");
        SgcState st = create(cfg.rank * cols, cfg);
        st.matrix_rows = rows;
        st.matrix_cols = cols;
        return st;
    }

    static DenseMatrix draw_projection(const SgcConfig& cfg, std::size_t d, std::uint64_t epoch) {
        Rng rng(derive_seed(cfg.seed, epoch));
        return gaussian_matrix(cfg.chunk_measurements(), d / cfg.chunks, rng);
    }
};

// ---------------------------------------------------------------------------
// AdamW

inline StepOutput adamw_step(const DenseVector& g, AdamWState& state, const SgcConfig& cfg) {
    require(g.size() == state.m.size(), ErrorKind::InvalidDimension,
            "gradient length " + std::to_string(g.size()) + " != state length " + std::to_string(state.m.size()));
    require(g.all_finite(), ErrorKind::InvalidGradient, "gradient has non-finite entries");
    const std::size_t t = ++state.step_t;
    const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    StepOutput out;
    out.n = DenseVector(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double m_hat = state.m[i] / bias1;
        const double v_hat = state.v[i] / bias2;
        out.n[i] = m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
    out.recovered_support_size = g.size();
    return out;
}

// ---------------------------------------------------------------------------
// Compressed steps

namespace detail {

/// Recover (M, V) of one chunk and write α·x_M/(√max(x_V,0)+ε) into `n_out`.
inline void recover_chunk_update(const SgcState& st, const SgcConfig& cfg, std::span<const double> m_hat,
                                 std::span<const double> v_hat, std::span<double> n_out, StepOutput& out,
                                 double& res_m_sq, double& res_v_sq) {
    const double tol = cfg.recovery_tol * std::sqrt(std::inner_product(m_hat.begin(), m_hat.end(), m_hat.begin(), 0.0));
    auto [rm, rv] = joint_recover(st.a, st.gram, m_hat, v_hat, cfg.recovery_budget(), tol);
    const auto& idx = rm.estimate.support();
    const auto& xm = rm.estimate.values();
    const auto& xv = rv.estimate.values();
    for (std::size_t j = 0; j < idx.size(); ++j) {
        if (cfg.skip_nonpositive_v && xv[j] <= 0.0) continue;
        double n = cfg.alpha * xm[j] / (std::sqrt(std::max(xv[j], 0.0)) + cfg.epsilon);
        if (cfg.update_clip > 0.0) n = std::clamp(n, -cfg.update_clip, cfg.update_clip);
        n_out[idx[j]] = n;
    }
    out.recovered_support_size += idx.size();
    res_m_sq += rm.residual_norm * rm.residual_norm;
    res_v_sq += rv.residual_norm * rv.residual_norm;
}

} // namespace detail

/// Redraws A and re-expresses the compressed moments in the new basis:
/// M ← A′·OMP_A(M), V ← A′·OMP_A(V) (shared support), per chunk.
inline void sgca_resample(SgcState& st, const SgcConfig& cfg) {
    const std::size_t kc = cfg.chunk_measurements();
    DenseMatrix fresh = SgcState::draw_projection(cfg, st.dim, st.projection_epoch + 1);
    for (std::size_t i = 0; i < cfg.chunks; ++i) {
        std::span<double> mi = st.m.span().subspan(i * kc, kc);
        std::span<double> vi = st.v.span().subspan(i * kc, kc);
        const double tol = cfg.recovery_tol * std::sqrt(std::inner_product(mi.begin(), mi.end(), mi.begin(), 0.0));
        auto [rm, rv] = joint_recover(st.a, st.gram, mi, vi, cfg.recovery_budget(), tol);
        const DenseVector new_m = sparse_matvec(fresh, rm.estimate);
        const DenseVector new_v = sparse_matvec(fresh, rv.estimate);
        std::copy(new_m.begin(), new_m.end(), mi.begin());
        std::copy(new_v.begin(), new_v.end(), vi.begin());
    }
    st.a = std::move(fresh);
    st.gram = GramCache(st.a, cfg.gram_budget);
    st.projection = ProjectionKind::Gaussian;
    ++st.projection_epoch;
}

/// Chunked SGC (MESGC). Each of the c chunks is sparsified to s_c entries,
/// projected with the shared A, folded into its slice of the compressed
/// moments, and recovered; the chunk updates are concatenated. With c = 1
/// this is plain SGC.
inline StepOutput mesgc_step(std::span<const double> g, SgcState& st, const SgcConfig& cfg) {
    require(g.size() == st.dim, ErrorKind::InvalidDimension,
            "gradient length " + std::to_string(g.size()) + " != state dimension " + std::to_string(st.dim));
    require(st.m.size() == cfg.state_size() && st.a.rows() == cfg.chunk_measurements(), ErrorKind::Config,
            "state was created for a different configuration");
    for (double x : g) require(std::isfinite(x), ErrorKind::InvalidGradient, "gradient has non-finite entries");

    const std::size_t t = ++st.step_t;
    const std::size_t kc = cfg.chunk_measurements();
    const std::size_t len = st.dim / cfg.chunks;
    const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));

    StepOutput out;
    out.n = DenseVector(st.dim);
    double res_m_sq = 0.0;
    double res_v_sq = 0.0;
    DenseVector m_hat(kc);
    DenseVector v_hat(kc);
    const auto views = chunk_views(g, cfg.chunks);
    for (std::size_t i = 0; i < cfg.chunks; ++i) {
        const SparseVector g_sparse = sparsify_top_s(views[i], cfg.sparsity_per_chunk);
        const DenseVector p = sparse_matvec(st.a, g_sparse);
        const DenseVector q = sparse_matvec(st.a, square_support(g_sparse));
        for (std::size_t j = 0; j < kc; ++j) {
            double& mj = st.m[i * kc + j];
            double& vj = st.v[i * kc + j];
            mj = cfg.beta1 * mj + (1.0 - cfg.beta1) * p[j];
            vj = cfg.beta2 * vj + (1.0 - cfg.beta2) * q[j];
            m_hat[j] = mj / bias1;
            v_hat[j] = vj / bias2;
        }
        detail::recover_chunk_update(st, cfg, m_hat.span(), v_hat.span(), out.n.span().subspan(i * len, len), out,
                                     res_m_sq, res_v_sq);
    }
    out.residual_norms = {std::sqrt(res_m_sq), std::sqrt(res_v_sq)};

    if (cfg.resample > 0 && t % cfg.resample == 0) sgca_resample(st, cfg);
    return out;
}

inline StepOutput mesgc_step(const DenseVector& g, SgcState& st, const SgcConfig& cfg) {
    return mesgc_step(g.span(), st, cfg);
}

/// Unchunked SGC.
inline StepOutput sgc_step(const DenseVector& g, SgcState& st, const SgcConfig& cfg) {
    require(cfg.chunks == 1, ErrorKind::Config, "sgc_step expects chunks == 1; use mesgc_step");
    return mesgc_step(g.span(), st, cfg);
}

/// True when CESGC recomputes B before step t (1-based): t = 1, 1 + T, 1 + 2T, ...
inline bool cesgc_refresh_due(std::size_t t, std::size_t svd_refresh) {
    if (t == 1) return true;
    return svd_refresh > 0 && (t - 1) % svd_refresh == 0;
}

/// Double-compressed SGC on a rows x cols gradient: B = (top-r left singular
/// vectors)ᵀ, refreshed on schedule; MESGC runs on B·G (r x cols, flattened
/// row-major) and the update is mapped back as Bᵀ·N'.
inline StepOutput cesgc_step(const DenseMatrix& g, SgcState& st, const SgcConfig& cfg) {
    require(st.matrix_rows > 0, ErrorKind::Config, "state was not created with SgcState::create_cesgc");
    require(g.rows() == st.matrix_rows && g.cols() == st.matrix_cols, ErrorKind::InvalidDimension,
            "gradient shape differs from the CESGC state shape");
    require(cfg.rank <= g.rows(), ErrorKind::InvalidRank, "rank exceeds the gradient row count");
    for (double x : g.span()) require(std::isfinite(x), ErrorKind::InvalidGradient, "gradient has non-finite entries");

    if (!st.b || cesgc_refresh_due(st.step_t + 1, cfg.svd_refresh)) {
        SvdResult svd = truncated_svd(g, cfg.rank, cfg.svd);
        st.b = svd.left_vectors.transpose();
        ++st.b_version;
        st.b_refreshed_at = st.step_t + 1;
    }
    const DenseMatrix projected = matmul(*st.b, g); // r x cols
    StepOutput inner = mesgc_step(projected.span(), st, cfg);

    const DenseMatrix inner_n(cfg.rank, g.cols(), std::vector<double>(inner.n.begin(), inner.n.end()));
    const DenseMatrix back = matmul_transposed_lhs(*st.b, inner_n); // rows x cols
    StepOutput out;
    out.n = DenseVector(back.values());
    out.recovered_support_size = inner.recovered_support_size;
    out.residual_norms = inner.residual_norms;
    return out;
}

// ---------------------------------------------------------------------------
// Weight update

inline void apply_update_inplace(DenseVector& w, const DenseVector& n, double eta, double weight_decay = 0.0) {
    require(w.size() == n.size(), ErrorKind::InvalidDimension,
            "weights length " + std::to_string(w.size()) + " != update length " + std::to_string(n.size()));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eta * (n[i] + weight_decay * w[i]);
}

/// W − η·N (plus decoupled decay η·λ·W when λ > 0).
inline DenseVector apply_update(const DenseVector& w, const DenseVector& n, double eta, double weight_decay = 0.0) {
    DenseVector out = w;
    apply_update_inplace(out, n, eta, weight_decay);
    return out;
}

} // namespace sgc
