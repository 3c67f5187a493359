// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <type_traits>
#include <utility>

#include "sgc/error.hpp"
#include "sgc/optimizer.hpp"
#include "sgc/text_io.hpp"

// Optimizer checkpoint, version 1:
//
//   sgc-checkpoint 1
//   config <key> <value>            (one line per SgcConfig field)
//   state dim <d> step <t> epoch <e> projection <gaussian|identity|explicit>
//   moments <k>
//   <k values of M>
//   <k values of V>
//   [explicit-a <rows> <cols> <values...>]     explicit projection only
//   [cesgc <rows> <cols> <version> <refreshed_at> <has_b>]
//   [<r x rows values of B>]                   when has_b = 1
//   end
//
// A Gaussian A is not stored: it is redrawn from (seed, epoch, dims). Reals are
// written in shortest round-trip form so load(save(x)) is exact.

namespace sgc {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline std::string checkpoint_token(std::istream& in) {
    std::string tok;
    require(static_cast<bool>(in >> tok), ErrorKind::Parse, "truncated checkpoint");
    return tok;
}

inline void expect_token(std::istream& in, const std::string& want) {
    const std::string got = checkpoint_token(in);
    require(got == want, ErrorKind::Parse, "checkpoint: expected '" + want + "', got '" + got + "'");
}

inline std::uint64_t parse_u64(const std::string& tok) {
    std::uint64_t value = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    require(res.ec == std::errc() && res.ptr == tok.data() + tok.size(), ErrorKind::Parse,
            "checkpoint: bad integer '" + tok + "'");
    return value;
}

inline ProjectionKind parse_projection(const std::string& tok) {
    if (tok == "gaussian") return ProjectionKind::Gaussian;
    if (tok == "identity") return ProjectionKind::Identity;
    if (tok == "explicit") return ProjectionKind::Explicit;
    throw Error(ErrorKind::Parse, "checkpoint: unknown projection '" + tok + "'");
}

} // namespace detail

inline void save_checkpoint(std::ostream& out, const SgcConfig& cfg, const SgcState& st) {
    out << "sgc-checkpoint " << kCheckpointVersion << '\n';
    auto real = [&](const char* key, double x) { out << "config " << key << ' ' << format_double(x) << '\n'; };
    auto count = [&](const char* key, std::uint64_t x) { out << "config " << key << ' ' << x << '\n'; };
    real("beta1", cfg.beta1);
    real("beta2", cfg.beta2);
    real("epsilon", cfg.epsilon);
    real("alpha", cfg.alpha);
    real("eta", cfg.eta);
    real("weight_decay", cfg.weight_decay);
    count("sparsity_per_chunk", cfg.sparsity_per_chunk);
    count("chunks", cfg.chunks);
    count("kappa", cfg.kappa);
    count("rank", cfg.rank);
    count("svd_refresh", cfg.svd_refresh);
    count("resample", cfg.resample);
    count("seed", cfg.seed);
    out << "config projection " << to_string(cfg.projection) << '\n';
    real("recovery_tol", cfg.recovery_tol);
    count("recovery_budget_multiplier", cfg.recovery_budget_multiplier);
    count("skip_nonpositive_v", cfg.skip_nonpositive_v ? 1 : 0);
    real("update_clip", cfg.update_clip);
    count("gram_budget", cfg.gram_budget);
    count("svd_max_iters", cfg.svd.max_iters);
    real("svd_tol", cfg.svd.tol);
    count("svd_oversample", cfg.svd.oversample);
    count("svd_seed", cfg.svd.seed);

    out << "state dim " << st.dim << " step " << st.step_t << " epoch " << st.projection_epoch << " projection "
        << to_string(st.projection) << '\n';
    out << "moments " << st.m.size() << '\n';
    for (std::size_t i = 0; i < st.m.size(); ++i) out << (i ? " " : "") << format_double(st.m[i]);
    out << '\n';
    for (std::size_t i = 0; i < st.v.size(); ++i) out << (i ? " " : "") << format_double(st.v[i]);
    out << '\n';
    if (st.projection == ProjectionKind::Explicit) {
        out << "explicit-a " << st.a.rows() << ' ' << st.a.cols();
        for (double x : st.a.span()) out << ' ' << format_double(x);
        out << '\n';
    }
    if (st.matrix_rows > 0) {
        out << "cesgc " << st.matrix_rows << ' ' << st.matrix_cols << ' ' << st.b_version << ' '
            << st.b_refreshed_at << ' ' << (st.b ? 1 : 0) << '\n';
        if (st.b) {
            for (std::size_t i = 0; i < st.b->size(); ++i) out << (i ? " " : "") << format_double(st.b->span()[i]);
            out << '\n';
        }
    }
    out << "end\n";
}

inline std::pair<SgcConfig, SgcState> load_checkpoint(std::istream& in) {
    using detail::checkpoint_token;
    using detail::expect_token;
    using detail::parse_u64;

    expect_token(in, "sgc-checkpoint");
    const std::string version = checkpoint_token(in);
    require(version == std::to_string(kCheckpointVersion), ErrorKind::Parse,
            "unsupported checkpoint version " + version);

    SgcConfig cfg;
    std::map<std::string, std::string> fields;
    std::string tok = checkpoint_token(in);
    while (tok == "config") {
        const std::string key = checkpoint_token(in);
        fields[key] = checkpoint_token(in);
        tok = checkpoint_token(in);
    }
    auto real = [&](const char* key, double& dst) {
        const auto it = fields.find(key);
        require(it != fields.end(), ErrorKind::Parse, std::string("checkpoint: missing config ") + key);
        dst = parse_double(it->second);
    };
    auto count = [&](const char* key, auto& dst) {
        const auto it = fields.find(key);
        require(it != fields.end(), ErrorKind::Parse, std::string("checkpoint: missing config ") + key);
        dst = static_cast<std::remove_reference_t<decltype(dst)>>(parse_u64(it->second));
    };
    real("beta1", cfg.beta1);
    real("beta2", cfg.beta2);
    real("epsilon", cfg.epsilon);
    real("alpha", cfg.alpha);
    real("eta", cfg.eta);
    real("weight_decay", cfg.weight_decay);
    count("sparsity_per_chunk", cfg.sparsity_per_chunk);
    count("chunks", cfg.chunks);
    count("kappa", cfg.kappa);
    count("rank", cfg.rank);
    count("svd_refresh", cfg.svd_refresh);
    count("resample", cfg.resample);
    count("seed", cfg.seed);
    require(fields.count("projection") == 1, ErrorKind::Parse, "checkpoint: missing config projection");
    cfg.projection = detail::parse_projection(fields["projection"]);
    real("recovery_tol", cfg.recovery_tol);
    count("recovery_budget_multiplier", cfg.recovery_budget_multiplier);
    std::uint64_t skip = 0;
    count("skip_nonpositive_v", skip);
    require(skip <= 1, ErrorKind::Parse, "checkpoint: skip_nonpositive_v must be 0 or 1");
    cfg.skip_nonpositive_v = skip == 1;
    real("update_clip", cfg.update_clip);
    count("gram_budget", cfg.gram_budget);
    count("svd_max_iters", cfg.svd.max_iters);
    real("svd_tol", cfg.svd.tol);
    count("svd_oversample", cfg.svd.oversample);
    count("svd_seed", cfg.svd.seed);

    require(tok == "state", ErrorKind::Parse, "checkpoint: expected 'state', got '" + tok + "'");
    SgcState st;
    expect_token(in, "dim");
    st.dim = parse_u64(checkpoint_token(in));
    expect_token(in, "step");
    st.step_t = parse_u64(checkpoint_token(in));
    expect_token(in, "epoch");
    st.projection_epoch = parse_u64(checkpoint_token(in));
    expect_token(in, "projection");
    st.projection = detail::parse_projection(checkpoint_token(in));

    expect_token(in, "moments");
    const std::size_t k = parse_u64(checkpoint_token(in));
    require(k == cfg.state_size(), ErrorKind::Parse, "checkpoint: moment length disagrees with config");
    st.m = DenseVector(k);
    st.v = DenseVector(k);
    for (std::size_t i = 0; i < k; ++i) st.m[i] = parse_double(checkpoint_token(in));
    for (std::size_t i = 0; i < k; ++i) st.v[i] = parse_double(checkpoint_token(in));

    tok = checkpoint_token(in);
    if (tok == "explicit-a") {
        const std::size_t rows = parse_u64(checkpoint_token(in));
        const std::size_t cols = parse_u64(checkpoint_token(in));
        DenseMatrix a(rows, cols);
        for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = parse_double(checkpoint_token(in));
        st.a = std::move(a);
        tok = checkpoint_token(in);
    } else if (st.projection == ProjectionKind::Identity) {
        st.a = DenseMatrix::identity(st.dim / cfg.chunks);
    } else {
        require(st.projection == ProjectionKind::Gaussian, ErrorKind::Parse,
                "checkpoint: explicit projection without stored matrix");
        st.a = SgcState::draw_projection(cfg, st.dim, st.projection_epoch);
    }
    st.gram = GramCache(st.a, cfg.gram_budget);

    if (tok == "cesgc") {
        st.matrix_rows = parse_u64(checkpoint_token(in));
        st.matrix_cols = parse_u64(checkpoint_token(in));
        st.b_version = parse_u64(checkpoint_token(in));
        st.b_refreshed_at = parse_u64(checkpoint_token(in));
        if (parse_u64(checkpoint_token(in)) == 1) {
            DenseMatrix b(cfg.rank, st.matrix_rows);
            for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] = parse_double(checkpoint_token(in));
            st.b = std::move(b);
        }
        tok = checkpoint_token(in);
    }
    require(tok == "end", ErrorKind::Parse, "checkpoint: expected 'end', got '" + tok + "'");
    return {cfg, std::move(st)};
}

inline std::string checkpoint_to_string(const SgcConfig& cfg, const SgcState& st) {
    std::ostringstream out;
    save_checkpoint(out, cfg, st);
    return out.str();
}

} // namespace sgc
