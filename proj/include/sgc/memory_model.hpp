// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "sgc/error.hpp"

// Scalar-entry accounting for one m x n weight matrix (d = m·n) under each
// fine-tuning method. Square layers reproduce the usual √d-based table; other
// shapes use the exact per-shape forms:
//
//   method   weights        optimizer states   projection
//   MESGC    d              2k                 0
//   CESGC    d              2k                 r·m
//   GaLore   d              2·r·n              r·m
//   LoRA     d + r·(m+n)    2·r·(m+n)          0
//   FullFT   d              2d                 0
//
// with k = κ·c·s_c. The shared chunk matrix A of the SGC family is excluded
// from the table; projection_overhead(.., true) adds it.

namespace sgc {

enum class Method { MESGC, CESGC, GaLore, LoRA, FullFT };

constexpr std::string_view to_string(Method m) noexcept {
    switch (m) {
    case Method::MESGC: return "MESGC";
    case Method::CESGC: return "CESGC";
    case Method::GaLore: return "GaLore";
    case Method::LoRA: return "LoRA";
    case Method::FullFT: return "FullFT";
    }
    return "unknown";
}

inline Method parse_method(std::string_view name) {
    for (Method m : {Method::MESGC, Method::CESGC, Method::GaLore, Method::LoRA, Method::FullFT}) {
        std::string_view ref = to_string(m);
        if (ref.size() != name.size()) continue;
        bool same = true;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            const auto lower = [](char ch) { return (ch >= 'A' && ch <= 'Z') ? static_cast<char>(ch - 'A' + 'a') : ch; };
            same = same && lower(ref[i]) == lower(name[i]);
        }
        if (same) return m;
    }
    throw Error(ErrorKind::InvalidSpec, "unknown method '" + std::string(name) + "'");
}

struct LayerShape {
    std::size_t m = 1;
    std::size_t n = 1;

    std::size_t d() const noexcept { return m * n; }

    static LayerShape square(std::size_t side) { return {side, side}; }
};

struct MethodSpec {
    Method method = Method::FullFT;
    std::optional<std::size_t> rank;               // GaLore, LoRA, CESGC
    std::optional<std::size_t> sparsity_per_chunk; // s_c, SGC family
    std::optional<std::size_t> chunks;             // c, SGC family
    std::optional<std::size_t> kappa;              // SGC family

    static MethodSpec mesgc(std::size_t s_c, std::size_t c, std::size_t kappa) {
        return {Method::MESGC, std::nullopt, s_c, c, kappa};
    }
    static MethodSpec cesgc(std::size_t r, std::size_t s_c, std::size_t c, std::size_t kappa) {
        return {Method::CESGC, r, s_c, c, kappa};
    }
    static MethodSpec galore(std::size_t r) { return {Method::GaLore, r, {}, {}, {}}; }
    static MethodSpec lora(std::size_t r) { return {Method::LoRA, r, {}, {}, {}}; }
    static MethodSpec full() { return {Method::FullFT, {}, {}, {}, {}}; }

    bool sgc_family() const noexcept { return method == Method::MESGC || method == Method::CESGC; }
};

struct MemoryReport {
    std::size_t weights = 0;
    std::size_t optimizer_states = 0;
    std::size_t projection_storage = 0;
    std::size_t min_states = 0;               // optimizer_states at free integer = 1
    std::size_t granularity_per_state_dim = 0; // step in one moment's length
    std::size_t granularity_total_states = 0;  // step in both moments together

    friend bool operator==(const MemoryReport&, const MemoryReport&) = default;
};

namespace detail {

inline std::size_t need(const std::optional<std::size_t>& field, const char* name, Method m) {
    require(field.has_value() && *field >= 1, ErrorKind::InvalidSpec,
            std::string(to_string(m)) + " needs " + name + " >= 1");
    return *field;
}

inline void check_shape(const LayerShape& shape) {
    require(shape.m >= 1 && shape.n >= 1, ErrorKind::InvalidSpec, "layer shape needs m, n >= 1");
}

/// Per-moment state length at the given value of the method's free integer
/// (s_c for the SGC family, r for GaLore and LoRA).
inline std::size_t per_state(const LayerShape& shape, const MethodSpec& spec, std::size_t free) {
    switch (spec.method) {
    case Method::MESGC:
    case Method::CESGC: return need(spec.kappa, "kappa", spec.method) * need(spec.chunks, "chunks", spec.method) * free;
    case Method::GaLore: return free * shape.n;
    case Method::LoRA: return free * (shape.m + shape.n);
    case Method::FullFT: return shape.d();
    }
    return 0;
}

inline std::size_t free_integer(const MethodSpec& spec) {
    switch (spec.method) {
    case Method::MESGC:
    case Method::CESGC: return need(spec.sparsity_per_chunk, "sparsity_per_chunk", spec.method);
    case Method::GaLore:
    case Method::LoRA: return need(spec.rank, "rank", spec.method);
    case Method::FullFT: return 1;
    }
    return 1;
}

} // namespace detail

/// Smallest increment of the state count: one unit of the free integer.
struct Granularity {
    std::size_t per_state_dim = 0;
    std::size_t total_states = 0;
};

inline Granularity granularity(const LayerShape& shape, const MethodSpec& spec) {
    detail::check_shape(shape);
    detail::free_integer(spec);
    if (spec.method == Method::CESGC) detail::need(spec.rank, "rank", spec.method);
    const std::size_t unit = detail::per_state(shape, spec, 1);
    return {unit, 2 * unit};
}

inline MemoryReport account(const LayerShape& shape, const MethodSpec& spec) {
    detail::check_shape(shape);
    const std::size_t d = shape.d();
    const std::size_t free = detail::free_integer(spec);
    MemoryReport out;
    out.weights = d;
    out.optimizer_states = 2 * detail::per_state(shape, spec, free);
    out.min_states = 2 * detail::per_state(shape, spec, 1);
    switch (spec.method) {
    case Method::CESGC: {
        const std::size_t r = detail::need(spec.rank, "rank", spec.method);
        require(r <= shape.m, ErrorKind::InvalidSpec, "CESGC rank exceeds the row count");
        out.projection_storage = r * shape.m;
        break;
    }
    case Method::GaLore: out.projection_storage = free * shape.m; break;
    case Method::LoRA: out.weights = d + free * (shape.m + shape.n); break;
    default: break;
    }
    const Granularity g = granularity(shape, spec);
    out.granularity_per_state_dim = g.per_state_dim;
    out.granularity_total_states = g.total_states;
    return out;
}

/// Projection storage for the SGC family. Without A this is the table's
/// projection column. With A it adds k·(d'/c), where d' is the length SGC
/// compresses (d for MESGC, r·n for CESGC) and k = κ·c·s_c.
inline std::size_t projection_overhead(const LayerShape& shape, const MethodSpec& spec, bool include_a) {
    require(spec.sgc_family(), ErrorKind::InvalidSpec, "projection_overhead applies to MESGC and CESGC");
    const MemoryReport report = account(shape, spec);
    if (!include_a) return report.projection_storage;
    const std::size_t c = *spec.chunks;
    const std::size_t k = *spec.kappa * c * *spec.sparsity_per_chunk;
    const std::size_t compressed = spec.method == Method::CESGC ? *spec.rank * shape.n : shape.d();
    return report.projection_storage + k * (compressed / c);
}

/// Entries actually held by the shared chunk matrix: (κ·s_c) x (d'/c).
inline std::size_t shared_matrix_entries(const LayerShape& shape, const MethodSpec& spec) {
    require(spec.sgc_family(), ErrorKind::InvalidSpec, "shared_matrix_entries applies to MESGC and CESGC");
    account(shape, spec);
    const std::size_t c = *spec.chunks;
    const std::size_t compressed = spec.method == Method::CESGC ? *spec.rank * shape.n : shape.d();
    return *spec.kappa * *spec.sparsity_per_chunk * (compressed / c);
}

inline std::size_t to_bytes(std::size_t entries, std::size_t element_width = 4) { return entries * element_width; }

} // namespace sgc
