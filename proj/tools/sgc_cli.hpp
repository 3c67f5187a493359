// SPDX-License-Identifier: Apache-2.0
#pragma once

// Command logic for the `sgc` executable, kept in a header so the test suite
// can drive it in-process through run_cli().
//
// Exit codes: 0 success, 2 configuration or argument error, 3 numerical
// failure, 4 I/O or input-parse failure.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sgc/sgc.hpp"

namespace sgc::cli {

using json = nlohmann::json;

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericError = 3, kIoError = 4 };

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::InvalidSpec:
    case ErrorKind::InvalidDimension:
    case ErrorKind::InvalidRank:
    case ErrorKind::InvalidSparsity:
    case ErrorKind::InvalidChunking: return kConfigError;
    case ErrorKind::InvalidGradient:
    case ErrorKind::Convergence:
    case ErrorKind::DegenerateMatrix:
    case ErrorKind::DegenerateSupport:
    case ErrorKind::CholeskyBreakdown: return kNumericError;
    case ErrorKind::Parse:
    case ErrorKind::Io: return kIoError;
    }
    return kConfigError;
}

// ---------------------------------------------------------------------------
// Configuration

/// Every accepted key with its default. User documents are merged into this
/// tree; keys absent here are rejected.
inline json default_config() {
    const SgcConfig o;
    return json{
        {"seed", 0},
        {"optimizer",
         {{"beta1", o.beta1},
          {"beta2", o.beta2},
          {"epsilon", o.epsilon},
          {"alpha", o.alpha},
          {"eta", o.eta},
          {"weight_decay", o.weight_decay},
          {"sparsity_per_chunk", o.sparsity_per_chunk},
          {"chunks", o.chunks},
          {"kappa", o.kappa},
          {"rank", o.rank},
          {"svd_refresh", o.svd_refresh},
          {"resample", o.resample},
          {"projection", "gaussian"},
          {"recovery_tol", o.recovery_tol},
          {"recovery_budget_multiplier", o.recovery_budget_multiplier},
          {"skip_nonpositive_v", o.skip_nonpositive_v},
          {"update_clip", o.update_clip},
          {"gram_budget", o.gram_budget},
          {"svd",
           {{"max_iters", o.svd.max_iters}, {"tol", o.svd.tol}, {"oversample", o.svd.oversample}, {"seed", o.svd.seed}}}}},
        {"problem",
         {{"kind", "logistic-regression"}, {"dim", 256}, {"samples", 512}, {"hidden", 8}, {"l2", 0.0}, {"tail_scale", 1.0}}},
        {"train", {{"optimizer", "adamw"}, {"steps", 100}, {"batch_size", 0}, {"matrix_rows", 0}}},
        {"sweep",
         {{"kind", "train"},
          {"parameter", "kappa"},
          {"values", json::array({6, 7, 8})},
          {"seeds", json::array({0})},
          {"total_sparsity", 0},
          {"phase", {{"dim", 512}, {"sparsity", 16}, {"trials", 100}}}}},
        {"memory",
         {{"manifest", ""},
          {"method", "all"},
          {"rank", 1},
          {"sparsity_per_chunk", 1},
          {"chunks", 1},
          {"kappa", 8},
          {"element_width", 4}}},
        {"recover", {{"a", ""}, {"y", ""}, {"sparsity", 1}, {"tol", -1.0}, {"variant", "cholesky"}}},
    };
}

namespace detail {

inline bool compatible(const json& def, const json& val) {
    if (def.is_boolean()) return val.is_boolean();
    if (def.is_string()) return val.is_string();
    if (def.is_number_integer()) return val.is_number_integer() && (def.is_number_unsigned() ? val >= 0 : true);
    if (def.is_number()) return val.is_number();
    if (def.is_array()) {
        if (!val.is_array()) return false;
        for (const auto& x : val)
            if (!x.is_number_integer() || x < 0) return false;
        return true;
    }
    return false;
}

inline void merge_strict(json& base, const json& user, const std::string& path) {
    require(user.is_object(), ErrorKind::Config, "'" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        require(base.contains(it.key()), ErrorKind::Config, "unknown config key '" + key + "'");
        json& slot = base[it.key()];
        if (slot.is_object()) {
            merge_strict(slot, it.value(), key);
        } else {
            require(compatible(slot, it.value()), ErrorKind::Config,
                    "config key '" + key + "' expects a value like " + slot.dump() + ", got " + it.value().dump());
            slot = it.value();
        }
    }
}

} // namespace detail

/// Applies `dotted.key=value`; the value is parsed as JSON when possible,
/// otherwise taken as a string.
inline void apply_override(json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    require(eq != std::string::npos && eq > 0, ErrorKind::Config, "override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json patch = value;
    std::vector<std::string> parts;
    std::stringstream ss(key);
    for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
    detail::merge_strict(cfg, patch, "");
}

inline json load_config(const std::string& path, const std::vector<std::string>& overrides) {
    json cfg = default_config();
    if (!path.empty()) {
        std::ifstream in(path);
        require(in.good(), ErrorKind::Io, "cannot open config '" + path + "'");
        const json user = json::parse(in, nullptr, false, true);
        require(!user.is_discarded(), ErrorKind::Config, "config '" + path + "' is not valid JSON");
        detail::merge_strict(cfg, user, "");
    }
    for (const auto& o : overrides) apply_override(cfg, o);
    return cfg;
}

inline ProjectionKind parse_projection_kind(const std::string& name) {
    if (name == "gaussian") return ProjectionKind::Gaussian;
    if (name == "identity") return ProjectionKind::Identity;
    throw Error(ErrorKind::Config, "optimizer.projection must be 'gaussian' or 'identity', got '" + name + "'");
}

inline SgcConfig optimizer_config(const json& cfg) {
    const json& o = cfg.at("optimizer");
    SgcConfig out;
    out.beta1 = o.at("beta1");
    out.beta2 = o.at("beta2");
    out.epsilon = o.at("epsilon");
    out.alpha = o.at("alpha");
    out.eta = o.at("eta");
    out.weight_decay = o.at("weight_decay");
    out.sparsity_per_chunk = o.at("sparsity_per_chunk");
    out.chunks = o.at("chunks");
    out.kappa = o.at("kappa");
    out.rank = o.at("rank");
    out.svd_refresh = o.at("svd_refresh");
    out.resample = o.at("resample");
    out.seed = cfg.at("seed");
    out.projection = parse_projection_kind(o.at("projection"));
    out.recovery_tol = o.at("recovery_tol");
    out.recovery_budget_multiplier = o.at("recovery_budget_multiplier");
    out.skip_nonpositive_v = o.at("skip_nonpositive_v");
    out.update_clip = o.at("update_clip");
    out.gram_budget = o.at("gram_budget");
    const json& svd = o.at("svd");
    out.svd.max_iters = svd.at("max_iters");
    out.svd.tol = svd.at("tol");
    out.svd.oversample = svd.at("oversample");
    out.svd.seed = svd.at("seed");
    return out;
}

inline ProblemSpec problem_spec(const json& cfg) {
    const json& p = cfg.at("problem");
    ProblemSpec out;
    out.kind = parse_problem_kind(p.at("kind").get<std::string>());
    out.dim = p.at("dim");
    out.samples = p.at("samples");
    out.hidden = p.at("hidden");
    out.l2 = p.at("l2");
    out.tail_scale = p.at("tail_scale");
    out.seed = cfg.at("seed");
    return out;
}

inline TrainOptions train_options(const json& cfg) {
    const json& t = cfg.at("train");
    TrainOptions out;
    out.optimizer = parse_optimizer_kind(t.at("optimizer").get<std::string>());
    out.steps = t.at("steps");
    out.batch_size = t.at("batch_size");
    out.matrix_rows = t.at("matrix_rows");
    out.init_seed = cfg.at("seed");
    return out;
}

// ---------------------------------------------------------------------------
// Output helpers

/// Comment lines that open every CSV: the command and the resolved config.
inline std::string csv_preamble(const std::string& command, const json& cfg) {
    return "# sgc " + command + "\n# seed: " + cfg.at("seed").dump() + "\n# config: " + cfg.dump() + "\n";
}

inline std::filesystem::path prepare_out_dir(const std::string& out) {
    std::filesystem::path dir(out.empty() ? "." : out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, ErrorKind::Io, "cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

inline void write_file_atomically(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        require(f.good(), ErrorKind::Io, "cannot write '" + tmp.string() + "'");
        f << content;
        f.flush();
        require(f.good(), ErrorKind::Io, "write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    require(!ec, ErrorKind::Io, "cannot move '" + tmp.string() + "' to '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Commands

struct Context {
    json cfg;
    std::string out_dir;
    std::ostream* out = &std::cout;
};

inline int cmd_recover(const Context& ctx) {
    const json& r = ctx.cfg.at("recover");
    const std::string a_path = r.at("a");
    const std::string y_path = r.at("y");
    require(!a_path.empty() && !y_path.empty(), ErrorKind::Config, "recover needs --a and --y");
    const DenseMatrix a = load_dense_matrix(a_path);
    const DenseVector y = load_dense_vector(y_path);
    require(a.rows() == y.size(), ErrorKind::InvalidDimension,
            "A has " + std::to_string(a.rows()) + " rows but y has length " + std::to_string(y.size()));
    const std::size_t s = r.at("sparsity");
    const double tol_cfg = r.at("tol");
    const double tol = tol_cfg < 0 ? default_tol(y.span()) : tol_cfg;
    const std::string variant = r.at("variant");

    RecoveryResult res;
    if (variant == "naive") {
        res = omp_naive(a, y, s, tol);
    } else if (variant == "cholesky") {
        res = omp_cholesky(a, GramCache(a, ctx.cfg.at("optimizer").at("gram_budget").get<std::size_t>()), y, s, tol);
    } else {
        throw Error(ErrorKind::Config, "recover.variant must be 'naive' or 'cholesky', got '" + variant + "'");
    }

    std::string csv = csv_preamble("recover", ctx.cfg) + "index,value\n";
    for (std::size_t i = 0; i < res.estimate.nnz(); ++i)
        csv += std::to_string(res.estimate.support()[i]) + "," + format_double(res.estimate.values()[i]) + "\n";
    const auto dir = prepare_out_dir(ctx.out_dir);
    write_file_atomically(dir / "recovery.csv", csv);
    *ctx.out << json{{"residual_norm", res.residual_norm}, {"iterations", res.iterations}}.dump() << '\n';
    return kOk;
}

inline std::vector<LayerShape> read_manifest(const std::string& path) {
    require(!path.empty(), ErrorKind::Config, "memory needs a layer-shape manifest (--manifest)");
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot open manifest '" + path + "'");
    std::vector<LayerShape> shapes;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream fields(line);
        std::string m;
        std::string n;
        if (!(fields >> m)) continue;
        std::string extra;
        require(static_cast<bool>(fields >> n) && !(fields >> extra), ErrorKind::Parse,
                path + ":" + std::to_string(lineno) + ": expected 'm n'");
        LayerShape shape{parse_count(m), parse_count(n)};
        require(shape.m >= 1 && shape.n >= 1, ErrorKind::Parse, path + ":" + std::to_string(lineno) + ": m, n must be >= 1");
        shapes.push_back(shape);
    }
    require(!shapes.empty(), ErrorKind::Parse, "manifest '" + path + "' lists no layers");
    return shapes;
}

inline MethodSpec method_spec(Method method, const json& m) {
    const std::size_t r = m.at("rank");
    const std::size_t s_c = m.at("sparsity_per_chunk");
    const std::size_t c = m.at("chunks");
    const std::size_t kappa = m.at("kappa");
    switch (method) {
    case Method::MESGC: return MethodSpec::mesgc(s_c, c, kappa);
    case Method::CESGC: return MethodSpec::cesgc(r, s_c, c, kappa);
    case Method::GaLore: return MethodSpec::galore(r);
    case Method::LoRA: return MethodSpec::lora(r);
    case Method::FullFT: return MethodSpec::full();
    }
    return MethodSpec::full();
}

inline int cmd_memory(const Context& ctx) {
    const json& m = ctx.cfg.at("memory");
    const auto shapes = read_manifest(m.at("manifest"));
    const std::string which = m.at("method");
    std::vector<Method> methods;
    if (which == "all") {
        methods = {Method::MESGC, Method::CESGC, Method::GaLore, Method::LoRA, Method::FullFT};
    } else {
        methods = {parse_method(which)};
    }
    const std::size_t width = m.at("element_width");

    std::string csv = csv_preamble("memory", ctx.cfg) +
                      "m,n,method,weights,states,projection,min_states,granularity_per_state,granularity_total,"
                      "state_bytes\n";
    for (const auto& shape : shapes) {
        for (Method method : methods) {
            const MemoryReport rep = account(shape, method_spec(method, m));
            csv += std::to_string(shape.m) + "," + std::to_string(shape.n) + "," + std::string(to_string(method)) + "," +
                   std::to_string(rep.weights) + "," + std::to_string(rep.optimizer_states) + "," +
                   std::to_string(rep.projection_storage) + "," + std::to_string(rep.min_states) + "," +
                   std::to_string(rep.granularity_per_state_dim) + "," + std::to_string(rep.granularity_total_states) +
                   "," + std::to_string(to_bytes(rep.optimizer_states, width)) + "\n";
        }
    }
    const auto dir = prepare_out_dir(ctx.out_dir);
    write_file_atomically(dir / "memory.csv", csv);
    *ctx.out << csv.substr(csv.find("m,n,method"));
    return kOk;
}

inline int cmd_train(const Context& ctx) {
    const Problem p = make_problem(problem_spec(ctx.cfg));
    const TrainReport rep = train(p, optimizer_config(ctx.cfg), train_options(ctx.cfg));
    std::ostringstream csv;
    csv << csv_preamble("train", ctx.cfg);
    write_loss_csv(csv, rep);
    const auto dir = prepare_out_dir(ctx.out_dir);
    write_file_atomically(dir / "train.csv", csv.str());
    *ctx.out << json{{"final_loss", rep.final_loss}, {"steps", rep.steps}}.dump() << '\n';
    return kOk;
}

// --- sweep -----------------------------------------------------------------

/// One grid point x seed, already formatted (without the trailing newline).
struct SweepRow {
    std::uint64_t value = 0;
    std::uint64_t seed = 0;
    std::string line;
};

inline std::string train_sweep_row(const json& base, const std::string& parameter, std::uint64_t value,
                                   std::uint64_t seed, std::size_t total_sparsity) {
    json cfg = base;
    cfg["seed"] = seed;
    json& o = cfg["optimizer"];
    if (parameter == "chunks") {
        o["chunks"] = value;
        if (total_sparsity > 0) {
            require(total_sparsity % value == 0, ErrorKind::InvalidChunking,
                    "total_sparsity " + std::to_string(total_sparsity) + " is not divisible by chunks " +
                        std::to_string(value));
            o["sparsity_per_chunk"] = total_sparsity / value;
        }
    } else if (parameter == "sparsity_per_chunk" || parameter == "kappa") {
        o[parameter] = value;
    } else if (parameter == "k") {
        const std::size_t per = o.at("kappa").get<std::size_t>() * o.at("chunks").get<std::size_t>();
        require(value % per == 0, ErrorKind::Config,
                "k = " + std::to_string(value) + " is not a multiple of kappa * chunks = " + std::to_string(per));
        o["sparsity_per_chunk"] = value / per;
    } else {
        throw Error(ErrorKind::Config, "sweep.parameter must be chunks, sparsity_per_chunk, kappa or k");
    }
    const Problem p = make_problem(problem_spec(cfg));
    const TrainReport rep = train(p, optimizer_config(cfg), train_options(cfg));
    return format_double(rep.final_loss) + ",ok";
}

/// Success count of exact recovery (support and ‖x̂ − x‖∞ ≤ 1e-6) for a
/// Gaussian A with k = κ·s rows and N(0,1) values on a random support.
inline std::size_t phase_successes(std::size_t d, std::size_t s, std::size_t kappa, std::size_t trials,
                                   std::uint64_t seed) {
    require(s >= 1 && kappa * s <= d, ErrorKind::Config, "phase sweep needs 1 <= sparsity and kappa * sparsity <= dim");
    std::size_t ok = 0;
    std::vector<std::size_t> idx(d);
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(derive_seed(seed, t));
        const DenseMatrix a = gaussian_matrix(kappa * s, d, rng);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < s; ++i) std::swap(idx[i], idx[i + rng.below(d - i)]);
        DenseVector x(d);
        for (std::size_t i = 0; i < s; ++i) x[idx[i]] = rng.normal();
        const DenseVector y = matvec(a, x);
        try {
            const RecoveryResult r = omp_cholesky(a, GramCache(a, 0), y, s, default_tol(y.span()));
            if (max_abs_diff(r.estimate.densify().span(), x.span()) <= 1e-6) ++ok;
        } catch (const Error& e) {
            if (exit_code_for(e.kind()) != kNumericError) throw;
        }
    }
    return ok;
}

inline std::string phase_sweep_row(const json& cfg, const std::string& parameter, std::uint64_t value,
                                   std::uint64_t seed) {
    const json& ph = cfg.at("sweep").at("phase");
    std::size_t d = ph.at("dim");
    std::size_t s = ph.at("sparsity");
    std::size_t kappa = cfg.at("optimizer").at("kappa");
    if (parameter == "kappa") {
        kappa = value;
    } else if (parameter == "sparsity_per_chunk") {
        s = value;
    } else if (parameter == "k") {
        require(value % s == 0, ErrorKind::Config, "k must be a multiple of sweep.phase.sparsity");
        kappa = value / s;
    } else {
        throw Error(ErrorKind::Config, "phase sweeps vary kappa, sparsity_per_chunk or k");
    }
    const std::size_t trials = ph.at("trials");
    require(trials >= 1, ErrorKind::Config, "sweep.phase.trials must be >= 1");
    const std::size_t ok = phase_successes(d, s, kappa, trials, derive_seed(seed, value));
    return std::to_string(trials) + "," + std::to_string(ok) + "," +
           format_double(static_cast<double>(ok) / static_cast<double>(trials)) + ",ok";
}

inline int cmd_sweep(const Context& ctx) {
    const json& sw = ctx.cfg.at("sweep");
    const std::string kind = sw.at("kind");
    const std::string parameter = sw.at("parameter");
    require(kind == "train" || kind == "phase", ErrorKind::Config, "sweep.kind must be 'train' or 'phase'");
    std::vector<std::uint64_t> values = sw.at("values").get<std::vector<std::uint64_t>>();
    std::vector<std::uint64_t> seeds = sw.at("seeds").get<std::vector<std::uint64_t>>();
    require(!values.empty() && !seeds.empty(), ErrorKind::Config, "sweep needs non-empty values and seeds");
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    // Validate the names before any run so a typo fails fast.
    if (kind == "train") {
        require(parameter == "chunks" || parameter == "sparsity_per_chunk" || parameter == "kappa" || parameter == "k",
                ErrorKind::Config, "sweep.parameter must be chunks, sparsity_per_chunk, kappa or k");
        parse_optimizer_kind(ctx.cfg.at("train").at("optimizer").get<std::string>());
        parse_problem_kind(ctx.cfg.at("problem").at("kind").get<std::string>());
    }

    const std::string columns = kind == "train" ? "parameter,value,seed,final_loss,status\n"
                                                : "parameter,value,seed,trials,successes,success_rate,status\n";
    const std::string header = csv_preamble("sweep", ctx.cfg) + columns;
    const auto dir = prepare_out_dir(ctx.out_dir);
    const std::filesystem::path path = dir / "sweep.csv";

    // Resume: keep complete rows of a previous run with the identical header.
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::string> done;
    if (std::filesystem::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        require(in.good(), ErrorKind::Io, "cannot read '" + path.string() + "'");
        std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        require(content.compare(0, header.size(), header) == 0, ErrorKind::Config,
                "'" + path.string() + "' was produced by a different sweep config; use another --out");
        std::size_t pos = header.size();
        while (pos < content.size()) {
            const std::size_t nl = content.find('\n', pos);
            if (nl == std::string::npos) break; // torn final line from an interrupted run
            const std::string line = content.substr(pos, nl - pos);
            pos = nl + 1;
            std::vector<std::string> f;
            std::stringstream ls(line);
            for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
            if (f.size() < 3 || f[0] != parameter) continue;
            done[{parse_count(f[1]), parse_count(f[2])}] = line;
        }
    }

    {
        // Rewrite header + recovered rows, then append new rows as they finish.
        std::string prefix = header;
        for (const auto& [key, line] : done) prefix += line + "\n";
        write_file_atomically(path, prefix);
    }
    std::ofstream append(path, std::ios::binary | std::ios::app);
    require(append.good(), ErrorKind::Io, "cannot append to '" + path.string() + "'");

    const std::size_t total_sparsity = sw.at("total_sparsity");
    std::size_t failures = 0;
    for (std::uint64_t value : values) {
        for (std::uint64_t seed : seeds) {
            if (done.count({value, seed})) continue;
            std::string tail;
            try {
                tail = kind == "train" ? train_sweep_row(ctx.cfg, parameter, value, seed, total_sparsity)
                                       : phase_sweep_row(ctx.cfg, parameter, value, seed);
            } catch (const Error& e) {
                ++failures;
                tail = kind == "train" ? std::string(",error:") + std::string(to_string(e.kind()))
                                       : std::string(",,,error:") + std::string(to_string(e.kind()));
            }
            const std::string line = parameter + "," + std::to_string(value) + "," + std::to_string(seed) + "," + tail;
            done[{value, seed}] = line;
            append << line << '\n';
            append.flush();
        }
    }
    append.close();

    std::string final_csv = header;
    for (const auto& [key, line] : done) {
        const bool in_grid = std::binary_search(values.begin(), values.end(), key.first) &&
                             std::binary_search(seeds.begin(), seeds.end(), key.second);
        if (in_grid) final_csv += line + "\n";
    }
    write_file_atomically(path, final_csv);
    *ctx.out << json{{"rows", values.size() * seeds.size()}, {"failed", failures}}.dump() << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Sparse gradient compression: recovery, memory accounting, training and sweeps", "sgc"};
    app.require_subcommand(1);
    app.fallthrough(); // global options may follow the subcommand
    std::string config_path;
    std::string out_dir = ".";
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--seed", seed, "master seed (overrides the config)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--set", overrides, "override a config key: dotted.key=value (repeatable)");

    // Subcommand flags are shorthands for --set on the matching section.
    std::vector<std::string> shorthands;
    auto shorthand = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
        sub->add_option_function<std::string>(
            flag, [&shorthands, key](const std::string& v) { shorthands.push_back(key + "=" + v); }, help);
    };
    auto* recover = app.add_subcommand("recover", "recover a sparse vector from y = A x with OMP");
    shorthand(recover, "--a", "recover.a", "measurement matrix file (dense-matrix)");
    shorthand(recover, "--y", "recover.y", "measurement vector file (dense-vector)");
    shorthand(recover, "--sparsity,-s", "recover.sparsity", "sparsity budget");
    shorthand(recover, "--tol", "recover.tol", "residual stop; negative = 1e-10 * |y|");
    shorthand(recover, "--variant", "recover.variant", "naive | cholesky");
    auto* memory = app.add_subcommand("memory", "optimizer-state accounting for a manifest of layer shapes");
    shorthand(memory, "--manifest", "memory.manifest", "text file with one 'm n' pair per line");
    shorthand(memory, "--method", "memory.method", "MESGC | CESGC | GaLore | LoRA | FullFT | all");
    shorthand(memory, "--rank", "memory.rank", "rank r");
    shorthand(memory, "--sparsity-per-chunk", "memory.sparsity_per_chunk", "s_c");
    shorthand(memory, "--chunks", "memory.chunks", "c");
    shorthand(memory, "--kappa", "memory.kappa", "kappa");
    auto* train_cmd = app.add_subcommand("train", "train one problem and write the loss curve");
    shorthand(train_cmd, "--optimizer", "train.optimizer", "sgd | adamw | sgc | mesgc | cesgc");
    shorthand(train_cmd, "--steps", "train.steps", "number of steps");
    auto* sweep = app.add_subcommand("sweep", "grid x seed sweep (resumable)");
    shorthand(sweep, "--parameter", "sweep.parameter", "chunks | sparsity_per_chunk | kappa | k");
    shorthand(sweep, "--kind", "sweep.kind", "train | phase");

    std::vector<std::string> argv_storage;
    argv_storage.reserve(args.size() + 1);
    argv_storage.emplace_back("sgc");
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "sgc: " << e.what() << '\n';
        return kConfigError;
    }

    try {
        std::vector<std::string> all = overrides;
        all.insert(all.end(), shorthands.begin(), shorthands.end());
        Context ctx;
        ctx.cfg = load_config(config_path, all);
        if (seed) ctx.cfg["seed"] = *seed;
        ctx.out_dir = out_dir;
        ctx.out = &out;
        if (recover->parsed()) return cmd_recover(ctx);
        if (memory->parsed()) return cmd_memory(ctx);
        if (train_cmd->parsed()) return cmd_train(ctx);
        return cmd_sweep(ctx);
    } catch (const Error& e) {
        err << "sgc: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const nlohmann::json::exception& e) {
        err << "sgc: config: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "sgc: " << e.what() << '\n';
        return kIoError;
    }
}

} // namespace sgc::cli
