// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance                 run all criteria
//   acceptance 3 6             run a subset
//   acceptance --write-golden  regenerate tests/golden/adamw_logistic_d256.csv

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sgc_cli.hpp"

using namespace sgc;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kSource = SGC_SOURCE_DIR;
const fs::path kGolden = kSource / "tests" / "golden" / "adamw_logistic_d256.csv";
constexpr std::size_t kSeeds = 5;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double x, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << x;
    return s.str();
}

// --- 1 ----------------------------------------------------------------------

Outcome memory_golden() {
    const LayerShape sq = LayerShape::square(4096);
    struct Check {
        const char* what;
        std::size_t got;
        std::size_t want;
    };
    const Check checks[] = {
        {"GaLore r=1 states", account(sq, MethodSpec::galore(1)).optimizer_states, 8192},
        {"LoRA r=1 states", account(sq, MethodSpec::lora(1)).optimizer_states, 16384},
        {"MESGC c=64 k=7 states", account(sq, MethodSpec::mesgc(1, 64, 7)).optimizer_states, 896},
        {"MESGC c=256 k=8 states", account(sq, MethodSpec::mesgc(1, 256, 8)).optimizer_states, 4096},
        {"CESGC granularity", granularity(sq, MethodSpec::cesgc(1, 1, 64, 8)).per_state_dim, 512},
        {"GaLore granularity", granularity(sq, MethodSpec::galore(1)).total_states, 8192},
        {"LoRA granularity", granularity(sq, MethodSpec::lora(1)).total_states, 16384},
    };
    Outcome o{true, ""};
    for (const Check& c : checks) {
        if (c.got != c.want) {
            o.pass = false;
            o.detail += std::string(c.what) + "=" + std::to_string(c.got) + " (want " + std::to_string(c.want) + ") ";
        }
    }
    if (o.pass) o.detail = "7/7 exact";
    return o;
}

// --- 2 ----------------------------------------------------------------------

struct SparseInstance {
    DenseMatrix a;
    DenseVector x;
    DenseVector y;
};

SparseInstance draw_instance(std::size_t k, std::size_t d, std::size_t s, std::uint64_t seed) {
    Rng rng(seed);
    SparseInstance in;
    in.a = gaussian_matrix(k, d, rng);
    std::vector<std::size_t> idx(d);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < s; ++i) std::swap(idx[i], idx[i + rng.below(d - i)]);
    in.x = DenseVector(d);
    for (std::size_t i = 0; i < s; ++i) in.x[idx[i]] = rng.normal();
    in.y = matvec(in.a, in.x);
    return in;
}

bool exact(const RecoveryResult& r, const DenseVector& x) {
    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] != 0.0) support.push_back(i);
    return r.estimate.support() == support && max_abs_diff(r.estimate.densify().span(), x.span()) <= 1e-6;
}

Outcome omp_exactness() {
    Outcome o{true, ""};
    for (std::size_t s : {4u, 8u, 16u}) {
        std::size_t ok = 0;
        for (std::uint64_t t = 0; t < 1000; ++t) {
            const SparseInstance in = draw_instance(8 * s, 512, s, derive_seed(2000 + s, t));
            try {
                if (exact(omp_cholesky(in.a, GramCache(in.a, 0), in.y, s, default_tol(in.y.span())), in.x)) ++ok;
            } catch (const Error&) {
            }
        }
        o.pass = o.pass && ok >= 990;
        o.detail += "s=" + std::to_string(s) + ": " + std::to_string(ok) + "/1000; ";
    }
    double worst = 0.0;
    std::size_t mismatched = 0;
    for (std::uint64_t t = 0; t < 500; ++t) {
        const std::size_t s = 4u << (t % 3);
        SparseInstance in = draw_instance(8 * s, 512, s, derive_seed(3000, t));
        if (t % 2) {
            Rng noise(t);
            for (auto& v : in.y) v += 0.05 * noise.normal();
        }
        const double tol = default_tol(in.y.span());
        const RecoveryResult a = omp_naive(in.a, in.y, s, tol);
        const RecoveryResult b = omp_cholesky(in.a, GramCache(in.a, 0), in.y, s, tol);
        if (a.estimate.support() != b.estimate.support()) {
            ++mismatched;
            continue;
        }
        worst = std::max(worst, max_abs_diff(a.estimate.densify().span(), b.estimate.densify().span()));
    }
    o.pass = o.pass && mismatched == 0 && worst <= 1e-8;
    o.detail += "cholesky vs naive: " + std::to_string(mismatched) + " support mismatches, max diff " + fmt(worst, 3);
    return o;
}

// --- 3 ----------------------------------------------------------------------

Outcome kappa_phase() {
    std::vector<double> rate;
    for (std::size_t kappa : {6u, 7u}) {
        rate.push_back(static_cast<double>(cli::phase_successes(512, 16, kappa, 500, derive_seed(4000, kappa))) / 500.0);
    }
    return {rate[1] >= 0.95 && rate[1] > rate[0], "rate(kappa=6)=" + fmt(rate[0]) + ", rate(kappa=7)=" + fmt(rate[1])};
}

// --- 4 ----------------------------------------------------------------------

Outcome chunking_bound() {
    Outcome o{true, ""};
    const std::size_t d = 1024;
    const std::pair<std::size_t, std::size_t> grid[] = {{8, 8}, {16, 4}, {64, 1}};
    for (auto [c, s_c] : grid) {
        double sum = 0.0, g_max = 0.0;
        for (std::uint64_t t = 0; t < 10000; ++t) {
            Rng rng(derive_seed(5000 + c, t));
            DenseVector v(d);
            for (auto& x : v) x = rng.normal();
            sum += chunking_error(v, c, s_c);
            g_max = std::max(g_max, chunked_sparsify(v, c, s_c).densify().squared_norm());
        }
        const double mean = sum / 10000.0;
        const double bound = chunking_error_bound(d, c * s_c, g_max);
        o.pass = o.pass && mean <= bound;
        o.detail += "(c=" + std::to_string(c) + ",s_c=" + std::to_string(s_c) + ") mean " + fmt(mean) + " <= " +
                    fmt(bound) + "; ";

        // Uniform support: every chunk holds exactly s_c dominant entries.
        Rng rng(derive_seed(5100, c));
        DenseVector u(d);
        for (auto& x : u) x = 0.01 * rng.normal();
        const std::size_t len = d / c;
        for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < s_c; ++j) u[i * len + j * (len / s_c)] = 10.0 + rng.uniform();
        const double err = chunking_error(u, c, s_c);
        o.pass = o.pass && err == 0.0;
        if (err != 0.0) o.detail += "uniform-support error " + fmt(err) + "; ";
    }
    o.detail += "uniform-support errors 0";
    return o;
}

// --- 5 ----------------------------------------------------------------------

Outcome lossless_equivalence() {
    ProblemSpec spec;
    spec.kind = ProblemKind::Quadratic;
    spec.dim = 64;
    spec.seed = 6;
    const Problem p = make_problem(spec);
    SgcConfig cfg;
    cfg.eta = 0.05;
    cfg.alpha = 1.0;
    cfg.chunks = 1;
    cfg.sparsity_per_chunk = 64;
    cfg.kappa = 1;
    cfg.projection = ProjectionKind::Identity;
    AdamWState adam(64);
    SgcState sgc = SgcState::create(64, cfg);
    DenseVector wa = initial_params(p, 0), ws = wa;
    double max_n = 0.0, max_loss = 0.0;
    for (int t = 0; t < 200; ++t) {
        auto [la, ga] = loss_and_grad(p, wa, full_batch(p));
        auto [ls, gs] = loss_and_grad(p, ws, full_batch(p));
        const StepOutput na = adamw_step(ga, adam, cfg);
        const StepOutput ns = sgc_step(gs, sgc, cfg);
        max_n = std::max(max_n, max_abs_diff(na.n.span(), ns.n.span()));
        max_loss = std::max(max_loss, std::abs(la - ls));
        apply_update_inplace(wa, na.n, cfg.eta);
        apply_update_inplace(ws, ns.n, cfg.eta);
    }
    return {max_n <= 1e-6 && max_loss <= 1e-5,
            "max |dN| " + fmt(max_n, 3) + " (<= 1e-6), max |dloss| " + fmt(max_loss, 3) + " (<= 1e-5)"};
}

// --- 6 ----------------------------------------------------------------------

json convergence_config() { return cli::load_config((kSource / "configs" / "logistic_mesgc.json").string(), {}); }

double final_loss_for(json cfg, std::uint64_t seed, const std::string& optimizer) {
    cfg["seed"] = seed;
    cfg["train"]["optimizer"] = optimizer;
    const Problem p = make_problem(cli::problem_spec(cfg));
    return train(p, cli::optimizer_config(cfg), cli::train_options(cfg)).final_loss;
}

std::string golden_preamble(const json& cfg) {
    json baseline = cfg;
    baseline["train"]["optimizer"] = "adamw";
    baseline.erase("seed");
    return "# adamw baseline for the MESGC convergence check\n# config: " + baseline.dump() + "\n";
}

int write_golden() {
    const json cfg = convergence_config();
    std::string csv = golden_preamble(cfg) + "seed,final_loss\n";
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed)
        csv += std::to_string(seed) + "," + format_double(final_loss_for(cfg, seed, "adamw")) + "\n";
    fs::create_directories(kGolden.parent_path());
    std::ofstream(kGolden, std::ios::binary) << csv;
    std::cout << "wrote " << kGolden.string() << '\n';
    return 0;
}

Outcome convergence() {
    const json cfg = convergence_config();
    std::ifstream in(kGolden, std::ios::binary);
    if (!in) return {false, "missing golden baseline " + kGolden.string()};
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string preamble = golden_preamble(cfg);
    if (text.compare(0, preamble.size(), preamble) != 0)
        return {false, "golden baseline was produced with a different config; rerun --write-golden"};
    std::vector<double> golden;
    std::istringstream rows(text.substr(preamble.size()));
    std::string line;
    std::getline(rows, line); // header
    while (std::getline(rows, line))
        if (!line.empty()) golden.push_back(parse_double(line.substr(line.find(',') + 1)));
    if (golden.size() != kSeeds) return {false, "golden baseline has " + std::to_string(golden.size()) + " rows"};

    std::vector<double> ratios;
    double drift = 0.0;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
        drift = std::max(drift, std::abs(final_loss_for(cfg, seed, "adamw") / golden[seed] - 1.0));
        ratios.push_back(final_loss_for(cfg, seed, "mesgc") / golden[seed]);
    }
    const double med = median(ratios);
    std::string per_seed;
    for (double r : ratios) per_seed += fmt(r) + " ";
    return {med <= 1.10 && drift <= 1e-9,
            "median MESGC/AdamW final loss " + fmt(med) + " (<= 1.10); per seed " + per_seed +
                "; baseline reproduces golden within " + fmt(drift, 2)};
}

// --- 7 ----------------------------------------------------------------------

std::vector<double> sweep_medians(const std::string& file, std::string& detail) {
    const json cfg = cli::load_config((kSource / "configs" / file).string(), {});
    const json& sw = cfg.at("sweep");
    const std::string parameter = sw.at("parameter");
    std::vector<double> medians;
    detail += parameter + ":";
    for (std::uint64_t value : sw.at("values").get<std::vector<std::uint64_t>>()) {
        std::vector<double> losses;
        for (std::uint64_t seed : sw.at("seeds").get<std::vector<std::uint64_t>>()) {
            const std::string row = cli::train_sweep_row(cfg, parameter, value, seed, sw.at("total_sparsity"));
            losses.push_back(parse_double(row.substr(0, row.find(','))));
        }
        medians.push_back(median(losses));
        detail += " " + std::to_string(value) + "->" + fmt(medians.back());
    }
    detail += "; ";
    return medians;
}

Outcome ablation_trends() {
    Outcome o{true, ""};
    const std::vector<double> by_chunks = sweep_medians("ablation_chunks.json", o.detail);
    const std::vector<double> by_sparsity = sweep_medians("ablation_sparsity.json", o.detail);
    for (std::size_t i = 1; i < by_chunks.size(); ++i) o.pass = o.pass && by_chunks[i] >= by_chunks[i - 1];
    for (std::size_t i = 1; i < by_sparsity.size(); ++i) o.pass = o.pass && by_sparsity[i] <= by_sparsity[i - 1];
    o.detail += "chunks non-decreasing, sparsity non-increasing";
    return o;
}

// --- 8 ----------------------------------------------------------------------

Outcome gradient_checks() {
    Outcome o{true, ""};
    for (ProblemKind kind : {ProblemKind::Quadratic, ProblemKind::LinearRegression, ProblemKind::LogisticRegression,
                             ProblemKind::Mlp2}) {
        ProblemSpec spec;
        spec.kind = kind;
        spec.dim = kind == ProblemKind::Mlp2 ? 6 : 32;
        spec.samples = 64;
        spec.hidden = 5;
        spec.seed = 8;
        spec.l2 = 0.01;
        const Problem p = make_problem(spec);
        Rng rng(derive_seed(8000, static_cast<std::uint64_t>(kind)));
        double worst = 0.0;
        for (int t = 0; t < 100; ++t) {
            DenseVector w(p.d);
            for (auto& x : w) x = 0.5 * rng.normal();
            worst = std::max(worst, gradient_check(p, w));
        }
        o.pass = o.pass && worst <= 1e-5;
        o.detail += std::string(to_string(kind)) + " " + fmt(worst, 2) + "; ";
    }
    o.detail += "max relative error <= 1e-5";
    return o;
}

// --- 9 ----------------------------------------------------------------------

Outcome cli_determinism() {
    const fs::path root = fs::temp_directory_path() / "sgc_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    {
        Rng rng(9);
        const DenseMatrix a = gaussian_matrix(32, 128, rng);
        DenseVector x(128);
        x[3] = 1.0;
        x[60] = -0.5;
        x[99] = 2.0;
        std::ofstream fa(root / "a.txt"), fy(root / "y.txt");
        write_dense_matrix(fa, a);
        write_dense_vector(fy, matvec(a, x));
    }
    const std::string cfg = (kSource / "configs" / "logistic_mesgc.json").string();
    const std::vector<std::pair<std::vector<std::string>, std::string>> runs = {
        {{"recover", "--a", (root / "a.txt").string(), "--y", (root / "y.txt").string(), "-s", "3"}, "recovery.csv"},
        {{"memory", "--manifest", (kSource / "configs" / "layers_4096.txt").string(), "--chunks", "64", "--kappa", "7"},
         "memory.csv"},
        {{"train", "--config", cfg, "--set", "train.steps=100", "--seed", "3"}, "train.csv"},
        {{"train", "--config", cfg, "--set", "train.steps=50", "--set", "train.optimizer=cesgc", "--set",
          "optimizer.chunks=1", "--set", "optimizer.rank=2"},
         "train.csv"},
        {{"sweep", "--config", cfg, "--set", "train.steps=30", "--set", "sweep.parameter=kappa", "--set",
          "sweep.values=[4,8]", "--set", "sweep.seeds=[0,1]"},
         "sweep.csv"},
        {{"sweep", "--kind", "phase", "--set", "sweep.phase.trials=40"}, "sweep.csv"},
    };
    Outcome o{true, ""};
    std::size_t identical = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        std::string bytes[2];
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path dir = root / (std::to_string(i) + "_" + std::to_string(rep));
            std::vector<std::string> args = runs[i].first;
            args.insert(args.end(), {"--out", dir.string()});
            std::ostringstream out, err;
            const int code = cli::run_cli(args, out, err);
            if (code != 0) {
                o.pass = false;
                o.detail += args[0] + " exited " + std::to_string(code) + ": " + err.str();
            }
            std::ifstream in(dir / runs[i].second, std::ios::binary);
            bytes[rep].assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        }
        if (!bytes[0].empty() && bytes[0] == bytes[1]) ++identical;
    }
    fs::remove_all(root);
    o.pass = o.pass && identical == runs.size();
    o.detail += std::to_string(identical) + "/" + std::to_string(runs.size()) + " commands byte-identical on rerun";
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--write-golden") return write_golden();
        only.insert(std::stoi(arg));
    }
    const std::vector<Criterion> criteria = {
        {1, "memory-model golden values", 1, memory_golden},
        {2, "OMP exactness and variant equivalence", 60, omp_exactness},
        {3, "kappa phase property", 60, kappa_phase},
        {4, "chunking error bound", 30, chunking_bound},
        {5, "lossless SGC equals AdamW", 10, lossless_equivalence},
        {6, "MESGC convergence vs AdamW baseline", 120, convergence},
        {7, "chunk and sparsity ablation trends", 300, ablation_trends},
        {8, "finite-difference gradient checks", 60, gradient_checks},
        {9, "CLI determinism", 120, cli_determinism},
    };
    int failed = 0;
    for (const Criterion& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs <= c.budget_seconds;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("criterion %d: %s  %s | %s | %.2fs (budget %.0fs%s)\n", c.id, pass ? "PASS" : "FAIL", c.name,
                    o.detail.c_str(), secs, c.budget_seconds, in_time ? "" : ", EXCEEDED");
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
