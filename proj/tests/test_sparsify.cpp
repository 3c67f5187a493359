// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "sgc/rng.hpp"
#include "sgc/sparsify.hpp"

using namespace sgc;

namespace {

DenseVector normal_vector(std::size_t d, Rng& rng) {
    DenseVector v(d);
    for (auto& x : v) x = rng.normal();
    return v;
}

/// Brute-force top-s: repeatedly pick the largest remaining |v_i|, lowest
/// index first on ties.
std::vector<std::size_t> brute_top(std::span<const double> v, std::size_t s) {
    std::vector<char> used(v.size(), 0);
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < s; ++k) {
        std::size_t best = v.size();
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (used[i]) continue;
            if (best == v.size() || std::abs(v[i]) > std::abs(v[best])) best = i;
        }
        used[best] = 1;
        if (v[best] != 0.0) out.push_back(best);
    }
    std::sort(out.begin(), out.end());
    return out;
}

template <class F>
void expect_error(F&& fn, ErrorKind kind) {
    try {
        fn();
        FAIL() << "expected " << to_string(kind);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), kind) << e.what();
    }
}

} // namespace

TEST(SparsifyTopS, PicksLargestMagnitude) {
    const SparseVector r = sparsify_top_s(DenseVector{3, -5, 1}, 1);
    EXPECT_EQ(r.support(), (std::vector<std::size_t>{1}));
    EXPECT_EQ(r.values(), (std::vector<double>{-5}));
}

TEST(SparsifyTopS, FullSparsityIsIdentity) {
    Rng rng(1);
    const DenseVector v = normal_vector(8, rng);
    EXPECT_EQ(sparsify_top_s(v, 8).densify(), v);
}

TEST(SparsifyTopS, TiesGoToLowestIndex) {
    const SparseVector r = sparsify_top_s(DenseVector{2, -2, 0, 2}, 2);
    EXPECT_EQ(r.support(), (std::vector<std::size_t>{0, 1}));
}

TEST(SparsifyTopS, RangeChecked) {
    expect_error([] { sparsify_top_s(DenseVector{1, 2}, 0); }, ErrorKind::InvalidSparsity);
    expect_error([] { sparsify_top_s(DenseVector{1, 2}, 3); }, ErrorKind::InvalidSparsity);
}

TEST(SparsifyTopS, ZerosArePruned) {
    const SparseVector r = sparsify_top_s(DenseVector{0, 4, 0, 0}, 3);
    EXPECT_EQ(r.support(), (std::vector<std::size_t>{1}));
}

TEST(SparsifyTopS, MatchesBruteForceWithTies) {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        Rng rng(seed);
        DenseVector v(20);
        // Small integer values force many magnitude ties.
        for (auto& x : v) x = static_cast<double>(static_cast<int>(rng.below(7)) - 3);
        const std::size_t s = 1 + rng.below(20);
        ASSERT_EQ(sparsify_top_s(v, s).support(), brute_top(v.span(), s)) << "seed " << seed;
    }
}

TEST(SparsifyTopS, Idempotent) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        const DenseVector v = normal_vector(32, rng);
        const std::size_t s = 1 + rng.below(32);
        const SparseVector once = sparsify_top_s(v, s);
        EXPECT_EQ(sparsify_top_s(once.densify(), s), once);
    }
}

TEST(SparsifyTopS, ApproximationErrorNonIncreasingInS) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const DenseVector v = normal_vector(40, rng);
        double prev = INFINITY;
        for (std::size_t s = 1; s <= 40; ++s) {
            const DenseVector approx = sparsify_top_s(v, s).densify();
            double err = 0.0;
            for (std::size_t i = 0; i < 40; ++i) err += (approx[i] - v[i]) * (approx[i] - v[i]);
            EXPECT_LE(err, prev);
            prev = err;
        }
    }
}

TEST(SquareSupport, SquaresValuesKeepsSupport) {
    const SparseVector r = square_support(SparseVector(3, {1}, {-5}));
    EXPECT_EQ(r.support(), (std::vector<std::size_t>{1}));
    EXPECT_EQ(r.values(), (std::vector<double>{25}));
    EXPECT_EQ(square_support(SparseVector(4)).nnz(), 0u);
}

TEST(SquareSupport, AgreesWithSparsifyingTheSquare) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        const DenseVector v = normal_vector(16, rng); // continuous: no magnitude ties
        const SparseVector a = square_support(sparsify_top_s(v, 4));
        const SparseVector b = sparsify_top_s(elementwise_square(v), 4);
        EXPECT_EQ(a.support(), b.support());
        for (std::size_t i = 0; i < a.nnz(); ++i) EXPECT_DOUBLE_EQ(a.values()[i], b.values()[i]);
    }
}

TEST(ChunkedSparsify, DefinitionExample) {
    const SparseVector r = chunked_sparsify(DenseVector{9, 8, 0, 0, 1, 0, 0, 0}, 2, 1);
    EXPECT_EQ(r.support(), (std::vector<std::size_t>{0, 4}));
    EXPECT_EQ(r.values(), (std::vector<double>{9, 1}));
}

TEST(ChunkedSparsify, SingleChunkEqualsGlobal) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const DenseVector v = normal_vector(24, rng);
        EXPECT_EQ(chunked_sparsify(v, 1, 5), sparsify_top_s(v, 5));
    }
}

TEST(ChunkedSparsify, UniformSupportEqualsGlobal) {
    // Each chunk of 8 holds exactly two large entries.
    Rng rng(3);
    DenseVector v(32);
    for (auto& x : v) x = 0.01 * rng.normal();
    for (std::size_t c = 0; c < 4; ++c) {
        v[c * 8 + 1] = 5.0 + c;
        v[c * 8 + 6] = -(7.0 + c);
    }
    EXPECT_EQ(chunked_sparsify(v, 4, 2), sparsify_top_s(v, 8));
    EXPECT_EQ(chunking_error(v, 4, 2), 0.0);
}

TEST(ChunkedSparsify, PerChunkBudgetAndBruteForce) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const DenseVector v = normal_vector(48, rng);
        const SparseVector r = chunked_sparsify(v, 6, 3);
        std::vector<std::size_t> expected;
        for (std::size_t c = 0; c < 6; ++c) {
            auto local = brute_top(std::span<const double>(v.data() + c * 8, 8), 3);
            for (auto i : local) expected.push_back(c * 8 + i);
        }
        ASSERT_EQ(r.support(), expected);
        for (std::size_t c = 0; c < 6; ++c) {
            const auto n = std::count_if(r.support().begin(), r.support().end(),
                                         [&](std::size_t i) { return i / 8 == c; });
            EXPECT_EQ(n, 3);
        }
    }
}

TEST(ChunkedSparsify, InvalidArguments) {
    const DenseVector v(12);
    expect_error([&] { chunked_sparsify(v, 5, 1); }, ErrorKind::InvalidChunking);
    expect_error([&] { chunked_sparsify(v, 4, 4); }, ErrorKind::InvalidChunking);
    expect_error([&] { chunked_sparsify(v, 4, 0); }, ErrorKind::InvalidChunking);
}

TEST(ChunkingErrorBound, Arithmetic) {
    EXPECT_EQ(chunking_error_bound(16, 16, 3.0), 0.0);
    EXPECT_DOUBLE_EQ(chunking_error_bound(8, 2, 1.0), 1.5);
    EXPECT_DOUBLE_EQ(chunking_error_bound(1024, 64, 10.0), 18.75);
}

TEST(ChunkingError, Examples) {
    EXPECT_DOUBLE_EQ(chunking_error(DenseVector{9, 8, 0, 0, 1, 0, 0, 0}, 2, 1), 65.0);
    Rng rng(0);
    EXPECT_EQ(chunking_error(normal_vector(20, rng), 1, 4), 0.0);
}

TEST(ChunkingError, MatchesDenseDifference) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const DenseVector v = normal_vector(64, rng);
        const DenseVector a = chunked_sparsify(v, 8, 2).densify();
        const DenseVector b = sparsify_top_s(v, 16).densify();
        double want = 0.0;
        for (std::size_t i = 0; i < 64; ++i) want += (a[i] - b[i]) * (a[i] - b[i]);
        EXPECT_NEAR(chunking_error(v, 8, 2), want, 1e-12 * (1.0 + want));
    }
}

TEST(ChunkingError, BoundHoldsInExpectation) {
    // Smaller instance of the acceptance check: mean error <= bound with G_max
    // the largest ‖chunked‖² observed.
    const std::size_t d = 256, c = 16, s_c = 2;
    double sum = 0.0, g_max = 0.0;
    const int draws = 2000;
    for (int t = 0; t < draws; ++t) {
        Rng rng(derive_seed(17, static_cast<std::uint64_t>(t)));
        const DenseVector v = normal_vector(d, rng);
        sum += chunking_error(v, c, s_c);
        g_max = std::max(g_max, chunked_sparsify(v, c, s_c).densify().squared_norm());
    }
    EXPECT_LE(sum / draws, chunking_error_bound(d, c * s_c, g_max));
}
