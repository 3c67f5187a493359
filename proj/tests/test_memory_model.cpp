// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "sgc/memory_model.hpp"

using namespace sgc;

namespace {

const LayerShape kLlamaProj = LayerShape::square(4096);

template <class F>
void expect_invalid_spec(F&& fn) {
    try {
        fn();
        FAIL() << "expected invalid-spec";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidSpec) << e.what();
    }
}

} // namespace

TEST(MemoryModel, PublishedStateCounts) {
    EXPECT_EQ(account(kLlamaProj, MethodSpec::galore(1)).optimizer_states, 8192u);
    EXPECT_EQ(account(kLlamaProj, MethodSpec::lora(1)).optimizer_states, 16384u);
    EXPECT_EQ(account(kLlamaProj, MethodSpec::mesgc(1, 64, 7)).optimizer_states, 896u);
    EXPECT_EQ(account(kLlamaProj, MethodSpec::mesgc(1, 256, 8)).optimizer_states, 4096u);
}

TEST(MemoryModel, PublishedGranularity) {
    EXPECT_EQ(granularity(kLlamaProj, MethodSpec::cesgc(1, 1, 64, 8)).per_state_dim, 512u);
    EXPECT_EQ(granularity(kLlamaProj, MethodSpec::cesgc(1, 1, 64, 8)).total_states, 1024u);
    EXPECT_EQ(granularity(kLlamaProj, MethodSpec::galore(1)).per_state_dim, 4096u);
    EXPECT_EQ(granularity(kLlamaProj, MethodSpec::galore(3)).total_states, 8192u);
    EXPECT_EQ(granularity(kLlamaProj, MethodSpec::lora(2)).total_states, 16384u);
}

TEST(MemoryModel, SquareTableRows) {
    const std::size_t side = 64, d = side * side, r = 3;
    const MemoryReport galore = account(LayerShape::square(side), MethodSpec::galore(r));
    EXPECT_EQ(galore.weights, d);
    EXPECT_EQ(galore.optimizer_states, 2 * r * side);
    EXPECT_EQ(galore.projection_storage, r * side);
    const MemoryReport lora = account(LayerShape::square(side), MethodSpec::lora(r));
    EXPECT_EQ(lora.weights, d + 2 * r * side);
    EXPECT_EQ(lora.optimizer_states, 4 * r * side);
    EXPECT_EQ(lora.projection_storage, 0u);
    const MemoryReport full = account(LayerShape::square(side), MethodSpec::full());
    EXPECT_EQ(full.optimizer_states, 2 * d);
    const MemoryReport mesgc = account(LayerShape::square(side), MethodSpec::mesgc(2, 4, 8));
    EXPECT_EQ(mesgc.weights, d);
    EXPECT_EQ(mesgc.optimizer_states, 2u * 8 * 4 * 2);
    EXPECT_EQ(mesgc.projection_storage, 0u);
    const MemoryReport cesgc = account(LayerShape::square(side), MethodSpec::cesgc(r, 2, 4, 8));
    EXPECT_EQ(cesgc.optimizer_states, mesgc.optimizer_states);
    EXPECT_EQ(cesgc.projection_storage, r * side);
}

TEST(MemoryModel, NonSquareForms) {
    const LayerShape shape{1024, 256};
    EXPECT_EQ(account(shape, MethodSpec::galore(2)).optimizer_states, 2u * 2 * 256);
    EXPECT_EQ(account(shape, MethodSpec::galore(2)).projection_storage, 2u * 1024);
    EXPECT_EQ(account(shape, MethodSpec::lora(2)).optimizer_states, 2u * 2 * (1024 + 256));
    EXPECT_EQ(account(shape, MethodSpec::lora(2)).weights, 1024u * 256 + 2 * (1024 + 256));
    EXPECT_EQ(account(shape, MethodSpec::cesgc(4, 1, 8, 8)).projection_storage, 4u * 1024);
}

TEST(MemoryModel, SgcStatesIndependentOfShape) {
    const MethodSpec specs[] = {MethodSpec::mesgc(3, 16, 7), MethodSpec::cesgc(2, 1, 64, 8)};
    for (const MethodSpec& spec : specs) {
        const auto base = account(LayerShape::square(4096), spec).optimizer_states;
        for (LayerShape s : {LayerShape{512, 512}, LayerShape{100, 7000}, LayerShape{8192, 2048}})
            EXPECT_EQ(account(s, spec).optimizer_states, base);
    }
}

TEST(MemoryModel, StatesMonotoneInFreeInteger) {
    const LayerShape shape{300, 200};
    for (std::size_t f = 1; f < 20; ++f) {
        EXPECT_LE(account(shape, MethodSpec::mesgc(f, 4, 7)).optimizer_states,
                  account(shape, MethodSpec::mesgc(f + 1, 4, 7)).optimizer_states);
        EXPECT_LE(account(shape, MethodSpec::cesgc(2, f, 4, 7)).optimizer_states,
                  account(shape, MethodSpec::cesgc(2, f + 1, 4, 7)).optimizer_states);
        EXPECT_LE(account(shape, MethodSpec::galore(f)).optimizer_states,
                  account(shape, MethodSpec::galore(f + 1)).optimizer_states);
        EXPECT_LE(account(shape, MethodSpec::lora(f)).optimizer_states,
                  account(shape, MethodSpec::lora(f + 1)).optimizer_states);
    }
}

TEST(MemoryModel, SgcFloorBelowLowRankFloor) {
    for (std::size_t kappa : {4u, 7u, 8u, 12u}) {
        for (std::size_t side : {kappa + 1, 2 * kappa, 100 * kappa}) {
            const std::size_t sgc_min = account(LayerShape::square(side), MethodSpec::mesgc(1, 1, kappa)).min_states;
            EXPECT_EQ(sgc_min, 2 * kappa);
            if (side * side <= kappa * kappa) continue;
            EXPECT_LT(sgc_min, account(LayerShape::square(side), MethodSpec::galore(5)).min_states);
            EXPECT_LT(sgc_min, account(LayerShape::square(side), MethodSpec::lora(5)).min_states);
        }
    }
}

TEST(MemoryModel, ProjectionOverhead) {
    const LayerShape shape = LayerShape::square(256); // d = 65,536
    const MethodSpec spec = MethodSpec::mesgc(1, 64, 7); // k = 448
    EXPECT_EQ(projection_overhead(shape, spec, true), 458752u);
    EXPECT_EQ(projection_overhead(shape, spec, false), 0u);
    EXPECT_EQ(shared_matrix_entries(shape, spec), 7u * 1024);
    EXPECT_EQ(projection_overhead(kLlamaProj, MethodSpec::cesgc(4, 1, 64, 8), false), 16384u);
    expect_invalid_spec([&] { projection_overhead(shape, MethodSpec::galore(1), true); });
}

TEST(MemoryModel, BytesAndValidation) {
    EXPECT_EQ(to_bytes(896), 3584u);
    EXPECT_EQ(to_bytes(896, 2), 1792u);
    expect_invalid_spec([] { account(kLlamaProj, MethodSpec{Method::GaLore, {}, {}, {}, {}}); });
    expect_invalid_spec([] { account(kLlamaProj, MethodSpec{Method::MESGC, {}, 1, 4, {}}); });
    expect_invalid_spec([] { account(kLlamaProj, MethodSpec{Method::CESGC, {}, 1, 4, 8}); });
    expect_invalid_spec([] { account(LayerShape{0, 4}, MethodSpec::full()); });
    expect_invalid_spec([] { account(LayerShape{8, 8}, MethodSpec::cesgc(9, 1, 1, 1)); });
    EXPECT_EQ(parse_method("galore"), Method::GaLore);
    EXPECT_EQ(parse_method("MESGC"), Method::MESGC);
    expect_invalid_spec([] { parse_method("adam"); });
}
