// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include "parma/crypto.hpp"
#include "parma/storage.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace parma;

void BM_CreateContainer(benchmark::State& state)
{
    const auto templates = static_cast<std::size_t>(state.range(0));
    const auto policy = support::wide_policy(templates);
    const auto store = support::wide_store(policy);
    const auto request = support::wide_create_request(templates);
    for (auto _ : state) {
        auto result = engine::enforce(policy, store, request);
        benchmark::DoNotOptimize(result);
    }
}
BENCHMARK(BM_CreateContainer)->Arg(1)->Arg(10)->Arg(50)->Arg(200)->Unit(benchmark::kMicrosecond);

void BM_MeasurePolicy(benchmark::State& state)
{
    const auto policy = support::wide_policy(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(policy::measure_policy(policy));
}
BENCHMARK(BM_MeasurePolicy)->Arg(1)->Arg(50)->Unit(benchmark::kMicrosecond);

void BM_VerifiedRead(benchmark::State& state)
{
    const Bytes data(static_cast<std::size_t>(state.range(0)) * storage::block_size, 0x5a);
    const auto image = storage::build_tree(data, Digest32{});
    std::size_t block = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(storage::verified_read(image, block, image.root_hash));
        block = (block + 1) % image.block_count();
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(storage::block_size));
}
BENCHMARK(BM_VerifiedRead)->Arg(4)->Arg(4096);

} // namespace

BENCHMARK_MAIN();
