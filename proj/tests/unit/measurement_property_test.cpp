// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "policy_gen.hpp"

#include "parma/fuzz.hpp"
#include "parma/policy.hpp"

#include <gtest/gtest.h>

namespace {

using namespace parma;

TEST(MeasurementProperty, RandomMutationsChangeTheDigest)
{
    std::mt19937_64 rng(7);
    std::map<std::string, int> kinds;
    for (int i = 0; i < 1000; ++i) {
        const auto base = fuzz::generate_world(static_cast<std::uint64_t>(i % 50)).policy;
        const auto m = support::mutate_policy(base, rng);
        ++kinds[m.description];
        EXPECT_NE(policy::measure_policy(m.policy), policy::measure_policy(base)) << m.description;
        // The change survives a render/parse cycle.
        EXPECT_EQ(policy::measure_policy(policy::parse_policy(policy::render_policy(m.policy))),
                  policy::measure_policy(m.policy))
            << m.description;
    }
    EXPECT_GE(kinds.size(), 15u);
}

TEST(MeasurementProperty, KeyOrderAndWhitespaceNeverMatter)
{
    std::mt19937_64 rng(11);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto p = fuzz::generate_world(seed).policy;
        const auto digest = policy::measure_policy(p);
        for (int k = 0; k < 10; ++k) {
            const auto text = support::permuted_text(p, rng);
            EXPECT_EQ(policy::measure_policy(policy::parse_policy(text)), digest) << text;
        }
    }
}

TEST(MeasurementProperty, MeasuringTwiceIsStable)
{
    const auto p = fuzz::generate_world(3).policy;
    EXPECT_EQ(policy::measure_policy(p), policy::measure_policy(p));
    EXPECT_EQ(policy::canonicalize(policy::parse_policy(policy::render_policy(p))),
              policy::canonicalize(p));
}

} // namespace
