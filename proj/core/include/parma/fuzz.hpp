// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "parma/policy.hpp"
#include "parma/storage.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace parma::fuzz {

/// A policy plus the layer images its digests refer to.
struct World {
    policy::ExecutionPolicy policy;
    std::vector<storage::VerityImage> layers;  // one per distinct policy digest
    std::vector<storage::VerityImage> strangers; // not in the policy
};

// Deterministic in `seed`. Always yields a policy that passes validation.
World generate_world(std::uint64_t seed);

struct FuzzReport {
    std::uint64_t policies = 0;
    std::uint64_t traces = 0;
    std::uint64_t steps = 0;
    std::uint64_t allows = 0;
    std::uint64_t denies = 0;
    std::uint64_t failures = 0; // allowed by policy but failed in storage
    std::uint64_t mutated = 0;
    std::uint64_t safety_violations = 0;
    std::uint64_t atomicity_violations = 0;
    std::map<std::string, std::uint64_t> deny_reasons;
    std::vector<std::string> findings; // first few violations, for diagnosis
    std::string decision_digest;       // SHA-256 over every decision in order

    bool clean() const { return safety_violations == 0 && atomicity_violations == 0; }
    nlohmann::json to_json() const;
};

/// Runs `trace_count` random traces of `step_count` steps against fresh
/// guests booted with `world.policy`, checking the safety oracle after every
/// step and snapshot equality around every denied step.
FuzzReport fuzz_traces(const World& world, std::size_t step_count, std::size_t trace_count,
                       std::uint64_t seed);

/// Spreads `trace_count` traces round-robin over `policy_count` generated worlds.
FuzzReport fuzz_campaign(std::size_t policy_count, std::size_t step_count,
                         std::size_t trace_count, std::uint64_t seed);

} // namespace parma::fuzz
