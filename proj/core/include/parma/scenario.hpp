// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "parma/bridge.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace parma::scenario {

using nlohmann::json;

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class MutationOp {
    swap_layer_order,
    inject_rogue_layer_hash,
    alter_env,
    alter_command,
    alter_mount_destination,
    replay_request,
    drop_request,
    reorder_requests,
    tamper_payload_byte,
};

std::string_view mutation_name(MutationOp op);
std::optional<MutationOp> mutation_from_name(std::string_view name);

struct Mutation {
    MutationOp op = MutationOp::replay_request;
    std::vector<std::string> bases; // step ids; reorder takes two or more
    json operands = json::object();
};

struct ImageSpec {
    std::uint8_t fill = 0;
    std::size_t blocks = 1;
};

// Deterministic test image for `name`; the salt is derived from the name.
storage::VerityImage make_image(const std::string& name, const ImageSpec& spec);

struct AttachStep {
    std::string target;
    std::string image;
    // Flip one bit of the data at this byte offset before attaching.
    std::optional<std::size_t> corrupt_byte;
};

struct Step {
    std::string id;
    bool template_only = false; // a base for mutations, never sent itself
    std::optional<bridge::Request> request;
    std::optional<AttachStep> attach;
    std::optional<Mutation> mutation;
    std::vector<bool> expect_allow; // one entry per delivered request
};

struct Scenario {
    std::string name;
    std::string description;
    std::vector<std::string> covers;
    std::map<std::string, ImageSpec> images;
    std::string policy_text; // placeholders resolved
    std::vector<Step> steps;
};

// Replaces "@image:<name>" strings with the image root hash.
Scenario load_scenario(const json& document);
Scenario load_scenario_file(const std::filesystem::path& path);
std::vector<std::filesystem::path> list_scenarios(const std::filesystem::path& dir);

struct StepResult {
    std::size_t index = 0;
    std::string id;
    std::string kind; // request, attach, or the mutation operator
    std::vector<bool> expected;
    std::vector<bool> actual;
    std::vector<std::string> reasons;
    bool pass = false;
};

struct ScenarioReport {
    std::string name;
    std::vector<StepResult> steps;
    bool final_safe = false;
    bool passed = false;
    bool aborted = false;
    std::size_t abort_step = 0;
    std::string abort_reason;

    json to_json() const;
};

enum class TransportKind { in_process, tcp };

/// Drives an already-booted guest. `safety_check` reports the guest's final
/// safety oracle verdict.
ScenarioReport run_scenario(const Scenario& scenario, bridge::Transport& transport,
                            const std::function<bool()>& safety_check);

/// Boots a fresh guest with the scenario's policy and drives it over `kind`.
ScenarioReport run_scenario(const Scenario& scenario, TransportKind kind = TransportKind::in_process);

/// Coverage manifest: each adversary capability names the scenarios and the
/// mutation operators that exercise it.
struct CoverageEntry {
    std::string id;
    std::string capability;
    std::vector<std::string> scenarios;
    std::vector<std::string> operators;
};

std::vector<CoverageEntry> load_coverage(const std::filesystem::path& path);

// Human-readable problems; empty when every entry is backed by a scenario
// that carries its tag and uses at least one listed operator.
std::vector<std::string> check_coverage(const std::vector<CoverageEntry>& entries,
                                        const std::vector<Scenario>& corpus);

} // namespace parma::scenario
