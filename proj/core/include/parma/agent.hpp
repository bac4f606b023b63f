// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "parma/engine.hpp"
#include "parma/storage.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace parma::agent {

using engine::EnforcementDecision;
using engine::EnforcementRequest;
using policy::ExecutionPolicy;

/// Unrecoverable agent condition. The agent refuses to continue after one.
class AgentFault : public std::runtime_error {
public:
    enum class Code { policy_measurement_mismatch = 10, internal_inconsistency = 11 };

    AgentFault(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const noexcept { return code_; }

private:
    Code code_;
};

enum class ProcessStatus { running, exited };
enum class ContainerStatus { created, running, exited };

struct Process {
    std::uint64_t pid = 0;
    std::vector<std::string> command;
    ProcessStatus status = ProcessStatus::running;
    bool operator==(const Process&) const = default;
};

struct ContainerInstance {
    std::string id;
    ContainerStatus status = ContainerStatus::created;
    std::vector<std::string> start_command;
    std::vector<Process> processes; // processes[0] is the start process
    bool operator==(const ContainerInstance&) const = default;
};

enum class Outcome { allowed, denied, failed };

std::string_view outcome_name(Outcome o);

struct LogEntry {
    std::uint64_t sequence = 0;
    EnforcementRequest request;
    EnforcementDecision decision;
    Outcome outcome = Outcome::denied;
};

/// Authoritative guest state.
struct UvmState {
    ExecutionPolicy policy;
    engine::MetadataStore store;
    std::map<std::string, ContainerInstance> containers;
    std::vector<Process> uvm_processes;
    // nullopt marks an erased key
    std::map<std::string, std::optional<Digest32>> scratch_keys;
    std::map<std::string, std::shared_ptr<storage::ScratchDevice>> scratch_devices;
    std::map<std::string, std::shared_ptr<const storage::VerityImage>> mounted_layers;
    // Block devices the host has attached, keyed by target path. Untrusted.
    std::map<std::string, std::shared_ptr<const storage::VerityImage>> attached_devices;
    std::uint64_t next_pid = 1;
    std::vector<LogEntry> log;
};

struct AgentResponse {
    bool allowed = false;
    Outcome outcome = Outcome::denied;
    std::string deny_reason;
    nlohmann::json result = nlohmann::json::object();
};

/// Simulated in-guest agent. Every action passes its enforcement point
/// before any side effect; state changes are all-or-nothing.
class GuestAgent {
public:
    static constexpr std::size_t scratch_sectors = 16;

    // Refuses to start (AgentFault::policy_measurement_mismatch) unless the
    // policy's measurement prefix equals host_data.
    static GuestAgent boot(ExecutionPolicy policy, const Digest32& host_data);
    static GuestAgent boot(std::string_view policy_text, const Digest32& host_data);

    AgentResponse handle_request(const EnforcementRequest& request);

    // Host-side device hotplug; not an enforcement point.
    void attach_device(const std::string& target, std::shared_ptr<const storage::VerityImage> image);

    const UvmState& state() const { return state_; }

    // Called while a freshly formatted scratch key is still present.
    using ScratchObserver = std::function<void(const std::string& target, const UvmState&)>;
    void set_scratch_observer(ScratchObserver observer) { scratch_observer_ = std::move(observer); }

private:
    explicit GuestAgent(ExecutionPolicy policy);

    void apply_side_effect(UvmState& next, const EnforcementRequest& request,
                           AgentResponse& response) const;
    void check_consistency(const UvmState& s) const;

    UvmState state_;
    std::uint64_t next_log_sequence_ = 1;
    ScratchObserver scratch_observer_;
};

// Deterministic serialization of security state. The decision log is excluded.
std::string snapshot(const UvmState& state);

// Re-derives the safety invariant from the policy and the state without the
// engine's matching code. Used by tests and the fuzzer.
bool safety_oracle(const UvmState& state);
std::vector<std::string> safety_violations(const UvmState& state);

} // namespace parma::agent
