// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "parma/policy.hpp"

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace parma::engine {

using policy::ExecutionPolicy;
using policy::LayerDigest;

/// Guest-agent actions that are gated by an enforcement point.
enum class Action {
    mount_device,
    unmount_device,
    mount_overlay,
    unmount_overlay,
    create_container,
    exec_in_container,
    exec_external,
    shutdown_container,
    signal_process,
    mount_host_device,
    unmount_host_device,
    mount_scratch,
    unmount_scratch,
    get_properties,
    dump_stacks,
    runtime_logging,
    container_logging,
};

inline constexpr std::array all_actions = {
    Action::mount_device,      Action::unmount_device,      Action::mount_overlay,
    Action::unmount_overlay,   Action::create_container,    Action::exec_in_container,
    Action::exec_external,     Action::shutdown_container,  Action::signal_process,
    Action::mount_host_device, Action::unmount_host_device, Action::mount_scratch,
    Action::unmount_scratch,   Action::get_properties,      Action::dump_stacks,
    Action::runtime_logging,   Action::container_logging,
};

std::string_view action_name(Action action);
std::optional<Action> action_from_name(std::string_view name);

struct MountDeviceParams {
    LayerDigest device_hash;
    std::string target;
    bool operator==(const MountDeviceParams&) const = default;
};

// unmount_device, unmount_overlay, mount_host_device, unmount_host_device, unmount_scratch
struct TargetParams {
    std::string target;
    bool operator==(const TargetParams&) const = default;
};

struct MountOverlayParams {
    std::string overlay_id;
    std::vector<std::string> layer_paths;
    std::string target;
    bool operator==(const MountOverlayParams&) const = default;
};

struct MountSpec {
    std::string source;
    std::string destination;
    std::string type;
    std::vector<std::string> options;
    bool operator==(const MountSpec&) const = default;
};

struct CreateContainerParams {
    std::string container_id;
    std::string overlay_id;
    std::vector<std::string> command;
    std::vector<std::string> env;
    std::string working_dir;
    std::vector<MountSpec> mounts;
    bool operator==(const CreateContainerParams&) const = default;
};

struct ExecInContainerParams {
    std::string container_id;
    std::vector<std::string> command;
    std::vector<std::string> env;
    std::string working_dir;
    bool operator==(const ExecInContainerParams&) const = default;
};

struct ExecExternalParams {
    std::vector<std::string> command;
    std::vector<std::string> env;
    std::string working_dir;
    bool operator==(const ExecExternalParams&) const = default;
};

struct ContainerIdParams {
    std::string container_id;
    bool operator==(const ContainerIdParams&) const = default;
};

struct SignalParams {
    std::string container_id;
    int signal = 0;
    std::vector<std::string> command;
    bool operator==(const SignalParams&) const = default;
};

struct MountScratchParams {
    std::string target;
    bool encrypted = true;
    bool operator==(const MountScratchParams&) const = default;
};

struct NoParams {
    bool operator==(const NoParams&) const = default;
};

// Parameters that failed to decode; always denied.
struct MalformedParams {
    std::string detail;
    bool operator==(const MalformedParams&) const = default;
};

using Params = std::variant<MountDeviceParams, TargetParams, MountOverlayParams,
                            CreateContainerParams, ExecInContainerParams, ExecExternalParams,
                            ContainerIdParams, SignalParams, MountScratchParams, NoParams,
                            MalformedParams>;

struct EnforcementRequest {
    Action action = Action::get_properties;
    Params params = NoParams{};
    bool operator==(const EnforcementRequest&) const = default;
};

struct OverlayEntry {
    std::vector<std::string> layer_paths;
    std::vector<LayerDigest> layer_digests;
    std::string target;
    std::set<std::string> candidates;
    bool operator==(const OverlayEntry&) const = default;
};

struct ContainerEntry {
    std::set<std::string> candidates;
    std::vector<std::string> command;
    std::vector<std::string> env;
    std::string working_dir;
    std::string overlay_id;
    std::vector<LayerDigest> layer_digests;
    std::vector<std::vector<std::string>> exec_commands;
    bool operator==(const ContainerEntry&) const = default;
};

/// Policy-maintained state, mutated only through MetadataOps.
struct MetadataStore {
    std::map<std::string, LayerDigest> devices;
    std::map<std::string, OverlayEntry> overlays;
    std::map<std::string, ContainerEntry> containers;
    std::map<std::string, bool> scratch; // target -> encrypted
    std::set<std::string> host_mounts;
    bool operator==(const MetadataStore&) const = default;
};

enum class Section { devices, overlays, containers, scratch, host_mounts };
enum class OpKind { add, update, remove };

std::string_view section_name(Section section);

using OpValue = std::variant<std::monostate, LayerDigest, OverlayEntry, ContainerEntry, bool>;

struct MetadataOp {
    Section section = Section::devices;
    OpKind kind = OpKind::add;
    std::string key;
    OpValue value; // monostate for remove and host_mounts
    bool operator==(const MetadataOp&) const = default;
};

struct EnforcementDecision {
    bool allowed = false;
    std::vector<MetadataOp> metadata_ops; // empty when denied
    std::string deny_reason;              // empty when allowed

    static EnforcementDecision allow(std::vector<MetadataOp> ops = {})
    {
        return {true, std::move(ops), {}};
    }
    static EnforcementDecision deny(std::string reason) { return {false, {}, std::move(reason)}; }
    bool operator==(const EnforcementDecision&) const = default;
};

struct EnforcementResult {
    EnforcementDecision decision;
    MetadataStore store;
};

/// Stable deny reasons.
namespace reason {
inline constexpr std::string_view malformed = "malformed";
inline constexpr std::string_view metadata_conflict = "metadata conflict";
inline constexpr std::string_view hash_not_in_policy = "device hash not in policy";
inline constexpr std::string_view target_in_use = "target already mounted";
inline constexpr std::string_view not_mounted = "target not mounted";
inline constexpr std::string_view unknown_layer_path = "unknown layer path";
inline constexpr std::string_view layer_order = "layer order not in policy";
inline constexpr std::string_view overlay_id_in_use = "overlay id in use";
inline constexpr std::string_view unknown_overlay = "unknown overlay";
inline constexpr std::string_view container_id_in_use = "container id in use";
inline constexpr std::string_view unknown_container = "unknown container";
inline constexpr std::string_view command_denied = "command not allowed";
inline constexpr std::string_view env_denied = "environment not allowed";
inline constexpr std::string_view working_dir_denied = "working directory not allowed";
inline constexpr std::string_view mounts_denied = "mounts not allowed";
inline constexpr std::string_view process_denied = "process not allowed";
inline constexpr std::string_view signal_denied = "signal not allowed";
inline constexpr std::string_view host_mount_denied = "host device target not allowed";
inline constexpr std::string_view unencrypted_scratch = "unencrypted scratch not allowed";
inline constexpr std::string_view flag_disabled = "disabled by policy flag";
} // namespace reason

// Applies ops in order. nullopt when an add hits an existing key or an
// update/remove hits an absent one.
std::optional<MetadataStore> apply_ops(const MetadataStore& store,
                                       const std::vector<MetadataOp>& ops);

/// Evaluates the enforcement point for `request`. The returned store equals
/// the input store unless the decision is allowed.
EnforcementResult enforce(const ExecutionPolicy& policy, const MetadataStore& store,
                          const EnforcementRequest& request);

// Per-action rules. Each returns the decision without applying it.
EnforcementDecision rule_mount_device(const ExecutionPolicy&, const MetadataStore&,
                                      const MountDeviceParams&);
EnforcementDecision rule_unmount_device(const ExecutionPolicy&, const MetadataStore&,
                                        const TargetParams&);
EnforcementDecision rule_mount_overlay(const ExecutionPolicy&, const MetadataStore&,
                                       const MountOverlayParams&);
EnforcementDecision rule_unmount_overlay(const ExecutionPolicy&, const MetadataStore&,
                                         const TargetParams&);
EnforcementDecision rule_create_container(const ExecutionPolicy&, const MetadataStore&,
                                          const CreateContainerParams&);
EnforcementDecision rule_exec_in_container(const ExecutionPolicy&, const MetadataStore&,
                                           const ExecInContainerParams&);
EnforcementDecision rule_exec_external(const ExecutionPolicy&, const MetadataStore&,
                                       const ExecExternalParams&);
EnforcementDecision rule_signal(const ExecutionPolicy&, const MetadataStore&,
                                const SignalParams&);
EnforcementDecision rule_shutdown_container(const ExecutionPolicy&, const MetadataStore&,
                                            const ContainerIdParams&);
EnforcementDecision rule_mount_host_device(const ExecutionPolicy&, const MetadataStore&,
                                           const TargetParams&);
EnforcementDecision rule_unmount_host_device(const ExecutionPolicy&, const MetadataStore&,
                                             const TargetParams&);
EnforcementDecision rule_mount_scratch(const ExecutionPolicy&, const MetadataStore&,
                                       const MountScratchParams&);
EnforcementDecision rule_unmount_scratch(const ExecutionPolicy&, const MetadataStore&,
                                         const TargetParams&);
EnforcementDecision rule_flag_gated(const ExecutionPolicy&, Action action);

} // namespace parma::engine
