// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/engine.hpp"

#include <algorithm>

namespace parma::engine {

namespace {

constexpr std::array<std::string_view, all_actions.size()> action_names = {
    "mount_device",      "unmount_device",      "mount_overlay",    "unmount_overlay",
    "create_container",  "exec_in_container",   "exec_external",    "shutdown_container",
    "signal_process",    "mount_host_device",   "unmount_host_device", "mount_scratch",
    "unmount_scratch",   "get_properties",      "dump_stacks",      "runtime_logging",
    "container_logging",
};

bool absolute(std::string_view p)
{
    return !p.empty() && p.front() == '/';
}

EnforcementDecision deny(std::string_view why)
{
    return EnforcementDecision::deny(std::string(why));
}

MetadataOp add_op(Section section, std::string key, OpValue value = {})
{
    return MetadataOp{section, OpKind::add, std::move(key), std::move(value)};
}

MetadataOp remove_op(Section section, std::string key)
{
    return MetadataOp{section, OpKind::remove, std::move(key), {}};
}

bool process_matches(const policy::ProcessRule& rule, const std::vector<std::string>& command,
                     const std::vector<std::string>& env, const std::string& working_dir)
{
    return rule.command == command && rule.working_dir == working_dir &&
           policy::env_allowed(rule.env_rules, env);
}

template <typename Map>
bool apply_to_map(Map& map, const MetadataOp& op)
{
    using Value = typename Map::mapped_type;
    const bool present = map.count(op.key) != 0;
    switch (op.kind) {
    case OpKind::add:
        if (present || !std::holds_alternative<Value>(op.value))
            return false;
        map.emplace(op.key, std::get<Value>(op.value));
        return true;
    case OpKind::update:
        if (!present || !std::holds_alternative<Value>(op.value))
            return false;
        map[op.key] = std::get<Value>(op.value);
        return true;
    case OpKind::remove:
        if (!present)
            return false;
        map.erase(op.key);
        return true;
    }
    return false;
}

bool apply_one(MetadataStore& s, const MetadataOp& op)
{
    switch (op.section) {
    case Section::devices: return apply_to_map(s.devices, op);
    case Section::overlays: return apply_to_map(s.overlays, op);
    case Section::containers: return apply_to_map(s.containers, op);
    case Section::scratch: return apply_to_map(s.scratch, op);
    case Section::host_mounts: {
        const bool present = s.host_mounts.count(op.key) != 0;
        if (op.kind == OpKind::add) {
            if (present)
                return false;
            s.host_mounts.insert(op.key);
            return true;
        }
        if (!present)
            return false;
        if (op.kind == OpKind::remove)
            s.host_mounts.erase(op.key);
        return true;
    }
    }
    return false;
}

// Applies `rule` only when the params alternative matches the action.
template <typename P, typename Rule>
EnforcementDecision dispatch(const ExecutionPolicy& policy, const MetadataStore& store,
                             const Params& params, Rule rule)
{
    if (const auto* p = std::get_if<P>(&params))
        return rule(policy, store, *p);
    return deny(reason::malformed);
}

} // namespace

std::string_view action_name(Action action)
{
    return action_names[static_cast<std::size_t>(action)];
}

std::optional<Action> action_from_name(std::string_view name)
{
    for (std::size_t i = 0; i < action_names.size(); ++i)
        if (action_names[i] == name)
            return all_actions[i];
    return std::nullopt;
}

std::string_view section_name(Section section)
{
    switch (section) {
    case Section::devices: return "devices";
    case Section::overlays: return "overlays";
    case Section::containers: return "containers";
    case Section::scratch: return "scratch";
    case Section::host_mounts: return "host_mounts";
    }
    return "unknown";
}

std::optional<MetadataStore> apply_ops(const MetadataStore& store,
                                       const std::vector<MetadataOp>& ops)
{
    MetadataStore next = store;
    for (const auto& op : ops)
        if (!apply_one(next, op))
            return std::nullopt;
    return next;
}

EnforcementDecision rule_mount_device(const ExecutionPolicy& policy, const MetadataStore& store,
                                      const MountDeviceParams& p)
{
    if (!absolute(p.target))
        return deny(reason::malformed);
    if (store.devices.count(p.target))
        return deny(reason::target_in_use);
    for (const auto& t : policy.containers) {
        if (std::find(t.layers.begin(), t.layers.end(), p.device_hash) != t.layers.end())
            return EnforcementDecision::allow({add_op(Section::devices, p.target, p.device_hash)});
    }
    return deny(reason::hash_not_in_policy);
}

EnforcementDecision rule_unmount_device(const ExecutionPolicy&, const MetadataStore& store,
                                        const TargetParams& p)
{
    if (!store.devices.count(p.target))
        return deny(reason::not_mounted);
    return EnforcementDecision::allow({remove_op(Section::devices, p.target)});
}

EnforcementDecision rule_mount_overlay(const ExecutionPolicy& policy, const MetadataStore& store,
                                       const MountOverlayParams& p)
{
    if (p.layer_paths.empty() || p.overlay_id.empty() || !absolute(p.target))
        return deny(reason::malformed);
    OverlayEntry entry;
    entry.layer_paths = p.layer_paths;
    entry.target = p.target;
    for (const auto& path : p.layer_paths) {
        auto it = store.devices.find(path);
        if (it == store.devices.end())
            return deny(reason::unknown_layer_path);
        entry.layer_digests.push_back(it->second);
    }
    for (const auto& t : policy.containers)
        if (t.layers == entry.layer_digests)
            entry.candidates.insert(t.id);
    if (entry.candidates.empty())
        return deny(reason::layer_order);
    if (store.overlays.count(p.overlay_id))
        return deny(reason::overlay_id_in_use);
    for (const auto& [id, o] : store.overlays)
        if (o.target == p.target)
            return deny(reason::target_in_use);
    return EnforcementDecision::allow({add_op(Section::overlays, p.overlay_id, std::move(entry))});
}

EnforcementDecision rule_unmount_overlay(const ExecutionPolicy&, const MetadataStore& store,
                                         const TargetParams& p)
{
    for (const auto& [id, o] : store.overlays)
        if (o.target == p.target)
            return EnforcementDecision::allow({remove_op(Section::overlays, id)});
    return deny(reason::not_mounted);
}

EnforcementDecision rule_create_container(const ExecutionPolicy& policy,
                                          const MetadataStore& store,
                                          const CreateContainerParams& p)
{
    if (p.container_id.empty())
        return deny(reason::malformed);
    auto overlay = store.overlays.find(p.overlay_id);
    if (overlay == store.overlays.end())
        return deny(reason::unknown_overlay);
    if (store.containers.count(p.container_id))
        return deny(reason::container_id_in_use);

    std::vector<const policy::ContainerTemplate*> candidates;
    for (const auto& id : overlay->second.candidates)
        if (const auto* t = policy.find_template(id))
            candidates.push_back(t);

    // Narrow stage by stage so the deny reason names the first failing field.
    auto narrow = [&](auto keep) {
        std::erase_if(candidates, [&](const policy::ContainerTemplate* t) { return !keep(*t); });
        return !candidates.empty();
    };
    if (!narrow([&](const auto& t) { return t.command == p.command; }))
        return deny(reason::command_denied);
    if (!narrow([&](const auto& t) { return policy::env_allowed(t.env_rules, p.env); }))
        return deny(reason::env_denied);
    if (!narrow([&](const auto& t) { return t.working_dir == p.working_dir; }))
        return deny(reason::working_dir_denied);
    if (!narrow([&](const auto& t) {
            return std::all_of(p.mounts.begin(), p.mounts.end(), [&](const MountSpec& m) {
                return std::any_of(t.mounts.begin(), t.mounts.end(), [&](const auto& rule) {
                    return policy::mount_allowed(rule, m.source, m.destination, m.type, m.options);
                });
            });
        }))
        return deny(reason::mounts_denied);

    ContainerEntry entry;
    for (const auto* t : candidates)
        entry.candidates.insert(t->id);
    entry.command = p.command;
    entry.env = p.env;
    entry.working_dir = p.working_dir;
    entry.overlay_id = p.overlay_id;
    entry.layer_digests = overlay->second.layer_digests;
    return EnforcementDecision::allow(
        {add_op(Section::containers, p.container_id, std::move(entry))});
}

EnforcementDecision rule_exec_in_container(const ExecutionPolicy& policy,
                                           const MetadataStore& store,
                                           const ExecInContainerParams& p)
{
    auto it = store.containers.find(p.container_id);
    if (it == store.containers.end())
        return deny(reason::unknown_container);
    ContainerEntry next = it->second;
    std::erase_if(next.candidates, [&](const std::string& id) {
        const auto* t = policy.find_template(id);
        if (!t)
            return true;
        return std::none_of(t->exec_processes.begin(), t->exec_processes.end(),
                            [&](const policy::ProcessRule& r) {
                                return process_matches(r, p.command, p.env, p.working_dir);
                            });
    });
    if (next.candidates.empty())
        return deny(reason::process_denied);
    if (std::find(next.exec_commands.begin(), next.exec_commands.end(), p.command) ==
        next.exec_commands.end())
        next.exec_commands.push_back(p.command);
    return EnforcementDecision::allow(
        {MetadataOp{Section::containers, OpKind::update, p.container_id, std::move(next)}});
}

EnforcementDecision rule_exec_external(const ExecutionPolicy& policy, const MetadataStore&,
                                       const ExecExternalParams& p)
{
    for (const auto& rule : policy.external_processes)
        if (process_matches(rule, p.command, p.env, p.working_dir))
            return EnforcementDecision::allow();
    return deny(reason::process_denied);
}

EnforcementDecision rule_signal(const ExecutionPolicy& policy, const MetadataStore& store,
                                const SignalParams& p)
{
    auto it = store.containers.find(p.container_id);
    if (it == store.containers.end())
        return deny(reason::unknown_container);
    const auto& entry = it->second;
    const bool known_command =
        p.command == entry.command ||
        std::find(entry.exec_commands.begin(), entry.exec_commands.end(), p.command) !=
            entry.exec_commands.end();
    if (!known_command)
        return deny(reason::command_denied);
    for (const auto& id : entry.candidates) {
        const auto* t = policy.find_template(id);
        if (t && std::find(t->signals.begin(), t->signals.end(), p.signal) != t->signals.end())
            return EnforcementDecision::allow();
    }
    return deny(reason::signal_denied);
}

EnforcementDecision rule_shutdown_container(const ExecutionPolicy&, const MetadataStore& store,
                                            const ContainerIdParams& p)
{
    if (!store.containers.count(p.container_id))
        return deny(reason::unknown_container);
    return EnforcementDecision::allow({remove_op(Section::containers, p.container_id)});
}

EnforcementDecision rule_mount_host_device(const ExecutionPolicy& policy,
                                           const MetadataStore& store, const TargetParams& p)
{
    if (!absolute(p.target))
        return deny(reason::malformed);
    if (store.host_mounts.count(p.target))
        return deny(reason::target_in_use);
    const auto& patterns = policy.flags.allow_host_device_mounts;
    if (std::none_of(patterns.begin(), patterns.end(),
                     [&](const policy::Matcher& m) { return m.matches(p.target); }))
        return deny(reason::host_mount_denied);
    return EnforcementDecision::allow({add_op(Section::host_mounts, p.target)});
}

EnforcementDecision rule_unmount_host_device(const ExecutionPolicy&, const MetadataStore& store,
                                             const TargetParams& p)
{
    if (!store.host_mounts.count(p.target))
        return deny(reason::not_mounted);
    return EnforcementDecision::allow({remove_op(Section::host_mounts, p.target)});
}

EnforcementDecision rule_mount_scratch(const ExecutionPolicy& policy, const MetadataStore& store,
                                       const MountScratchParams& p)
{
    if (!absolute(p.target))
        return deny(reason::malformed);
    if (store.scratch.count(p.target))
        return deny(reason::target_in_use);
    if (!p.encrypted && !policy.flags.allow_unencrypted_scratch)
        return deny(reason::unencrypted_scratch);
    return EnforcementDecision::allow({add_op(Section::scratch, p.target, p.encrypted)});
}

EnforcementDecision rule_unmount_scratch(const ExecutionPolicy&, const MetadataStore& store,
                                         const TargetParams& p)
{
    if (!store.scratch.count(p.target))
        return deny(reason::not_mounted);
    return EnforcementDecision::allow({remove_op(Section::scratch, p.target)});
}

EnforcementDecision rule_flag_gated(const ExecutionPolicy& policy, Action action)
{
    const auto& f = policy.flags;
    bool enabled = false;
    switch (action) {
    case Action::get_properties: enabled = f.allow_properties_access; break;
    case Action::dump_stacks: enabled = f.allow_dump_stacks; break;
    case Action::runtime_logging: enabled = f.allow_runtime_logging; break;
    case Action::container_logging: enabled = f.allow_container_logging; break;
    default: return deny(reason::malformed);
    }
    return enabled ? EnforcementDecision::allow() : deny(reason::flag_disabled);
}

EnforcementResult enforce(const ExecutionPolicy& policy, const MetadataStore& store,
                          const EnforcementRequest& request)
{
    const auto& params = request.params;
    EnforcementDecision decision;
    switch (request.action) {
    case Action::mount_device:
        decision = dispatch<MountDeviceParams>(policy, store, params, rule_mount_device);
        break;
    case Action::unmount_device:
        decision = dispatch<TargetParams>(policy, store, params, rule_unmount_device);
        break;
    case Action::mount_overlay:
        decision = dispatch<MountOverlayParams>(policy, store, params, rule_mount_overlay);
        break;
    case Action::unmount_overlay:
        decision = dispatch<TargetParams>(policy, store, params, rule_unmount_overlay);
        break;
    case Action::create_container:
        decision = dispatch<CreateContainerParams>(policy, store, params, rule_create_container);
        break;
    case Action::exec_in_container:
        decision = dispatch<ExecInContainerParams>(policy, store, params, rule_exec_in_container);
        break;
    case Action::exec_external:
        decision = dispatch<ExecExternalParams>(policy, store, params, rule_exec_external);
        break;
    case Action::shutdown_container:
        decision = dispatch<ContainerIdParams>(policy, store, params, rule_shutdown_container);
        break;
    case Action::signal_process:
        decision = dispatch<SignalParams>(policy, store, params, rule_signal);
        break;
    case Action::mount_host_device:
        decision = dispatch<TargetParams>(policy, store, params, rule_mount_host_device);
        break;
    case Action::unmount_host_device:
        decision = dispatch<TargetParams>(policy, store, params, rule_unmount_host_device);
        break;
    case Action::mount_scratch:
        decision = dispatch<MountScratchParams>(policy, store, params, rule_mount_scratch);
        break;
    case Action::unmount_scratch:
        decision = dispatch<TargetParams>(policy, store, params, rule_unmount_scratch);
        break;
    case Action::get_properties:
    case Action::dump_stacks:
    case Action::runtime_logging:
    case Action::container_logging:
        decision = std::holds_alternative<NoParams>(params)
                       ? rule_flag_gated(policy, request.action)
                       : deny(reason::malformed);
        break;
    }

    if (!decision.allowed)
        return {std::move(decision), store};
    auto next = apply_ops(store, decision.metadata_ops);
    if (!next)
        return {deny(reason::metadata_conflict), store};
    return {std::move(decision), std::move(*next)};
}

} // namespace parma::engine
