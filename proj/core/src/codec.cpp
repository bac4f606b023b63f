// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/codec.hpp"

namespace parma::engine {

using nlohmann::json;

namespace {

struct Malformed {
    std::string detail;
};

class Reader {
public:
    Reader(const json& obj, std::initializer_list<std::string_view> allowed) : obj_(obj)
    {
        if (!obj.is_object())
            throw Malformed{"payload must be an object"};
        for (const auto& [key, v] : obj.items())
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
                throw Malformed{"unexpected field '" + key + "'"};
    }

    std::string str(const char* key) const
    {
        const json& v = require(key);
        if (!v.is_string())
            throw Malformed{std::string(key) + " must be a string"};
        return v.get<std::string>();
    }

    std::string str_or(const char* key, std::string fallback) const
    {
        return obj_.contains(key) ? str(key) : fallback;
    }

    std::vector<std::string> list(const char* key, bool required = true) const
    {
        if (!required && !obj_.contains(key))
            return {};
        const json& v = require(key);
        if (!v.is_array())
            throw Malformed{std::string(key) + " must be an array"};
        std::vector<std::string> out;
        for (const auto& item : v) {
            if (!item.is_string())
                throw Malformed{std::string(key) + " must contain strings"};
            out.push_back(item.get<std::string>());
        }
        return out;
    }

    bool boolean(const char* key) const
    {
        const json& v = require(key);
        if (!v.is_boolean())
            throw Malformed{std::string(key) + " must be a boolean"};
        return v.get<bool>();
    }

    int integer(const char* key) const
    {
        const json& v = require(key);
        if (!v.is_number_integer())
            throw Malformed{std::string(key) + " must be an integer"};
        const auto i = v.get<std::int64_t>();
        if (i < 0 || i > 1024)
            throw Malformed{std::string(key) + " out of range"};
        return static_cast<int>(i);
    }

    const json& require(const char* key) const
    {
        auto it = obj_.find(key);
        if (it == obj_.end())
            throw Malformed{std::string("missing field '") + key + "'"};
        return *it;
    }

    const json& raw() const { return obj_; }

private:
    const json& obj_;
};

Params decode(Action action, const json& payload)
{
    switch (action) {
    case Action::mount_device: {
        Reader r(payload, {"device_hash", "target"});
        MountDeviceParams p;
        try {
            p.device_hash = LayerDigest::from_hex(r.str("device_hash"));
        } catch (const std::invalid_argument& e) {
            throw Malformed{std::string("device_hash: ") + e.what()};
        }
        p.target = r.str("target");
        return p;
    }
    case Action::unmount_device:
    case Action::unmount_overlay:
    case Action::mount_host_device:
    case Action::unmount_host_device:
    case Action::unmount_scratch: {
        Reader r(payload, {"target"});
        return TargetParams{r.str("target")};
    }
    case Action::mount_overlay: {
        Reader r(payload, {"overlay_id", "layer_paths", "target"});
        return MountOverlayParams{r.str("overlay_id"), r.list("layer_paths"), r.str("target")};
    }
    case Action::create_container: {
        Reader r(payload,
                 {"container_id", "overlay_id", "command", "env", "working_dir", "mounts"});
        CreateContainerParams p;
        p.container_id = r.str("container_id");
        p.overlay_id = r.str("overlay_id");
        p.command = r.list("command");
        p.env = r.list("env", false);
        p.working_dir = r.str_or("working_dir", "/");
        if (payload.contains("mounts")) {
            const json& mounts = payload["mounts"];
            if (!mounts.is_array())
                throw Malformed{"mounts must be an array"};
            for (const auto& m : mounts) {
                Reader mr(m, {"source", "destination", "type", "options"});
                p.mounts.push_back(MountSpec{mr.str("source"), mr.str("destination"),
                                             mr.str_or("type", "bind"), mr.list("options", false)});
            }
        }
        return p;
    }
    case Action::exec_in_container: {
        Reader r(payload, {"container_id", "command", "env", "working_dir"});
        return ExecInContainerParams{r.str("container_id"), r.list("command"),
                                     r.list("env", false), r.str_or("working_dir", "/")};
    }
    case Action::exec_external: {
        Reader r(payload, {"command", "env", "working_dir"});
        return ExecExternalParams{r.list("command"), r.list("env", false),
                                  r.str_or("working_dir", "/")};
    }
    case Action::shutdown_container: {
        Reader r(payload, {"container_id"});
        return ContainerIdParams{r.str("container_id")};
    }
    case Action::signal_process: {
        Reader r(payload, {"container_id", "signal", "command"});
        return SignalParams{r.str("container_id"), r.integer("signal"), r.list("command")};
    }
    case Action::mount_scratch: {
        Reader r(payload, {"target", "encrypted"});
        return MountScratchParams{r.str("target"), r.boolean("encrypted")};
    }
    case Action::get_properties:
    case Action::dump_stacks:
    case Action::runtime_logging:
    case Action::container_logging: {
        if (payload.is_null())
            return NoParams{};
        Reader r(payload, {});
        return NoParams{};
    }
    }
    throw Malformed{"unknown action"};
}

json overlay_json(const OverlayEntry& o)
{
    json digests = json::array();
    for (const auto& d : o.layer_digests)
        digests.push_back(d.hex());
    return {{"layer_paths", o.layer_paths},
            {"layer_digests", digests},
            {"target", o.target},
            {"candidates", o.candidates}};
}

json container_json(const ContainerEntry& c)
{
    json digests = json::array();
    for (const auto& d : c.layer_digests)
        digests.push_back(d.hex());
    return {{"candidates", c.candidates},   {"command", c.command},
            {"env", c.env},                 {"working_dir", c.working_dir},
            {"overlay_id", c.overlay_id},   {"layer_digests", digests},
            {"exec_commands", c.exec_commands}};
}

json op_value_json(const OpValue& v)
{
    return std::visit(
        [](const auto& value) -> json {
            using T = std::decay_t<decltype(value)>;
            if constexpr (std::is_same_v<T, std::monostate>)
                return nullptr;
            else if constexpr (std::is_same_v<T, LayerDigest>)
                return value.hex();
            else if constexpr (std::is_same_v<T, OverlayEntry>)
                return overlay_json(value);
            else if constexpr (std::is_same_v<T, ContainerEntry>)
                return container_json(value);
            else
                return value;
        },
        v);
}

const char* op_kind_name(OpKind k)
{
    switch (k) {
    case OpKind::add: return "add";
    case OpKind::update: return "update";
    case OpKind::remove: return "remove";
    }
    return "unknown";
}

} // namespace

EnforcementRequest request_from_json(Action action, const json& payload)
{
    try {
        return EnforcementRequest{action, decode(action, payload)};
    } catch (const Malformed& m) {
        return EnforcementRequest{action, MalformedParams{m.detail}};
    } catch (const json::exception& e) {
        return EnforcementRequest{action, MalformedParams{e.what()}};
    }
}

json params_to_json(const EnforcementRequest& request)
{
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, MountDeviceParams>) {
                return {{"device_hash", p.device_hash.hex()}, {"target", p.target}};
            } else if constexpr (std::is_same_v<T, TargetParams>) {
                return {{"target", p.target}};
            } else if constexpr (std::is_same_v<T, MountOverlayParams>) {
                return {{"overlay_id", p.overlay_id},
                        {"layer_paths", p.layer_paths},
                        {"target", p.target}};
            } else if constexpr (std::is_same_v<T, CreateContainerParams>) {
                json mounts = json::array();
                for (const auto& m : p.mounts)
                    mounts.push_back({{"source", m.source},
                                      {"destination", m.destination},
                                      {"type", m.type},
                                      {"options", m.options}});
                return {{"container_id", p.container_id}, {"overlay_id", p.overlay_id},
                        {"command", p.command},           {"env", p.env},
                        {"working_dir", p.working_dir},   {"mounts", mounts}};
            } else if constexpr (std::is_same_v<T, ExecInContainerParams>) {
                return {{"container_id", p.container_id},
                        {"command", p.command},
                        {"env", p.env},
                        {"working_dir", p.working_dir}};
            } else if constexpr (std::is_same_v<T, ExecExternalParams>) {
                return {{"command", p.command}, {"env", p.env}, {"working_dir", p.working_dir}};
            } else if constexpr (std::is_same_v<T, ContainerIdParams>) {
                return {{"container_id", p.container_id}};
            } else if constexpr (std::is_same_v<T, SignalParams>) {
                return {{"container_id", p.container_id},
                        {"signal", p.signal},
                        {"command", p.command}};
            } else if constexpr (std::is_same_v<T, MountScratchParams>) {
                return {{"target", p.target}, {"encrypted", p.encrypted}};
            } else if constexpr (std::is_same_v<T, NoParams>) {
                return json::object();
            } else {
                return {{"malformed", p.detail}};
            }
        },
        request.params);
}

json decision_to_json(const EnforcementDecision& decision)
{
    json ops = json::array();
    for (const auto& op : decision.metadata_ops)
        ops.push_back({{"name", section_name(op.section)},
                       {"action", op_kind_name(op.kind)},
                       {"key", op.key},
                       {"value", op_value_json(op.value)}});
    json out = {{"allowed", decision.allowed}, {"metadata", ops}};
    if (!decision.allowed)
        out["deny_reason"] = decision.deny_reason;
    return out;
}

json store_to_json(const MetadataStore& store)
{
    json devices = json::object();
    for (const auto& [k, v] : store.devices)
        devices[k] = v.hex();
    json overlays = json::object();
    for (const auto& [k, v] : store.overlays)
        overlays[k] = overlay_json(v);
    json containers = json::object();
    for (const auto& [k, v] : store.containers)
        containers[k] = container_json(v);
    json scratch = json::object();
    for (const auto& [k, v] : store.scratch)
        scratch[k] = v;
    return {{"devices", devices},
            {"overlays", overlays},
            {"containers", containers},
            {"scratch", scratch},
            {"host_mounts", store.host_mounts}};
}

} // namespace parma::engine
