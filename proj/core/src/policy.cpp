// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/policy.hpp"

#include "parma/crypto.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>

namespace parma::policy {

using nlohmann::json;

namespace {

[[noreturn]] void semantic(const std::string& path, const std::string& message)
{
    throw PolicyError(PolicyError::Kind::semantic, path + ": " + message);
}

const char* strategy_name(MatchStrategy s)
{
    return s == MatchStrategy::literal ? "literal" : "regex";
}

MatchStrategy parse_strategy(const json& j, const std::string& path)
{
    if (!j.is_string())
        semantic(path, "expected string");
    const auto& s = j.get_ref<const std::string&>();
    if (s == "literal")
        return MatchStrategy::literal;
    if (s == "regex")
        return MatchStrategy::regex;
    semantic(path, "unknown strategy '" + s + "'");
}

// Reads an object, rejecting keys outside `allowed`.
const json& object_at(const json& j, const std::string& path,
                      std::initializer_list<std::string_view> allowed)
{
    if (!j.is_object())
        semantic(path, "expected object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            semantic(path, "unknown key '" + key + "'");
    }
    return j;
}

const json* member(const json& obj, const char* key)
{
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

std::string string_field(const json& obj, const char* key, const std::string& path,
                         std::optional<std::string> fallback = {})
{
    const json* v = member(obj, key);
    if (!v) {
        if (fallback)
            return *fallback;
        semantic(path, std::string("missing '") + key + "'");
    }
    if (!v->is_string())
        semantic(path + "." + key, "expected string");
    return v->get<std::string>();
}

bool bool_field(const json& obj, const char* key, const std::string& path)
{
    const json* v = member(obj, key);
    if (!v)
        return false;
    if (!v->is_boolean())
        semantic(path + "." + key, "expected boolean");
    return v->get<bool>();
}

std::vector<std::string> string_list(const json& obj, const char* key, const std::string& path,
                                     bool required)
{
    const json* v = member(obj, key);
    std::vector<std::string> out;
    if (!v) {
        if (required)
            semantic(path, std::string("missing '") + key + "'");
        return out;
    }
    if (!v->is_array())
        semantic(path + "." + key, "expected array");
    for (std::size_t i = 0; i < v->size(); ++i) {
        const auto& item = (*v)[i];
        if (!item.is_string())
            semantic(path + "." + key + "[" + std::to_string(i) + "]", "expected string");
        out.push_back(item.get<std::string>());
    }
    return out;
}

const json& array_field(const json& obj, const char* key, const std::string& path)
{
    static const json empty = json::array();
    const json* v = member(obj, key);
    if (!v)
        return empty;
    if (!v->is_array())
        semantic(path + "." + key, "expected array");
    return *v;
}

void check_absolute(const std::string& p, const std::string& path)
{
    if (p.empty() || p.front() != '/')
        semantic(path, "path must be absolute");
}

EnvRule parse_env_rule(const json& j, const std::string& path)
{
    object_at(j, path, {"pattern", "strategy"});
    const auto pattern = string_field(j, "pattern", path);
    const auto strategy = member(j, "strategy") ? parse_strategy(j["strategy"], path + ".strategy")
                                                : MatchStrategy::literal;
    if (strategy == MatchStrategy::literal && std::count(pattern.begin(), pattern.end(), '=') != 1)
        semantic(path, "literal env rule must contain exactly one '='");
    return Matcher(pattern, strategy);
}

std::vector<EnvRule> parse_env_rules(const json& obj, const std::string& path)
{
    std::vector<EnvRule> out;
    const auto& arr = array_field(obj, "env_rules", path);
    for (std::size_t i = 0; i < arr.size(); ++i)
        out.push_back(parse_env_rule(arr[i], path + ".env_rules[" + std::to_string(i) + "]"));
    return out;
}

ProcessRule parse_process(const json& j, const std::string& path)
{
    object_at(j, path, {"command", "env_rules", "working_dir"});
    ProcessRule p;
    p.command = string_list(j, "command", path, true);
    if (p.command.empty())
        semantic(path + ".command", "must not be empty");
    p.env_rules = parse_env_rules(j, path);
    p.working_dir = string_field(j, "working_dir", path, std::string("/"));
    check_absolute(p.working_dir, path + ".working_dir");
    return p;
}

MountRule parse_mount(const json& j, const std::string& path)
{
    object_at(j, path, {"source", "source_strategy", "destination", "type", "options"});
    MountRule m;
    const auto strategy = member(j, "source_strategy")
                              ? parse_strategy(j["source_strategy"], path + ".source_strategy")
                              : MatchStrategy::literal;
    m.source = Matcher(string_field(j, "source", path), strategy);
    m.destination = string_field(j, "destination", path);
    check_absolute(m.destination, path + ".destination");
    m.type = string_field(j, "type", path, std::string("bind"));
    m.options = string_list(j, "options", path, false);
    std::sort(m.options.begin(), m.options.end());
    return m;
}

ContainerTemplate parse_container(const json& j, const std::string& path)
{
    object_at(j, path,
              {"id", "layers", "command", "env_rules", "working_dir", "mounts", "exec_processes",
               "signals", "allow_stdio_access"});
    ContainerTemplate t;
    t.id = string_field(j, "id", path);
    if (t.id.empty())
        semantic(path + ".id", "must not be empty");
    const auto layers = string_list(j, "layers", path, true);
    if (layers.empty())
        semantic(path + ".layers", "must not be empty");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string lpath = path + ".layers[" + std::to_string(i) + "]";
        try {
            t.layers.push_back(LayerDigest::from_hex(layers[i]));
        } catch (const std::invalid_argument& e) {
            semantic(lpath, e.what());
        }
    }
    t.command = string_list(j, "command", path, true);
    t.env_rules = parse_env_rules(j, path);
    t.working_dir = string_field(j, "working_dir", path, std::string("/"));
    check_absolute(t.working_dir, path + ".working_dir");
    const auto& mounts = array_field(j, "mounts", path);
    for (std::size_t i = 0; i < mounts.size(); ++i)
        t.mounts.push_back(parse_mount(mounts[i], path + ".mounts[" + std::to_string(i) + "]"));
    const auto& execs = array_field(j, "exec_processes", path);
    for (std::size_t i = 0; i < execs.size(); ++i)
        t.exec_processes.push_back(
            parse_process(execs[i], path + ".exec_processes[" + std::to_string(i) + "]"));
    const auto& signals = array_field(j, "signals", path);
    for (std::size_t i = 0; i < signals.size(); ++i) {
        if (!signals[i].is_number_integer())
            semantic(path + ".signals[" + std::to_string(i) + "]", "expected integer");
        const auto sig = signals[i].get<std::int64_t>();
        if (sig < 1 || sig > 64)
            semantic(path + ".signals[" + std::to_string(i) + "]", "signal out of range");
        t.signals.push_back(static_cast<int>(sig));
    }
    t.allow_stdio_access = bool_field(j, "allow_stdio_access", path);
    return t;
}

PolicyFlags parse_flags(const json& j)
{
    const std::string path = "flags";
    object_at(j, path,
              {"allow_properties_access", "allow_dump_stacks", "allow_runtime_logging",
               "allow_container_logging", "allow_unencrypted_scratch",
               "allow_host_device_mounts"});
    PolicyFlags f;
    f.allow_properties_access = bool_field(j, "allow_properties_access", path);
    f.allow_dump_stacks = bool_field(j, "allow_dump_stacks", path);
    f.allow_runtime_logging = bool_field(j, "allow_runtime_logging", path);
    f.allow_container_logging = bool_field(j, "allow_container_logging", path);
    f.allow_unencrypted_scratch = bool_field(j, "allow_unencrypted_scratch", path);
    for (auto& p : string_list(j, "allow_host_device_mounts", path, false))
        f.allow_host_device_mounts.emplace_back(std::move(p), MatchStrategy::regex);
    return f;
}

json env_rules_json(const std::vector<EnvRule>& rules)
{
    json arr = json::array();
    for (const auto& r : rules)
        arr.push_back({{"pattern", r.pattern()}, {"strategy", strategy_name(r.strategy())}});
    return arr;
}

json process_json(const ProcessRule& p)
{
    return {{"command", p.command},
            {"env_rules", env_rules_json(p.env_rules)},
            {"working_dir", p.working_dir}};
}

json to_json(const ExecutionPolicy& policy)
{
    json containers = json::array();
    for (const auto& t : policy.containers) {
        json layers = json::array();
        for (const auto& l : t.layers)
            layers.push_back(l.hex());
        json mounts = json::array();
        for (const auto& m : t.mounts) {
            mounts.push_back({{"source", m.source.pattern()},
                              {"source_strategy", strategy_name(m.source.strategy())},
                              {"destination", m.destination},
                              {"type", m.type},
                              {"options", m.options}});
        }
        json execs = json::array();
        for (const auto& p : t.exec_processes)
            execs.push_back(process_json(p));
        containers.push_back({{"id", t.id},
                              {"layers", layers},
                              {"command", t.command},
                              {"env_rules", env_rules_json(t.env_rules)},
                              {"working_dir", t.working_dir},
                              {"mounts", mounts},
                              {"exec_processes", execs},
                              {"signals", t.signals},
                              {"allow_stdio_access", t.allow_stdio_access}});
    }
    json externals = json::array();
    for (const auto& p : policy.external_processes)
        externals.push_back(process_json(p));
    json host_mounts = json::array();
    for (const auto& m : policy.flags.allow_host_device_mounts)
        host_mounts.push_back(m.pattern());
    const auto& f = policy.flags;
    return {{"version", policy.version},
            {"containers", containers},
            {"external_processes", externals},
            {"flags",
             {{"allow_properties_access", f.allow_properties_access},
              {"allow_dump_stacks", f.allow_dump_stacks},
              {"allow_runtime_logging", f.allow_runtime_logging},
              {"allow_container_logging", f.allow_container_logging},
              {"allow_unencrypted_scratch", f.allow_unencrypted_scratch},
              {"allow_host_device_mounts", host_mounts}}}};
}

} // namespace

LayerDigest LayerDigest::from_hex(std::string_view hex)
{
    if (hex.size() != 64)
        throw std::invalid_argument("layer digest must be 64 hex characters, got " +
                                    std::to_string(hex.size()));
    return LayerDigest{array_from_hex<32>(hex)};
}

Matcher::Matcher(std::string pattern, MatchStrategy strategy)
    : pattern_(std::move(pattern)), strategy_(strategy)
{
    if (strategy_ == MatchStrategy::regex) {
        try {
            compiled_ = std::make_shared<const regex::Pattern>(regex::Pattern::compile(pattern_));
        } catch (const regex::RegexError& e) {
            throw PolicyError(PolicyError::Kind::semantic,
                              "invalid regex '" + pattern_ + "': " + e.what());
        }
    }
}

bool Matcher::matches(std::string_view value) const
{
    if (strategy_ == MatchStrategy::literal)
        return value == pattern_;
    return compiled_ && compiled_->full_match(value);
}

const ContainerTemplate* ExecutionPolicy::find_template(std::string_view id) const
{
    for (const auto& t : containers)
        if (t.id == id)
            return &t;
    return nullptr;
}

Digest32 PolicyMeasurement::host_data() const
{
    Digest32 out{};
    std::copy_n(digest.begin(), out.size(), out.begin());
    return out;
}

bool env_allowed(const std::vector<EnvRule>& rules, const std::vector<std::string>& env)
{
    return std::all_of(env.begin(), env.end(), [&](const std::string& var) {
        return std::any_of(rules.begin(), rules.end(),
                           [&](const EnvRule& r) { return r.matches(var); });
    });
}

bool mount_allowed(const MountRule& rule, std::string_view source, std::string_view destination,
                   std::string_view type, std::vector<std::string> options)
{
    if (rule.destination != destination || rule.type != type)
        return false;
    std::sort(options.begin(), options.end());
    return options == rule.options && rule.source.matches(source);
}

void validate(const ExecutionPolicy& policy)
{
    if (policy.version != current_version)
        semantic("version", "unsupported version " + std::to_string(policy.version));
    std::set<std::string> ids;
    for (std::size_t i = 0; i < policy.containers.size(); ++i) {
        const auto& t = policy.containers[i];
        const std::string path = "containers[" + std::to_string(i) + "]";
        if (t.id.empty())
            semantic(path + ".id", "must not be empty");
        if (!ids.insert(t.id).second)
            semantic(path + ".id", "duplicate template id '" + t.id + "'");
        if (t.layers.empty())
            semantic(path + ".layers", "must not be empty");
        check_absolute(t.working_dir, path + ".working_dir");
        for (const auto& m : t.mounts)
            check_absolute(m.destination, path + ".mounts");
        for (const int sig : t.signals) {
            if (sig < 1 || sig > 64)
                semantic(path + ".signals", "signal out of range");
        }
        for (std::size_t k = 0; k < i; ++k) {
            const auto& o = policy.containers[k];
            if (o.layers == t.layers && o.command == t.command && o.env_rules == t.env_rules &&
                o.working_dir == t.working_dir && o.mounts == t.mounts)
                semantic(path, "duplicate of template '" + o.id + "'");
        }
    }
    for (const auto& p : policy.external_processes) {
        if (p.command.empty())
            semantic("external_processes", "command must not be empty");
    }
}

ExecutionPolicy parse_policy(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw PolicyError(PolicyError::Kind::syntax, e.what(), e.byte);
    }
    object_at(doc, "policy", {"version", "containers", "external_processes", "flags"});

    ExecutionPolicy policy;
    const json* version = member(doc, "version");
    if (!version)
        semantic("policy", "missing 'version'");
    if (!version->is_number_unsigned())
        semantic("version", "expected unsigned integer");
    if (version->get<std::uint64_t>() != current_version)
        semantic("version", "unsupported version");
    policy.version = current_version;

    const auto& containers = array_field(doc, "containers", "policy");
    for (std::size_t i = 0; i < containers.size(); ++i)
        policy.containers.push_back(
            parse_container(containers[i], "containers[" + std::to_string(i) + "]"));
    const auto& externals = array_field(doc, "external_processes", "policy");
    for (std::size_t i = 0; i < externals.size(); ++i)
        policy.external_processes.push_back(
            parse_process(externals[i], "external_processes[" + std::to_string(i) + "]"));
    if (const json* flags = member(doc, "flags"))
        policy.flags = parse_flags(*flags);

    validate(policy);
    return policy;
}

std::string render_policy(const ExecutionPolicy& policy, int indent)
{
    return to_json(policy).dump(indent);
}

Bytes canonicalize(const ExecutionPolicy& policy)
{
    // nlohmann::json objects are std::map-backed, so keys come out in
    // bytewise order.
    const std::string text = to_json(policy).dump();
    return {text.begin(), text.end()};
}

PolicyMeasurement measure_policy(const ExecutionPolicy& policy)
{
    return PolicyMeasurement{crypto::sha512(canonicalize(policy))};
}

} // namespace parma::policy
