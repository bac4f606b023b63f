// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

// Independent restatement of the safety invariant. Pattern matching goes
// through std::regex rather than the policy engine's own matcher.

#include "parma/agent.hpp"

#include <algorithm>
#include <regex>
#include <unordered_map>

namespace parma::agent {

namespace {

bool regex_full_match(const std::string& pattern, const std::string& value)
{
    thread_local std::unordered_map<std::string, std::regex> cache;
    auto it = cache.find(pattern);
    if (it == cache.end()) {
        try {
            it = cache.emplace(pattern, std::regex(pattern, std::regex::ECMAScript)).first;
        } catch (const std::regex_error&) {
            return false;
        }
    }
    return std::regex_match(value, it->second);
}

bool matcher_accepts(const policy::Matcher& m, const std::string& value)
{
    if (m.strategy() == policy::MatchStrategy::literal)
        return m.pattern() == value;
    return regex_full_match(m.pattern(), value);
}

bool env_ok(const std::vector<policy::EnvRule>& rules, const std::vector<std::string>& env)
{
    return std::all_of(env.begin(), env.end(), [&](const std::string& var) {
        return std::any_of(rules.begin(), rules.end(),
                           [&](const auto& r) { return matcher_accepts(r, var); });
    });
}

bool layer_in_policy(const ExecutionPolicy& p, const policy::LayerDigest& d)
{
    for (const auto& t : p.containers)
        if (std::find(t.layers.begin(), t.layers.end(), d) != t.layers.end())
            return true;
    return false;
}

} // namespace

std::vector<std::string> safety_violations(const UvmState& s)
{
    std::vector<std::string> out;
    const auto& p = s.policy;

    for (const auto& [target, digest] : s.store.devices) {
        if (!layer_in_policy(p, digest))
            out.push_back("device " + target + " carries a hash outside the policy");
        auto img = s.mounted_layers.find(target);
        if (img == s.mounted_layers.end() || !img->second)
            out.push_back("device " + target + " recorded but not mounted");
        else if (img->second->root_hash != digest.bytes)
            out.push_back("device " + target + " mounted with a different root");
    }
    for (const auto& [target, img] : s.mounted_layers)
        if (!s.store.devices.count(target))
            out.push_back("layer mounted at " + target + " without a policy record");

    for (const auto& [id, o] : s.store.overlays) {
        if (o.candidates.empty())
            out.push_back("overlay " + id + " has no candidate template");
        if (o.layer_digests.size() != o.layer_paths.size())
            out.push_back("overlay " + id + " layer bookkeeping is inconsistent");
        for (const auto& c : o.candidates) {
            const auto* t = p.find_template(c);
            if (!t)
                out.push_back("overlay " + id + " names unknown template " + c);
            else if (t->layers != o.layer_digests)
                out.push_back("overlay " + id + " layers do not match template " + c);
        }
    }

    for (const auto& [id, c] : s.store.containers) {
        if (c.candidates.empty())
            out.push_back("container " + id + " has no candidate template");
        if (!s.containers.count(id))
            out.push_back("container " + id + " recorded but not running");
        for (const auto& cid : c.candidates) {
            const auto* t = p.find_template(cid);
            if (!t) {
                out.push_back("container " + id + " names unknown template " + cid);
                continue;
            }
            if (t->command != c.command)
                out.push_back("container " + id + " command outside template " + cid);
            if (t->working_dir != c.working_dir)
                out.push_back("container " + id + " working dir outside template " + cid);
            if (!env_ok(t->env_rules, c.env))
                out.push_back("container " + id + " environment outside template " + cid);
            if (t->layers != c.layer_digests)
                out.push_back("container " + id + " layers outside template " + cid);
            for (const auto& cmd : c.exec_commands) {
                const bool listed =
                    std::any_of(t->exec_processes.begin(), t->exec_processes.end(),
                                [&](const policy::ProcessRule& r) { return r.command == cmd; });
                if (!listed)
                    out.push_back("container " + id + " ran a process outside template " + cid);
            }
        }
    }
    for (const auto& [id, inst] : s.containers)
        if (!s.store.containers.count(id))
            out.push_back("container " + id + " running without a policy record");

    for (const auto& [target, encrypted] : s.store.scratch) {
        if (!encrypted && !p.flags.allow_unencrypted_scratch)
            out.push_back("unencrypted scratch at " + target);
        auto dev = s.scratch_devices.find(target);
        if (encrypted && (dev == s.scratch_devices.end() || !dev->second))
            out.push_back("encrypted scratch at " + target + " has no sealed device");
    }
    for (const auto& [target, key] : s.scratch_keys)
        if (key)
            out.push_back("scratch key for " + target + " is still resident");

    for (const auto& target : s.store.host_mounts) {
        const auto& allowed = p.flags.allow_host_device_mounts;
        if (std::none_of(allowed.begin(), allowed.end(),
                         [&](const auto& m) { return regex_full_match(m.pattern(), target); }))
            out.push_back("host device mounted at disallowed target " + target);
    }
    return out;
}

bool safety_oracle(const UvmState& state)
{
    return safety_violations(state).empty();
}

} // namespace parma::agent
