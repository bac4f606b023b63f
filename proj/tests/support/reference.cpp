// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "reference.hpp"

#include "fixtures.hpp"

#include <regex>
#include <variant>

namespace parma::support::reference {

namespace {

using engine::Action;

bool rule_matches(const policy::EnvRule& rule, const std::string& value)
{
    if (rule.strategy() == policy::MatchStrategy::literal)
        return rule.pattern() == value;
    return std::regex_match(value, std::regex(rule.pattern()));
}

bool starts_with_slash(const std::string& s)
{
    return !s.empty() && s[0] == '/';
}

} // namespace

bool Model::env_ok(const std::vector<policy::EnvRule>& rules,
                   const std::vector<std::string>& env) const
{
    for (const auto& var : env) {
        bool found = false;
        for (const auto& rule : rules)
            found = found || rule_matches(rule, var);
        if (!found)
            return false;
    }
    return true;
}

bool Model::step(const engine::EnforcementRequest& request)
{
    switch (request.action) {
    case Action::mount_device: {
        const auto& p = std::get<engine::MountDeviceParams>(request.params);
        if (!starts_with_slash(p.target) || devices_.count(p.target))
            return false;
        for (const auto& t : policy_.containers)
            for (const auto& l : t.layers)
                if (l == p.device_hash) {
                    devices_[p.target] = p.device_hash;
                    return true;
                }
        return false;
    }
    case Action::unmount_device: {
        const auto& p = std::get<engine::TargetParams>(request.params);
        return devices_.erase(p.target) == 1;
    }
    case Action::mount_overlay: {
        const auto& p = std::get<engine::MountOverlayParams>(request.params);
        if (p.overlay_id.empty() || p.layer_paths.empty() || !starts_with_slash(p.target))
            return false;
        Overlay o;
        o.target = p.target;
        for (const auto& path : p.layer_paths) {
            if (!devices_.count(path))
                return false;
            o.digests.push_back(devices_.at(path));
        }
        for (const auto& t : policy_.containers)
            if (t.layers == o.digests)
                o.candidates.insert(t.id);
        if (o.candidates.empty() || overlays_.count(p.overlay_id))
            return false;
        for (const auto& [id, other] : overlays_)
            if (other.target == p.target)
                return false;
        overlays_[p.overlay_id] = o;
        return true;
    }
    case Action::create_container: {
        const auto& p = std::get<engine::CreateContainerParams>(request.params);
        if (p.container_id.empty() || !overlays_.count(p.overlay_id) ||
            containers_.count(p.container_id))
            return false;
        std::set<std::string> keep;
        for (const auto& id : overlays_.at(p.overlay_id).candidates) {
            const policy::ContainerTemplate* t = nullptr;
            for (const auto& c : policy_.containers)
                if (c.id == id)
                    t = &c;
            if (t && t->command == p.command && env_ok(t->env_rules, p.env) &&
                t->working_dir == p.working_dir && p.mounts.empty())
                keep.insert(id);
        }
        if (keep.empty())
            return false;
        containers_[p.container_id] = keep;
        return true;
    }
    case Action::exec_in_container: {
        const auto& p = std::get<engine::ExecInContainerParams>(request.params);
        auto it = containers_.find(p.container_id);
        if (it == containers_.end())
            return false;
        std::set<std::string> keep;
        for (const auto& id : it->second)
            for (const auto& c : policy_.containers)
                if (c.id == id)
                    for (const auto& rule : c.exec_processes)
                        if (rule.command == p.command && rule.working_dir == p.working_dir &&
                            env_ok(rule.env_rules, p.env))
                            keep.insert(id);
        if (keep.empty())
            return false;
        it->second = keep;
        return true;
    }
    case Action::shutdown_container: {
        const auto& p = std::get<engine::ContainerIdParams>(request.params);
        return containers_.erase(p.container_id) == 1;
    }
    default:
        throw std::invalid_argument("action outside the reference alphabet");
    }
}

std::set<std::string> Model::overlay_candidates(const std::string& overlay_id) const
{
    auto it = overlays_.find(overlay_id);
    return it == overlays_.end() ? std::set<std::string>{} : it->second.candidates;
}

std::set<std::string> Model::container_candidates(const std::string& container_id) const
{
    auto it = containers_.find(container_id);
    return it == containers_.end() ? std::set<std::string>{} : it->second;
}

policy::ExecutionPolicy two_template_policy()
{
    using policy::Matcher;
    using policy::MatchStrategy;
    policy::ExecutionPolicy p;
    policy::ContainerTemplate alpha;
    alpha.id = "alpha";
    alpha.layers = {layer("shared")};
    alpha.command = {"/a"};
    alpha.env_rules = {Matcher("X=1", MatchStrategy::literal)};
    alpha.exec_processes = {policy::ProcessRule{{"/hc"}, {}, "/"}};
    policy::ContainerTemplate beta = alpha;
    beta.id = "beta";
    beta.command = {"/b"};
    beta.env_rules.push_back(Matcher("Y=[0-9]", MatchStrategy::regex));
    beta.exec_processes = {policy::ProcessRule{{"/sh"}, {}, "/"}};
    p.containers = {alpha, beta};
    policy::validate(p);
    return p;
}

std::vector<Letter> alphabet()
{
    using namespace engine;
    auto create = [](std::vector<std::string> cmd, std::vector<std::string> env) {
        CreateContainerParams p;
        p.container_id = "c1";
        p.overlay_id = "ov";
        p.command = std::move(cmd);
        p.env = std::move(env);
        p.working_dir = "/";
        return EnforcementRequest{Action::create_container, p};
    };
    auto exec = [](std::vector<std::string> cmd) {
        return EnforcementRequest{Action::exec_in_container,
                                  ExecInContainerParams{"c1", std::move(cmd), {}, "/"}};
    };
    return {
        {"mount sda", {Action::mount_device, MountDeviceParams{layer("shared"), "/dev/sda"}}},
        {"mount sdb", {Action::mount_device, MountDeviceParams{layer("shared"), "/dev/sdb"}}},
        {"mount rogue", {Action::mount_device, MountDeviceParams{layer("rogue"), "/dev/sdc"}}},
        {"unmount sda", {Action::unmount_device, TargetParams{"/dev/sda"}}},
        {"overlay sda",
         {Action::mount_overlay, MountOverlayParams{"ov", {"/dev/sda"}, "/run/ov/a"}}},
        {"overlay sdb",
         {Action::mount_overlay, MountOverlayParams{"ov", {"/dev/sdb"}, "/run/ov/b"}}},
        {"create a", create({"/a"}, {"X=1"})},
        {"create b", create({"/b"}, {"X=1", "Y=2"})},
        {"create a bad env", create({"/a"}, {"Y=2"})},
        {"exec hc", exec({"/hc"})},
        {"exec sh", exec({"/sh"})},
        {"shutdown", {Action::shutdown_container, ContainerIdParams{"c1"}}},
    };
}

EquivalenceReport compare_all_sequences(std::size_t max_length)
{
    const auto policy = two_template_policy();
    const auto letters = alphabet();
    EquivalenceReport report;
    std::vector<std::size_t> index;
    for (std::size_t length = 1; length <= max_length; ++length) {
        index.assign(length, 0);
        for (;;) {
            ++report.sequences;
            Model model(policy);
            engine::MetadataStore store;
            std::string trace;
            bool agree = true;
            for (std::size_t k = 0; k < length && agree; ++k) {
                const auto& letter = letters[index[k]];
                trace += (k ? ", " : "") + letter.name;
                auto result = engine::enforce(policy, store, letter.request);
                const bool expected = model.step(letter.request);
                ++report.decisions;
                report.allows += expected ? 1 : 0;
                store = std::move(result.store);
                std::set<std::string> ov, ct;
                if (auto it = store.overlays.find("ov"); it != store.overlays.end())
                    ov = it->second.candidates;
                if (auto it = store.containers.find("c1"); it != store.containers.end())
                    ct = it->second.candidates;
                agree = result.decision.allowed == expected &&
                        ov == model.overlay_candidates("ov") &&
                        ct == model.container_candidates("c1");
            }
            if (!agree) {
                ++report.mismatches;
                if (report.examples.size() < 5)
                    report.examples.push_back(trace);
            }
            std::size_t pos = length;
            while (pos > 0 && ++index[pos - 1] == letters.size())
                index[--pos] = 0;
            if (pos == 0)
                break;
        }
    }
    return report;
}

} // namespace parma::support::reference
