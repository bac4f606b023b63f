// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "policy_gen.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <stdexcept>

namespace parma::support {

namespace {

using nlohmann::json;
using policy::Matcher;
using policy::MatchStrategy;

std::size_t pick(std::mt19937_64& rng, std::size_t n)
{
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::string token(std::mt19937_64& rng)
{
    static constexpr std::string_view chars = "abcdefghijklmnopqrstuvwxyz0123456789";
    std::string s;
    for (int i = 0; i < 6; ++i)
        s += chars[pick(rng, chars.size())];
    return s;
}

bool* pick_flag(policy::PolicyFlags& f, std::size_t i)
{
    switch (i % 5) {
    case 0: return &f.allow_properties_access;
    case 1: return &f.allow_dump_stacks;
    case 2: return &f.allow_runtime_logging;
    case 3: return &f.allow_container_logging;
    default: return &f.allow_unencrypted_scratch;
    }
}

// Returns false when the chosen edit does not apply to this policy.
bool apply_edit(policy::ExecutionPolicy& p, std::size_t kind, std::mt19937_64& rng,
                std::string& what)
{
    if (kind == 0) {
        const auto i = pick(rng, 5);
        bool* flag = pick_flag(p.flags, i);
        *flag = !*flag;
        what = "toggle flag " + std::to_string(i);
        return true;
    }
    if (kind == 1) {
        p.flags.allow_host_device_mounts.emplace_back("/dev/" + token(rng), MatchStrategy::regex);
        what = "add host mount pattern";
        return true;
    }
    if (kind == 2) {
        p.external_processes.push_back(policy::ProcessRule{{"/bin/" + token(rng)}, {}, "/"});
        what = "add external process";
        return true;
    }
    if (p.containers.empty())
        return false;
    auto& t = p.containers[pick(rng, p.containers.size())];
    switch (kind) {
    case 3: {
        auto& d = t.layers[pick(rng, t.layers.size())];
        d.bytes[pick(rng, d.bytes.size())] ^= static_cast<std::uint8_t>(1u << pick(rng, 8));
        what = "flip a layer digest bit";
        return true;
    }
    case 4:
        if (t.layers.size() < 2 || t.layers.front() == t.layers.back())
            return false;
        std::swap(t.layers.front(), t.layers.back());
        what = "swap layer order";
        return true;
    case 5:
        t.layers.push_back(policy::LayerDigest{});
        t.layers.back().bytes[pick(rng, 32)] = static_cast<std::uint8_t>(1 + pick(rng, 255));
        what = "append a layer";
        return true;
    case 6:
        t.command.back() += "x";
        what = "change a command argument";
        return true;
    case 7:
        t.command.push_back("--" + token(rng));
        what = "append a command argument";
        return true;
    case 8:
        t.env_rules.emplace_back(token(rng) + "=1", MatchStrategy::literal);
        what = "add an env rule";
        return true;
    case 9: {
        if (t.env_rules.empty())
            return false;
        auto& r = t.env_rules[pick(rng, t.env_rules.size())];
        r = Matcher(r.pattern() + "0", r.strategy());
        what = "edit an env rule pattern";
        return true;
    }
    case 10: {
        if (t.env_rules.empty())
            return false;
        auto& r = t.env_rules[pick(rng, t.env_rules.size())];
        const auto& text = r.pattern();
        if (std::count(text.begin(), text.end(), '=') != 1)
            return false;
        r = Matcher(text, r.strategy() == MatchStrategy::literal ? MatchStrategy::regex
                                                                 : MatchStrategy::literal);
        what = "switch an env rule strategy";
        return true;
    }
    case 11:
        t.working_dir = (t.working_dir == "/" ? "" : t.working_dir) + "/" + token(rng);
        what = "change working dir";
        return true;
    case 12:
        t.signals.push_back(1 + static_cast<int>(pick(rng, 64)));
        what = "add a signal";
        return true;
    case 13:
        t.exec_processes.push_back(policy::ProcessRule{{"/usr/bin/" + token(rng)}, {}, "/"});
        what = "add an exec process";
        return true;
    case 14:
        t.allow_stdio_access = !t.allow_stdio_access;
        what = "toggle stdio access";
        return true;
    case 15:
        t.id += "-" + token(rng);
        what = "rename a template";
        return true;
    case 16:
        t.mounts.push_back(policy::MountRule{Matcher("/host/" + token(rng), MatchStrategy::literal),
                                             "/mnt/" + token(rng), "bind", {"ro"}});
        what = "add a mount rule";
        return true;
    case 17: {
        if (t.mounts.empty())
            return false;
        t.mounts[pick(rng, t.mounts.size())].destination += "x";
        what = "change a mount destination";
        return true;
    }
    default:
        return false;
    }
}

constexpr std::size_t edit_kinds = 18;

std::string space(std::mt19937_64& rng)
{
    static constexpr std::string_view ws[] = {"", " ", "\n", "\t", "  \n  ", "\r\n"};
    return std::string(ws[pick(rng, std::size(ws))]);
}

void emit(const json& j, std::mt19937_64& rng, std::string& out)
{
    if (j.is_object()) {
        std::vector<std::string> keys;
        for (const auto& [k, v] : j.items())
            keys.push_back(k);
        std::shuffle(keys.begin(), keys.end(), rng);
        out += "{" + space(rng);
        for (std::size_t i = 0; i < keys.size(); ++i) {
            if (i)
                out += "," + space(rng);
            out += json(keys[i]).dump() + space(rng) + ":" + space(rng);
            emit(j.at(keys[i]), rng, out);
            out += space(rng);
        }
        out += "}";
    } else if (j.is_array()) {
        out += "[" + space(rng);
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i)
                out += space(rng) + "," + space(rng);
            emit(j[i], rng, out);
        }
        out += space(rng) + "]";
    } else {
        out += j.dump();
    }
}

} // namespace

PolicyMutation mutate_policy(const policy::ExecutionPolicy& base, std::mt19937_64& rng)
{
    for (int attempt = 0; attempt < 1000; ++attempt) {
        PolicyMutation m{base, {}};
        try {
            if (!apply_edit(m.policy, pick(rng, edit_kinds), rng, m.description))
                continue;
            policy::validate(m.policy);
        } catch (const policy::PolicyError&) {
            continue;
        }
        if (m.policy != base)
            return m;
    }
    throw std::runtime_error("no applicable mutation found");
}

std::string permuted_text(const policy::ExecutionPolicy& policy, std::mt19937_64& rng)
{
    std::string out = space(rng);
    emit(json::parse(policy::render_policy(policy)), rng, out);
    return out + space(rng);
}

} // namespace parma::support
