// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/fuzz.hpp"

#include "parma/bridge.hpp"
#include "parma/crypto.hpp"

#include <algorithm>
#include <optional>
#include <set>

namespace parma::fuzz {

using nlohmann::json;

namespace {

struct EnvEntry {
    const char* pattern;
    policy::MatchStrategy strategy;
    std::vector<std::string> good;
};

const std::vector<EnvEntry>& env_catalogue()
{
    using policy::MatchStrategy;
    static const std::vector<EnvEntry> entries = {
        {"PATH=/usr/local/bin:/usr/bin:/bin", MatchStrategy::literal,
         {"PATH=/usr/local/bin:/usr/bin:/bin"}},
        {"TERM=xterm", MatchStrategy::literal, {"TERM=xterm"}},
        {"LOG_LEVEL=(debug|info|warn)", MatchStrategy::regex, {"LOG_LEVEL=info", "LOG_LEVEL=warn"}},
        {"PORT=[0-9]{2,5}", MatchStrategy::regex, {"PORT=8080", "PORT=443"}},
        {"MODEL_[A-Z]+=[a-z0-9/._-]*", MatchStrategy::regex, {"MODEL_NAME=resnet50", "MODEL_DIR=/models"}},
    };
    return entries;
}

const std::vector<std::string>& bad_env()
{
    static const std::vector<std::string> v = {"LD_PRELOAD=/tmp/x.so", "PORT=80a", "LOG_LEVEL=trace",
                                               "PATH=/tmp", "TERM=xterm\nX=1"};
    return v;
}

const std::vector<std::vector<std::string>>& command_pool()
{
    static const std::vector<std::vector<std::string>> v = {
        {"/usr/bin/python3", "serve.py"}, {"/bin/nginx", "-g", "daemon off;"},
        {"/app/server", "--port", "8080"}, {"/usr/bin/redis-server"},
        {"/pause"}, {"/app/worker", "--queue", "jobs"},
    };
    return v;
}

const std::vector<std::vector<std::string>>& exec_pool()
{
    static const std::vector<std::vector<std::string>> v = {
        {"/bin/sh", "-c", "healthcheck"}, {"/bin/ps", "aux"}, {"/usr/bin/env"}, {"/bin/ls", "/app"},
    };
    return v;
}

const std::vector<std::vector<std::string>>& rogue_commands()
{
    static const std::vector<std::vector<std::string>> v = {
        {"/bin/sh"}, {"/bin/bash", "-i"}, {"/usr/bin/gdb", "-p", "1"}, {"/bin/cat", "/proc/1/environ"},
    };
    return v;
}

struct Rng {
    std::mt19937_64 engine;

    explicit Rng(std::uint64_t seed) : engine(seed) {}

    std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine); }
    bool chance(double p) { return std::bernoulli_distribution(p)(engine); }
    template <typename T>
    const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

storage::VerityImage random_image(Rng& rng, std::size_t blocks)
{
    Bytes data(blocks * storage::block_size);
    for (auto& b : data)
        b = static_cast<std::uint8_t>(rng.engine());
    Digest32 salt{};
    for (auto& b : salt)
        b = static_cast<std::uint8_t>(rng.engine());
    return storage::build_tree(data, salt);
}

policy::ExecutionPolicy random_policy(Rng& rng, const std::vector<storage::VerityImage>& pool)
{
    using policy::Matcher;
    using policy::MatchStrategy;
    policy::ExecutionPolicy p;
    const std::size_t templates = 1 + rng.below(4);
    for (std::size_t i = 0; i < templates; ++i) {
        policy::ContainerTemplate t;
        t.id = "t" + std::to_string(i);
        const std::size_t layer_count = 1 + rng.below(3);
        std::vector<std::size_t> idx(pool.size());
        for (std::size_t k = 0; k < idx.size(); ++k)
            idx[k] = k;
        std::shuffle(idx.begin(), idx.end(), rng.engine);
        for (std::size_t k = 0; k < layer_count && k < idx.size(); ++k)
            t.layers.push_back(policy::LayerDigest{pool[idx[k]].root_hash});
        t.command = rng.pick(command_pool());
        for (const auto& e : env_catalogue())
            if (rng.chance(0.6))
                t.env_rules.emplace_back(e.pattern, e.strategy);
        t.working_dir = rng.chance(0.5) ? "/" : "/app";
        if (rng.chance(0.5)) {
            policy::MountRule m;
            m.source = rng.chance(0.5) ? Matcher("/run/data/[a-z0-9]+", MatchStrategy::regex)
                                       : Matcher("/run/data/shared", MatchStrategy::literal);
            m.destination = "/data";
            m.type = "bind";
            m.options = rng.chance(0.5) ? std::vector<std::string>{"ro", "rbind"}
                                        : std::vector<std::string>{"rbind", "rw"};
            std::sort(m.options.begin(), m.options.end());
            t.mounts.push_back(std::move(m));
        }
        const std::size_t execs = rng.below(3);
        for (std::size_t k = 0; k < execs; ++k) {
            policy::ProcessRule r;
            r.command = rng.pick(exec_pool());
            if (rng.chance(0.5))
                r.env_rules.emplace_back("TERM=xterm", MatchStrategy::literal);
            r.working_dir = t.working_dir;
            if (std::find(t.exec_processes.begin(), t.exec_processes.end(), r) == t.exec_processes.end())
                t.exec_processes.push_back(std::move(r));
        }
        for (int sig : {1, 9, 15})
            if (rng.chance(0.5))
                t.signals.push_back(sig);
        t.allow_stdio_access = rng.chance(0.5);
        p.containers.push_back(std::move(t));
    }
    if (rng.chance(0.5))
        p.external_processes.push_back(policy::ProcessRule{{"/bin/true"}, {}, "/"});
    if (rng.chance(0.3))
        p.external_processes.push_back(
            policy::ProcessRule{{"/sbin/ip", "addr"}, {Matcher("PATH=.*", MatchStrategy::regex)}, "/"});
    p.flags.allow_properties_access = rng.chance(0.3);
    p.flags.allow_dump_stacks = rng.chance(0.3);
    p.flags.allow_runtime_logging = rng.chance(0.3);
    p.flags.allow_container_logging = rng.chance(0.3);
    p.flags.allow_unencrypted_scratch = rng.chance(0.3);
    if (rng.chance(0.5))
        p.flags.allow_host_device_mounts.emplace_back("/dev/shm/[a-z]+", MatchStrategy::regex);
    return p;
}

const std::vector<std::string> device_targets = {"/dev/sda", "/dev/sdb", "/dev/sdc",
                                                 "/dev/sdd", "/dev/sde", "/dev/sdf"};
const std::vector<std::string> overlay_ids = {"ov0", "ov1", "ov2", "ov3"};
const std::vector<std::string> container_ids = {"c0", "c1", "c2", "c3"};
const std::vector<std::string> host_targets = {"/dev/shm/cache", "/dev/shm/x1", "/mnt/host", "/dev/shm/"};
const std::vector<std::string> scratch_targets = {"/run/scratch/0", "/run/scratch/1", "/run/scratch/2"};

/// Builds one trace step from the live state.
class StepGenerator {
public:
    StepGenerator(Rng& rng, const World& world) : rng_(rng), world_(world) {}

    // Returns the request plus whether it was deliberately perturbed.
    std::pair<bridge::Request, bool> next(const agent::UvmState& s)
    {
        mutate_ = rng_.chance(0.3);
        if (!mutate_ && rng_.chance(0.4))
            if (auto planned = plan(s))
                return {std::move(*planned), false};
        const std::size_t roll = rng_.below(100);
        bridge::Request r;
        if (roll < 10)
            r = attach(s);
        else if (roll < 24)
            r = mount_device(s);
        else if (roll < 28)
            r = target_action("unmount_device", known_or_random(keys(s.store.devices), device_targets));
        else if (roll < 40)
            r = mount_overlay(s);
        else if (roll < 43)
            r = unmount_overlay(s);
        else if (roll < 57)
            r = create_container(s);
        else if (roll < 65)
            r = exec_in_container(s);
        else if (roll < 69)
            r = exec_external();
        else if (roll < 73)
            r = {0, "shutdown_container", {{"container_id", known_or_random(keys(s.store.containers), container_ids)}}};
        else if (roll < 80)
            r = signal(s);
        else if (roll < 84)
            r = target_action(rng_.chance(0.75) ? "mount_host_device" : "unmount_host_device",
                              rng_.pick(host_targets));
        else if (roll < 90)
            r = scratch(s);
        else {
            static const std::vector<std::string> gated = {"get_properties", "dump_stacks",
                                                           "runtime_logging", "container_logging"};
            r = {0, rng_.pick(gated), json::object()};
        }
        return {std::move(r), mutate_};
    }

private:
    // Next step on the honest path toward a running container, if any.
    std::optional<bridge::Request> plan(const agent::UvmState& s)
    {
        const bool has_free_overlay = std::any_of(
            s.store.overlays.begin(), s.store.overlays.end(), [&](const auto& o) {
                return std::none_of(s.store.containers.begin(), s.store.containers.end(),
                                    [&](const auto& c) { return c.second.overlay_id == o.first; });
            });
        if (has_free_overlay && s.store.containers.size() < container_ids.size())
            return create_container(s);
        for (const auto& [dev, img] : s.attached_devices)
            if (!s.store.devices.count(dev) && img)
                for (const auto& layer : world_.layers)
                    if (layer.root_hash == img->root_hash)
                        return mount_device(s);
        const auto& t = any_template();
        for (const auto& layer : t.layers) {
            const bool mounted = std::any_of(s.store.devices.begin(), s.store.devices.end(),
                                             [&](const auto& d) { return d.second == layer; });
            if (!mounted)
                return attach(s);
        }
        if (s.store.overlays.size() < overlay_ids.size())
            return mount_overlay(s);
        return std::nullopt;
    }

    template <typename Map>
    static std::vector<std::string> keys(const Map& m)
    {
        std::vector<std::string> out;
        for (const auto& [k, v] : m)
            out.push_back(k);
        return out;
    }

    std::string known_or_random(const std::vector<std::string>& known, const std::vector<std::string>& pool)
    {
        if (!known.empty() && !mutate_)
            return rng_.pick(known);
        return rng_.pick(pool);
    }

    bridge::Request target_action(const std::string& action, const std::string& target)
    {
        return {0, action, {{"target", target}}};
    }

    const policy::ContainerTemplate& any_template()
    {
        return rng_.pick(world_.policy.containers);
    }

    const policy::ContainerTemplate& template_for(const std::set<std::string>& candidates)
    {
        if (!candidates.empty() && !mutate_) {
            std::vector<std::string> ids(candidates.begin(), candidates.end());
            if (const auto* t = world_.policy.find_template(rng_.pick(ids)))
                return *t;
        }
        return any_template();
    }

    bridge::Request attach(const agent::UvmState& s)
    {
        std::string target = rng_.pick(device_targets);
        for (const auto& t : device_targets)
            if (!s.store.devices.count(t) && !s.attached_devices.count(t)) {
                target = t;
                break;
            }
        const auto roll = rng_.below(10);
        storage::VerityImage image;
        if (roll < 7 || world_.strangers.empty()) {
            std::vector<const storage::VerityImage*> unmounted;
            for (const auto& img : world_.layers) {
                bool mounted = false;
                for (const auto& [dev, digest] : s.store.devices)
                    mounted = mounted || digest.bytes == img.root_hash;
                if (!mounted)
                    unmounted.push_back(&img);
            }
            image = unmounted.empty() ? rng_.pick(world_.layers) : *rng_.pick(unmounted);
        } else if (roll < 9) {
            image = rng_.pick(world_.strangers);
        } else {
            image = rng_.pick(world_.layers);
            image.data[rng_.below(image.data.size())] ^= static_cast<std::uint8_t>(1u << rng_.below(8));
        }
        return {0, "attach_device", bridge::attach_payload(target, image)};
    }

    bridge::Request mount_device(const agent::UvmState& s)
    {
        std::vector<std::string> pending;
        for (const auto& [dev, img] : s.attached_devices)
            if (!s.store.devices.count(dev))
                pending.push_back(dev);
        const auto target = pending.empty() || mutate_ ? rng_.pick(device_targets) : rng_.pick(pending);
        std::string hash;
        auto it = s.attached_devices.find(target);
        if (!mutate_ && it != s.attached_devices.end() && it->second)
            hash = to_hex(it->second->root_hash);
        else if (rng_.chance(0.5))
            hash = to_hex(rng_.pick(world_.layers).root_hash);
        else
            hash = to_hex(rng_.pick(world_.strangers).root_hash);
        return {0, "mount_device", {{"device_hash", hash}, {"target", target}}};
    }

    bridge::Request mount_overlay(const agent::UvmState& s)
    {
        std::vector<const policy::ContainerTemplate*> ready;
        for (const auto& t : world_.policy.containers) {
            bool all = true;
            for (const auto& layer : t.layers) {
                bool found = false;
                for (const auto& [dev, digest] : s.store.devices)
                    found = found || digest == layer;
                all = all && found;
            }
            if (all)
                ready.push_back(&t);
        }
        const auto& t = ready.empty() ? any_template() : *rng_.pick(ready);
        json paths = json::array();
        for (const auto& layer : t.layers) {
            std::string target = rng_.pick(device_targets);
            for (const auto& [dev, digest] : s.store.devices)
                if (digest == layer) {
                    target = dev;
                    break;
                }
            paths.push_back(target);
        }
        if (mutate_ && paths.size() >= 2 && rng_.chance(0.5))
            std::swap(paths[0], paths[paths.size() - 1]);
        else if (mutate_)
            paths.push_back(rng_.pick(device_targets));
        std::string id = rng_.pick(overlay_ids);
        for (const auto& candidate : overlay_ids)
            if (!s.store.overlays.count(candidate) && rng_.chance(0.8)) {
                id = candidate;
                break;
            }
        return {0, "mount_overlay", {{"overlay_id", id}, {"layer_paths", paths}, {"target", "/run/ov/" + id}}};
    }

    bridge::Request unmount_overlay(const agent::UvmState& s)
    {
        std::vector<std::string> targets;
        for (const auto& [id, o] : s.store.overlays)
            targets.push_back(o.target);
        std::vector<std::string> pool;
        for (const auto& id : overlay_ids)
            pool.push_back("/run/ov/" + id);
        return target_action("unmount_overlay", known_or_random(targets, pool));
    }

    json env_for(const std::vector<policy::EnvRule>& rules)
    {
        json env = json::array();
        for (const auto& rule : rules) {
            if (!rng_.chance(0.7))
                continue;
            for (const auto& e : env_catalogue())
                if (rule.pattern() == e.pattern) {
                    env.push_back(rng_.pick(e.good));
                    break;
                }
        }
        if (mutate_ && rng_.chance(0.5))
            env.push_back(rng_.pick(bad_env()));
        return env;
    }

    bridge::Request create_container(const agent::UvmState& s)
    {
        std::string overlay = rng_.pick(overlay_ids);
        std::set<std::string> candidates;
        if (!s.store.overlays.empty() && (!mutate_ || rng_.chance(0.5))) {
            overlay = rng_.pick(keys(s.store.overlays));
            candidates = s.store.overlays.at(overlay).candidates;
        }
        const auto& t = template_for(candidates);
        json command = t.command;
        if (mutate_ && rng_.chance(0.4))
            command = rng_.pick(rogue_commands());
        std::string wd = t.working_dir;
        if (mutate_ && rng_.chance(0.2))
            wd = "/tmp";
        json mounts = json::array();
        for (const auto& m : t.mounts) {
            if (!rng_.chance(0.6))
                continue;
            const std::string src = m.source.strategy() == policy::MatchStrategy::literal
                                        ? m.source.pattern()
                                        : "/run/data/vol" + std::to_string(rng_.below(10));
            const std::string dest = mutate_ && rng_.chance(0.5) ? "/etc" : m.destination;
            mounts.push_back({{"source", src}, {"destination", dest}, {"type", m.type}, {"options", m.options}});
        }
        std::string id = rng_.pick(container_ids);
        for (const auto& candidate : container_ids)
            if (!s.store.containers.count(candidate) && rng_.chance(0.8)) {
                id = candidate;
                break;
            }
        return {0,
                "create_container",
                {{"container_id", id},
                 {"overlay_id", overlay},
                 {"command", command},
                 {"env", env_for(t.env_rules)},
                 {"working_dir", wd},
                 {"mounts", mounts}}};
    }

    bridge::Request exec_in_container(const agent::UvmState& s)
    {
        std::string id = rng_.pick(container_ids);
        std::set<std::string> candidates;
        if (!s.store.containers.empty()) {
            id = rng_.pick(keys(s.store.containers));
            candidates = s.store.containers.at(id).candidates;
        }
        const auto& t = template_for(candidates);
        json command = rng_.pick(rogue_commands());
        json env = json::array();
        std::string wd = "/";
        if (!t.exec_processes.empty() && !(mutate_ && rng_.chance(0.5))) {
            const auto& rule = rng_.pick(t.exec_processes);
            command = rule.command;
            env = env_for(rule.env_rules);
            wd = rule.working_dir;
        }
        return {0, "exec_in_container", {{"container_id", id}, {"command", command}, {"env", env}, {"working_dir", wd}}};
    }

    bridge::Request exec_external()
    {
        json command = rng_.pick(rogue_commands());
        json env = json::array();
        if (!world_.policy.external_processes.empty() && !mutate_) {
            const auto& rule = rng_.pick(world_.policy.external_processes);
            command = rule.command;
            if (!rule.env_rules.empty())
                env.push_back("PATH=/usr/bin");
        }
        return {0, "exec_external", {{"command", command}, {"env", env}, {"working_dir", "/"}}};
    }

    bridge::Request signal(const agent::UvmState& s)
    {
        std::string id = rng_.pick(container_ids);
        json command = rng_.pick(rogue_commands());
        int sig = 1 + static_cast<int>(rng_.below(64));
        if (!s.store.containers.empty()) {
            id = rng_.pick(keys(s.store.containers));
            const auto& c = s.store.containers.at(id);
            command = c.command;
            if (!c.exec_commands.empty() && rng_.chance(0.3))
                command = rng_.pick(c.exec_commands);
            const auto& t = template_for(c.candidates);
            if (!t.signals.empty() && !mutate_)
                sig = rng_.pick(t.signals);
        }
        return {0, "signal_process", {{"container_id", id}, {"signal", sig}, {"command", command}}};
    }

    bridge::Request scratch(const agent::UvmState& s)
    {
        if (!s.store.scratch.empty() && rng_.chance(0.25))
            return target_action("unmount_scratch", rng_.pick(keys(s.store.scratch)));
        return {0, "mount_scratch", {{"target", rng_.pick(scratch_targets)}, {"encrypted", !mutate_ || rng_.chance(0.5)}}};
    }

    Rng& rng_;
    const World& world_;
    bool mutate_ = false;
};

void note(FuzzReport& report, std::string finding)
{
    if (report.findings.size() < 16)
        report.findings.push_back(std::move(finding));
}

bool subset(const std::set<std::string>& a, const std::set<std::string>& b)
{
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

void run_trace(const World& world, std::size_t step_count, std::uint64_t trace_seed,
               std::uint64_t trace_index, FuzzReport& report, Bytes& transcript)
{
    Rng rng(trace_seed);
    StepGenerator gen(rng, world);
    bridge::GuestService service(
        agent::GuestAgent::boot(world.policy, policy::measure_policy(world.policy).host_data()));
    auto transport = std::make_unique<bridge::InProcessTransport>(service);
    std::uint64_t seq = 1;

    for (std::size_t step = 0; step < step_count; ++step) {
        const auto [pre_snapshot, pre_store] = service.with_agent([](agent::GuestAgent& a) {
            return std::make_pair(agent::snapshot(a.state()), a.state().store);
        });
        const auto [request, mutated] =
            service.with_agent([&](agent::GuestAgent& a) { return gen.next(a.state()); });

        Bytes body;
        {
            auto r = request;
            r.seq = seq++;
            const auto text = bridge::encode_request(r);
            body.assign(text.begin(), text.end());
        }
        bool tampered = false;
        if (rng.chance(0.04)) {
            body[rng.below(body.size())] ^= static_cast<std::uint8_t>(1u << rng.below(8));
            tampered = true;
        } else if (seq > 2 && rng.chance(0.01)) {
            auto r = request;
            r.seq = 1 + rng.below(seq - 2); // an already used sequence number
            --seq;
            const auto text = bridge::encode_request(r);
            body.assign(text.begin(), text.end());
            tampered = true;
        }

        std::vector<bridge::Response> responses;
        if (rng.chance(0.002)) {
            // Oversize header: the stream is torn down and the host reconnects.
            responses = transport->exchange(Bytes{0xff, 0xff, 0xff, 0xff});
            transport = std::make_unique<bridge::InProcessTransport>(service);
            seq = 1;
            tampered = true;
        } else {
            responses = transport->exchange(bridge::encode_frame(to_string(body)));
        }

        ++report.steps;
        if (mutated || tampered)
            ++report.mutated;
        if (responses.size() != 1) {
            ++report.safety_violations;
            note(report, "trace " + std::to_string(trace_index) + " step " + std::to_string(step) +
                             ": expected one response");
            continue;
        }
        const auto& resp = responses.front();
        const auto outcome = resp.result.value("outcome", std::string());
        if (resp.allowed)
            ++report.allows;
        else if (outcome == "failed")
            ++report.failures;
        else {
            ++report.denies;
            ++report.deny_reasons[resp.deny_reason.substr(0, resp.deny_reason.find(':'))];
        }
        append(transcript, as_bytes(resp.allowed ? "A" : "D"));
        append(transcript, as_bytes(resp.deny_reason));
        append(transcript, as_bytes("\n"));

        service.with_agent([&](agent::GuestAgent& a) {
            const auto& s = a.state();
            const auto where = "trace " + std::to_string(trace_index) + " step " + std::to_string(step);
            if (!resp.allowed && agent::snapshot(s) != pre_snapshot) {
                ++report.atomicity_violations;
                note(report, where + ": state changed after " + resp.action + " was refused");
            }
            auto violations = agent::safety_violations(s);
            for (const auto& [id, c] : s.store.containers) {
                auto before = pre_store.containers.find(id);
                if (before != pre_store.containers.end() && !subset(c.candidates, before->second.candidates))
                    violations.push_back("candidate set of " + id + " grew");
            }
            if (!violations.empty()) {
                ++report.safety_violations;
                note(report, where + ": " + violations.front());
            }
        });
    }
}

} // namespace

World generate_world(std::uint64_t seed)
{
    Rng rng(mix(seed, 0x5eed));
    World w;
    const std::size_t pool = 3 + rng.below(4);
    for (std::size_t i = 0; i < pool; ++i)
        w.layers.push_back(random_image(rng, 1));
    for (std::size_t i = 0; i < 2; ++i)
        w.strangers.push_back(random_image(rng, 1));
    for (;;) {
        w.policy = random_policy(rng, w.layers);
        try {
            policy::validate(w.policy);
            break;
        } catch (const policy::PolicyError&) {
        }
    }
    // Keep only images the policy refers to, so every layer is meaningful.
    std::erase_if(w.layers, [&](const storage::VerityImage& img) {
        for (const auto& t : w.policy.containers)
            for (const auto& l : t.layers)
                if (l.bytes == img.root_hash)
                    return false;
        return true;
    });
    return w;
}

json FuzzReport::to_json() const
{
    return {{"policies", policies},
            {"traces", traces},
            {"steps", steps},
            {"allows", allows},
            {"denies", denies},
            {"operational_failures", failures},
            {"mutated_steps", mutated},
            {"safety_violations", safety_violations},
            {"atomicity_violations", atomicity_violations},
            {"deny_reasons", deny_reasons},
            {"findings", findings},
            {"decision_digest", decision_digest}};
}

FuzzReport fuzz_traces(const World& world, std::size_t step_count, std::size_t trace_count,
                       std::uint64_t seed)
{
    if (step_count == 0)
        throw std::invalid_argument("step_count must be at least 1");
    FuzzReport report;
    Bytes transcript;
    for (std::size_t t = 0; t < trace_count; ++t)
        run_trace(world, step_count, mix(seed, t), t, report, transcript);
    report.policies = trace_count > 0 ? 1 : 0;
    report.traces = trace_count;
    report.decision_digest = to_hex(crypto::sha256(transcript));
    return report;
}

FuzzReport fuzz_campaign(std::size_t policy_count, std::size_t step_count,
                         std::size_t trace_count, std::uint64_t seed)
{
    if (step_count == 0)
        throw std::invalid_argument("step_count must be at least 1");
    if (policy_count == 0)
        throw std::invalid_argument("policy_count must be at least 1");
    std::vector<World> worlds;
    for (std::size_t i = 0; i < policy_count; ++i)
        worlds.push_back(generate_world(mix(seed, 1000 + i)));
    FuzzReport report;
    Bytes transcript;
    for (std::size_t t = 0; t < trace_count; ++t)
        run_trace(worlds[t % policy_count], step_count, mix(seed, t), t, report, transcript);
    report.policies = trace_count == 0 ? 0 : std::min(policy_count, trace_count);
    report.traces = trace_count;
    report.decision_digest = to_hex(crypto::sha256(transcript));
    return report;
}

} // namespace parma::fuzz
