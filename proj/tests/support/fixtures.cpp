// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include "parma/crypto.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <vector>

namespace parma::support {

policy::LayerDigest layer(std::string_view name)
{
    return policy::LayerDigest{crypto::sha256(as_bytes(name))};
}

policy::ExecutionPolicy wide_policy(std::size_t templates)
{
    using policy::MatchStrategy;
    policy::ExecutionPolicy p;
    for (std::size_t i = 0; i < templates; ++i) {
        policy::ContainerTemplate t;
        t.id = "svc-" + std::to_string(i);
        t.layers = {layer("base"), layer("runtime")};
        t.command = {"/app/server-" + std::to_string(i), "--port", "8080"};
        t.env_rules = {
            policy::Matcher("PATH=/usr/local/bin:/usr/bin:/bin", MatchStrategy::literal),
            policy::Matcher("PORT=[0-9]{2,5}", MatchStrategy::regex),
            policy::Matcher("LOG_LEVEL=(debug|info|warn|error)", MatchStrategy::regex),
        };
        t.working_dir = "/app";
        t.mounts = {policy::MountRule{
            policy::Matcher("/run/secrets/[a-z0-9-]+", MatchStrategy::regex), "/secrets", "bind",
            {"ro"}}};
        t.exec_processes = {policy::ProcessRule{{"/bin/healthcheck"}, {}, "/app"}};
        t.signals = {15};
        p.containers.push_back(std::move(t));
    }
    policy::validate(p);
    return p;
}

engine::MetadataStore wide_store(const policy::ExecutionPolicy& policy)
{
    engine::MetadataStore store;
    store.devices["/dev/sda"] = layer("base");
    store.devices["/dev/sdb"] = layer("runtime");
    engine::OverlayEntry overlay;
    overlay.layer_paths = {"/dev/sda", "/dev/sdb"};
    overlay.layer_digests = {layer("base"), layer("runtime")};
    overlay.target = "/run/overlay/ov";
    for (const auto& t : policy.containers)
        overlay.candidates.insert(t.id);
    store.overlays["ov"] = overlay;
    return store;
}

engine::EnforcementRequest wide_create_request(std::size_t templates)
{
    engine::CreateContainerParams p;
    p.container_id = "c1";
    p.overlay_id = "ov";
    p.command = {"/app/server-" + std::to_string(templates - 1), "--port", "8080"};
    p.env = {"PATH=/usr/local/bin:/usr/bin:/bin", "PORT=8080", "LOG_LEVEL=info"};
    p.working_dir = "/app";
    p.mounts = {engine::MountSpec{"/run/secrets/model-key", "/secrets", "bind", {"ro"}}};
    return {engine::Action::create_container, p};
}

double median_enforce_micros(const policy::ExecutionPolicy& policy,
                             const engine::MetadataStore& store,
                             const engine::EnforcementRequest& request, std::size_t iterations)
{
    if (iterations == 0)
        throw std::invalid_argument("iterations must be positive");
    std::vector<double> samples;
    samples.reserve(iterations);
    for (std::size_t i = 0; i < iterations; ++i) {
        const auto start = std::chrono::steady_clock::now();
        const auto result = engine::enforce(policy, store, request);
        const auto stop = std::chrono::steady_clock::now();
        if (!result.decision.allowed)
            throw std::logic_error("benchmark request was denied: " + result.decision.deny_reason);
        samples.push_back(std::chrono::duration<double, std::micro>(stop - start).count());
    }
    auto mid = samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2);
    std::nth_element(samples.begin(), mid, samples.end());
    return *mid;
}

} // namespace parma::support
