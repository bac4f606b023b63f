// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/agent.hpp"

#include "parma/codec.hpp"
#include "parma/crypto.hpp"

#include <algorithm>

namespace parma::agent {

using nlohmann::json;
namespace eng = parma::engine;

namespace {

class OperationalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

const char* status_name(ContainerStatus s)
{
    switch (s) {
    case ContainerStatus::created: return "created";
    case ContainerStatus::running: return "running";
    case ContainerStatus::exited: return "exited";
    }
    return "unknown";
}

json process_json(const Process& p)
{
    return {{"pid", p.pid},
            {"command", p.command},
            {"status", p.status == ProcessStatus::running ? "running" : "exited"}};
}

bool terminating(int signal)
{
    return signal == 9 || signal == 15;
}

} // namespace

std::string_view outcome_name(Outcome o)
{
    switch (o) {
    case Outcome::allowed: return "allowed";
    case Outcome::denied: return "denied";
    case Outcome::failed: return "failed";
    }
    return "unknown";
}

GuestAgent::GuestAgent(ExecutionPolicy policy)
{
    state_.policy = std::move(policy);
}

GuestAgent GuestAgent::boot(ExecutionPolicy policy, const Digest32& host_data)
{
    if (policy::measure_policy(policy).host_data() != host_data)
        throw AgentFault(AgentFault::Code::policy_measurement_mismatch,
                         "policy measurement does not match launch host data");
    return GuestAgent(std::move(policy));
}

GuestAgent GuestAgent::boot(std::string_view policy_text, const Digest32& host_data)
{
    return boot(policy::parse_policy(policy_text), host_data);
}

void GuestAgent::attach_device(const std::string& target,
                               std::shared_ptr<const storage::VerityImage> image)
{
    state_.attached_devices[target] = std::move(image);
}

void GuestAgent::apply_side_effect(UvmState& next, const EnforcementRequest& request,
                                   AgentResponse& response) const
{
    switch (request.action) {
    case eng::Action::mount_device: {
        const auto& p = std::get<eng::MountDeviceParams>(request.params);
        auto it = next.attached_devices.find(p.target);
        if (it == next.attached_devices.end() || !it->second)
            throw OperationalFailure("no block device attached at " + p.target);
        try {
            storage::verify_image(*it->second, p.device_hash.bytes);
        } catch (const storage::IntegrityError& e) {
            throw OperationalFailure(std::string("verity check failed: ") + e.what());
        }
        next.mounted_layers[p.target] = it->second;
        break;
    }
    case eng::Action::unmount_device:
        next.mounted_layers.erase(std::get<eng::TargetParams>(request.params).target);
        break;
    case eng::Action::create_container: {
        const auto& p = std::get<eng::CreateContainerParams>(request.params);
        ContainerInstance c;
        c.id = p.container_id;
        c.start_command = p.command;
        c.processes.push_back(Process{next.next_pid++, p.command, ProcessStatus::running});
        c.status = ContainerStatus::running;
        response.result = {{"pid", c.processes.front().pid}};
        next.containers[c.id] = std::move(c);
        break;
    }
    case eng::Action::exec_in_container: {
        const auto& p = std::get<eng::ExecInContainerParams>(request.params);
        auto it = next.containers.find(p.container_id);
        if (it == next.containers.end())
            throw OperationalFailure("container vanished");
        if (it->second.status != ContainerStatus::running)
            throw OperationalFailure("container is not running");
        const std::uint64_t pid = next.next_pid++;
        it->second.processes.push_back(Process{pid, p.command, ProcessStatus::running});
        response.result = {{"pid", pid}};
        break;
    }
    case eng::Action::exec_external: {
        const auto& p = std::get<eng::ExecExternalParams>(request.params);
        const std::uint64_t pid = next.next_pid++;
        next.uvm_processes.push_back(Process{pid, p.command, ProcessStatus::running});
        response.result = {{"pid", pid}};
        break;
    }
    case eng::Action::signal_process: {
        const auto& p = std::get<eng::SignalParams>(request.params);
        auto& c = next.containers.at(p.container_id);
        int delivered = 0;
        for (auto& proc : c.processes) {
            if (proc.command != p.command || proc.status != ProcessStatus::running)
                continue;
            ++delivered;
            if (terminating(p.signal))
                proc.status = ProcessStatus::exited;
        }
        if (!c.processes.empty() && c.processes.front().status == ProcessStatus::exited)
            c.status = ContainerStatus::exited;
        response.result = {{"delivered", delivered}};
        break;
    }
    case eng::Action::shutdown_container:
        next.containers.erase(std::get<eng::ContainerIdParams>(request.params).container_id);
        break;
    case eng::Action::mount_scratch: {
        const auto& p = std::get<eng::MountScratchParams>(request.params);
        if (!p.encrypted) {
            next.scratch_devices[p.target] = nullptr;
            break;
        }
        auto formatted = storage::scratch_format(scratch_sectors);
        next.scratch_keys[p.target] = formatted.key;
        next.scratch_devices[p.target] =
            std::make_shared<storage::ScratchDevice>(std::move(formatted.device));
        if (scratch_observer_)
            scratch_observer_(p.target, next);
        secure_wipe(formatted.key);
        secure_wipe(*next.scratch_keys[p.target]);
        next.scratch_keys[p.target] = std::nullopt;
        break;
    }
    case eng::Action::unmount_scratch: {
        const auto& target = std::get<eng::TargetParams>(request.params).target;
        next.scratch_devices.erase(target);
        next.scratch_keys.erase(target);
        break;
    }
    case eng::Action::get_properties:
        response.result = {{"containers", next.containers.size()},
                           {"devices", next.mounted_layers.size()}};
        break;
    case eng::Action::dump_stacks:
        response.result = {{"stacks", json::array()}};
        break;
    case eng::Action::mount_overlay:
    case eng::Action::unmount_overlay:
    case eng::Action::mount_host_device:
    case eng::Action::unmount_host_device:
    case eng::Action::runtime_logging:
    case eng::Action::container_logging:
        break;
    }
}

void GuestAgent::check_consistency(const UvmState& s) const
{
    const bool same_ids =
        s.store.containers.size() == s.containers.size() &&
        std::equal(s.store.containers.begin(), s.store.containers.end(), s.containers.begin(),
                   [](const auto& a, const auto& b) { return a.first == b.first; });
    if (!same_ids)
        throw AgentFault(AgentFault::Code::internal_inconsistency,
                         "metadata store and container table disagree");
    for (const auto& [target, key] : s.scratch_keys) {
        if (key)
            throw AgentFault(AgentFault::Code::internal_inconsistency,
                             "scratch key for " + target + " was not erased");
    }
}

AgentResponse GuestAgent::handle_request(const EnforcementRequest& request)
{
    AgentResponse response;
    auto result = eng::enforce(state_.policy, state_.store, request);
    LogEntry entry{next_log_sequence_++, request, result.decision, Outcome::denied};

    if (!result.decision.allowed) {
        response.deny_reason = result.decision.deny_reason;
        state_.log.push_back(std::move(entry));
        return response;
    }

    UvmState next = state_;
    next.store = std::move(result.store);
    try {
        apply_side_effect(next, request, response);
    } catch (const OperationalFailure& e) {
        response = AgentResponse{};
        response.outcome = Outcome::failed;
        response.deny_reason = std::string("operational failure: ") + e.what();
        entry.outcome = Outcome::failed;
        state_.log.push_back(std::move(entry));
        return response;
    }
    check_consistency(next);

    next.log.push_back(entry);
    next.log.back().outcome = Outcome::allowed;
    state_ = std::move(next);
    response.allowed = true;
    response.outcome = Outcome::allowed;
    return response;
}

std::string snapshot(const UvmState& s)
{
    json containers = json::object();
    for (const auto& [id, c] : s.containers) {
        json procs = json::array();
        for (const auto& p : c.processes)
            procs.push_back(process_json(p));
        containers[id] = {{"status", status_name(c.status)},
                          {"start_command", c.start_command},
                          {"processes", procs}};
    }
    json uvm = json::array();
    for (const auto& p : s.uvm_processes)
        uvm.push_back(process_json(p));
    json keys = json::object();
    for (const auto& [target, key] : s.scratch_keys)
        keys[target] = key ? "present" : "erased";
    json scratch = json::object();
    for (const auto& [target, dev] : s.scratch_devices) {
        if (!dev) {
            scratch[target] = "plain";
            continue;
        }
        Bytes all;
        for (std::size_t i = 0; i < dev->sector_count(); ++i)
            append(all, dev->raw_sector(i));
        scratch[target] = to_hex(crypto::sha256(all));
    }
    json layers = json::object();
    for (const auto& [target, img] : s.mounted_layers)
        layers[target] = to_hex(img->root_hash);
    json attached = json::object();
    for (const auto& [target, img] : s.attached_devices)
        attached[target] = img ? to_hex(crypto::sha256(serialize_sidecar(*img))) : "";
    return json{{"policy", policy::measure_policy(s.policy).hex()},
                {"store", engine::store_to_json(s.store)},
                {"containers", containers},
                {"uvm_processes", uvm},
                {"scratch_keys", keys},
                {"scratch_devices", scratch},
                {"mounted_layers", layers},
                {"attached_devices", attached},
                {"next_pid", s.next_pid}}
        .dump();
}

} // namespace parma::agent
