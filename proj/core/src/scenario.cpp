// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/scenario.hpp"

#include "parma/crypto.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

namespace parma::scenario {

namespace {

constexpr std::string_view image_prefix = "@image:";

constexpr std::array<std::pair<MutationOp, std::string_view>, 9> op_names = {{
    {MutationOp::swap_layer_order, "swap_layer_order"},
    {MutationOp::inject_rogue_layer_hash, "inject_rogue_layer_hash"},
    {MutationOp::alter_env, "alter_env"},
    {MutationOp::alter_command, "alter_command"},
    {MutationOp::alter_mount_destination, "alter_mount_destination"},
    {MutationOp::replay_request, "replay_request"},
    {MutationOp::drop_request, "drop_request"},
    {MutationOp::reorder_requests, "reorder_requests"},
    {MutationOp::tamper_payload_byte, "tamper_payload_byte"},
}};

void resolve_placeholders(json& j, const std::map<std::string, std::string>& roots)
{
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s.rfind(image_prefix, 0) == 0) {
            auto it = roots.find(s.substr(image_prefix.size()));
            if (it == roots.end())
                throw ScenarioError("unknown image placeholder " + s);
            j = it->second;
        }
    } else if (j.is_structured()) {
        for (auto& item : j)
            resolve_placeholders(item, roots);
    }
}

std::vector<bool> parse_expect(const json& j)
{
    auto one = [](const json& v) {
        const auto s = v.get<std::string>();
        if (s == "allow")
            return true;
        if (s == "deny")
            return false;
        throw ScenarioError("expectation must be allow or deny, got " + s);
    };
    std::vector<bool> out;
    if (j.is_array())
        for (const auto& v : j)
            out.push_back(one(v));
    else
        out.push_back(one(j));
    return out;
}

bridge::Request parse_request(const json& j)
{
    bridge::Request r;
    r.action = j.at("action").get<std::string>();
    r.payload = j.value("payload", json::object());
    return r;
}

Step parse_step(const json& j, std::size_t index)
{
    Step s;
    s.id = j.value("id", "step-" + std::to_string(index));
    s.template_only = j.value("template", false);
    int kinds = 0;
    if (j.contains("request")) {
        s.request = parse_request(j["request"]);
        ++kinds;
    }
    if (j.contains("attach")) {
        const auto& a = j["attach"];
        AttachStep attach{a.at("target").get<std::string>(), a.at("image").get<std::string>(), {}};
        if (a.contains("corrupt_byte"))
            attach.corrupt_byte = a["corrupt_byte"].get<std::size_t>();
        s.attach = attach;
        ++kinds;
    }
    if (j.contains("mutate")) {
        const auto& m = j["mutate"];
        Mutation mut;
        const auto name = m.at("op").get<std::string>();
        const auto op = mutation_from_name(name);
        if (!op)
            throw ScenarioError("unknown mutation operator " + name);
        mut.op = *op;
        if (m.contains("base"))
            mut.bases.push_back(m["base"].get<std::string>());
        if (m.contains("bases"))
            for (const auto& b : m["bases"])
                mut.bases.push_back(b.get<std::string>());
        if (mut.bases.empty())
            throw ScenarioError("mutation in step " + s.id + " names no base step");
        for (const auto& [key, value] : m.items())
            if (key != "op" && key != "base" && key != "bases")
                mut.operands[key] = value;
        s.mutation = std::move(mut);
        ++kinds;
    }
    if (kinds != 1)
        throw ScenarioError("step " + s.id + " must have exactly one of request, attach, mutate");
    if (s.template_only) {
        if (!s.request)
            throw ScenarioError("template step " + s.id + " must be a request");
    } else {
        if (!j.contains("expect"))
            throw ScenarioError("step " + s.id + " has no expectation");
        s.expect_allow = parse_expect(j["expect"]);
    }
    return s;
}

const bridge::Request& base_request(const Scenario& sc, const std::string& id)
{
    for (const auto& s : sc.steps)
        if (s.id == id && s.request)
            return *s.request;
    throw ScenarioError("mutation base " + id + " is not a request step");
}

std::string rogue_hash()
{
    return to_hex(make_image("rogue", ImageSpec{0xee, 1}).root_hash);
}

// A delivery is a raw byte stream; nullopt models a dropped message.
using Delivery = std::optional<Bytes>;

Bytes frame(const bridge::Request& r)
{
    return bridge::encode_frame(bridge::encode_request(r));
}

std::vector<Delivery> expand(const Scenario& sc, const Mutation& m, std::uint64_t& seq)
{
    const json& ops = m.operands;
    auto fresh = [&](bridge::Request r) {
        r.seq = seq++;
        return r;
    };
    bridge::Request r = base_request(sc, m.bases.front());
    auto& p = r.payload;

    switch (m.op) {
    case MutationOp::swap_layer_order: {
        auto& layers = p.at("layer_paths");
        if (layers.size() < 2)
            throw ScenarioError("swap_layer_order needs two layers");
        const std::size_t i = ops.value("i", std::size_t{0});
        const std::size_t k = ops.value("j", layers.size() - 1);
        std::swap(layers.at(i), layers.at(k));
        return {frame(fresh(r))};
    }
    case MutationOp::inject_rogue_layer_hash:
        p["device_hash"] = ops.value("hash", rogue_hash());
        return {frame(fresh(r))};
    case MutationOp::alter_env: {
        json env = p.value("env", json::array());
        if (ops.contains("remove")) {
            const auto key = ops["remove"].get<std::string>() + "=";
            json kept = json::array();
            for (const auto& v : env)
                if (v.get<std::string>().rfind(key, 0) != 0)
                    kept.push_back(v);
            env = kept;
        } else {
            const auto var = ops.value("set", std::string("LD_PRELOAD=/tmp/inject.so"));
            const auto key = var.substr(0, var.find('=') + 1);
            bool replaced = false;
            for (auto& v : env)
                if (v.get<std::string>().rfind(key, 0) == 0) {
                    v = var;
                    replaced = true;
                }
            if (!replaced)
                env.push_back(var);
        }
        p["env"] = env;
        return {frame(fresh(r))};
    }
    case MutationOp::alter_command:
        p["command"] = ops.value("command", json::array({"/bin/sh", "-c", "id"}));
        return {frame(fresh(r))};
    case MutationOp::alter_mount_destination: {
        const std::size_t index = ops.value("index", std::size_t{0});
        p.at("mounts").at(index)["destination"] = ops.value("destination", std::string("/etc"));
        return {frame(fresh(r))};
    }
    case MutationOp::replay_request:
        if (ops.value("same_seq", false)) {
            r.seq = seq - 1;
            return {frame(r)};
        }
        return {frame(fresh(r))};
    case MutationOp::drop_request:
        return {std::nullopt};
    case MutationOp::reorder_requests: {
        std::vector<std::string> order = m.bases;
        std::reverse(order.begin(), order.end());
        std::vector<Delivery> out;
        for (const auto& id : order)
            out.emplace_back(frame(fresh(base_request(sc, id))));
        return out;
    }
    case MutationOp::tamper_payload_byte: {
        const auto needle = ops.at("needle").get<std::string>();
        std::string body = bridge::encode_request(fresh(r));
        const auto at = body.find(needle);
        if (at == std::string::npos)
            throw ScenarioError("tamper needle not found: " + needle);
        const std::size_t pos = at + ops.value("offset", std::size_t{0});
        if (pos >= body.size())
            throw ScenarioError("tamper offset past end of body");
        body[pos] = static_cast<char>(body[pos] ^ ops.value("xor", 1));
        return {bridge::encode_frame(body)};
    }
    }
    return {};
}

} // namespace

std::string_view mutation_name(MutationOp op)
{
    for (const auto& [o, name] : op_names)
        if (o == op)
            return name;
    return "unknown";
}

std::optional<MutationOp> mutation_from_name(std::string_view name)
{
    for (const auto& [o, n] : op_names)
        if (n == name)
            return o;
    return std::nullopt;
}

storage::VerityImage make_image(const std::string& name, const ImageSpec& spec)
{
    Bytes data(spec.blocks * storage::block_size);
    for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = static_cast<std::uint8_t>(spec.fill ^ (i * 131 + i / storage::block_size * 17));
    const auto salt = crypto::sha256({as_bytes("parma-sim/image/"), as_bytes(name)});
    return storage::build_tree(data, salt);
}

Scenario load_scenario(const json& document)
{
    try {
        Scenario sc;
        sc.name = document.at("name").get<std::string>();
        sc.description = document.value("description", "");
        sc.covers = document.value("covers", std::vector<std::string>{});

        std::map<std::string, std::string> roots;
        const json images = document.value("images", json::object());
        for (const auto& [name, spec] : images.items()) {
            ImageSpec is{spec.value("fill", std::uint8_t{0}), spec.value("blocks", std::size_t{1})};
            if (is.blocks == 0)
                throw ScenarioError("image " + name + " has no blocks");
            sc.images[name] = is;
            roots[name] = to_hex(make_image(name, is).root_hash);
        }

        json policy = document.at("policy");
        resolve_placeholders(policy, roots);
        sc.policy_text = policy.dump();

        json steps = document.at("steps");
        resolve_placeholders(steps, roots);
        std::set<std::string> ids;
        for (std::size_t i = 0; i < steps.size(); ++i) {
            auto step = parse_step(steps[i], i);
            if (!ids.insert(step.id).second)
                throw ScenarioError("duplicate step id " + step.id);
            if (step.attach && !sc.images.count(step.attach->image))
                throw ScenarioError("step " + step.id + " attaches unknown image");
            sc.steps.push_back(std::move(step));
        }
        for (const auto& s : sc.steps)
            if (s.mutation)
                for (const auto& b : s.mutation->bases)
                    base_request(sc, b);
        return sc;
    } catch (const json::exception& e) {
        throw ScenarioError(std::string("malformed scenario: ") + e.what());
    }
}

Scenario load_scenario_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ScenarioError("cannot open " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded())
        throw ScenarioError(path.string() + " is not valid JSON");
    return load_scenario(doc);
}

std::vector<std::filesystem::path> list_scenarios(const std::filesystem::path& dir)
{
    std::vector<std::filesystem::path> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".scn")
            out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

json ScenarioReport::to_json() const
{
    auto words = [](const std::vector<bool>& v) {
        json a = json::array();
        for (bool b : v)
            a.push_back(b ? "allow" : "deny");
        return a;
    };
    json steps_json = json::array();
    for (const auto& s : steps)
        steps_json.push_back({{"index", s.index},
                              {"id", s.id},
                              {"kind", s.kind},
                              {"expected", words(s.expected)},
                              {"actual", words(s.actual)},
                              {"reasons", s.reasons},
                              {"pass", s.pass}});
    json j{{"name", name},
           {"passed", passed},
           {"final_safe", final_safe},
           {"aborted", aborted},
           {"steps", steps_json}};
    if (aborted) {
        j["abort_step"] = abort_step;
        j["abort_reason"] = abort_reason;
    }
    return j;
}

ScenarioReport run_scenario(const Scenario& sc, bridge::Transport& transport,
                            const std::function<bool()>& safety_check)
{
    ScenarioReport report;
    report.name = sc.name;
    std::uint64_t seq = 1;
    std::map<std::string, storage::VerityImage> images;

    for (std::size_t i = 0; i < sc.steps.size(); ++i) {
        const Step& step = sc.steps[i];
        if (step.template_only)
            continue;
        StepResult result;
        result.index = i;
        result.id = step.id;
        result.expected = step.expect_allow;
        try {
            std::vector<Delivery> deliveries;
            if (step.request) {
                result.kind = "request";
                auto r = *step.request;
                r.seq = seq++;
                deliveries.emplace_back(frame(r));
            } else if (step.attach) {
                result.kind = "attach";
                const auto& a = *step.attach;
                auto it = images.find(a.image);
                if (it == images.end())
                    it = images.emplace(a.image, make_image(a.image, sc.images.at(a.image))).first;
                storage::VerityImage image = it->second;
                if (a.corrupt_byte) {
                    if (*a.corrupt_byte >= image.data.size())
                        throw ScenarioError("corrupt_byte past end of image");
                    image.data[*a.corrupt_byte] ^= 0x01;
                }
                deliveries.emplace_back(
                    frame(bridge::Request{seq++, "attach_device", bridge::attach_payload(a.target, image)}));
            } else {
                result.kind = std::string(mutation_name(step.mutation->op));
                deliveries = expand(sc, *step.mutation, seq);
            }
            for (const auto& d : deliveries) {
                if (!d) {
                    result.actual.push_back(false);
                    result.reasons.emplace_back("dropped in transit");
                    continue;
                }
                const auto responses = transport.exchange(*d);
                if (responses.size() != 1)
                    throw bridge::TransportError("expected one response, got " +
                                                 std::to_string(responses.size()));
                result.actual.push_back(responses.front().allowed);
                result.reasons.push_back(responses.front().deny_reason);
            }
        } catch (const bridge::TransportError& e) {
            report.aborted = true;
            report.abort_step = i;
            report.abort_reason = e.what();
            report.steps.push_back(std::move(result));
            break;
        }
        result.pass = result.actual == result.expected;
        report.steps.push_back(std::move(result));
    }

    report.final_safe = safety_check();
    report.passed = !report.aborted && report.final_safe &&
                    std::all_of(report.steps.begin(), report.steps.end(),
                                [](const StepResult& s) { return s.pass; });
    return report;
}

ScenarioReport run_scenario(const Scenario& sc, TransportKind kind)
{
    const auto policy = policy::parse_policy(sc.policy_text);
    bridge::GuestService service(
        agent::GuestAgent::boot(policy, policy::measure_policy(policy).host_data()));
    auto safety = [&service] {
        return service.with_agent([](agent::GuestAgent& a) { return agent::safety_oracle(a.state()); });
    };
    if (kind == TransportKind::tcp) {
        bridge::TcpServer server(service, "127.0.0.1", 0);
        bridge::TcpTransport transport("127.0.0.1", server.port());
        auto report = run_scenario(sc, transport, safety);
        server.stop();
        return report;
    }
    bridge::InProcessTransport transport(service);
    return run_scenario(sc, transport, safety);
}

std::vector<CoverageEntry> load_coverage(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ScenarioError("cannot open " + path.string());
    try {
        const json doc = json::parse(in);
        std::vector<CoverageEntry> out;
        for (const auto& e : doc.at("entries"))
            out.push_back(CoverageEntry{e.at("id").get<std::string>(),
                                        e.at("capability").get<std::string>(),
                                        e.at("scenarios").get<std::vector<std::string>>(),
                                        e.at("operators").get<std::vector<std::string>>()});
        return out;
    } catch (const json::exception& e) {
        throw ScenarioError(std::string("malformed coverage manifest: ") + e.what());
    }
}

std::vector<std::string> check_coverage(const std::vector<CoverageEntry>& entries,
                                        const std::vector<Scenario>& corpus)
{
    std::vector<std::string> problems;
    for (const auto& e : entries) {
        if (e.scenarios.empty())
            problems.push_back(e.id + ": no scenarios listed");
        if (e.operators.empty())
            problems.push_back(e.id + ": no mutation operators listed");
        std::set<std::string> used;
        for (const auto& name : e.scenarios) {
            auto it = std::find_if(corpus.begin(), corpus.end(),
                                   [&](const Scenario& s) { return s.name == name; });
            if (it == corpus.end()) {
                problems.push_back(e.id + ": scenario " + name + " not in corpus");
                continue;
            }
            if (std::find(it->covers.begin(), it->covers.end(), e.id) == it->covers.end())
                problems.push_back(e.id + ": scenario " + name + " does not declare it");
            for (const auto& s : it->steps)
                if (s.mutation && !s.template_only)
                    used.insert(std::string(mutation_name(s.mutation->op)));
        }
        for (const auto& op : e.operators) {
            if (!mutation_from_name(op))
                problems.push_back(e.id + ": unknown operator " + op);
            else if (!used.count(op))
                problems.push_back(e.id + ": operator " + op + " not exercised by its scenarios");
        }
    }
    return problems;
}

} // namespace parma::scenario
