// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/bridge.hpp"
#include "parma/fuzz.hpp"
#include "parma/policy.hpp"
#include "parma/scenario.hpp"
#include "parma/storage.hpp"
#include "parma/workflow.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <signal.h>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_violation = 1;
constexpr int exit_input = 2;

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Common {
    bool json_out = false;
    std::uint64_t seed = 0;
};

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, parma::ByteView bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw InputError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::pair<std::string, std::uint16_t> split_endpoint(const std::string& endpoint)
{
    const auto colon = endpoint.rfind(':');
    if (colon == std::string::npos)
        throw InputError("endpoint must be host:port, got " + endpoint);
    const int port = std::stoi(endpoint.substr(colon + 1));
    if (port < 0 || port > 65535)
        throw InputError("port out of range in " + endpoint);
    return {endpoint.substr(0, colon), static_cast<std::uint16_t>(port)};
}

parma::policy::ExecutionPolicy load_policy(const fs::path& path)
{
    try {
        return parma::policy::parse_policy(read_file(path));
    } catch (const parma::policy::PolicyError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

int cmd_hash_layer(const Common& c, const fs::path& data_path, const std::string& salt_hex,
                   fs::path sidecar)
{
    const std::string data = read_file(data_path);
    if (data.empty())
        throw InputError(data_path.string() + " is empty");
    parma::Digest32 salt{};
    if (!salt_hex.empty()) {
        try {
            salt = parma::array_from_hex<32>(salt_hex);
        } catch (const std::invalid_argument&) {
            throw InputError("salt must be 64 hex characters");
        }
    }
    const auto image = parma::storage::build_tree(parma::as_bytes(data), salt);
    if (sidecar.empty())
        sidecar = data_path.string() + ".vrt";
    write_file(sidecar, parma::storage::serialize_sidecar(image));
    const auto root = parma::to_hex(image.root_hash);
    if (c.json_out)
        std::cout << json{{"root_hash", root}, {"blocks", image.block_count()}, {"sidecar", sidecar.string()}}.dump()
                  << "\n";
    else
        std::cout << root << "\n";
    return exit_ok;
}

int cmd_measure(const Common& c, const fs::path& policy_path)
{
    const auto m = parma::policy::measure_policy(load_policy(policy_path));
    const auto host_data = parma::to_hex(m.host_data());
    if (c.json_out)
        std::cout << json{{"sha512", m.hex()}, {"host_data", host_data}}.dump() << "\n";
    else
        std::cout << "sha512    " << m.hex() << "\nhost_data " << host_data << "\n";
    return exit_ok;
}

// Container spec: {"containers": [{"id"?, "layers", "command", "env"?,
// "working_dir"?, "mounts"?}]}. Env entries become literal rules.
int cmd_gen_policy(const Common&, const fs::path& spec_path, const fs::path& out_path)
{
    json spec = json::parse(read_file(spec_path), nullptr, false);
    if (spec.is_discarded() || !spec.is_object() || !spec.contains("containers"))
        throw InputError(spec_path.string() + ": expected an object with a containers array");
    json containers = json::array();
    std::size_t index = 0;
    for (const auto& c : spec["containers"]) {
        const auto id = c.value("id", "container" + std::to_string(index++));
        if (!c.contains("layers") || !c["layers"].is_array() || c["layers"].empty())
            throw InputError("container " + id + " lists no layers");
        json env = json::array();
        for (const auto& e : c.value("env", json::array()))
            env.push_back({{"pattern", e}, {"strategy", "literal"}});
        json mounts = json::array();
        for (const auto& m : c.value("mounts", json::array()))
            mounts.push_back({{"source", m.at("source")},
                              {"source_strategy", "literal"},
                              {"destination", m.at("destination")},
                              {"type", m.value("type", "bind")},
                              {"options", m.value("options", json::array())}});
        containers.push_back({{"id", id},
                              {"layers", c["layers"]},
                              {"command", c.at("command")},
                              {"env_rules", env},
                              {"working_dir", c.value("working_dir", "/")},
                              {"mounts", mounts}});
    }
    const json doc{{"version", 1}, {"containers", containers}};
    std::string text;
    try {
        text = parma::policy::render_policy(parma::policy::parse_policy(doc.dump()));
    } catch (const parma::policy::PolicyError& e) {
        throw InputError(std::string("generated policy rejected: ") + e.what());
    }
    if (out_path.empty()) {
        std::cout << text << "\n";
    } else {
        text += "\n";
        write_file(out_path, parma::as_bytes(text));
    }
    return exit_ok;
}

int wait_for_shutdown(double duration)
{
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    if (duration > 0) {
        timespec ts{};
        ts.tv_sec = static_cast<time_t>(duration);
        ts.tv_nsec = static_cast<long>((duration - static_cast<double>(ts.tv_sec)) * 1e9);
        sigtimedwait(&set, nullptr, &ts);
    } else {
        int sig = 0;
        sigwait(&set, &sig);
    }
    return exit_ok;
}

int cmd_serve_guest(const Common& c, const fs::path& policy_path, const std::string& listen,
                    const std::string& host_data_hex, const std::string& attest_listen, double duration)
{
    // Block termination signals before any thread starts so they reach sigwait.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    const auto policy = load_policy(policy_path);
    parma::Digest32 host_data = parma::policy::measure_policy(policy).host_data();
    if (!host_data_hex.empty())
        host_data = parma::array_from_hex<32>(host_data_hex);

    std::optional<parma::bridge::GuestService> guest;
    try {
        guest.emplace(parma::agent::GuestAgent::boot(policy, host_data));
    } catch (const parma::agent::AgentFault& fault) {
        std::cerr << "guest refused to start: " << fault.what() << "\n";
        return exit_violation;
    }
    const auto [host, port] = split_endpoint(listen);
    parma::bridge::TcpServer server(*guest, host, port);
    std::cout << "guest endpoint listening on " << host << ":" << server.port() << std::endl;

    std::unique_ptr<parma::attest::AttestationService> verifier;
    std::unique_ptr<parma::attest::KeyReleaseService> kms;
    std::unique_ptr<parma::bridge::AttestationEndpoint> attest_endpoint;
    std::unique_ptr<parma::bridge::TcpServer> attest_server;
    if (!attest_listen.empty()) {
        const auto seed_bytes = parma::le64(c.seed);
        const auto vendor = parma::attest::MockVendor::from_seed(
            parma::crypto::sha256({seed_bytes, parma::as_bytes("vendor")}));
        verifier = std::make_unique<parma::attest::AttestationService>(
            parma::crypto::Ed25519Key::from_seed(parma::crypto::sha256({seed_bytes, parma::as_bytes("verifier")})),
            "parma-sim-verifier", vendor.root_public_key());
        kms = std::make_unique<parma::attest::KeyReleaseService>(verifier->public_key());
        attest_endpoint = std::make_unique<parma::bridge::AttestationEndpoint>(*verifier, *kms);
        const auto [ahost, aport] = split_endpoint(attest_listen);
        attest_server = std::make_unique<parma::bridge::TcpServer>(*attest_endpoint, ahost, aport);
        std::cout << "attestation endpoint listening on " << ahost << ":" << attest_server->port()
                  << std::endl;
    }
    wait_for_shutdown(duration);
    if (attest_server)
        attest_server->stop();
    server.stop();
    return exit_ok;
}

int cmd_run_scenario(const Common& c, const std::vector<fs::path>& inputs, bool tcp,
                     fs::path coverage_path)
{
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            auto found = parma::scenario::list_scenarios(in);
            files.insert(files.end(), found.begin(), found.end());
            if (coverage_path.empty() && fs::exists(in / "coverage.json"))
                coverage_path = in / "coverage.json";
        } else {
            files.push_back(in);
        }
    }
    if (files.empty())
        throw InputError("no scenario files given");

    std::vector<parma::scenario::Scenario> corpus;
    for (const auto& f : files) {
        try {
            corpus.push_back(parma::scenario::load_scenario_file(f));
        } catch (const parma::scenario::ScenarioError& e) {
            throw InputError(f.string() + ": " + e.what());
        }
    }

    const auto kind = tcp ? parma::scenario::TransportKind::tcp : parma::scenario::TransportKind::in_process;
    bool all_passed = true;
    json reports = json::array();
    for (const auto& sc : corpus) {
        const auto report = parma::scenario::run_scenario(sc, kind);
        all_passed = all_passed && report.passed;
        reports.push_back(report.to_json());
        if (!c.json_out) {
            std::cout << (report.passed ? "PASS " : "FAIL ") << sc.name << "\n";
            for (const auto& s : report.steps)
                if (!s.pass)
                    std::cout << "    step " << s.index << " (" << s.id << ", " << s.kind << ") "
                              << json(s.reasons).dump() << "\n";
            if (!report.final_safe)
                std::cout << "    final state violates the safety invariant\n";
        }
    }

    json coverage_problems = json::array();
    if (!coverage_path.empty()) {
        try {
            for (auto& p : parma::scenario::check_coverage(parma::scenario::load_coverage(coverage_path), corpus))
                coverage_problems.push_back(std::move(p));
        } catch (const parma::scenario::ScenarioError& e) {
            throw InputError(e.what());
        }
        if (!c.json_out) {
            std::cout << (coverage_problems.empty() ? "PASS coverage " : "FAIL coverage ")
                      << coverage_path.string() << "\n";
            for (const auto& p : coverage_problems)
                std::cout << "    " << p.get<std::string>() << "\n";
        }
    }
    if (c.json_out)
        std::cout << json{{"scenarios", reports}, {"coverage_problems", coverage_problems}, {"passed", all_passed && coverage_problems.empty()}}.dump(2)
                  << "\n";
    return all_passed && coverage_problems.empty() ? exit_ok : exit_violation;
}

int cmd_fuzz(const Common& c, std::size_t traces, std::size_t steps, std::size_t policies)
{
    if (steps == 0)
        throw InputError("--steps must be at least 1");
    if (policies == 0)
        throw InputError("--policies must be at least 1");
    const auto start = std::chrono::steady_clock::now();
    const auto report = parma::fuzz::fuzz_campaign(policies, steps, traces, c.seed);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.json_out) {
        auto j = report.to_json();
        j["seed"] = c.seed;
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "seed " << c.seed << ": " << report.traces << " traces over " << report.policies
                  << " policies, " << report.steps << " steps\n"
                  << "  allowed " << report.allows << ", denied " << report.denies << ", failed "
                  << report.failures << ", mutated " << report.mutated << "\n"
                  << "  safety violations " << report.safety_violations << ", atomicity violations "
                  << report.atomicity_violations << "\n"
                  << "  decisions " << report.decision_digest << "\n";
        for (const auto& f : report.findings)
            std::cout << "  " << f << "\n";
        std::cerr << "elapsed " << seconds << " s\n";
    }
    return report.clean() ? exit_ok : exit_violation;
}

int cmd_attest_demo(const Common& c, const std::string& tamper_name)
{
    const auto tamper = parma::attest::tamper_from_name(tamper_name);
    if (!tamper)
        throw InputError("unknown tamper mode " + tamper_name);
    const auto result = parma::attest::run_workflow(*tamper, c.seed);
    const bool ok = result.as_expected(*tamper);
    if (c.json_out) {
        json j{{"tamper", tamper_name},
               {"checks",
                {{"chain", result.checks.chain},
                 {"signature", result.checks.signature},
                 {"measurement", result.checks.measurement},
                 {"host_data", result.checks.host_data},
                 {"report_data", result.checks.report_data}}},
               {"rejection", result.rejection ? json(parma::attest::rejection_name(*result.rejection)) : json()},
               {"token_issued", result.token_issued},
               {"key_released", result.key_released},
               {"key_unwrapped", result.key_unwrapped},
               {"as_expected", ok}};
        std::cout << j.dump(2) << "\n";
    } else {
        for (const auto& line : result.log)
            std::cout << line << "\n";
        std::cout << (ok ? "outcome matches the tamper label" : "UNEXPECTED outcome") << "\n";
    }
    return ok ? exit_ok : exit_violation;
}

std::uint64_t seed_from_env()
{
    if (const char* s = std::getenv("PARMA_SIM_SEED")) {
        try {
            return std::stoull(s);
        } catch (const std::exception&) {
            throw InputError("PARMA_SIM_SEED must be an unsigned integer");
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"parma-sim: execution policy enforcement simulator"};
    app.require_subcommand(1);
    Common common;
    std::optional<std::uint64_t> seed;
    auto add_common = [&](CLI::App* sub) {
        sub->add_flag("--json", common.json_out, "Machine-readable output");
        sub->add_option("--seed", seed, "RNG seed (falls back to PARMA_SIM_SEED)");
    };

    fs::path data_path, sidecar_path;
    std::string salt_hex;
    auto* hash_layer = app.add_subcommand("hash-layer", "Build a verity tree and print its root hash");
    hash_layer->add_option("data", data_path, "Layer image")->required();
    hash_layer->add_option("--salt", salt_hex, "32-byte salt as hex (default all zero)");
    hash_layer->add_option("--sidecar", sidecar_path, "Sidecar output (default <data>.vrt)");
    add_common(hash_layer);

    fs::path policy_path;
    auto* measure = app.add_subcommand("measure", "Print the policy measurement and host data");
    measure->add_option("policy", policy_path, "Policy document")->required();
    add_common(measure);

    fs::path spec_path, out_path;
    auto* gen_policy = app.add_subcommand("gen-policy", "Turn a container spec into a policy");
    gen_policy->add_option("spec", spec_path, "Container spec JSON")->required();
    gen_policy->add_option("-o,--output", out_path, "Output .polj (default stdout)");
    add_common(gen_policy);

    std::string listen = "127.0.0.1:7000", attest_listen, host_data_hex;
    double duration = 0;
    auto* serve = app.add_subcommand("serve-guest", "Host the guest agent endpoint over TCP");
    serve->add_option("--policy", policy_path, "Policy document")->required();
    serve->add_option("--listen", listen, "host:port for the guest endpoint");
    serve->add_option("--host-data", host_data_hex, "Launch host data (default: policy measurement)");
    serve->add_option("--attest-listen", attest_listen, "host:port for the verifier and key release service");
    serve->add_option("--duration", duration, "Exit after this many seconds (0 = until signalled)");
    add_common(serve);

    std::vector<fs::path> scenario_inputs;
    bool tcp = false;
    fs::path coverage_path;
    auto* run = app.add_subcommand("run-scenario", "Run adversary scenarios against a fresh guest");
    run->add_option("inputs", scenario_inputs, "Scenario files or directories")->required();
    run->add_flag("--tcp", tcp, "Drive the guest over TCP instead of in-process");
    run->add_option("--coverage", coverage_path, "Coverage manifest to check");
    add_common(run);

    std::size_t traces = 1000, steps = 50, policies = 20;
    auto* fuzz = app.add_subcommand("fuzz", "Random traces with safety and atomicity checks");
    fuzz->add_option("--traces", traces, "Number of traces");
    fuzz->add_option("--steps", steps, "Steps per trace");
    fuzz->add_option("--policies", policies, "Generated policies to spread traces over");
    add_common(fuzz);

    std::string tamper = "none";
    auto* demo = app.add_subcommand("attest-demo", "Launch, attest and release a key in-process");
    demo->add_option("--tamper", tamper, "none|page|host_data|report_data|signature|chain|policy");
    add_common(demo);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_input;
    }

    try {
        common.seed = seed ? *seed : seed_from_env();
        if (*hash_layer)
            return cmd_hash_layer(common, data_path, salt_hex, sidecar_path);
        if (*measure)
            return cmd_measure(common, policy_path);
        if (*gen_policy)
            return cmd_gen_policy(common, spec_path, out_path);
        if (*serve)
            return cmd_serve_guest(common, policy_path, listen, host_data_hex, attest_listen, duration);
        if (*run)
            return cmd_run_scenario(common, scenario_inputs, tcp, coverage_path);
        if (*fuzz)
            return cmd_fuzz(common, traces, steps, policies);
        if (*demo)
            return cmd_attest_demo(common, tamper);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_input;
    } catch (const parma::bridge::TransportError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_input;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_input;
    }
    return exit_input;
}
