// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/workflow.hpp"

#include "parma/policy.hpp"

#include <array>

namespace parma::attest {

namespace {

constexpr std::array<std::pair<Tamper, std::string_view>, 7> tamper_names = {{
    {Tamper::none, "none"},
    {Tamper::page, "page"},
    {Tamper::host_data, "host_data"},
    {Tamper::report_data, "report_data"},
    {Tamper::signature, "signature"},
    {Tamper::chain, "chain"},
    {Tamper::policy, "policy"},
}};

constexpr std::size_t launch_pages = 4;
constexpr std::uint64_t launch_base_gpa = 0x100000;
constexpr std::uint64_t tcb = 7;

Digest32 derive(std::uint64_t seed, std::string_view label)
{
    return crypto::sha256({le64(seed), as_bytes(label)});
}

Bytes guest_page(std::size_t index)
{
    Bytes page(page_size);
    const auto block = crypto::sha256({as_bytes("parma-sim/guest-image"), le64(index)});
    for (std::size_t i = 0; i < page.size(); ++i)
        page[i] = block[i % block.size()];
    return page;
}

const char* customer_policy = R"({
  "version": 1,
  "containers": [{
    "id": "inference",
    "layers": ["6f1ed002ab5595859014ebf0951522d9ac0e4b0f4a0bd0e5ad9b9d2a6f3c7e01"],
    "command": ["/app/server", "--port", "8080"],
    "env_rules": [{"pattern": "PORT=8080", "strategy": "literal"}],
    "working_dir": "/app"
  }]
})";

policy::ExecutionPolicy permissive_variant(policy::ExecutionPolicy p)
{
    p.flags.allow_dump_stacks = true;
    p.containers.front().exec_processes.push_back(policy::ProcessRule{{"/bin/sh"}, {}, "/app"});
    return p;
}

std::string yes_no(bool b)
{
    return b ? "pass" : "FAIL";
}

} // namespace

std::string_view tamper_name(Tamper t)
{
    for (const auto& [k, v] : tamper_names)
        if (k == t)
            return v;
    return "unknown";
}

std::optional<Tamper> tamper_from_name(std::string_view name)
{
    for (const auto& [k, v] : tamper_names)
        if (v == name)
            return k;
    return std::nullopt;
}

std::optional<Rejection> expected_rejection(Tamper t)
{
    switch (t) {
    case Tamper::none: return std::nullopt;
    case Tamper::page: return Rejection::measurement_mismatch;
    case Tamper::host_data: return Rejection::host_data_mismatch;
    case Tamper::report_data: return Rejection::report_data_mismatch;
    case Tamper::signature: return Rejection::bad_signature;
    case Tamper::chain: return Rejection::bad_chain;
    case Tamper::policy: return Rejection::host_data_mismatch;
    }
    return std::nullopt;
}

bool WorkflowResult::as_expected(Tamper t) const
{
    const auto want = expected_rejection(t);
    if (!want)
        return !rejection && token_issued && key_released && key_unwrapped;
    const bool only_labeled =
        checks.chain == (want != Rejection::bad_chain) &&
        checks.signature == (want != Rejection::bad_signature) &&
        checks.measurement == (want != Rejection::measurement_mismatch) &&
        checks.host_data == (want != Rejection::host_data_mismatch) &&
        checks.report_data == (want != Rejection::report_data_mismatch);
    return only_labeled && rejection == want && !token_issued && !key_released;
}

WorkflowResult run_workflow(Tamper tamper, std::uint64_t seed)
{
    WorkflowResult out;
    const auto vendor = MockVendor::from_seed(derive(seed, "vendor"));
    const auto chip_secret = derive(seed, "chip");

    // Customer side: the policy and the expected launch measurement.
    const auto policy = policy::parse_policy(customer_policy);
    const auto measurement = policy::measure_policy(policy);
    Digest48 golden{};
    for (std::size_t i = 0; i < launch_pages; ++i)
        golden = launch_digest_step(golden, guest_page(i), launch_base_gpa + i * page_size);
    golden = launch_digest_finish(golden);
    out.log.push_back("policy measurement " + measurement.hex());

    // Host side launch, possibly dishonest.
    MockPsp psp(chip_secret, tcb, vendor);
    for (std::size_t i = 0; i < launch_pages; ++i) {
        Bytes page = guest_page(i);
        if (tamper == Tamper::page && i == 2)
            page[100] ^= 0x01;
        psp.launch_update(page, launch_base_gpa + i * page_size);
    }
    Digest32 host_data = measurement.host_data();
    if (tamper == Tamper::host_data)
        host_data[0] ^= 0x01;
    if (tamper == Tamper::policy)
        host_data = policy::measure_policy(permissive_variant(policy)).host_data();
    psp.launch_finalize(host_data);

    // Guest side: bind a fresh wrapping key into the report.
    const auto wrapping = crypto::RsaKeyPair::generate();
    const Bytes wrapping_der = wrapping.public_der();
    Digest64 report_data = crypto::sha512(wrapping_der);
    if (tamper == Tamper::report_data)
        report_data = crypto::sha512(crypto::RsaKeyPair::generate().public_der());
    GuestChannel channel(psp.guest_channel_key());
    auto report = psp.issue_report(channel.seal_request(report_data));
    auto chain = psp.cert_chain();
    if (tamper == Tamper::signature)
        report.signature[5] ^= 0x01;
    if (tamper == Tamper::chain)
        chain.vcek.signature[5] ^= 0x01;

    // Round-trip through the wire format the verifier consumes.
    report = AttestationReport::parse(report.serialize());
    chain = CertChain::parse(chain.serialize());

    const AttestationService verifier(crypto::Ed25519Key::from_seed(derive(seed, "verifier")),
                                      "parma-sim-verifier", vendor.root_public_key());
    ExpectedClaims expected;
    expected.measurements = {golden};
    expected.host_data = measurement.host_data();
    expected.runtime_claim = wrapping_der;
    expected.policy_digest = measurement.digest;
    const auto verdict = verifier.verify_report(report, chain, expected);
    out.checks = verdict.checks;
    out.rejection = verdict.rejection;
    out.token_issued = verdict.token.has_value();
    out.log.push_back("check chain        " + yes_no(out.checks.chain));
    out.log.push_back("check signature    " + yes_no(out.checks.signature));
    out.log.push_back("check measurement  " + yes_no(out.checks.measurement));
    out.log.push_back("check host_data    " + yes_no(out.checks.host_data));
    out.log.push_back("check report_data  " + yes_no(out.checks.report_data));
    if (!verdict.token) {
        out.log.push_back("verifier rejected report: " + std::string(rejection_name(*verdict.rejection)));
        return out;
    }
    out.log.push_back("token issued by " + verdict.token->issuer);

    KeyReleaseService kms(verifier.public_key());
    const Bytes secret = [&] {
        const auto d = derive(seed, "model-key");
        return Bytes(d.begin(), d.end());
    }();
    kms.register_key("model-key", secret, KeyReleasePolicy{measurement.host_data(), {golden}});
    const auto release = kms.release_key("model-key", *verdict.token, wrapping_der);
    out.release_denial = release.denial;
    out.key_released = release.wrapped_key.has_value();
    if (!release.wrapped_key) {
        out.log.push_back("key release denied: " + std::string(denial_name(*release.denial)));
        return out;
    }
    const auto unwrapped = wrapping.decrypt(*release.wrapped_key);
    out.key_unwrapped = unwrapped && *unwrapped == secret;
    out.log.push_back(out.key_unwrapped ? "key released and unwrapped" : "key unwrap FAILED");
    return out;
}

} // namespace parma::attest
