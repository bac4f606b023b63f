// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "parma/attestation.hpp"

#include <optional>
#include <string>
#include <vector>

namespace parma::attest {

/// Single-field tampering applied to an otherwise honest launch.
enum class Tamper { none, page, host_data, report_data, signature, chain, policy };

std::string_view tamper_name(Tamper t);
std::optional<Tamper> tamper_from_name(std::string_view name);

// The rejection each tampering must produce; nullopt for Tamper::none.
std::optional<Rejection> expected_rejection(Tamper t);

struct WorkflowResult {
    CheckResults checks;
    std::optional<Rejection> rejection;
    bool token_issued = false;
    std::optional<ReleaseDenial> release_denial;
    bool key_released = false;
    bool key_unwrapped = false; // unwrapped secret equals the registered one
    std::vector<std::string> log;

    // Untampered: key unwrapped. Tampered: exactly the labeled check failed
    // and nothing was released.
    bool as_expected(Tamper t) const;
};

/// Launch, report, verify, and release in one process. Deterministic in
/// `seed` apart from the guest's RSA wrapping key and the channel key.
WorkflowResult run_workflow(Tamper tamper, std::uint64_t seed);

} // namespace parma::attest
