// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "parma/engine.hpp"
#include "parma/policy.hpp"

#include <cstddef>
#include <string>

namespace parma::support {

policy::LayerDigest layer(std::string_view name);

// `templates` container templates sharing one two-layer stack and differing
// only in their command. An overlay over that stack has every template as a
// candidate, so create_container has to narrow the full set.
policy::ExecutionPolicy wide_policy(std::size_t templates);

// Both layers mounted and one overlay "ov" over them.
engine::MetadataStore wide_store(const policy::ExecutionPolicy& policy);

// create_container matching only the last template.
engine::EnforcementRequest wide_create_request(std::size_t templates);

// Median of `iterations` timed enforce() calls, in microseconds.
double median_enforce_micros(const policy::ExecutionPolicy& policy,
                             const engine::MetadataStore& store,
                             const engine::EnforcementRequest& request, std::size_t iterations);

} // namespace parma::support
