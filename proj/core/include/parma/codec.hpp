// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "parma/engine.hpp"

#include <nlohmann/json.hpp>

namespace parma::engine {

// Payload objects carried in bridge messages. Decoding never throws: any
// schema violation yields MalformedParams.
nlohmann::json params_to_json(const EnforcementRequest& request);
EnforcementRequest request_from_json(Action action, const nlohmann::json& payload);

nlohmann::json decision_to_json(const EnforcementDecision& decision);
nlohmann::json store_to_json(const MetadataStore& store);

} // namespace parma::engine
