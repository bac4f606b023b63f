// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "parma/bytes.hpp"
#include "parma/regex.hpp"

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace parma::policy {

constexpr std::uint32_t current_version = 1;

class PolicyError : public std::runtime_error {
public:
    enum class Kind { syntax, semantic };

    PolicyError(Kind kind, const std::string& message, std::optional<std::size_t> position = {})
        : std::runtime_error(message), kind_(kind), position_(position)
    {}

    Kind kind() const noexcept { return kind_; }
    // Byte offset into the document for syntax errors.
    std::optional<std::size_t> position() const noexcept { return position_; }

private:
    Kind kind_;
    std::optional<std::size_t> position_;
};

/// Verity root hash of one read-only layer.
struct LayerDigest {
    Digest32 bytes{};

    static LayerDigest from_hex(std::string_view hex);
    std::string hex() const { return to_hex(bytes); }

    auto operator<=>(const LayerDigest&) const = default;
};

enum class MatchStrategy { literal, regex };

/// A literal or anchored-regex string pattern.
class Matcher {
public:
    Matcher() = default;
    // Throws PolicyError on an invalid regex.
    Matcher(std::string pattern, MatchStrategy strategy);

    bool matches(std::string_view value) const;

    const std::string& pattern() const noexcept { return pattern_; }
    MatchStrategy strategy() const noexcept { return strategy_; }

    bool operator==(const Matcher& other) const
    {
        return pattern_ == other.pattern_ && strategy_ == other.strategy_;
    }

private:
    std::string pattern_;
    MatchStrategy strategy_ = MatchStrategy::literal;
    std::shared_ptr<const regex::Pattern> compiled_;
};

// Literal env rules must contain exactly one '='.
using EnvRule = Matcher;

struct MountRule {
    Matcher source;
    std::string destination;
    std::string type;
    std::vector<std::string> options; // kept sorted

    bool operator==(const MountRule&) const = default;
};

struct ProcessRule {
    std::vector<std::string> command;
    std::vector<EnvRule> env_rules;
    std::string working_dir = "/";

    bool operator==(const ProcessRule&) const = default;
};

struct ContainerTemplate {
    std::string id;
    std::vector<LayerDigest> layers; // bottom layer first
    std::vector<std::string> command;
    std::vector<EnvRule> env_rules;
    std::string working_dir = "/";
    std::vector<MountRule> mounts;
    std::vector<ProcessRule> exec_processes;
    std::vector<int> signals;
    bool allow_stdio_access = false;

    bool operator==(const ContainerTemplate&) const = default;
};

struct PolicyFlags {
    bool allow_properties_access = false;
    bool allow_dump_stacks = false;
    bool allow_runtime_logging = false;
    bool allow_container_logging = false;
    bool allow_unencrypted_scratch = false;
    std::vector<Matcher> allow_host_device_mounts; // regex patterns over target paths

    bool operator==(const PolicyFlags&) const = default;
};

struct ExecutionPolicy {
    std::uint32_t version = current_version;
    std::vector<ContainerTemplate> containers;
    std::vector<ProcessRule> external_processes;
    PolicyFlags flags;

    const ContainerTemplate* find_template(std::string_view id) const;

    bool operator==(const ExecutionPolicy&) const = default;
};

struct PolicyMeasurement {
    Digest64 digest{};

    // The 256-bit value placed in the report's host-data field.
    Digest32 host_data() const;
    std::string hex() const { return to_hex(digest); }

    bool operator==(const PolicyMeasurement&) const = default;
};

// Env entries and process rules share this matcher: every variable must
// full-match at least one rule.
bool env_allowed(const std::vector<EnvRule>& rules, const std::vector<std::string>& env);

bool mount_allowed(const MountRule& rule, std::string_view source, std::string_view destination,
                   std::string_view type, std::vector<std::string> options);

ExecutionPolicy parse_policy(std::string_view text);

// Human-oriented rendering; parse_policy(render_policy(p)) == p.
std::string render_policy(const ExecutionPolicy& policy, int indent = 2);

// Sorted keys, no whitespace, lowercase hex, defaults materialized.
Bytes canonicalize(const ExecutionPolicy& policy);

PolicyMeasurement measure_policy(const ExecutionPolicy& policy);

// Validates invariants of a programmatically built policy; throws PolicyError.
void validate(const ExecutionPolicy& policy);

} // namespace parma::policy
