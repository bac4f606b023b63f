// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "parma/bytes.hpp"
#include "parma/crypto.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace parma::attest {

constexpr std::size_t page_size = 4096;
constexpr std::size_t signature_field_size = 512;
constexpr std::uint32_t report_version = 1;

class LaunchError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class ChannelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using ChipId = ByteArray<32>;
using SignatureField = ByteArray<signature_field_size>;

// Serialized layout, little-endian, no padding between fields:
//   version u32 | tcb_version u64 | chip_id 32 | measurement 48 |
//   host_data 32 | report_data 64 | signature 512 (zero padded)
struct AttestationReport {
    static constexpr std::size_t signed_size = 4 + 8 + 32 + 48 + 32 + 64;
    static constexpr std::size_t serialized_size = signed_size + signature_field_size;

    std::uint32_t version = report_version;
    std::uint64_t tcb_version = 0;
    ChipId chip_id{};
    Digest48 measurement{};
    Digest32 host_data{};
    Digest64 report_data{};
    SignatureField signature{};

    Bytes signed_bytes() const;
    Bytes serialize() const;
    static AttestationReport parse(ByteView bytes);

    bool operator==(const AttestationReport&) const = default;
};

enum class CertKind : std::uint32_t { vendor_root = 0, vcek = 1 };

// kind u32 | tcb_version u64 | chip_id 32 | subject_key 32 | signature 512
struct Certificate {
    static constexpr std::size_t signed_size = 4 + 8 + 32 + 32;
    static constexpr std::size_t serialized_size = signed_size + signature_field_size;

    CertKind kind = CertKind::vendor_root;
    std::uint64_t tcb_version = 0;
    ChipId chip_id{};
    crypto::Ed25519PublicKey subject_key{};
    SignatureField signature{};

    Bytes signed_bytes() const;
    Bytes serialize() const;
    static Certificate parse(ByteView bytes);

    bool operator==(const Certificate&) const = default;
};

/// Vendor root (self-signed) followed by the VCEK endorsement.
struct CertChain {
    Certificate root;
    Certificate vcek;

    Bytes serialize() const;
    static CertChain parse(ByteView bytes);
};

/// Stand-in for the vendor certificate authority.
class MockVendor {
public:
    static MockVendor from_seed(const Digest32& seed);

    crypto::Ed25519PublicKey root_public_key() const { return root_.public_key(); }
    Certificate root_certificate() const;
    Certificate endorse(const ChipId& chip_id, std::uint64_t tcb_version,
                        const crypto::Ed25519PublicKey& vcek) const;

private:
    explicit MockVendor(crypto::Ed25519Key root) : root_(std::move(root)) {}
    crypto::Ed25519Key root_;
};

// Extract-and-expand over the chip secret and the TCB version.
crypto::Ed25519Key derive_vcek(const Digest32& chip_secret, std::uint64_t tcb_version);
ChipId derive_chip_id(const Digest32& chip_secret);

/// Authenticated report request sent by the guest over the PSP channel.
struct ReportRequest {
    std::uint64_t sequence = 0;
    Bytes sealed; // AES-256-GCM(report_data) with the tag appended
};

/// Guest side of the secure channel established at launch.
class GuestChannel {
public:
    explicit GuestChannel(const Digest32& key) : key_(key) {}

    ReportRequest seal_request(const Digest64& report_data);

private:
    Digest32 key_;
    std::uint64_t next_sequence_ = 1;
};

/// Mock platform security processor: launch digest, host data, report signing.
class MockPsp {
public:
    MockPsp(const Digest32& chip_secret, std::uint64_t tcb_version, const MockVendor& vendor);

    // Extends the launch digest with one guest page mapped at `gpa`.
    void launch_update(ByteView page, std::uint64_t gpa);
    Digest48 launch_finalize(const Digest32& host_data);

    bool finalized() const { return measurement_.has_value(); }
    const Digest32& guest_channel_key() const { return channel_key_; }
    const ChipId& chip_id() const { return chip_id_; }
    std::uint64_t tcb_version() const { return tcb_version_; }
    CertChain cert_chain() const { return chain_; }

    // Throws ChannelError for requests not sealed with the channel key and
    // LaunchError before finalization.
    AttestationReport issue_report(const ReportRequest& request);

private:
    crypto::Ed25519Key vcek_;
    ChipId chip_id_{};
    std::uint64_t tcb_version_;
    CertChain chain_;
    Digest32 channel_key_{};
    Digest48 context_{};
    std::optional<Digest48> measurement_;
    Digest32 host_data_{};
    std::uint64_t last_sequence_ = 0;
};

// Reference launch digest: state_0 = 0^48,
// state_{n+1} = SHA-384(state_n || page || LE64(gpa)), measurement = SHA-384(state_n).
Digest48 launch_digest_step(const Digest48& state, ByteView page, std::uint64_t gpa);
Digest48 launch_digest_finish(const Digest48& state);

enum class Rejection {
    malformed,
    bad_chain,
    bad_signature,
    measurement_mismatch,
    host_data_mismatch,
    report_data_mismatch,
};

std::string_view rejection_name(Rejection r);

struct ExpectedClaims {
    std::vector<Digest48> measurements; // any one may match
    Digest32 host_data{};
    Bytes runtime_claim; // report_data must equal SHA-512 of this
    std::optional<Digest64> policy_digest; // full measurement; prefix must equal host_data
};

/// Outcome of each verification check, evaluated independently.
struct CheckResults {
    bool chain = false;
    bool signature = false;
    bool measurement = false;
    bool host_data = false;
    bool report_data = false;

    // First failing check in evaluation order, if any.
    std::optional<Rejection> first_failure() const;
};

CheckResults check_report(const AttestationReport& report, const CertChain& chain,
                          const crypto::Ed25519PublicKey& vendor_root,
                          const ExpectedClaims& expected);

struct TokenClaims {
    std::string measurement;   // hex
    std::string host_data;     // hex
    std::string policy_digest; // hex, empty when not presented
    std::string report_data;   // hex
    std::uint64_t tcb_version = 0;

    bool operator==(const TokenClaims&) const = default;
};

struct AttestationToken {
    TokenClaims claims;
    std::string issuer;
    crypto::Ed25519Signature signature{};

    Bytes signed_bytes() const;
    nlohmann::json to_json() const;
    static AttestationToken from_json(const nlohmann::json& j); // throws FormatError
};

bool verify_token(const AttestationToken& token, const crypto::Ed25519PublicKey& service_key);

struct VerifyOutcome {
    std::optional<AttestationToken> token;
    std::optional<Rejection> rejection;
    CheckResults checks;
};

/// Attestation verifier issuing signed tokens for reports that pass every check.
class AttestationService {
public:
    AttestationService(crypto::Ed25519Key signing_key, std::string issuer,
                       const crypto::Ed25519PublicKey& vendor_root);

    VerifyOutcome verify_report(const AttestationReport& report, const CertChain& chain,
                                const ExpectedClaims& expected) const;

    crypto::Ed25519PublicKey public_key() const { return key_.public_key(); }
    const std::string& issuer() const { return issuer_; }

private:
    crypto::Ed25519Key key_;
    std::string issuer_;
    crypto::Ed25519PublicKey vendor_root_;
};

struct KeyReleasePolicy {
    Digest32 expected_host_data{};
    std::set<Digest48> allowed_measurements; // non-empty
};

enum class ReleaseDenial { unknown_key, invalid_token, policy_mismatch, wrapping_key_mismatch };

std::string_view denial_name(ReleaseDenial d);

struct ReleaseOutcome {
    std::optional<Bytes> wrapped_key; // RSA-OAEP under the presented wrapping key
    std::optional<ReleaseDenial> denial;
};

/// Key management service gating secrets on token claims.
class KeyReleaseService {
public:
    explicit KeyReleaseService(const crypto::Ed25519PublicKey& attestation_service_key)
        : service_key_(attestation_service_key)
    {}

    // Throws std::invalid_argument for an empty measurement set.
    void register_key(const std::string& key_id, Bytes secret, KeyReleasePolicy policy);

    ReleaseOutcome release_key(const std::string& key_id, const AttestationToken& token,
                               ByteView wrapping_public_der);

private:
    struct Entry {
        Bytes secret;
        KeyReleasePolicy policy;
    };

    crypto::Ed25519PublicKey service_key_;
    std::mutex mutex_;
    std::map<std::string, Entry> keys_;
};

} // namespace parma::attest
