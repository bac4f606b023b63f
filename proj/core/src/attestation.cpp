// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/attestation.hpp"

#include <algorithm>

namespace parma::attest {

namespace {

constexpr std::string_view vcek_kdf_salt = "parma-sim/vcek";
constexpr std::string_view chip_id_label = "parma-sim/chip-id";
constexpr std::string_view channel_kdf_label = "parma-sim/guest-channel";
constexpr std::string_view request_aad = "parma-sim/report-request";

class Reader {
public:
    explicit Reader(ByteView in) : in_(in) {}

    template <std::size_t N>
    ByteArray<N> array()
    {
        if (N > in_.size() - pos_)
            throw FormatError("truncated structure");
        ByteArray<N> out{};
        std::copy_n(in_.begin() + static_cast<std::ptrdiff_t>(pos_), N, out.begin());
        pos_ += N;
        return out;
    }
    std::uint32_t u32() { return read_le32(array<4>(), 0); }
    std::uint64_t u64() { return read_le64(array<8>(), 0); }

private:
    ByteView in_;
    std::size_t pos_ = 0;
};

SignatureField pad_signature(const crypto::Ed25519Signature& sig)
{
    SignatureField out{};
    std::copy(sig.begin(), sig.end(), out.begin());
    return out;
}

// The Ed25519 signature occupies the first 64 bytes; the rest must be zero.
bool signature_valid(const crypto::Ed25519PublicKey& key, ByteView message,
                     const SignatureField& field)
{
    if (std::any_of(field.begin() + 64, field.end(), [](std::uint8_t b) { return b != 0; }))
        return false;
    return crypto::ed25519_verify(key, message, ByteView(field).first(64));
}

Bytes request_nonce(std::uint64_t sequence)
{
    Bytes nonce = le64(sequence);
    nonce.resize(crypto::gcm_nonce_size, 0);
    return nonce;
}

} // namespace

Bytes AttestationReport::signed_bytes() const
{
    Bytes out;
    out.reserve(serialized_size);
    append_le32(out, version);
    append_le64(out, tcb_version);
    append(out, chip_id);
    append(out, measurement);
    append(out, host_data);
    append(out, report_data);
    return out;
}

Bytes AttestationReport::serialize() const
{
    Bytes out = signed_bytes();
    append(out, signature);
    return out;
}

AttestationReport AttestationReport::parse(ByteView bytes)
{
    if (bytes.size() != serialized_size)
        throw FormatError("attestation report must be " + std::to_string(serialized_size) +
                          " bytes");
    Reader in(bytes);
    AttestationReport r;
    r.version = in.u32();
    r.tcb_version = in.u64();
    r.chip_id = in.array<32>();
    r.measurement = in.array<48>();
    r.host_data = in.array<32>();
    r.report_data = in.array<64>();
    r.signature = in.array<signature_field_size>();
    return r;
}

Bytes Certificate::signed_bytes() const
{
    Bytes out;
    append_le32(out, static_cast<std::uint32_t>(kind));
    append_le64(out, tcb_version);
    append(out, chip_id);
    append(out, subject_key);
    return out;
}

Bytes Certificate::serialize() const
{
    Bytes out = signed_bytes();
    append(out, signature);
    return out;
}

Certificate Certificate::parse(ByteView bytes)
{
    if (bytes.size() != serialized_size)
        throw FormatError("certificate must be " + std::to_string(serialized_size) + " bytes");
    Reader in(bytes);
    Certificate c;
    const std::uint32_t kind = in.u32();
    if (kind > 1)
        throw FormatError("unknown certificate kind");
    c.kind = static_cast<CertKind>(kind);
    c.tcb_version = in.u64();
    c.chip_id = in.array<32>();
    c.subject_key = in.array<32>();
    c.signature = in.array<signature_field_size>();
    return c;
}

Bytes CertChain::serialize() const
{
    Bytes out = root.serialize();
    append(out, vcek.serialize());
    return out;
}

CertChain CertChain::parse(ByteView bytes)
{
    if (bytes.size() != 2 * Certificate::serialized_size)
        throw FormatError("certificate chain must hold exactly two certificates");
    return CertChain{Certificate::parse(bytes.first(Certificate::serialized_size)),
                     Certificate::parse(bytes.subspan(Certificate::serialized_size))};
}

MockVendor MockVendor::from_seed(const Digest32& seed)
{
    return MockVendor(crypto::Ed25519Key::from_seed(seed));
}

Certificate MockVendor::root_certificate() const
{
    Certificate c;
    c.kind = CertKind::vendor_root;
    c.subject_key = root_.public_key();
    c.signature = pad_signature(root_.sign(c.signed_bytes()));
    return c;
}

Certificate MockVendor::endorse(const ChipId& chip_id, std::uint64_t tcb_version,
                                const crypto::Ed25519PublicKey& vcek) const
{
    Certificate c;
    c.kind = CertKind::vcek;
    c.tcb_version = tcb_version;
    c.chip_id = chip_id;
    c.subject_key = vcek;
    c.signature = pad_signature(root_.sign(c.signed_bytes()));
    return c;
}

crypto::Ed25519Key derive_vcek(const Digest32& chip_secret, std::uint64_t tcb_version)
{
    const Bytes okm =
        crypto::hkdf_sha256(chip_secret, as_bytes(vcek_kdf_salt), le64(tcb_version), 32);
    Digest32 seed{};
    std::copy(okm.begin(), okm.end(), seed.begin());
    auto key = crypto::Ed25519Key::from_seed(seed);
    secure_wipe(seed);
    return key;
}

ChipId derive_chip_id(const Digest32& chip_secret)
{
    return crypto::hmac_sha256(chip_secret, as_bytes(chip_id_label));
}

ReportRequest GuestChannel::seal_request(const Digest64& report_data)
{
    ReportRequest r;
    r.sequence = next_sequence_++;
    r.sealed = crypto::aes256gcm_seal(key_, request_nonce(r.sequence), as_bytes(request_aad),
                                      report_data);
    return r;
}

Digest48 launch_digest_step(const Digest48& state, ByteView page, std::uint64_t gpa)
{
    return crypto::sha384({state, page, le64(gpa)});
}

Digest48 launch_digest_finish(const Digest48& state)
{
    return crypto::sha384(state);
}

MockPsp::MockPsp(const Digest32& chip_secret, std::uint64_t tcb_version,
                 const MockVendor& vendor)
    : vcek_(derive_vcek(chip_secret, tcb_version)),
      chip_id_(derive_chip_id(chip_secret)),
      tcb_version_(tcb_version),
      chain_{vendor.root_certificate(), vendor.endorse(chip_id_, tcb_version, vcek_.public_key())}
{
    // One channel key per launch, independent of the chip identity.
    const Bytes okm = crypto::hkdf_sha256(crypto::random_array<32>(), chip_secret,
                                          as_bytes(channel_kdf_label), 32);
    std::copy(okm.begin(), okm.end(), channel_key_.begin());
}

void MockPsp::launch_update(ByteView page, std::uint64_t gpa)
{
    if (measurement_)
        throw LaunchError("launch digest already finalized");
    if (page.size() != page_size)
        throw LaunchError("launch pages must be exactly 4096 bytes");
    context_ = launch_digest_step(context_, page, gpa);
}

Digest48 MockPsp::launch_finalize(const Digest32& host_data)
{
    if (measurement_)
        throw LaunchError("launch digest already finalized");
    measurement_ = launch_digest_finish(context_);
    host_data_ = host_data;
    return *measurement_;
}

AttestationReport MockPsp::issue_report(const ReportRequest& request)
{
    if (!measurement_)
        throw LaunchError("reports are unavailable before launch finalization");
    if (request.sequence <= last_sequence_)
        throw ChannelError("stale report request sequence");
    auto plain = crypto::aes256gcm_open(channel_key_, request_nonce(request.sequence),
                                        as_bytes(request_aad), request.sealed);
    if (!plain || plain->size() != 64)
        throw ChannelError("report request failed channel authentication");
    last_sequence_ = request.sequence;

    AttestationReport r;
    r.tcb_version = tcb_version_;
    r.chip_id = chip_id_;
    r.measurement = *measurement_;
    r.host_data = host_data_;
    std::copy(plain->begin(), plain->end(), r.report_data.begin());
    r.signature = pad_signature(vcek_.sign(r.signed_bytes()));
    return r;
}

std::string_view rejection_name(Rejection r)
{
    switch (r) {
    case Rejection::malformed: return "malformed";
    case Rejection::bad_chain: return "bad_chain";
    case Rejection::bad_signature: return "bad_signature";
    case Rejection::measurement_mismatch: return "measurement_mismatch";
    case Rejection::host_data_mismatch: return "host_data_mismatch";
    case Rejection::report_data_mismatch: return "report_data_mismatch";
    }
    return "unknown";
}

std::optional<Rejection> CheckResults::first_failure() const
{
    if (!chain)
        return Rejection::bad_chain;
    if (!signature)
        return Rejection::bad_signature;
    if (!measurement)
        return Rejection::measurement_mismatch;
    if (!host_data)
        return Rejection::host_data_mismatch;
    if (!report_data)
        return Rejection::report_data_mismatch;
    return std::nullopt;
}

CheckResults check_report(const AttestationReport& report, const CertChain& chain,
                          const crypto::Ed25519PublicKey& vendor_root,
                          const ExpectedClaims& expected)
{
    CheckResults c;
    const auto& root = chain.root;
    const auto& vcek = chain.vcek;
    c.chain = root.kind == CertKind::vendor_root && root.subject_key == vendor_root &&
              signature_valid(vendor_root, root.signed_bytes(), root.signature) &&
              vcek.kind == CertKind::vcek &&
              signature_valid(vendor_root, vcek.signed_bytes(), vcek.signature) &&
              vcek.chip_id == report.chip_id && vcek.tcb_version == report.tcb_version;

    // Evaluated against the key the chain presents, so a broken chain and a
    // broken report signature are reported separately.
    c.signature = report.version == report_version &&
                  signature_valid(vcek.subject_key, report.signed_bytes(), report.signature);

    c.measurement = std::find(expected.measurements.begin(), expected.measurements.end(),
                              report.measurement) != expected.measurements.end();

    c.host_data = report.host_data == expected.host_data;
    if (expected.policy_digest) {
        c.host_data = c.host_data && std::equal(report.host_data.begin(), report.host_data.end(),
                                                expected.policy_digest->begin());
    }

    c.report_data = report.report_data == crypto::sha512(expected.runtime_claim);
    return c;
}

Bytes AttestationToken::signed_bytes() const
{
    nlohmann::json body = to_json();
    body.erase("signature");
    const std::string text = body.dump();
    return {text.begin(), text.end()};
}

nlohmann::json AttestationToken::to_json() const
{
    return {{"claims",
             {{"measurement", claims.measurement},
              {"host_data", claims.host_data},
              {"policy_digest", claims.policy_digest},
              {"report_data", claims.report_data},
              {"tcb_version", claims.tcb_version}}},
            {"issuer", issuer},
            {"signature", to_hex(signature)}};
}

AttestationToken AttestationToken::from_json(const nlohmann::json& j)
{
    try {
        AttestationToken t;
        const auto& c = j.at("claims");
        t.claims.measurement = c.at("measurement").get<std::string>();
        t.claims.host_data = c.at("host_data").get<std::string>();
        t.claims.policy_digest = c.at("policy_digest").get<std::string>();
        t.claims.report_data = c.at("report_data").get<std::string>();
        t.claims.tcb_version = c.at("tcb_version").get<std::uint64_t>();
        t.issuer = j.at("issuer").get<std::string>();
        t.signature = array_from_hex<64>(j.at("signature").get<std::string>());
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed token: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("malformed token: ") + e.what());
    }
}

bool verify_token(const AttestationToken& token, const crypto::Ed25519PublicKey& service_key)
{
    return crypto::ed25519_verify(service_key, token.signed_bytes(), token.signature);
}

AttestationService::AttestationService(crypto::Ed25519Key signing_key, std::string issuer,
                                       const crypto::Ed25519PublicKey& vendor_root)
    : key_(std::move(signing_key)), issuer_(std::move(issuer)), vendor_root_(vendor_root)
{}

VerifyOutcome AttestationService::verify_report(const AttestationReport& report,
                                                const CertChain& chain,
                                                const ExpectedClaims& expected) const
{
    VerifyOutcome out;
    out.checks = check_report(report, chain, vendor_root_, expected);
    out.rejection = out.checks.first_failure();
    if (out.rejection)
        return out;

    AttestationToken token;
    token.claims.measurement = to_hex(report.measurement);
    token.claims.host_data = to_hex(report.host_data);
    token.claims.policy_digest = expected.policy_digest ? to_hex(*expected.policy_digest) : "";
    token.claims.report_data = to_hex(report.report_data);
    token.claims.tcb_version = report.tcb_version;
    token.issuer = issuer_;
    token.signature = key_.sign(token.signed_bytes());
    out.token = std::move(token);
    return out;
}

std::string_view denial_name(ReleaseDenial d)
{
    switch (d) {
    case ReleaseDenial::unknown_key: return "unknown_key";
    case ReleaseDenial::invalid_token: return "invalid_token";
    case ReleaseDenial::policy_mismatch: return "policy_mismatch";
    case ReleaseDenial::wrapping_key_mismatch: return "wrapping_key_mismatch";
    }
    return "unknown";
}

void KeyReleaseService::register_key(const std::string& key_id, Bytes secret,
                                     KeyReleasePolicy policy)
{
    if (policy.allowed_measurements.empty())
        throw std::invalid_argument("key release policy needs at least one measurement");
    std::lock_guard lock(mutex_);
    keys_[key_id] = Entry{std::move(secret), std::move(policy)};
}

ReleaseOutcome KeyReleaseService::release_key(const std::string& key_id,
                                              const AttestationToken& token,
                                              ByteView wrapping_public_der)
{
    std::lock_guard lock(mutex_);
    auto it = keys_.find(key_id);
    if (it == keys_.end())
        return {std::nullopt, ReleaseDenial::unknown_key};
    if (!verify_token(token, service_key_))
        return {std::nullopt, ReleaseDenial::invalid_token};

    const auto& policy = it->second.policy;
    bool measurement_ok = false;
    for (const auto& m : policy.allowed_measurements)
        measurement_ok = measurement_ok || token.claims.measurement == to_hex(m);
    if (!measurement_ok || token.claims.host_data != to_hex(policy.expected_host_data))
        return {std::nullopt, ReleaseDenial::policy_mismatch};

    if (token.claims.report_data != to_hex(crypto::sha512(wrapping_public_der)))
        return {std::nullopt, ReleaseDenial::wrapping_key_mismatch};

    try {
        return {crypto::rsa_oaep_encrypt(wrapping_public_der, it->second.secret), std::nullopt};
    } catch (const crypto::CryptoError&) {
        return {std::nullopt, ReleaseDenial::wrapping_key_mismatch};
    }
}

} // namespace parma::attest
