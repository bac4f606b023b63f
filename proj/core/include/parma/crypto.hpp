// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "parma/bytes.hpp"

#include <initializer_list>
#include <memory>
#include <optional>

struct evp_pkey_st;

namespace parma::crypto {

class CryptoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Digest32 sha256(std::initializer_list<ByteView> parts);
Digest48 sha384(std::initializer_list<ByteView> parts);
Digest64 sha512(std::initializer_list<ByteView> parts);

inline Digest32 sha256(ByteView data) { return sha256({data}); }
inline Digest48 sha384(ByteView data) { return sha384({data}); }
inline Digest64 sha512(ByteView data) { return sha512({data}); }

Digest32 hmac_sha256(ByteView key, ByteView message);

// RFC 5869 extract-and-expand.
Bytes hkdf_sha256(ByteView ikm, ByteView salt, ByteView info, std::size_t length);

void random_bytes(std::span<std::uint8_t> out);

template <std::size_t N>
ByteArray<N> random_array()
{
    ByteArray<N> out{};
    random_bytes(out);
    return out;
}

constexpr std::size_t gcm_nonce_size = 12;
constexpr std::size_t gcm_tag_size = 16;

// Returns ciphertext with the 16-byte tag appended.
Bytes aes256gcm_seal(const Digest32& key, ByteView nonce, ByteView aad, ByteView plaintext);

// nullopt when authentication fails.
std::optional<Bytes> aes256gcm_open(const Digest32& key, ByteView nonce, ByteView aad,
                                    ByteView sealed);

struct PkeyDeleter {
    void operator()(evp_pkey_st* key) const noexcept;
};
using PkeyPtr = std::unique_ptr<evp_pkey_st, PkeyDeleter>;

using Ed25519PublicKey = ByteArray<32>;
using Ed25519Signature = ByteArray<64>;

/// Ed25519 signing key. Signatures are deterministic for a given seed and message.
class Ed25519Key {
public:
    static Ed25519Key from_seed(const Digest32& seed);
    static Ed25519Key generate();

    Ed25519PublicKey public_key() const;
    Ed25519Signature sign(ByteView message) const;

private:
    explicit Ed25519Key(PkeyPtr key) : key_(std::move(key)) {}
    std::shared_ptr<evp_pkey_st> key_;
};

bool ed25519_verify(const Ed25519PublicKey& public_key, ByteView message,
                    ByteView signature);

/// RSA key pair used for wrapping released secrets (OAEP, SHA-256).
class RsaKeyPair {
public:
    static RsaKeyPair generate(unsigned bits = 2048);

    // SubjectPublicKeyInfo DER.
    Bytes public_der() const;
    std::optional<Bytes> decrypt(ByteView ciphertext) const;

private:
    explicit RsaKeyPair(PkeyPtr key) : key_(std::move(key)) {}
    std::shared_ptr<evp_pkey_st> key_;
};

// Throws CryptoError when public_der does not parse as an RSA public key.
Bytes rsa_oaep_encrypt(ByteView public_der, ByteView plaintext);

} // namespace parma::crypto
