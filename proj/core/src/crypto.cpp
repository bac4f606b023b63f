// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/kdf.h>
#include <openssl/rand.h>
#include <openssl/rsa.h>
#include <openssl/x509.h>

namespace parma::crypto {

namespace {

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const noexcept { EVP_MD_CTX_free(ctx); }
};
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

struct CipherCtxDeleter {
    void operator()(EVP_CIPHER_CTX* ctx) const noexcept { EVP_CIPHER_CTX_free(ctx); }
};
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

struct PkeyCtxDeleter {
    void operator()(EVP_PKEY_CTX* ctx) const noexcept { EVP_PKEY_CTX_free(ctx); }
};
using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter>;

void check(int rc, const char* what)
{
    if (rc <= 0)
        throw CryptoError(what);
}

template <std::size_t N>
ByteArray<N> digest(const EVP_MD* md, std::initializer_list<ByteView> parts)
{
    MdCtxPtr ctx(EVP_MD_CTX_new());
    if (!ctx)
        throw CryptoError("EVP_MD_CTX_new");
    check(EVP_DigestInit_ex(ctx.get(), md, nullptr), "DigestInit");
    for (auto part : parts)
        check(EVP_DigestUpdate(ctx.get(), part.data(), part.size()), "DigestUpdate");
    ByteArray<N> out{};
    unsigned int len = 0;
    check(EVP_DigestFinal_ex(ctx.get(), out.data(), &len), "DigestFinal");
    if (len != N)
        throw CryptoError("unexpected digest length");
    return out;
}

} // namespace

void PkeyDeleter::operator()(evp_pkey_st* key) const noexcept
{
    EVP_PKEY_free(key);
}

Digest32 sha256(std::initializer_list<ByteView> parts)
{
    return digest<32>(EVP_sha256(), parts);
}

Digest48 sha384(std::initializer_list<ByteView> parts)
{
    return digest<48>(EVP_sha384(), parts);
}

Digest64 sha512(std::initializer_list<ByteView> parts)
{
    return digest<64>(EVP_sha512(), parts);
}

Digest32 hmac_sha256(ByteView key, ByteView message)
{
    Digest32 out{};
    unsigned int len = 0;
    if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), message.data(),
              message.size(), out.data(), &len) ||
        len != out.size())
        throw CryptoError("HMAC");
    return out;
}

Bytes hkdf_sha256(ByteView ikm, ByteView salt, ByteView info, std::size_t length)
{
    PkeyCtxPtr ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_HKDF, nullptr));
    if (!ctx)
        throw CryptoError("HKDF context");
    check(EVP_PKEY_derive_init(ctx.get()), "HKDF init");
    check(EVP_PKEY_CTX_set_hkdf_md(ctx.get(), EVP_sha256()), "HKDF md");
    check(EVP_PKEY_CTX_set1_hkdf_salt(ctx.get(), salt.data(), static_cast<int>(salt.size())),
          "HKDF salt");
    check(EVP_PKEY_CTX_set1_hkdf_key(ctx.get(), ikm.data(), static_cast<int>(ikm.size())),
          "HKDF key");
    check(EVP_PKEY_CTX_add1_hkdf_info(ctx.get(), info.data(), static_cast<int>(info.size())),
          "HKDF info");
    Bytes out(length);
    std::size_t out_len = length;
    check(EVP_PKEY_derive(ctx.get(), out.data(), &out_len), "HKDF derive");
    return out;
}

void random_bytes(std::span<std::uint8_t> out)
{
    check(RAND_bytes(out.data(), static_cast<int>(out.size())), "RAND_bytes");
}

Bytes aes256gcm_seal(const Digest32& key, ByteView nonce, ByteView aad, ByteView plaintext)
{
    if (nonce.size() != gcm_nonce_size)
        throw CryptoError("GCM nonce must be 12 bytes");
    CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
    check(ctx ? 1 : 0, "EVP_CIPHER_CTX_new");
    check(EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.data(), nonce.data()),
          "EncryptInit");
    int len = 0;
    if (!aad.empty())
        check(EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())),
              "EncryptUpdate aad");
    Bytes out(plaintext.size() + gcm_tag_size);
    if (!plaintext.empty())
        check(EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(),
                                static_cast<int>(plaintext.size())),
              "EncryptUpdate");
    int tail = 0;
    check(EVP_EncryptFinal_ex(ctx.get(), out.data() + plaintext.size(), &tail), "EncryptFinal");
    check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, gcm_tag_size,
                              out.data() + plaintext.size()),
          "GET_TAG");
    return out;
}

std::optional<Bytes> aes256gcm_open(const Digest32& key, ByteView nonce, ByteView aad,
                                    ByteView sealed)
{
    if (nonce.size() != gcm_nonce_size || sealed.size() < gcm_tag_size)
        return std::nullopt;
    const std::size_t ct_len = sealed.size() - gcm_tag_size;
    CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
    check(ctx ? 1 : 0, "EVP_CIPHER_CTX_new");
    check(EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.data(), nonce.data()),
          "DecryptInit");
    int len = 0;
    if (!aad.empty())
        check(EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())),
              "DecryptUpdate aad");
    Bytes out(ct_len);
    if (ct_len > 0)
        check(EVP_DecryptUpdate(ctx.get(), out.data(), &len, sealed.data(),
                                static_cast<int>(ct_len)),
              "DecryptUpdate");
    Bytes tag(sealed.begin() + static_cast<std::ptrdiff_t>(ct_len), sealed.end());
    check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, gcm_tag_size, tag.data()),
          "SET_TAG");
    int tail = 0;
    if (EVP_DecryptFinal_ex(ctx.get(), out.data() + ct_len, &tail) <= 0) {
        secure_wipe(out);
        return std::nullopt;
    }
    return out;
}

Ed25519Key Ed25519Key::from_seed(const Digest32& seed)
{
    PkeyPtr key(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, seed.data(), seed.size()));
    if (!key)
        throw CryptoError("Ed25519 key from seed");
    return Ed25519Key(std::move(key));
}

Ed25519Key Ed25519Key::generate()
{
    auto seed = random_array<32>();
    auto key = from_seed(seed);
    secure_wipe(seed);
    return key;
}

Ed25519PublicKey Ed25519Key::public_key() const
{
    Ed25519PublicKey out{};
    std::size_t len = out.size();
    check(EVP_PKEY_get_raw_public_key(key_.get(), out.data(), &len), "raw public key");
    return out;
}

Ed25519Signature Ed25519Key::sign(ByteView message) const
{
    MdCtxPtr ctx(EVP_MD_CTX_new());
    check(ctx ? 1 : 0, "EVP_MD_CTX_new");
    check(EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key_.get()), "SignInit");
    Ed25519Signature sig{};
    std::size_t len = sig.size();
    check(EVP_DigestSign(ctx.get(), sig.data(), &len, message.data(), message.size()), "Sign");
    return sig;
}

bool ed25519_verify(const Ed25519PublicKey& public_key, ByteView message, ByteView signature)
{
    if (signature.size() != 64)
        return false;
    PkeyPtr key(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, public_key.data(),
                                            public_key.size()));
    if (!key)
        return false;
    MdCtxPtr ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) <= 0)
        return false;
    return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), message.data(),
                            message.size()) == 1;
}

RsaKeyPair RsaKeyPair::generate(unsigned bits)
{
    PkeyCtxPtr ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_RSA, nullptr));
    check(ctx ? 1 : 0, "RSA context");
    check(EVP_PKEY_keygen_init(ctx.get()), "RSA keygen init");
    check(EVP_PKEY_CTX_set_rsa_keygen_bits(ctx.get(), static_cast<int>(bits)), "RSA bits");
    EVP_PKEY* raw = nullptr;
    check(EVP_PKEY_keygen(ctx.get(), &raw), "RSA keygen");
    return RsaKeyPair(PkeyPtr(raw));
}

Bytes RsaKeyPair::public_der() const
{
    const int len = i2d_PUBKEY(key_.get(), nullptr);
    check(len, "i2d_PUBKEY");
    Bytes out(static_cast<std::size_t>(len));
    unsigned char* p = out.data();
    check(i2d_PUBKEY(key_.get(), &p), "i2d_PUBKEY");
    return out;
}

namespace {

void configure_oaep(EVP_PKEY_CTX* ctx)
{
    check(EVP_PKEY_CTX_set_rsa_padding(ctx, RSA_PKCS1_OAEP_PADDING), "OAEP padding");
    check(EVP_PKEY_CTX_set_rsa_oaep_md(ctx, EVP_sha256()), "OAEP md");
    check(EVP_PKEY_CTX_set_rsa_mgf1_md(ctx, EVP_sha256()), "OAEP mgf1");
}

} // namespace

std::optional<Bytes> RsaKeyPair::decrypt(ByteView ciphertext) const
{
    PkeyCtxPtr ctx(EVP_PKEY_CTX_new(key_.get(), nullptr));
    check(ctx ? 1 : 0, "RSA decrypt context");
    check(EVP_PKEY_decrypt_init(ctx.get()), "decrypt init");
    configure_oaep(ctx.get());
    std::size_t len = 0;
    if (EVP_PKEY_decrypt(ctx.get(), nullptr, &len, ciphertext.data(), ciphertext.size()) <= 0)
        return std::nullopt;
    Bytes out(len);
    if (EVP_PKEY_decrypt(ctx.get(), out.data(), &len, ciphertext.data(), ciphertext.size()) <= 0)
        return std::nullopt;
    out.resize(len);
    return out;
}

Bytes rsa_oaep_encrypt(ByteView public_der, ByteView plaintext)
{
    const unsigned char* p = public_der.data();
    PkeyPtr key(d2i_PUBKEY(nullptr, &p, static_cast<long>(public_der.size())));
    if (!key || EVP_PKEY_get_base_id(key.get()) != EVP_PKEY_RSA)
        throw CryptoError("not an RSA public key");
    PkeyCtxPtr ctx(EVP_PKEY_CTX_new(key.get(), nullptr));
    check(ctx ? 1 : 0, "RSA encrypt context");
    check(EVP_PKEY_encrypt_init(ctx.get()), "encrypt init");
    configure_oaep(ctx.get());
    std::size_t len = 0;
    check(EVP_PKEY_encrypt(ctx.get(), nullptr, &len, plaintext.data(), plaintext.size()),
          "encrypt size");
    Bytes out(len);
    check(EVP_PKEY_encrypt(ctx.get(), out.data(), &len, plaintext.data(), plaintext.size()),
          "encrypt");
    out.resize(len);
    return out;
}

} // namespace parma::crypto
