// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/crypto.hpp"

#include <gtest/gtest.h>

namespace {

using namespace parma;

TEST(Bytes, HexRoundTripAcceptsUpperCase)
{
    EXPECT_EQ(to_hex(from_hex("00FFa5")), "00ffa5");
    EXPECT_THROW(from_hex("abc"), std::invalid_argument);
    EXPECT_THROW(from_hex("zz"), std::invalid_argument);
    EXPECT_TRUE(is_lower_hex("0a1b"));
    EXPECT_FALSE(is_lower_hex("0A1B"));
}

TEST(Bytes, Base64MatchesRfc4648Vectors)
{
    EXPECT_EQ(base64_encode(as_bytes("")), "");
    EXPECT_EQ(base64_encode(as_bytes("f")), "Zg==");
    EXPECT_EQ(base64_encode(as_bytes("fo")), "Zm8=");
    EXPECT_EQ(base64_encode(as_bytes("foobar")), "Zm9vYmFy");
    EXPECT_EQ(to_string(base64_decode("Zm9vYg==")), "foob");
    EXPECT_THROW(base64_decode("Zm9vY!=="), std::invalid_argument);
}

TEST(Bytes, LittleEndianHelpers)
{
    Bytes out;
    append_le32(out, 0x01020304);
    append_le64(out, 0x1122334455667788ull);
    EXPECT_EQ(to_hex(out), "040302018877665544332211");
    EXPECT_EQ(read_le32(out, 0), 0x01020304u);
    EXPECT_EQ(read_le64(out, 4), 0x1122334455667788ull);
}

TEST(Crypto, ShaFamilyMatchesReferenceDigests)
{
    EXPECT_EQ(to_hex(crypto::sha256(as_bytes("abc"))),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(to_hex(crypto::sha384(as_bytes("abc"))),
              "cb00753f45a35e8bb5a03d699ac65007272c32ab0eded1631a8b605a43ff5bed"
              "8086072ba1e7cc2358baeca134c825a7");
    EXPECT_EQ(to_hex(crypto::sha512(as_bytes("abc"))),
              "ddaf35a193617abacc417349ae20413112e6fa4e89a97ea20a9eeee64b55d39a"
              "2192992a274fc1a836ba3c23a3feebbd454d4423643ce80e2a9ac94fa54ca49f");
    EXPECT_EQ(crypto::sha256({as_bytes("a"), as_bytes("bc")}), crypto::sha256(as_bytes("abc")));
}

TEST(Crypto, HkdfMatchesRfc5869CaseOne)
{
    const Bytes ikm(22, 0x0b);
    const Bytes salt = from_hex("000102030405060708090a0b0c");
    const Bytes info = from_hex("f0f1f2f3f4f5f6f7f8f9");
    EXPECT_EQ(to_hex(crypto::hkdf_sha256(ikm, salt, info, 42)),
              "3cb25f25faacd57a90434f64d0362f2a2d2d0a90cf1a5a4c5db02d56ecc4c5bf"
              "34007208d5b887185865");
}

TEST(Crypto, Ed25519MatchesRfc8032TestOne)
{
    const auto key = crypto::Ed25519Key::from_seed(
        array_from_hex<32>("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60"));
    EXPECT_EQ(to_hex(key.public_key()),
              "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a");
    const auto sig = key.sign({});
    EXPECT_EQ(to_hex(sig),
              "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e06522490155"
              "5fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b");
    EXPECT_TRUE(crypto::ed25519_verify(key.public_key(), {}, sig));
    auto bad = sig;
    bad[0] ^= 1;
    EXPECT_FALSE(crypto::ed25519_verify(key.public_key(), {}, bad));
    EXPECT_FALSE(crypto::ed25519_verify(key.public_key(), as_bytes("x"), sig));
}

TEST(Crypto, AesGcmRejectsAnyTampering)
{
    const auto key = crypto::random_array<32>();
    const Bytes nonce(crypto::gcm_nonce_size, 7);
    const auto sealed = crypto::aes256gcm_seal(key, nonce, as_bytes("aad"), as_bytes("secret"));
    ASSERT_EQ(sealed.size(), 6 + crypto::gcm_tag_size);
    EXPECT_EQ(to_string(*crypto::aes256gcm_open(key, nonce, as_bytes("aad"), sealed)), "secret");
    EXPECT_FALSE(crypto::aes256gcm_open(key, nonce, as_bytes("aaD"), sealed));
    for (std::size_t i = 0; i < sealed.size(); ++i) {
        auto copy = sealed;
        copy[i] ^= 0x80;
        EXPECT_FALSE(crypto::aes256gcm_open(key, nonce, as_bytes("aad"), copy)) << i;
    }
}

TEST(Crypto, RsaOaepRoundTripOnlyForMatchingKey)
{
    const auto a = crypto::RsaKeyPair::generate();
    const auto b = crypto::RsaKeyPair::generate();
    const auto wrapped = crypto::rsa_oaep_encrypt(a.public_der(), as_bytes("model key"));
    EXPECT_EQ(to_string(*a.decrypt(wrapped)), "model key");
    EXPECT_FALSE(b.decrypt(wrapped));
    EXPECT_THROW(crypto::rsa_oaep_encrypt(as_bytes("not der"), as_bytes("x")), crypto::CryptoError);
}

TEST(Crypto, SecureWipeZeroes)
{
    Bytes secret(64, 0xaa);
    secure_wipe(secret);
    EXPECT_EQ(secret, Bytes(64, 0));
}

} // namespace
