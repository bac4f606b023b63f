// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/crypto.hpp"
#include "parma/storage.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <random>

namespace {

using namespace parma;
using namespace parma::storage;

Bytes pattern_data(std::size_t blocks, unsigned mul)
{
    Bytes data(blocks * block_size);
    for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = static_cast<std::uint8_t>(i * mul);
    return data;
}

bool read_fails(const VerityImage& image, std::size_t block, const Digest32& root)
{
    try {
        verified_read(image, block, root);
        return false;
    } catch (const IntegrityError&) {
        return true;
    }
}

TEST(Verity, SingleBlockTreeShape)
{
    Bytes block(block_size);
    for (std::size_t i = 0; i < block.size(); ++i)
        block[i] = static_cast<std::uint8_t>(i);
    const Digest32 salt{};
    const auto image = build_tree(block, salt);
    ASSERT_EQ(image.levels.size(), 1u);
    const auto leaf = crypto::sha256({salt, block});
    Bytes padded(leaf.begin(), leaf.end());
    padded.resize(block_size, 0);
    EXPECT_EQ(image.root_hash, crypto::sha256({salt, padded}));
    // hashlib reference for the same input.
    EXPECT_EQ(to_hex(image.root_hash),
              "e8e815fb781e7a1b9bf151550efe67063fab5717a32a4ab20c752281a666f3da");
}

TEST(Verity, ArityOf128PerHashBlock)
{
    const auto image = build_tree(pattern_data(129, 13), Digest32{});
    ASSERT_EQ(image.levels.size(), 2u);
    EXPECT_EQ(image.levels[0].size(), 129u);
    EXPECT_EQ(image.levels[1].size(), 2u);
    EXPECT_EQ(to_hex(image.root_hash),
              "0ef11f705be2f1b7e345f54110a08d06fc8994d5266018903644d3293ca79dc4");
    EXPECT_EQ(build_tree(pattern_data(128, 13), Digest32{}).levels.size(), 1u);
    for (std::size_t b : {0u, 127u, 128u})
        EXPECT_NO_THROW(verified_read(image, b, image.root_hash));
}

TEST(Verity, DeterministicAndSaltSensitive)
{
    const auto data = pattern_data(4, 7);
    Digest32 salt{};
    EXPECT_EQ(build_tree(data, salt).root_hash, build_tree(data, salt).root_hash);
    salt[0] = 1;
    EXPECT_NE(build_tree(data, salt).root_hash, build_tree(data, Digest32{}).root_hash);
    EXPECT_THROW(build_tree({}, salt), std::invalid_argument);
}

TEST(Verity, PartialBlockIsZeroPadded)
{
    const Bytes data(5000, 0x11);
    const auto image = build_tree(data, Digest32{});
    EXPECT_EQ(image.block_count(), 2u);
    const auto tail = verified_read(image, 1, image.root_hash);
    EXPECT_EQ(tail[5000 - block_size - 1], 0x11);
    EXPECT_EQ(tail[5000 - block_size], 0);
}

TEST(Verity, RangeErrorIsDistinct)
{
    const auto image = build_tree(pattern_data(4, 7), Digest32{});
    EXPECT_THROW(verified_read(image, 4, image.root_hash), RangeError);
    Digest32 wrong = image.root_hash;
    wrong[31] ^= 1;
    EXPECT_THROW(verified_read(image, 0, wrong), IntegrityError);
}

TEST(Verity, EveryDataBitFlipIsDetectedOnItsBlockOnly)
{
    const auto clean = build_tree(pattern_data(4, 7), Digest32{});
    auto image = clean;
    std::size_t detected = 0;
    const std::size_t flips = image.data.size() * 8;
    for (std::size_t bit = 0; bit < flips; ++bit) {
        const std::size_t byte = bit / 8;
        image.data[byte] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        detected += read_fails(image, byte / block_size, clean.root_hash) ? 1 : 0;
        if (bit % 997 == 0) {
            const std::size_t other = (byte / block_size + 1) % 4;
            EXPECT_FALSE(read_fails(image, other, clean.root_hash)) << bit;
        }
        image.data[byte] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    }
    EXPECT_EQ(detected, flips);
}

TEST(Verity, EveryTreeBitFlipIsDetected)
{
    const auto clean = build_tree(pattern_data(4, 7), Digest32{});
    std::size_t flips = 0, detected = 0;
    for (std::size_t leaf = 0; leaf < 4; ++leaf) {
        for (std::size_t bit = 0; bit < digest_size * 8; ++bit) {
            auto image = clean;
            image.levels[0][leaf][bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
            ++flips;
            detected += read_fails(image, leaf, clean.root_hash) ? 1 : 0;
        }
    }
    for (std::size_t bit = 0; bit < 256; ++bit) {
        auto image = clean;
        image.salt[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        for (std::size_t b = 0; b < 4; ++b) {
            ++flips;
            detected += read_fails(image, b, clean.root_hash) ? 1 : 0;
        }
    }
    EXPECT_EQ(detected, flips);
}

TEST(Verity, TwoLevelInteriorNodeFlipsAreDetected)
{
    const auto clean = build_tree(pattern_data(130, 3), Digest32{});
    ASSERT_EQ(clean.levels.size(), 2u);
    for (std::size_t node = 0; node < 2; ++node) {
        auto image = clean;
        image.levels[1][node][0] ^= 0x80;
        EXPECT_TRUE(read_fails(image, node * digests_per_block, clean.root_hash));
    }
}

TEST(Verity, RandomCorruptionAt16MiB)
{
    const auto clean = build_tree(pattern_data(4096, 5), Digest32{});
    auto image = clean;
    std::mt19937_64 rng(16);
    std::uniform_int_distribution<std::size_t> pick(0, image.data.size() - 1);
    for (int i = 0; i < 300; ++i) {
        const auto byte = pick(rng);
        image.data[byte] ^= 0x01;
        EXPECT_TRUE(read_fails(image, byte / block_size, clean.root_hash)) << byte;
        image.data[byte] ^= 0x01;
    }
}

TEST(Verity, SidecarRoundTrip)
{
    const auto image = build_tree(pattern_data(130, 3), crypto::sha256(as_bytes("salt")));
    const auto sidecar = serialize_sidecar(image);
    EXPECT_EQ(to_string(ByteView(sidecar).first(4)), "PVRT");
    const auto loaded = load_image(image.data, sidecar);
    EXPECT_EQ(loaded.levels, image.levels);
    EXPECT_EQ(loaded.salt, image.salt);
    EXPECT_EQ(loaded.root_hash, image.root_hash);
    EXPECT_NO_THROW(verify_image(loaded, image.root_hash));
    EXPECT_THROW(load_image(ByteView(image.data).first(block_size), sidecar), FormatError);
    EXPECT_THROW(load_image(image.data, ByteView(sidecar).first(sidecar.size() - 1)), FormatError);
}

TEST(Verity, EverySidecarBitFlipIsRejected)
{
    const auto image = build_tree(pattern_data(4, 7), Digest32{});
    const auto sidecar = serialize_sidecar(image);
    // The stored root is informational; verification always uses the
    // trusted root from the policy, so only the bytes before it matter.
    const std::size_t covered = sidecar.size() - digest_size;
    std::size_t rejected = 0;
    for (std::size_t bit = 0; bit < covered * 8; ++bit) {
        auto copy = sidecar;
        copy[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        try {
            verify_image(load_image(image.data, copy), image.root_hash);
        } catch (const FormatError&) {
            ++rejected;
            continue;
        } catch (const IntegrityError&) {
            ++rejected;
            continue;
        }
        ADD_FAILURE() << "accepted flip of bit " << bit % 8 << " in byte " << bit / 8;
    }
    EXPECT_EQ(rejected, covered * 8);
}

TEST(Verity, FixtureFileRoot)
{
    std::ifstream in(std::string(PARMA_TEST_DATA) + "/layer4.bin", std::ios::binary);
    const Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ASSERT_EQ(data.size(), 4 * block_size);
    EXPECT_EQ(to_hex(build_tree(data, Digest32{}).root_hash),
              "b100cfe59e0d1b5eeaab88925debe1f608bbb3a39a33604f26d9105e1655916d");
}

TEST(Scratch, FormatZeroesAndUsesFreshKeys)
{
    auto a = scratch_format(4);
    auto b = scratch_format(4);
    EXPECT_NE(a.key, b.key);
    EXPECT_EQ(a.device.read(0), Bytes(block_size, 0));
    EXPECT_THROW(scratch_format(0), std::invalid_argument);
    EXPECT_THROW(a.device.read(4), RangeError);
}

TEST(Scratch, WriteReadRoundTrip)
{
    auto s = scratch_format(4);
    const auto data = pattern_data(1, 9);
    s.device.write(2, data);
    EXPECT_EQ(s.device.read(2), data);
    EXPECT_NE(s.device.raw_sector(2), s.device.raw_sector(3));
    EXPECT_THROW(s.device.write(2, Bytes(10)), std::invalid_argument);
}

TEST(Scratch, EveryRelocationIsDetected)
{
    auto s = scratch_format(16);
    for (std::size_t i = 0; i < 16; ++i)
        s.device.write(i, pattern_data(1, static_cast<unsigned>(i + 1)));
    std::size_t detected = 0, attempts = 0;
    for (std::size_t i = 0; i < 16; ++i) {
        for (std::size_t j = 0; j < 16; ++j) {
            if (i == j)
                continue;
            auto copy = s.device;
            copy.overwrite_raw_sector(j, s.device.raw_sector(i));
            ++attempts;
            try {
                copy.read(j);
            } catch (const IntegrityError&) {
                ++detected;
            }
        }
    }
    EXPECT_EQ(detected, attempts);
}

TEST(Scratch, EveryCiphertextBitFlipIsDetected)
{
    auto s = scratch_format(2);
    s.device.write(1, pattern_data(1, 3));
    const Bytes original = s.device.raw_sector(1);
    ASSERT_EQ(original.size(), ScratchDevice::sealed_size);
    std::size_t detected = 0;
    for (std::size_t bit = 0; bit < original.size() * 8; ++bit) {
        auto tampered = original;
        tampered[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        s.device.overwrite_raw_sector(1, std::move(tampered));
        try {
            s.device.read(1);
        } catch (const IntegrityError&) {
            ++detected;
        }
    }
    EXPECT_EQ(detected, original.size() * 8);
}

// Known gap: sectors carry no freshness, so an old ciphertext restored at
// its own index still authenticates.
TEST(Scratch, KnownGapSameIndexReplayIsAccepted)
{
    auto s = scratch_format(2);
    const auto old_data = pattern_data(1, 1);
    s.device.write(0, old_data);
    const Bytes old_sector = s.device.raw_sector(0);
    s.device.write(0, pattern_data(1, 2));
    s.device.overwrite_raw_sector(0, old_sector);
    EXPECT_EQ(s.device.read(0), old_data);
}

} // namespace
