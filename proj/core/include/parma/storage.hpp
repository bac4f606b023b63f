// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "parma/bytes.hpp"

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace parma::storage {

constexpr std::size_t block_size = 4096;
constexpr std::size_t digest_size = 32;
constexpr std::size_t digests_per_block = block_size / digest_size; // 128

class IntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Read-only layer image with its Merkle hash tree.
///
/// levels[0] holds one digest per data block, levels[k+1] one digest per
/// 4096-byte hash block of levels[k]. The last level fits in a single hash
/// block and root_hash = H(salt || that block, zero padded).
struct VerityImage {
    Bytes data; // multiple of block_size
    Digest32 salt{};
    std::vector<std::vector<Digest32>> levels;
    Digest32 root_hash{};

    std::size_t block_count() const { return data.size() / block_size; }
};

VerityImage build_tree(ByteView data, const Digest32& salt);

// Throws IntegrityError when the path from the block to trusted_root does
// not verify, RangeError when block_index is past the end.
Bytes verified_read(const VerityImage& image, std::size_t block_index,
                    const Digest32& trusted_root);

// Verified read of every block; throws like verified_read.
void verify_image(const VerityImage& image, const Digest32& trusted_root);

// Sidecar (.vrt) encoding of salt, block count, tree levels and root hash.
Bytes serialize_sidecar(const VerityImage& image);

// Pairs raw data with a sidecar. The tree is taken as given; integrity is
// only established by verified_read against a trusted root.
VerityImage load_image(ByteView data, ByteView sidecar);

/// AEAD-protected writable block device. Each sector is sealed under the
/// device key with nonce and associated data bound to the sector index.
class ScratchDevice {
public:
    static constexpr std::size_t sealed_size = block_size + 16;

    ScratchDevice(std::size_t sector_count, const Digest32& key);
    ~ScratchDevice();
    ScratchDevice(const ScratchDevice&) = default;
    ScratchDevice& operator=(const ScratchDevice&) = default;
    ScratchDevice(ScratchDevice&&) noexcept = default;
    ScratchDevice& operator=(ScratchDevice&&) noexcept = default;

    std::size_t sector_count() const { return sectors_.size(); }

    void write(std::size_t index, ByteView plaintext);
    Bytes read(std::size_t index) const;

    // Host-visible ciphertext, exposed for tamper simulation.
    const Bytes& raw_sector(std::size_t index) const;
    void overwrite_raw_sector(std::size_t index, Bytes sealed);

private:
    void check_index(std::size_t index) const;

    Digest32 key_;
    std::vector<Bytes> sectors_;
};

struct FormattedScratch {
    ScratchDevice device;
    Digest32 key; // the caller owns this copy and must erase it after mounting
};

FormattedScratch scratch_format(std::size_t sector_count);
FormattedScratch scratch_format(std::size_t sector_count, const Digest32& key);

} // namespace parma::storage
