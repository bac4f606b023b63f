// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/storage.hpp"

#include "parma/crypto.hpp"

#include <algorithm>
#include <cstring>

namespace parma::storage {

namespace {

constexpr std::array<std::uint8_t, 4> sidecar_magic = {'P', 'V', 'R', 'T'};
constexpr std::uint32_t sidecar_version = 1;

// Digest of one hash block: the digests [first, first + 128) of `level`,
// zero padded to block_size.
Digest32 hash_block_digest(const Digest32& salt, const std::vector<Digest32>& level,
                           std::size_t first)
{
    std::array<std::uint8_t, block_size> block{};
    const std::size_t count = std::min(digests_per_block, level.size() - first);
    for (std::size_t i = 0; i < count; ++i)
        std::memcpy(block.data() + i * digest_size, level[first + i].data(), digest_size);
    return crypto::sha256({salt, block});
}

std::size_t blocks_for(std::size_t digests)
{
    return (digests + digests_per_block - 1) / digests_per_block;
}

class Cursor {
public:
    explicit Cursor(ByteView in) : in_(in) {}

    ByteView take(std::size_t n)
    {
        if (n > in_.size() - pos_)
            throw FormatError("sidecar truncated");
        auto out = in_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    std::uint32_t u32() { return read_le32(take(4), 0); }
    std::uint64_t u64() { return read_le64(take(8), 0); }
    template <std::size_t N>
    ByteArray<N> array()
    {
        ByteArray<N> out{};
        auto src = take(N);
        std::copy(src.begin(), src.end(), out.begin());
        return out;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    ByteView in_;
    std::size_t pos_ = 0;
};

} // namespace

VerityImage build_tree(ByteView data, const Digest32& salt)
{
    if (data.empty())
        throw std::invalid_argument("cannot build a hash tree over empty data");
    VerityImage image;
    image.salt = salt;
    image.data.assign(data.begin(), data.end());
    image.data.resize((data.size() + block_size - 1) / block_size * block_size, 0);

    std::vector<Digest32> leaves;
    leaves.reserve(image.block_count());
    for (std::size_t b = 0; b < image.block_count(); ++b)
        leaves.push_back(
            crypto::sha256({salt, ByteView(image.data).subspan(b * block_size, block_size)}));
    image.levels.push_back(std::move(leaves));

    while (image.levels.back().size() > digests_per_block) {
        const auto& below = image.levels.back();
        std::vector<Digest32> above;
        for (std::size_t first = 0; first < below.size(); first += digests_per_block)
            above.push_back(hash_block_digest(salt, below, first));
        image.levels.push_back(std::move(above));
    }
    image.root_hash = hash_block_digest(salt, image.levels.back(), 0);
    return image;
}

Bytes verified_read(const VerityImage& image, std::size_t block_index, const Digest32& trusted_root)
{
    if (block_index >= image.block_count())
        throw RangeError("block index " + std::to_string(block_index) + " out of range");
    if (image.levels.empty() || image.levels.front().size() != image.block_count() ||
        image.levels.back().size() > digests_per_block)
        throw IntegrityError("hash tree shape does not match image");

    const ByteView block = ByteView(image.data).subspan(block_index * block_size, block_size);
    if (crypto::sha256({image.salt, block}) != image.levels.front()[block_index])
        throw IntegrityError("data block " + std::to_string(block_index) + " failed verification");

    std::size_t index = block_index;
    for (std::size_t k = 0; k + 1 < image.levels.size(); ++k) {
        const std::size_t parent = index / digests_per_block;
        const auto& above = image.levels[k + 1];
        if (above.size() != blocks_for(image.levels[k].size()))
            throw IntegrityError("hash tree shape does not match image");
        if (hash_block_digest(image.salt, image.levels[k], parent * digests_per_block) !=
            above[parent])
            throw IntegrityError("hash block at level " + std::to_string(k) +
                                 " failed verification");
        index = parent;
    }
    if (hash_block_digest(image.salt, image.levels.back(), 0) != trusted_root)
        throw IntegrityError("root hash mismatch");
    return Bytes(block.begin(), block.end());
}

void verify_image(const VerityImage& image, const Digest32& trusted_root)
{
    for (std::size_t b = 0; b < image.block_count(); ++b)
        verified_read(image, b, trusted_root);
}

Bytes serialize_sidecar(const VerityImage& image)
{
    Bytes out(sidecar_magic.begin(), sidecar_magic.end());
    append_le32(out, sidecar_version);
    append_le32(out, static_cast<std::uint32_t>(block_size));
    append_le64(out, image.block_count());
    append(out, image.salt);
    append_le32(out, static_cast<std::uint32_t>(image.levels.size()));
    for (const auto& level : image.levels) {
        append_le64(out, level.size());
        for (const auto& d : level)
            append(out, d);
    }
    append(out, image.root_hash);
    return out;
}

VerityImage load_image(ByteView data, ByteView sidecar)
{
    Cursor in(sidecar);
    const auto magic = in.array<4>();
    if (!std::equal(magic.begin(), magic.end(), sidecar_magic.begin()))
        throw FormatError("bad sidecar magic");
    if (in.u32() != sidecar_version)
        throw FormatError("unsupported sidecar version");
    if (in.u32() != block_size)
        throw FormatError("unsupported block size");
    const std::uint64_t blocks = in.u64();
    if (data.size() % block_size != 0 || data.size() / block_size != blocks)
        throw FormatError("data size does not match sidecar block count");

    VerityImage image;
    image.data.assign(data.begin(), data.end());
    image.salt = in.array<32>();
    const std::uint32_t level_count = in.u32();
    if (level_count == 0 || level_count > 16)
        throw FormatError("implausible level count");
    for (std::uint32_t l = 0; l < level_count; ++l) {
        const std::uint64_t n = in.u64();
        if (n > sidecar.size() / digest_size)
            throw FormatError("level size exceeds sidecar");
        std::vector<Digest32> level;
        level.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i)
            level.push_back(in.array<32>());
        image.levels.push_back(std::move(level));
    }
    image.root_hash = in.array<32>();
    if (!in.done())
        throw FormatError("trailing bytes in sidecar");
    return image;
}

ScratchDevice::ScratchDevice(std::size_t sector_count, const Digest32& key) : key_(key)
{
    if (sector_count == 0)
        throw std::invalid_argument("scratch device needs at least one sector");
    sectors_.resize(sector_count);
    const Bytes zeros(block_size, 0);
    for (std::size_t i = 0; i < sector_count; ++i)
        write(i, zeros);
}

ScratchDevice::~ScratchDevice()
{
    secure_wipe(key_);
}

void ScratchDevice::check_index(std::size_t index) const
{
    if (index >= sectors_.size())
        throw RangeError("sector " + std::to_string(index) + " out of range");
}

namespace {

Bytes sector_nonce(std::size_t index)
{
    Bytes nonce = le64(index);
    nonce.resize(crypto::gcm_nonce_size, 0);
    return nonce;
}

} // namespace

void ScratchDevice::write(std::size_t index, ByteView plaintext)
{
    check_index(index);
    if (plaintext.size() != block_size)
        throw std::invalid_argument("sector writes must be exactly one block");
    sectors_[index] = crypto::aes256gcm_seal(key_, sector_nonce(index), le64(index), plaintext);
}

Bytes ScratchDevice::read(std::size_t index) const
{
    check_index(index);
    auto plain = crypto::aes256gcm_open(key_, sector_nonce(index), le64(index), sectors_[index]);
    if (!plain)
        throw IntegrityError("sector " + std::to_string(index) + " failed authentication");
    return std::move(*plain);
}

const Bytes& ScratchDevice::raw_sector(std::size_t index) const
{
    check_index(index);
    return sectors_[index];
}

void ScratchDevice::overwrite_raw_sector(std::size_t index, Bytes sealed)
{
    check_index(index);
    sectors_[index] = std::move(sealed);
}

FormattedScratch scratch_format(std::size_t sector_count)
{
    if (sector_count == 0)
        throw std::invalid_argument("scratch device needs at least one sector");
    auto key = crypto::random_array<32>();
    FormattedScratch out{ScratchDevice(sector_count, key), key};
    secure_wipe(key);
    return out;
}

FormattedScratch scratch_format(std::size_t sector_count, const Digest32& key)
{
    return FormattedScratch{ScratchDevice(sector_count, key), key};
}

} // namespace parma::storage
