// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace parma {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

template <std::size_t N>
using ByteArray = std::array<std::uint8_t, N>;

using Digest32 = ByteArray<32>;
using Digest48 = ByteArray<48>;
using Digest64 = ByteArray<64>;

std::string to_hex(ByteView bytes);

// Accepts upper or lower case; throws std::invalid_argument on odd length or
// non-hex characters.
Bytes from_hex(std::string_view hex);

template <std::size_t N>
ByteArray<N> array_from_hex(std::string_view hex)
{
    const Bytes raw = from_hex(hex);
    if (raw.size() != N)
        throw std::invalid_argument("hex value has wrong length");
    ByteArray<N> out{};
    std::copy(raw.begin(), raw.end(), out.begin());
    return out;
}

bool is_lower_hex(std::string_view s);

inline ByteView as_bytes(std::string_view s)
{
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline std::string to_string(ByteView b)
{
    return {reinterpret_cast<const char*>(b.data()), b.size()};
}

void append(Bytes& out, ByteView more);
void append_le32(Bytes& out, std::uint32_t v);
void append_le64(Bytes& out, std::uint64_t v);
std::uint32_t read_le32(ByteView in, std::size_t offset);
std::uint64_t read_le64(ByteView in, std::size_t offset);

inline Bytes le64(std::uint64_t v)
{
    Bytes out;
    append_le64(out, v);
    return out;
}

std::string base64_encode(ByteView bytes);
Bytes base64_decode(std::string_view text);

// Overwrites the buffer in a way the optimizer may not elide.
void secure_wipe(std::span<std::uint8_t> buf);

} // namespace parma
