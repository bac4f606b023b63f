// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bitset>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace parma::regex {

class RegexError : public std::runtime_error {
public:
    RegexError(const std::string& what, std::size_t position)
        : std::runtime_error(what + " at offset " + std::to_string(position)),
          position_(position)
    {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

// Anchored, byte-oriented regular expressions compiled to a Thompson NFA.
//
// Supported: literals, '.', character classes with ranges and negation,
// \d \w \s and their negations, groups (plain and "(?:"), alternation,
// '*', '+', '?', '{n}', '{n,}', '{n,m}' (lazy suffix accepted), '^' and '$'.
// Backreferences and lookaround are rejected. Matching time is linear in the
// input length.
class Pattern {
public:
    static Pattern compile(std::string_view source);

    bool full_match(std::string_view text) const;
    const std::string& source() const noexcept { return source_; }

    bool operator==(const Pattern& other) const { return source_ == other.source_; }

private:
    enum class Op { Set, Split, Jump, AssertBegin, AssertEnd, Match };

    struct Inst {
        Op op = Op::Match;
        std::bitset<256> set;
        std::size_t x = 0;
        std::size_t y = 0;
    };

    friend class Compiler;

    std::string source_;
    std::vector<Inst> program_;
};

} // namespace parma::regex
