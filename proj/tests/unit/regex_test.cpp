// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/regex.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <regex>

namespace {

using parma::regex::Pattern;
using parma::regex::RegexError;

TEST(Regex, AgreesWithStdRegexOnCorpus)
{
    const std::vector<std::string> patterns = {
        "abc",           "a.c",          "[a-c]+",      "[^0-9]*",      "\\d{2,4}",
        "(ab|cd)*e",     "x?y+z*",       "PORT=[0-9]+", "(?:foo|bar)baz", "\\w+\\s\\W",
        "a{3}",          "a{2,}",        "(a|b){0,2}c", "^/run/[a-z]+$", "[.]+",
        "a|",            "(|a)b",        "[a\\-z]+",    "\\S+",         "[\\d_]+",
    };
    const std::vector<std::string> inputs = {
        "", "abc", "aXc", "abcabc", "cab", "9", "12", "12345", "ababe", "cde", "e", "y", "xyzz",
        "PORT=8080", "PORT=", "foobaz", "barbaz", "bazbaz", "hi there!", "aaa", "aaaa", "a",
        "abac", "bc", "/run/secrets", "/run/x/y", "...", "a-z", "_1_", " ", "b",
    };
    for (const auto& p : patterns) {
        const auto ours = Pattern::compile(p);
        const std::regex reference(p);
        for (const auto& s : inputs)
            EXPECT_EQ(ours.full_match(s), std::regex_match(s, reference)) << p << " on " << s;
    }
}

TEST(Regex, MatchesAreAnchored)
{
    const auto p = Pattern::compile("ab");
    EXPECT_TRUE(p.full_match("ab"));
    EXPECT_FALSE(p.full_match("xab"));
    EXPECT_FALSE(p.full_match("abx"));
}

TEST(Regex, RejectsUnsupportedAndMalformed)
{
    for (const char* bad : {"(a)\\1", "(?=a)", "(?!a)", "(?<=a)b", "(ab", "ab)", "[ab", "*a",
                            "a{3,1}", "\\"}) {
        EXPECT_THROW(Pattern::compile(bad), RegexError) << bad;
    }
}

TEST(Regex, PathologicalPatternRunsInLinearTime)
{
    const auto p = Pattern::compile("(a*)*(a|b)*c");
    const std::string input(20000, 'a');
    const auto start = std::chrono::steady_clock::now();
    EXPECT_FALSE(p.full_match(input));
    EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(2));
}

} // namespace
