// Copyright 2026 The parma-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "parma/regex.hpp"

#include <memory>
#include <optional>

namespace parma::regex {

namespace {

constexpr int max_repeat = 1000;
constexpr std::size_t max_program = 20000;
constexpr int unbounded = -1;

struct Node {
    enum class Kind { Empty, Set, Concat, Alt, Repeat, Begin, End };

    Kind kind = Kind::Empty;
    std::bitset<256> set;
    std::vector<std::unique_ptr<Node>> children;
    int min = 0;
    int max = 0;
};

using NodePtr = std::unique_ptr<Node>;

NodePtr make(Node::Kind kind)
{
    auto n = std::make_unique<Node>();
    n->kind = kind;
    return n;
}

std::bitset<256> digit_set()
{
    std::bitset<256> s;
    for (int c = '0'; c <= '9'; ++c)
        s.set(static_cast<std::size_t>(c));
    return s;
}

std::bitset<256> word_set()
{
    std::bitset<256> s = digit_set();
    for (int c = 'a'; c <= 'z'; ++c)
        s.set(static_cast<std::size_t>(c));
    for (int c = 'A'; c <= 'Z'; ++c)
        s.set(static_cast<std::size_t>(c));
    s.set('_');
    return s;
}

std::bitset<256> space_set()
{
    std::bitset<256> s;
    for (char c : std::string_view(" \t\n\r\f\v"))
        s.set(static_cast<unsigned char>(c));
    return s;
}

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    NodePtr parse()
    {
        auto node = parse_alt();
        if (pos_ != src_.size())
            throw RegexError("unmatched ')'", pos_);
        return node;
    }

private:
    bool at_end() const { return pos_ >= src_.size(); }
    char peek() const { return src_[pos_]; }

    NodePtr parse_alt()
    {
        std::vector<NodePtr> branches;
        branches.push_back(parse_concat());
        while (!at_end() && peek() == '|') {
            ++pos_;
            branches.push_back(parse_concat());
        }
        if (branches.size() == 1)
            return std::move(branches.front());
        auto alt = make(Node::Kind::Alt);
        alt->children = std::move(branches);
        return alt;
    }

    NodePtr parse_concat()
    {
        auto cat = make(Node::Kind::Concat);
        while (!at_end() && peek() != '|' && peek() != ')')
            cat->children.push_back(parse_repeat());
        return cat;
    }

    std::optional<int> parse_int()
    {
        const std::size_t start = pos_;
        long value = 0;
        while (!at_end() && peek() >= '0' && peek() <= '9') {
            value = value * 10 + (peek() - '0');
            if (value > max_repeat)
                throw RegexError("repetition count too large", start);
            ++pos_;
        }
        if (pos_ == start)
            return std::nullopt;
        return static_cast<int>(value);
    }

    NodePtr parse_repeat()
    {
        auto atom = parse_atom();
        while (!at_end()) {
            const std::size_t qpos = pos_;
            int lo = 0;
            int hi = 0;
            const char c = peek();
            if (c == '*') {
                lo = 0;
                hi = unbounded;
                ++pos_;
            } else if (c == '+') {
                lo = 1;
                hi = unbounded;
                ++pos_;
            } else if (c == '?') {
                lo = 0;
                hi = 1;
                ++pos_;
            } else if (c == '{') {
                ++pos_;
                auto first = parse_int();
                if (!first)
                    throw RegexError("malformed repetition", qpos);
                lo = *first;
                hi = lo;
                if (!at_end() && peek() == ',') {
                    ++pos_;
                    auto second = parse_int();
                    hi = second ? *second : unbounded;
                }
                if (at_end() || peek() != '}')
                    throw RegexError("malformed repetition", qpos);
                ++pos_;
                if (hi != unbounded && hi < lo)
                    throw RegexError("repetition bounds out of order", qpos);
            } else {
                break;
            }
            if (atom->kind == Node::Kind::Begin || atom->kind == Node::Kind::End)
                throw RegexError("quantifier applied to anchor", qpos);
            // Lazy and greedy quantifiers accept the same strings under full match.
            if (!at_end() && peek() == '?')
                ++pos_;
            if (!at_end() && (peek() == '*' || peek() == '+' || peek() == '?' || peek() == '{'))
                throw RegexError("nested quantifier", pos_);
            auto rep = make(Node::Kind::Repeat);
            rep->min = lo;
            rep->max = hi;
            rep->children.push_back(std::move(atom));
            atom = std::move(rep);
        }
        return atom;
    }

    NodePtr single(unsigned char c)
    {
        auto n = make(Node::Kind::Set);
        n->set.set(c);
        return n;
    }

    // Escape after the backslash; returns the class it denotes.
    std::bitset<256> parse_escape(bool in_class)
    {
        if (at_end())
            throw RegexError("trailing backslash", pos_ - 1);
        const std::size_t epos = pos_ - 1;
        const char c = src_[pos_++];
        std::bitset<256> s;
        switch (c) {
        case 'd': return digit_set();
        case 'D': return ~digit_set();
        case 'w': return word_set();
        case 'W': return ~word_set();
        case 's': return space_set();
        case 'S': return ~space_set();
        case 'n': s.set('\n'); return s;
        case 't': s.set('\t'); return s;
        case 'r': s.set('\r'); return s;
        case 'f': s.set('\f'); return s;
        case 'v': s.set('\v'); return s;
        default: break;
        }
        if (c >= '1' && c <= '9')
            throw RegexError("backreferences are not supported", epos);
        const std::string_view meta = in_class ? "\\]^-[.$*+?(){}|/" : "\\.^$*+?()[]{}|/-";
        if (meta.find(c) == std::string_view::npos)
            throw RegexError(std::string("unsupported escape \\") + c, epos);
        s.set(static_cast<unsigned char>(c));
        return s;
    }

    NodePtr parse_class()
    {
        const std::size_t start = pos_ - 1;
        bool negate = false;
        if (!at_end() && peek() == '^') {
            negate = true;
            ++pos_;
        }
        std::bitset<256> set;
        bool any = false;
        while (true) {
            if (at_end())
                throw RegexError("unterminated character class", start);
            if (peek() == ']')
                break;
            std::bitset<256> item;
            int lo_char = -1;
            if (peek() == '\\') {
                ++pos_;
                item = parse_escape(true);
                if (item.count() == 1) {
                    for (int i = 0; i < 256; ++i)
                        if (item.test(static_cast<std::size_t>(i)))
                            lo_char = i;
                }
            } else {
                lo_char = static_cast<unsigned char>(src_[pos_++]);
                item.set(static_cast<std::size_t>(lo_char));
            }
            if (lo_char >= 0 && pos_ + 1 < src_.size() && peek() == '-' && src_[pos_ + 1] != ']') {
                ++pos_;
                int hi_char = 0;
                if (peek() == '\\') {
                    ++pos_;
                    const std::size_t epos = pos_ - 1;
                    auto hi_set = parse_escape(true);
                    if (hi_set.count() != 1)
                        throw RegexError("invalid range endpoint", epos);
                    for (int i = 0; i < 256; ++i)
                        if (hi_set.test(static_cast<std::size_t>(i)))
                            hi_char = i;
                } else {
                    hi_char = static_cast<unsigned char>(src_[pos_++]);
                }
                if (hi_char < lo_char)
                    throw RegexError("character range out of order", start);
                for (int ch = lo_char; ch <= hi_char; ++ch)
                    item.set(static_cast<std::size_t>(ch));
            }
            set |= item;
            any = true;
        }
        ++pos_;
        if (!any)
            throw RegexError("empty character class", start);
        auto n = make(Node::Kind::Set);
        n->set = negate ? ~set : set;
        return n;
    }

    NodePtr parse_atom()
    {
        const std::size_t apos = pos_;
        const char c = src_[pos_++];
        switch (c) {
        case '(': {
            if (!at_end() && peek() == '?') {
                if (pos_ + 1 < src_.size() && src_[pos_ + 1] == ':')
                    pos_ += 2;
                else
                    throw RegexError("unsupported group syntax", apos);
            }
            auto inner = parse_alt();
            if (at_end() || peek() != ')')
                throw RegexError("missing ')'", apos);
            ++pos_;
            return inner;
        }
        case '[':
            return parse_class();
        case '.': {
            auto n = make(Node::Kind::Set);
            n->set.set();
            n->set.reset('\n');
            return n;
        }
        case '^':
            return make(Node::Kind::Begin);
        case '$':
            return make(Node::Kind::End);
        case '\\': {
            auto n = make(Node::Kind::Set);
            n->set = parse_escape(false);
            return n;
        }
        case '*':
        case '+':
        case '?':
        case '{':
            throw RegexError("quantifier without operand", apos);
        case ']':
        case '}':
            throw RegexError(std::string("unbalanced '") + c + "'", apos);
        default:
            return single(static_cast<unsigned char>(c));
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

} // namespace

class Compiler {
public:
    using Inst = Pattern::Inst;
    using Op = Pattern::Op;

    explicit Compiler(std::vector<Inst>& prog) : prog_(prog) {}

    void emit(const Node& n)
    {
        switch (n.kind) {
        case Node::Kind::Empty:
            break;
        case Node::Kind::Set: {
            Inst i;
            i.op = Op::Set;
            i.set = n.set;
            push(i);
            break;
        }
        case Node::Kind::Begin:
            push(Inst{Op::AssertBegin, {}, 0, 0});
            break;
        case Node::Kind::End:
            push(Inst{Op::AssertEnd, {}, 0, 0});
            break;
        case Node::Kind::Concat:
            for (const auto& c : n.children)
                emit(*c);
            break;
        case Node::Kind::Alt: {
            std::vector<std::size_t> jumps;
            for (std::size_t k = 0; k < n.children.size(); ++k) {
                if (k + 1 < n.children.size()) {
                    const std::size_t split = push(Inst{Op::Split, {}, 0, 0});
                    prog_[split].x = prog_.size();
                    emit(*n.children[k]);
                    jumps.push_back(push(Inst{Op::Jump, {}, 0, 0}));
                    prog_[split].y = prog_.size();
                } else {
                    emit(*n.children[k]);
                }
            }
            for (auto j : jumps)
                prog_[j].x = prog_.size();
            break;
        }
        case Node::Kind::Repeat: {
            const Node& child = *n.children.front();
            for (int k = 0; k < n.min; ++k)
                emit(child);
            if (n.max == unbounded) {
                const std::size_t split = push(Inst{Op::Split, {}, 0, 0});
                prog_[split].x = prog_.size();
                emit(child);
                push(Inst{Op::Jump, {}, split, 0});
                prog_[split].y = prog_.size();
            } else {
                std::vector<std::size_t> splits;
                for (int k = n.min; k < n.max; ++k) {
                    const std::size_t split = push(Inst{Op::Split, {}, 0, 0});
                    prog_[split].x = prog_.size();
                    splits.push_back(split);
                    emit(child);
                }
                for (auto s : splits)
                    prog_[s].y = prog_.size();
            }
            break;
        }
        }
    }

    std::size_t push(const Inst& i)
    {
        if (prog_.size() >= max_program)
            throw RegexError("pattern too large", 0);
        prog_.push_back(i);
        return prog_.size() - 1;
    }

private:
    std::vector<Inst>& prog_;
};

Pattern Pattern::compile(std::string_view source)
{
    Parser parser(source);
    NodePtr root = parser.parse();
    Pattern p;
    p.source_ = std::string(source);
    Compiler compiler(p.program_);
    compiler.emit(*root);
    compiler.push(Inst{Op::Match, {}, 0, 0});
    return p;
}

bool Pattern::full_match(std::string_view text) const
{
    const std::size_t n = program_.size();
    std::vector<std::size_t> current;
    std::vector<std::size_t> next;
    std::vector<std::size_t> mark(n, static_cast<std::size_t>(-1));
    std::vector<std::size_t> stack;
    current.reserve(n);
    next.reserve(n);

    // Epsilon closure of pc at input position pos, deduplicated per step.
    auto add = [&](std::vector<std::size_t>& list, std::size_t pc, std::size_t pos,
                   std::size_t generation) {
        stack.push_back(pc);
        while (!stack.empty()) {
            const std::size_t at = stack.back();
            stack.pop_back();
            if (mark[at] == generation)
                continue;
            mark[at] = generation;
            const Inst& inst = program_[at];
            switch (inst.op) {
            case Op::Jump:
                stack.push_back(inst.x);
                break;
            case Op::Split:
                stack.push_back(inst.y);
                stack.push_back(inst.x);
                break;
            case Op::AssertBegin:
                if (pos == 0)
                    stack.push_back(at + 1);
                break;
            case Op::AssertEnd:
                if (pos == text.size())
                    stack.push_back(at + 1);
                break;
            case Op::Set:
            case Op::Match:
                list.push_back(at);
                break;
            }
        }
    };

    add(current, 0, 0, 0);
    for (std::size_t pos = 0; pos < text.size(); ++pos) {
        next.clear();
        const auto ch = static_cast<unsigned char>(text[pos]);
        for (auto pc : current) {
            const Inst& inst = program_[pc];
            if (inst.op == Op::Set && inst.set.test(ch))
                add(next, pc + 1, pos + 1, pos + 1);
        }
        std::swap(current, next);
        if (current.empty())
            return false;
    }
    for (auto pc : current)
        if (program_[pc].op == Op::Match)
            return true;
    return false;
}

} // namespace parma::regex
