#include <charconv>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "wamgc/harness.hpp"

namespace wamgc::harness {

namespace {

template <typename T> T parse_number(const std::string &tok, std::size_t line, const char *what) {
    T v{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw ParseError(line, std::string("bad ") + what + " '" + tok + "'");
    }
    return v;
}

Command parse_line(const std::vector<std::string> &t, std::size_t line) {
    const std::string &op = t[0];
    auto want = [&](std::size_t n) {
        if (t.size() != n + 1) {
            throw ParseError(line, "'" + op + "' takes " + std::to_string(n) + " operand(s), got " +
                                       std::to_string(t.size() - 1));
        }
    };
    if (op == "var") {
        want(1);
        return cmd::Var{t[1]};
    }
    if (op == "int") {
        want(2);
        return cmd::Int{t[1], parse_number<std::int64_t>(t[2], line, "integer")};
    }
    if (op == "struct") {
        if (t.size() < 3) {
            throw ParseError(line, "'struct' needs a name and a functor");
        }
        return cmd::Struct{t[1], t[2], std::vector<std::string>(t.begin() + 3, t.end())};
    }
    if (op == "list") {
        want(3);
        return cmd::List{t[1], t[2], t[3]};
    }
    if (op == "bind") {
        want(2);
        return cmd::Bind{t[1], t[2]};
    }
    if (op == "unify") {
        want(2);
        return cmd::Unify{t[1], t[2]};
    }
    if (op == "setreg") {
        want(2);
        auto idx = parse_number<std::size_t>(t[1], line, "register index");
        if (idx >= kNumRegisters) {
            throw ParseError(line, "register index " + t[1] + " out of range");
        }
        return cmd::SetReg{idx, t[2]};
    }
    if (op == "cp") {
        want(1);
        return cmd::Cp{t[1]};
    }
    if (op == "bt") {
        want(1);
        return cmd::Bt{t[1]};
    }
    if (op == "cut") {
        want(1);
        return cmd::Cut{t[1]};
    }
    if (op == "gc") {
        want(0);
        return cmd::ForceGc{};
    }
    if (op == "checkpoint") {
        want(0);
        return cmd::Checkpoint{};
    }
    throw ParseError(line, "unknown command '" + op + "'");
}

} // namespace

std::vector<Command> parse_trace(std::istream &in) {
    std::vector<Command> out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (auto hash = text.find('#'); hash != std::string::npos) {
            text.erase(hash);
        }
        std::istringstream ss(text);
        std::vector<std::string> tokens;
        for (std::string tok; ss >> tok;) {
            tokens.push_back(tok);
        }
        if (!tokens.empty()) {
            out.push_back(parse_line(tokens, line));
        }
    }
    return out;
}

std::vector<Command> parse_trace(const std::string &text) {
    std::istringstream in(text);
    return parse_trace(in);
}

std::string format_command(const Command &c) {
    struct Visitor {
        std::string operator()(const cmd::Var &v) const { return "var " + v.name; }
        std::string operator()(const cmd::Int &v) const { return "int " + v.name + " " + std::to_string(v.value); }
        std::string operator()(const cmd::Struct &v) const {
            std::string s = "struct " + v.name + " " + v.functor;
            for (const auto &a : v.args) {
                s += " " + a;
            }
            return s;
        }
        std::string operator()(const cmd::List &v) const { return "list " + v.name + " " + v.head + " " + v.tail; }
        std::string operator()(const cmd::Bind &v) const { return "bind " + v.a + " " + v.b; }
        std::string operator()(const cmd::Unify &v) const { return "unify " + v.a + " " + v.b; }
        std::string operator()(const cmd::SetReg &v) const {
            return "setreg " + std::to_string(v.index) + " " + v.name;
        }
        std::string operator()(const cmd::Cp &v) const { return "cp " + v.label; }
        std::string operator()(const cmd::Bt &v) const { return "bt " + v.label; }
        std::string operator()(const cmd::Cut &v) const { return "cut " + v.label; }
        std::string operator()(const cmd::ForceGc &) const { return "gc"; }
        std::string operator()(const cmd::Checkpoint &) const { return "checkpoint"; }
    };
    return std::visit(Visitor{}, c);
}

std::string format_trace(const std::vector<Command> &commands) {
    std::string out;
    for (const Command &c : commands) {
        out += format_command(c);
        out += '\n';
    }
    return out;
}

} // namespace wamgc::harness
