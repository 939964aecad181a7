#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "wamgc/machine.hpp"

namespace wamgc::harness {

namespace cmd {
struct Var {
    std::string name;
};
struct Int {
    std::string name;
    std::int64_t value = 0;
};
struct Struct {
    std::string name;
    std::string functor;
    std::vector<std::string> args;
};
struct List {
    std::string name;
    std::string head;
    std::string tail;
};
struct Bind {
    std::string a;
    std::string b;
};
struct Unify {
    std::string a;
    std::string b;
};
struct SetReg {
    std::size_t index = 0;
    std::string name;
};
struct Cp {
    std::string label;
};
struct Bt {
    std::string label;
};
struct Cut {
    std::string label;
};
struct ForceGc {};
struct Checkpoint {};
} // namespace cmd

using Command = std::variant<cmd::Var, cmd::Int, cmd::Struct, cmd::List, cmd::Bind, cmd::Unify, cmd::SetReg, cmd::Cp,
                             cmd::Bt, cmd::Cut, cmd::ForceGc, cmd::Checkpoint>;

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string &what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

std::vector<Command> parse_trace(std::istream &in);
std::vector<Command> parse_trace(const std::string &text);
std::string format_command(const Command &c);
std::string format_trace(const std::vector<Command> &commands);

const std::vector<std::string> &workload_names();
// Throws std::invalid_argument for an unknown name.
std::vector<Command> builtin_workload(const std::string &name, std::size_t scale, std::uint64_t seed);

enum class Check {
    Graph,
    Backtrack,
    RemsetSafety,
    RemsetCompleteness,
    CopyBound,
    Invariants,
};

const char *check_name(Check c);

class VerifyFailure : public std::runtime_error {
public:
    VerifyFailure(Check check, const std::string &what) : std::runtime_error(what), check_(check) {}
    Check check() const { return check_; }

private:
    Check check_;
};

struct RunConfig {
    MachineConfig machine;
    std::string workload = "trace";
    bool verify = false;
    bool timing = true;
    // Receives one JSON object per collection, one per line.
    std::ostream *gc_log = nullptr;
};

struct RunStats {
    std::string workload;
    std::string policy;
    std::uint64_t block_size = 0;
    std::uint64_t n_gc = 0;
    std::uint64_t t_gc_ns = 0;
    std::uint64_t t_tot_ns = 0;
    std::uint64_t t_l_ns = 0;
    std::uint64_t t_a_ns = 0;
    std::uint64_t t_u_ns = 0;
    // Pauses in deterministic work units.
    std::uint64_t w_gc = 0;
    std::uint64_t w_l = 0;
    double w_a = 0.0;
    std::uint64_t w_u = 0;
    std::uint64_t m_alloc_blocks = 0;
    std::uint64_t m_alloc_cells = 0;
    std::uint64_t m_hp = 0;
    std::uint64_t m_rs = 0;
    std::uint64_t double_copies = 0;
    std::uint64_t early_resets = 0;
    std::uint64_t trail_hwm = 0;
    std::uint64_t cells_allocated = 0;
    std::uint64_t cells_copied = 0;
    std::uint32_t max_copies_per_cell = 0;
    std::uint64_t commands = 0;
    std::uint64_t backtracks = 0;
    std::uint64_t unify_failures = 0;
    // Verification checks performed, by kind.
    std::uint64_t graph_checks = 0;
    std::uint64_t backtrack_checks = 0;
    std::uint64_t remset_safety_checks = 0;
    // Full remembered-set scans at checkpoints (completeness_checks) and after
    // collections (collection_scans).
    std::uint64_t completeness_checks = 0;
    std::uint64_t checkpoints = 0;
    std::uint64_t collection_scans = 0;
};

// Throws VerifyFailure when a verification check fails and Fault when the
// machine detects a broken invariant.
RunStats run(const RunConfig &config, const std::vector<Command> &commands);

std::string to_json(const RunStats &s);
std::string csv_header();
std::string to_csv_row(const RunStats &s);

} // namespace wamgc::harness
