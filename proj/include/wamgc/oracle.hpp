#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "wamgc/cell.hpp"
#include "wamgc/machine.hpp"

namespace wamgc::oracle {

// Address-free encoding of a term graph: nodes are numbered in first-visit
// order, so two heaps holding the same graph produce the same tokens.
struct Snapshot {
    std::vector<std::int64_t> tokens;

    bool operator==(const Snapshot &) const = default;
    std::string describe(std::size_t max_tokens = 64) const;
};

// Everything the machine can still reach: registers, the environment
// chain, every choice point's saved registers and environments, and the
// cells named by the trail.
Snapshot full_snapshot(const Machine &m);

// The state execution would see after backtracking to choice point k
// (k == number of choice points means the current state): its roots, with
// every cell trailed above its mark read as unbound.
Snapshot continuation_snapshot(const Machine &m, std::size_t k);

// The current view followed by every choice point's view, newest first.
Snapshot continuations_snapshot(const Machine &m);

// Addresses of all heap cells reachable from the full root set.
std::unordered_set<Address> reachable_cells(const Machine &m);
bool reachable(const Machine &m, Address a);

// Inter-block references in active heap cells that have no matching
// remembered-set entry. Only meaningful when the write barrier is on.
std::vector<Address> missing_remset_entries(const Machine &m, bool reachable_only = false);

// Remembered-set entries naming a freed block or a cell at or above H.
std::vector<std::string> unsafe_remset_entries(const Machine &m);

//
// Replays every allocation on a contiguous address line and applies the
// flat trailing condition to each binding the machine performs. Attach
// before running; compare decisions afterwards.
//
class FlatTrailOracle {
public:
    struct Decision {
        Address cell;
        bool machine = false;
        bool flat = false;
    };

    explicit FlatTrailOracle(Machine &m);

    const std::vector<Decision> &decisions() const { return decisions_; }
    std::size_t mismatches() const;

private:
    Machine &m_;
    std::map<std::uint64_t, std::uint64_t> flat_;
    std::uint64_t flat_h_ = 0;
    std::vector<std::uint64_t> flat_bh_;
    std::vector<Decision> decisions_;
};

// Tree terms and a textbook substitution-based unifier.
struct Term {
    enum class Kind { Var, Int, Atom, Struct } kind = Kind::Int;
    std::int64_t value = 0;
    std::string functor;
    std::vector<Term> args;

    static Term var(std::int64_t id) { return Term{Kind::Var, id, {}, {}}; }
    static Term integer(std::int64_t v) { return Term{Kind::Int, v, {}, {}}; }
    static Term atom(std::string name) { return Term{Kind::Atom, 0, std::move(name), {}}; }
    static Term compound(std::string f, std::vector<Term> args) {
        return Term{Kind::Struct, 0, std::move(f), std::move(args)};
    }
    // Lists use the functor "." with two arguments.
    static Term cons(Term head, Term tail) { return compound(".", {std::move(head), std::move(tail)}); }

    bool operator==(const Term &) const = default;
};

using Substitution = std::map<std::int64_t, Term>;

std::optional<Substitution> unify(const Term &a, const Term &b);
Term resolve(const Term &t, const Substitution &s);

// Builds a tree term on the machine heap; vars maps variable ids to cells.
Cell build(Machine &m, const Term &t, std::map<std::int64_t, Address> &vars);
// Reads a machine value back as a tree term; unbound cells become Var(address).
Term read_back(const Machine &m, Cell v);

} // namespace wamgc::oracle
