#include <algorithm>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "wamgc/harness.hpp"

namespace wamgc::harness {

namespace {

class Emitter {
public:
    Emitter(std::vector<Command> &out, std::uint64_t seed) : out_(out), rng_(seed) {}

    void var(const std::string &n) { out_.push_back(cmd::Var{n}); }
    void integer(const std::string &n, std::int64_t v) { out_.push_back(cmd::Int{n, v}); }
    void structure(const std::string &n, const std::string &f, std::vector<std::string> args) {
        out_.push_back(cmd::Struct{n, f, std::move(args)});
    }
    void list(const std::string &n, const std::string &h, const std::string &t) { out_.push_back(cmd::List{n, h, t}); }
    void bind(const std::string &a, const std::string &b) { out_.push_back(cmd::Bind{a, b}); }
    void unify(const std::string &a, const std::string &b) { out_.push_back(cmd::Unify{a, b}); }
    void setreg(std::size_t i, const std::string &n) { out_.push_back(cmd::SetReg{i, n}); }
    void cp(const std::string &l) { out_.push_back(cmd::Cp{l}); }
    void bt(const std::string &l) { out_.push_back(cmd::Bt{l}); }
    void cut(const std::string &l) { out_.push_back(cmd::Cut{l}); }
    void gc() { out_.push_back(cmd::ForceGc{}); }
    void checkpoint() { out_.push_back(cmd::Checkpoint{}); }

    std::size_t uniform(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    }
    bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }

private:
    std::vector<Command> &out_;
    std::mt19937_64 rng_;
};

class Generator {
public:
    Generator(Emitter &e, std::string prefix) : e_(e), p_(std::move(prefix)) {}
    virtual ~Generator() = default;
    virtual void init() = 0;
    virtual void step() = 0;

protected:
    std::string n(const std::string &s) const { return p_ + s; }
    std::string n(const std::string &s, std::size_t i) const { return p_ + s + std::to_string(i); }

    Emitter &e_;
    std::string p_;
    std::size_t step_ = 0;
};

// Short-lived lists with a small, slowly growing survivor list.
class ListBuilder : public Generator {
public:
    using Generator::Generator;

    void init() override {
        e_.integer(n("nil"), 0);
        e_.integer(n("v"), 0);
        e_.list(n("K"), n("v"), n("nil"));
        e_.setreg(0, n("K"));
    }

    void step() override {
        std::size_t i = step_++;
        e_.integer(n("v"), static_cast<std::int64_t>(i));
        std::size_t len = e_.uniform(4, 16);
        e_.list(n("T"), n("v"), n("nil"));
        for (std::size_t j = 1; j < len; ++j) {
            e_.list(n("T"), n("v"), n("T"));
        }
        e_.setreg(1, n("T"));
        if (i % 8 == 0) {
            e_.list(n("K"), n("v"), n("K"));
            e_.setreg(0, n("K"));
        }
        if (i % 256 == 255) {
            e_.list(n("K"), n("v"), n("nil"));
            e_.setreg(0, n("K"));
        }
        if (i % 64 == 63) {
            e_.checkpoint();
        }
    }
};

// A fixed number of long-lived trees, a few of which are rebuilt per wave.
class TreeRewriter : public Generator {
public:
    using Generator::Generator;
    static constexpr std::size_t kTrees = 12;

    void init() override {
        e_.integer(n("v"), 7);
        for (std::size_t k = 0; k < kTrees; ++k) {
            build(e_.uniform(2, 4), n("t", k));
        }
        e_.setreg(2, n("t", 0));
    }

    void step() override {
        std::size_t i = step_++;
        std::size_t waves = e_.uniform(1, 3);
        for (std::size_t w = 0; w < waves; ++w) {
            std::size_t k = e_.uniform(0, kTrees - 1);
            build(e_.uniform(2, 4), n("t", k));
        }
        if (e_.chance(0.3)) {
            std::size_t k = e_.uniform(0, kTrees - 1);
            e_.var(n("q"));
            e_.unify(n("q"), n("t", k));
            e_.setreg(3, n("q"));
        }
        if (e_.chance(0.2)) {
            // A pattern with a hole matched against an existing tree.
            std::size_t k = e_.uniform(0, kTrees - 1);
            e_.var(n("hl"));
            e_.var(n("hr"));
            e_.var(n("hv"));
            e_.structure(n("pat"), "node", {n("hl"), n("hv"), n("hr")});
            e_.unify(n("pat"), n("t", k));
        }
        if (i % 16 == 15) {
            e_.checkpoint();
        }
    }

private:
    void build(std::size_t depth, const std::string &target) {
        if (depth == 0) {
            e_.integer(target, static_cast<std::int64_t>(e_.uniform(0, 99)));
            return;
        }
        std::string l = n("L", depth);
        std::string r = n("R", depth);
        build(depth - 1, l);
        build(depth - 1, r);
        e_.structure(target, "node", {l, n("v"), r});
    }
};

// Rounds of nested choice points that bind older variables, drop the only
// forward reference to them, allocate garbage and then backtrack or cut.
class Backtracker : public Generator {
public:
    using Generator::Generator;

    void init() override {
        e_.integer(n("nil"), 0);
        e_.integer(n("v"), 1);
        e_.list(n("K"), n("v"), n("nil"));
    }

    void step() override {
        std::size_t r = step_++;
        std::string outer = n("c", r);
        std::size_t nv = e_.uniform(8, 24);
        for (std::size_t j = 0; j < nv; ++j) {
            e_.var(n("x", j));
        }
        e_.setreg(0, n("K"));
        e_.cp(outer);
        std::size_t levels = e_.uniform(1, 3);
        std::size_t next = 0;
        std::vector<std::string> inner;
        for (std::size_t lvl = 0; lvl < levels; ++lvl) {
            std::size_t count = std::min(nv - next, e_.uniform(2, nv / levels));
            for (std::size_t j = next; j < next + count; ++j) {
                e_.structure(n("s"), "f", {n("v"), n("K")});
                e_.bind(n("x", j), n("s"));
                // The binding stays on the trail but nothing in the forward
                // execution refers to the variable any more.
                e_.integer(n("x", j), 0);
            }
            next += count;
            if (next + 1 < nv && e_.chance(0.5)) {
                e_.bind(n("x", next), n("x", next + 1));
                next += 2;
            }
            std::size_t garbage = e_.uniform(20, 120);
            e_.list(n("G"), n("v"), n("nil"));
            for (std::size_t g = 1; g < garbage; ++g) {
                e_.list(n("G"), n("v"), n("G"));
            }
            if (e_.chance(0.5)) {
                e_.gc();
            }
            inner.push_back(n("c", r) + "_" + std::to_string(lvl));
            e_.cp(inner.back());
            e_.structure(n("s"), "g", {n("G")});
            e_.setreg(1, n("s"));
        }
        for (auto it = inner.rbegin(); it != inner.rend(); ++it) {
            if (e_.chance(0.6)) {
                e_.bt(*it);
            } else {
                e_.cut(*it);
            }
        }
        if (e_.chance(0.75)) {
            e_.bt(outer);
        } else {
            e_.cut(outer);
            e_.list(n("K"), n("v"), n("K"));
        }
        if (r % 64 == 63) {
            e_.list(n("K"), n("v"), n("nil"));
        }
        if (r % 8 == 7) {
            e_.checkpoint();
        }
    }
};

// New structures pointing at terms created at the start of the run, and
// bindings of old variables to new terms.
class OldRefs : public Generator {
public:
    using Generator::Generator;
    static constexpr std::size_t kOld = 128;

    void init() override {
        e_.integer(n("nil"), 0);
        e_.list(n("OL"), n("nil"), n("nil"));
        for (std::size_t k = 0; k < kOld; ++k) {
            e_.var(n("ov", k));
            e_.integer(n("v"), static_cast<std::int64_t>(k));
            e_.structure(n("o", k), "old", {n("ov", k), n("v")});
            e_.list(n("OL"), n("o", k), n("OL"));
        }
        e_.setreg(4, n("OL"));
        e_.list(n("W"), n("nil"), n("nil"));
    }

    void step() override {
        std::size_t i = step_++;
        std::size_t k = e_.uniform(0, kOld - 1);
        e_.structure(n("nw"), "f", {n("o", k), n("v")});
        e_.list(n("W"), n("nw"), n("W"));
        if (i % 64 == 63) {
            e_.list(n("W"), n("nw"), n("nil"));
        }
        e_.setreg(5, n("W"));
        if (i % 3 == 0 && bound_ < kOld) {
            e_.bind(n("ov", bound_), n("nw"));
            ++bound_;
        } else if (e_.chance(0.2)) {
            e_.var(n("px"));
            e_.structure(n("pat"), "old", {n("px"), n("v")});
            e_.unify(n("pat"), n("o", k));
        }
        if (i % 32 == 31) {
            e_.checkpoint();
        }
    }

private:
    std::size_t bound_ = 0;
};

std::unique_ptr<Generator> make_generator(const std::string &name, Emitter &e, const std::string &prefix) {
    if (name == "list_builder") {
        return std::make_unique<ListBuilder>(e, prefix);
    }
    if (name == "tree_rewriter") {
        return std::make_unique<TreeRewriter>(e, prefix);
    }
    if (name == "backtracker") {
        return std::make_unique<Backtracker>(e, prefix);
    }
    if (name == "old_refs") {
        return std::make_unique<OldRefs>(e, prefix);
    }
    return nullptr;
}

} // namespace

const std::vector<std::string> &workload_names() {
    static const std::vector<std::string> names{"list_builder", "tree_rewriter", "backtracker", "old_refs", "mixed"};
    return names;
}

std::vector<Command> builtin_workload(const std::string &name, std::size_t scale, std::uint64_t seed) {
    std::vector<Command> out;
    Emitter e(out, seed);
    if (name == "mixed") {
        std::vector<std::unique_ptr<Generator>> gens;
        gens.push_back(std::make_unique<ListBuilder>(e, "lb_"));
        gens.push_back(std::make_unique<TreeRewriter>(e, "tr_"));
        gens.push_back(std::make_unique<Backtracker>(e, "bk_"));
        gens.push_back(std::make_unique<OldRefs>(e, "or_"));
        for (auto &g : gens) {
            g->init();
        }
        for (std::size_t i = 0; i < scale; ++i) {
            gens[e.uniform(0, gens.size() - 1)]->step();
        }
        return out;
    }
    std::unique_ptr<Generator> g = make_generator(name, e, "");
    if (!g) {
        throw std::invalid_argument("unknown workload '" + name + "'");
    }
    g->init();
    for (std::size_t i = 0; i < scale; ++i) {
        g->step();
    }
    return out;
}

} // namespace wamgc::harness
