#include "wamgc/oracle.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <utility>

namespace wamgc::oracle {

namespace {

enum Token : std::int64_t {
    kRoot = -1,
    kNewVar = -2,
    kOldVar = -3,
    kInt = -4,
    kAtom = -5,
    kNewStruct = -6,
    kOldStruct = -7,
    kNewList = -8,
    kOldList = -9,
};

class Encoder {
public:
    Encoder(const Heap &heap, Snapshot &out) : heap_(heap), out_(out) {}

    void set_unbound(const std::unordered_set<Address> *unbound) { unbound_ = unbound; }

    void root(Cell v) {
        out_.tokens.push_back(kRoot);
        std::vector<Cell> stack{v};
        while (!stack.empty()) {
            Cell c = stack.back();
            stack.pop_back();
            node(deref(c), stack);
        }
    }

private:
    Cell cell_at(Address a) const {
        if (unbound_ && unbound_->contains(a)) {
            return Cell::ref(a);
        }
        return heap_.at(a);
    }

    Cell deref(Cell v) const {
        while (v.tag == Tag::Ref) {
            Cell c = cell_at(v.address());
            if (c.is_unbound_at(v.address())) {
                return v;
            }
            if (c.tag == Tag::Forward || c.tag == Tag::Functor) {
                throw Fault(FaultKind::Corruption, "reference to " + to_string(c));
            }
            v = c;
        }
        return v;
    }

    bool seen(std::unordered_map<std::uint64_t, std::int64_t> &ids, Address a, Token fresh, Token old) {
        auto [it, inserted] = ids.try_emplace(a.value, next_);
        if (inserted) {
            ++next_;
            out_.tokens.push_back(fresh);
            return false;
        }
        out_.tokens.push_back(old);
        out_.tokens.push_back(it->second);
        return true;
    }

    void node(Cell v, std::vector<Cell> &stack) {
        switch (v.tag) {
        case Tag::Ref:
            seen(vars_, v.address(), kNewVar, kOldVar);
            return;
        case Tag::Int:
            out_.tokens.push_back(kInt);
            out_.tokens.push_back(v.int_value());
            return;
        case Tag::Atom:
            out_.tokens.push_back(kAtom);
            out_.tokens.push_back(v.symbol());
            return;
        case Tag::Struct: {
            Address p = v.address();
            if (seen(structs_, p, kNewStruct, kOldStruct)) {
                return;
            }
            Cell header = cell_at(p);
            if (header.tag != Tag::Functor) {
                throw Fault(FaultKind::Corruption, "structure without functor header at " + std::to_string(p.value));
            }
            out_.tokens.push_back(header.symbol());
            out_.tokens.push_back(header.arity);
            for (std::uint32_t i = header.arity; i > 0; --i) {
                stack.push_back(Cell::ref(p + i));
            }
            return;
        }
        case Tag::List: {
            Address p = v.address();
            if (seen(lists_, p, kNewList, kOldList)) {
                return;
            }
            stack.push_back(Cell::ref(p + 1));
            stack.push_back(Cell::ref(p));
            return;
        }
        default:
            throw Fault(FaultKind::Corruption, std::string("snapshot met a ") + tag_name(v.tag) + " value");
        }
    }

    const Heap &heap_;
    Snapshot &out_;
    const std::unordered_set<Address> *unbound_ = nullptr;
    std::unordered_map<std::uint64_t, std::int64_t> vars_, structs_, lists_;
    std::int64_t next_ = 0;
};

template <typename F> void for_each_frame_slot(const Machine &m, std::size_t frame, F &&f) {
    for (; frame != kNoFrame; frame = m.frames()[frame].parent) {
        for (const Cell &c : m.frames()[frame].slots) {
            f(c);
        }
    }
}

void encode_view(const Machine &m, std::size_t k, Snapshot &out) {
    const auto &cps = m.choicepoints();
    Encoder enc(m.heap(), out);
    if (k >= cps.size()) {
        for (const Cell &r : m.registers()) {
            enc.root(r);
        }
        for_each_frame_slot(m, m.current_env(), [&](const Cell &c) { enc.root(c); });
        return;
    }
    const ChoicePoint &cp = cps[k];
    std::unordered_set<Address> unbound(m.trail().begin() + static_cast<std::ptrdiff_t>(cp.saved_trail_top),
                                        m.trail().end());
    enc.set_unbound(&unbound);
    for (const Cell &r : cp.saved_registers) {
        enc.root(r);
    }
    for_each_frame_slot(m, cp.saved_env, [&](const Cell &c) { enc.root(c); });
}

} // namespace

std::string Snapshot::describe(std::size_t max_tokens) const {
    std::string s = std::to_string(tokens.size()) + " tokens:";
    for (std::size_t i = 0; i < tokens.size() && i < max_tokens; ++i) {
        s += ' ' + std::to_string(tokens[i]);
    }
    if (tokens.size() > max_tokens) {
        s += " ...";
    }
    return s;
}

Snapshot full_snapshot(const Machine &m) {
    Snapshot out;
    Encoder enc(m.heap(), out);
    for (const Cell &r : m.registers()) {
        enc.root(r);
    }
    for_each_frame_slot(m, m.current_env(), [&](const Cell &c) { enc.root(c); });
    for (const ChoicePoint &cp : m.choicepoints()) {
        for (const Cell &r : cp.saved_registers) {
            enc.root(r);
        }
        for_each_frame_slot(m, cp.saved_env, [&](const Cell &c) { enc.root(c); });
    }
    for (Address a : m.trail()) {
        enc.root(Cell::ref(a));
    }
    return out;
}

Snapshot continuation_snapshot(const Machine &m, std::size_t k) {
    Snapshot out;
    encode_view(m, k, out);
    return out;
}

Snapshot continuations_snapshot(const Machine &m) {
    Snapshot out;
    std::size_t n = m.choicepoints().size();
    for (std::size_t k = n + 1; k > 0; --k) {
        encode_view(m, k - 1, out);
        out.tokens.push_back(kRoot);
    }
    return out;
}

std::unordered_set<Address> reachable_cells(const Machine &m) {
    const Heap &heap = m.heap();
    std::unordered_set<Address> seen;
    std::vector<Cell> stack;
    auto root = [&](const Cell &c) { stack.push_back(c); };
    for (const Cell &r : m.registers()) {
        root(r);
    }
    for_each_frame_slot(m, m.current_env(), root);
    for (const ChoicePoint &cp : m.choicepoints()) {
        for (const Cell &r : cp.saved_registers) {
            root(r);
        }
        for_each_frame_slot(m, cp.saved_env, root);
    }
    for (Address a : m.trail()) {
        root(Cell::ref(a));
    }
    auto visit = [&](Address a) {
        if (seen.insert(a).second) {
            stack.push_back(heap.at(a));
        }
    };
    while (!stack.empty()) {
        Cell v = stack.back();
        stack.pop_back();
        switch (v.tag) {
        case Tag::Ref:
            visit(v.address());
            break;
        case Tag::List:
            visit(v.address());
            visit(v.address() + 1);
            break;
        case Tag::Struct: {
            Address p = v.address();
            if (seen.insert(p).second) {
                std::uint32_t n = heap.at(p).arity;
                for (std::uint32_t i = 1; i <= n; ++i) {
                    visit(p + i);
                }
            }
            break;
        }
        default:
            break;
        }
    }
    return seen;
}

bool reachable(const Machine &m, Address a) { return reachable_cells(m).contains(a); }

std::vector<Address> missing_remset_entries(const Machine &m, bool reachable_only) {
    const Heap &heap = m.heap();
    std::set<std::pair<std::uint64_t, BlockId>> recorded;
    for (const auto &[key, stack] : m.remsets().sets()) {
        for (const RemEntry &e : stack) {
            if (e.kind != EntryKind::GcTop) {
                recorded.emplace(e.addr.value, key.target);
            }
        }
    }
    std::unordered_set<Address> live;
    if (reachable_only) {
        live = reachable_cells(m);
    }
    std::vector<Address> missing;
    for (BlockId b : heap.chain()) {
        const HeapBlock &blk = heap.block(b);
        Address top = b == heap.current() ? heap.h() : blk.free_top;
        for (Address s = blk.base; s < top; s = s + 1) {
            const Cell &c = heap.at(s);
            if (!c.is_pointer() || heap.same_block(s, c.address())) {
                continue;
            }
            if (reachable_only && !live.contains(s)) {
                continue;
            }
            BlockId target = heap.block_of(c.address());
            if (!heap.is_active(target) || !recorded.contains({s.value, target})) {
                missing.push_back(s);
            }
        }
    }
    return missing;
}

std::vector<std::string> unsafe_remset_entries(const Machine &m) {
    const Heap &heap = m.heap();
    std::vector<std::string> bad;
    for (const auto &[key, stack] : m.remsets().sets()) {
        std::string set = "(" + std::to_string(key.source) + "," + std::to_string(key.target) + ")";
        if (!heap.is_active(key.source) || !heap.is_active(key.target)) {
            bad.push_back("set " + set + " names a freed block");
            continue;
        }
        for (const RemEntry &e : stack) {
            if (e.kind == EntryKind::GcTop) {
                continue;
            }
            if (heap.block_of(e.addr) != key.source) {
                bad.push_back("entry " + std::to_string(e.addr.value) + " outside source block of " + set);
            } else if (key.source == heap.current() && e.addr >= heap.h()) {
                bad.push_back("entry " + std::to_string(e.addr.value) + " at or above H in " + set);
            }
        }
    }
    return bad;
}

FlatTrailOracle::FlatTrailOracle(Machine &m) : m_(m) {
    Machine::Hooks &h = m_.hooks();
    h.on_alloc = [this, prev = h.on_alloc](Address a, std::uint64_t n) {
        for (std::uint64_t i = 0; i < n; ++i) {
            flat_[a.value + i] = flat_h_ + i;
        }
        flat_h_ += n;
        if (prev) {
            prev(a, n);
        }
    };
    h.on_choicepoint = [this, prev = h.on_choicepoint](const ChoicePoint &cp) {
        flat_bh_.resize(m_.choicepoints().size() - 1);
        flat_bh_.push_back(flat_h_);
        if (prev) {
            prev(cp);
        }
    };
    h.on_backtrack = [this, prev = h.on_backtrack](const std::string &label) {
        std::size_t idx = m_.choicepoints().size();
        flat_h_ = flat_bh_.at(idx);
        flat_bh_.resize(idx);
        if (prev) {
            prev(label);
        }
    };
    h.on_bind = [this, prev = h.on_bind](Address a, bool trailed) {
        flat_bh_.resize(std::min(flat_bh_.size(), m_.choicepoints().size()));
        bool flat = !flat_bh_.empty() && flat_.at(a.value) < flat_bh_.back();
        decisions_.push_back(Decision{a, trailed, flat});
        if (prev) {
            prev(a, trailed);
        }
    };
}

std::size_t FlatTrailOracle::mismatches() const {
    return static_cast<std::size_t>(
        std::count_if(decisions_.begin(), decisions_.end(), [](const Decision &d) { return d.machine != d.flat; }));
}

namespace {

const Term &walk(const Term &t, const Substitution &s) {
    const Term *cur = &t;
    while (cur->kind == Term::Kind::Var) {
        auto it = s.find(cur->value);
        if (it == s.end()) {
            break;
        }
        cur = &it->second;
    }
    return *cur;
}

} // namespace

std::optional<Substitution> unify(const Term &a, const Term &b) {
    Substitution s;
    std::vector<std::pair<Term, Term>> todo{{a, b}};
    while (!todo.empty()) {
        auto [x0, y0] = std::move(todo.back());
        todo.pop_back();
        Term x = walk(x0, s);
        Term y = walk(y0, s);
        if (x.kind == Term::Kind::Var && y.kind == Term::Kind::Var && x.value == y.value) {
            continue;
        }
        if (x.kind == Term::Kind::Var) {
            s[x.value] = y;
            continue;
        }
        if (y.kind == Term::Kind::Var) {
            s[y.value] = x;
            continue;
        }
        if (x.kind != y.kind) {
            return std::nullopt;
        }
        switch (x.kind) {
        case Term::Kind::Int:
            if (x.value != y.value) {
                return std::nullopt;
            }
            break;
        case Term::Kind::Atom:
            if (x.functor != y.functor) {
                return std::nullopt;
            }
            break;
        case Term::Kind::Struct:
            if (x.functor != y.functor || x.args.size() != y.args.size()) {
                return std::nullopt;
            }
            for (std::size_t i = 0; i < x.args.size(); ++i) {
                todo.emplace_back(x.args[i], y.args[i]);
            }
            break;
        case Term::Kind::Var:
            break;
        }
    }
    return s;
}

Term resolve(const Term &t, const Substitution &s) {
    const Term &w = walk(t, s);
    if (w.kind != Term::Kind::Struct) {
        return w;
    }
    Term out = Term::compound(w.functor, {});
    for (const Term &arg : w.args) {
        out.args.push_back(resolve(arg, s));
    }
    return out;
}

Cell build(Machine &m, const Term &t, std::map<std::int64_t, Address> &vars) {
    switch (t.kind) {
    case Term::Kind::Var: {
        auto it = vars.find(t.value);
        if (it == vars.end()) {
            it = vars.emplace(t.value, m.new_var()).first;
        }
        return Cell::ref(it->second);
    }
    case Term::Kind::Int:
        return Cell::integer(t.value);
    case Term::Kind::Atom:
        return Cell::atom(m.intern(t.functor));
    case Term::Kind::Struct: {
        std::vector<Cell> args;
        for (const Term &a : t.args) {
            args.push_back(build(m, a, vars));
        }
        if (t.functor == "." && args.size() == 2) {
            return m.make_list(args[0], args[1]);
        }
        return m.make_struct(m.intern(t.functor), args);
    }
    }
    return Cell{};
}

Term read_back(const Machine &m, Cell v) {
    v = m.deref(v);
    switch (v.tag) {
    case Tag::Ref:
        return Term::var(static_cast<std::int64_t>(v.address().value));
    case Tag::Int:
        return Term::integer(v.int_value());
    case Tag::Atom:
        return Term::atom(m.symbol_name(v.symbol()));
    case Tag::List:
        return Term::cons(read_back(m, Cell::ref(v.address())), read_back(m, Cell::ref(v.address() + 1)));
    case Tag::Struct: {
        const Cell &h = m.heap().at(v.address());
        Term out = Term::compound(m.symbol_name(h.symbol()), {});
        for (std::uint32_t i = 1; i <= h.arity; ++i) {
            out.args.push_back(read_back(m, Cell::ref(v.address() + i)));
        }
        return out;
    }
    default:
        throw Fault(FaultKind::Corruption, std::string("read_back met a ") + tag_name(v.tag) + " value");
    }
}

} // namespace wamgc::oracle
