#include <doctest.h>

#include <random>
#include <vector>

#include "wamgc/machine.hpp"
#include "wamgc/oracle.hpp"

using namespace wamgc;

namespace {

MachineConfig quiet(std::uint64_t block_size = 1024) {
    MachineConfig c;
    c.heap.block_size = block_size;
    c.heap.address_limit = 256 * block_size;
    c.policy.auto_gc = false;
    return c;
}

} // namespace

TEST_CASE("new_var allocates self references at consecutive addresses") {
    Machine m(quiet());
    Address h0 = m.heap().h();
    Address a = m.new_var();
    Address b = m.new_var();
    CHECK(a == h0);
    CHECK(m.heap().at(a) == Cell::ref(a));
    CHECK(b == a + 1);

    m.push_choicepoint("c");
    Address x = m.new_var();
    m.backtrack();
    CHECK(m.new_var() == x);
}

TEST_CASE("make_struct lays out a header followed by its arguments") {
    Machine m(quiet());
    std::uint32_t f = m.intern("f");
    Cell a = Cell::atom(m.intern("a"));
    Cell s = m.make_struct(f, std::vector<Cell>{a});
    REQUIRE(s.tag == Tag::Struct);
    CHECK(m.heap().at(s.address()) == Cell::functor(f, 1));
    CHECK(m.heap().at(s.address() + 1) == a);

    Address before = m.heap().h();
    Cell g = m.make_struct(m.intern("g"), {});
    CHECK(m.heap().h() == before + 1);
    CHECK(m.heap().at(g.address()).arity == 0);

    Cell outer = m.make_struct(f, std::vector<Cell>{s});
    CHECK(m.heap().at(outer.address() + 1) == s);
}

TEST_CASE("make_list allocates exactly two cells") {
    Machine m(quiet());
    Cell x = Cell::integer(1);
    Cell y = Cell::atom(m.intern("nil"));
    Address before = m.heap().h();
    Cell l = m.make_list(x, y);
    CHECK(m.heap().h() == before + 2);
    CHECK(m.heap().at(l.address()) == x);
    CHECK(m.heap().at(l.address() + 1) == y);
    // Shared pairs: several list values may point at the same pair.
    m.set_reg(0, l);
    m.set_reg(1, l);
    CHECK(m.reg(0) == m.reg(1));
}

TEST_CASE("deref follows reference chains") {
    Machine m(quiet());
    Address a = m.new_var();
    Address b = m.new_var();
    m.bind(b, Cell::integer(3));
    m.heap().at(a) = Cell::ref(b);
    CHECK(m.deref(Cell::ref(a)) == Cell::integer(3));
    Address u = m.new_var();
    CHECK(m.deref(Cell::ref(u)) == Cell::ref(u));
    CHECK(m.deref(Cell::integer(7)) == Cell::integer(7));
}

TEST_CASE("cond_trail follows the block-aware age test") {
    Machine m(quiet());
    Address old_var = m.new_var();
    SUBCASE("no choice point") {
        m.cond_trail(old_var);
        CHECK(m.trail().empty());
    }
    SUBCASE("same block, below BH") {
        m.push_choicepoint("c");
        Address young = m.new_var();
        m.cond_trail(old_var);
        m.cond_trail(young);
        CHECK(m.trail() == std::vector<Address>{old_var});
    }
    SUBCASE("across blocks") {
        m.heap().expand();
        m.heap().expand();
        m.push_choicepoint("c");
        BlockId bh_block = m.heap().block_of(*m.bh());
        CHECK(m.heap().block(m.heap().block_of(old_var)).timestamp < m.heap().block(bh_block).timestamp);
        m.cond_trail(old_var);
        CHECK(m.trail().size() == 1);
        m.heap().expand();
        Address newer = m.new_var();
        m.cond_trail(newer);
        CHECK(m.trail().size() == 1);
    }
}

TEST_CASE("bind points the younger variable at the older one") {
    Machine m(quiet());
    Address a = m.new_var();
    Address b = m.new_var();
    m.bind(a, Cell::ref(b));
    CHECK(m.heap().at(a) == Cell::ref(a));
    CHECK(m.heap().at(b) == Cell::ref(a));

    Address c = m.new_var();
    m.bind(c, Cell::integer(5));
    CHECK(m.trail().empty());
    CHECK_THROWS_AS(m.bind(c, Cell::integer(6)), Fault);
}

TEST_CASE("a binding across blocks creates a remembered-set entry") {
    Machine m(quiet());
    Address old_var = m.new_var();
    m.heap().expand();
    Cell young = m.make_list(Cell::integer(1), Cell::integer(2));
    m.bind(old_var, young);
    BlockId s = m.heap().block_of(old_var);
    BlockId t = m.heap().block_of(young.address());
    const auto *set = m.remsets().find({s, t});
    REQUIRE(set != nullptr);
    CHECK(set->back() == RemEntry{old_var, EntryKind::Normal});
}

TEST_CASE("unify") {
    Machine m(quiet());
    std::uint32_t f = m.intern("f");
    Cell a = Cell::atom(m.intern("a"));
    Address x = m.new_var();
    Cell fx = m.make_struct(f, std::vector<Cell>{Cell::ref(x)});
    Cell fa = m.make_struct(f, std::vector<Cell>{a});
    CHECK(m.unify(fx, fa));
    CHECK(m.deref(Cell::ref(x)) == a);
    CHECK_FALSE(m.unify(Cell::integer(1), Cell::integer(2)));

    // [X|T] = [a]
    Address hx = m.new_var();
    Address tl = m.new_var();
    Cell nil = Cell::atom(m.intern("[]"));
    Cell pattern = m.make_list(Cell::ref(hx), Cell::ref(tl));
    Cell one = m.make_list(a, nil);
    CHECK(m.unify(pattern, one));
    CHECK(m.deref(Cell::ref(hx)) == a);
    CHECK(m.deref(Cell::ref(tl)) == nil);
}

TEST_CASE("push_choicepoint snapshots the machine state") {
    Machine m(quiet());
    m.push_frame(2);
    m.set_reg(3, Cell::integer(9));
    Address v = m.new_var();
    m.push_choicepoint("outer");
    m.bind(v, Cell::integer(1));
    m.push_choicepoint("inner");
    const ChoicePoint &outer = m.choicepoints()[0];
    const ChoicePoint &inner = m.choicepoints()[1];
    CHECK(outer.saved_h == v + 1);
    CHECK(outer.saved_trail_top == 0);
    CHECK(outer.saved_registers[3] == Cell::integer(9));
    CHECK(outer.saved_env == m.current_env());
    CHECK(inner.saved_trail_top == 1);
    CHECK(inner.label == "inner");
    CHECK_FALSE(inner.collected);
}

TEST_CASE("backtrack unbinds and reclaims") {
    Machine m(quiet(256));
    Address v = m.new_var();
    m.push_choicepoint("c");
    m.bind(v, Cell::integer(1));
    CHECK(m.trail().size() == 1);

    SUBCASE("binding undone") {
        m.backtrack();
        CHECK(m.heap().at(v) == Cell::ref(v));
        CHECK(m.trail().empty());
    }
    SUBCASE("segment spread over several blocks") {
        BlockId home = m.heap().current();
        std::size_t free_before = m.heap().free_list().size();
        for (int i = 0; i < 300; ++i) {
            m.make_list(Cell::integer(i), Cell::integer(i));
        }
        CHECK(m.heap().active_blocks() == 4);
        m.backtrack();
        CHECK(m.heap().current() == home);
        CHECK(m.heap().free_list().size() == free_before + 3);
    }
    CHECK_THROWS_AS(m.backtrack(), Fault);
}

TEST_CASE("backtracking over an inter-block reference removes its entry") {
    // X and Y are allocated after the choice point; X holds a reference into
    // an older block. Reclaiming them must also drop the entry for X.
    Machine m(quiet(256));
    Cell old_pair = m.make_list(Cell::integer(1), Cell::integer(2));
    m.heap().expand();
    m.push_choicepoint("c");
    Address x = m.new_var();
    m.new_var();
    m.bind(x, old_pair);
    BlockId s = m.heap().block_of(x);
    BlockId t = m.heap().block_of(old_pair.address());
    REQUIRE(m.remsets().find({s, t}) != nullptr);
    m.backtrack();
    CHECK(m.remsets().find({s, t}) == nullptr);
    CHECK(oracle::unsafe_remset_entries(m).empty());
}

TEST_CASE("cut_and_tidy") {
    Machine m(quiet());
    Address a = m.new_var();
    m.push_choicepoint("outer");
    Address b = m.new_var();
    m.push_choicepoint("inner");
    m.bind(a, Cell::integer(1));
    m.bind(b, Cell::integer(2));
    REQUIRE(m.trail().size() == 2);

    SUBCASE("removing the only remaining choice point empties the trail") {
        m.cut_and_tidy("outer");
        CHECK(m.choicepoints().empty());
        CHECK(m.trail().empty());
    }
    SUBCASE("entries younger than the surviving BH are dropped") {
        m.cut_and_tidy("inner");
        REQUIRE(m.choicepoints().size() == 1);
        CHECK(m.trail() == std::vector<Address>{a});
    }
    CHECK_THROWS_AS(m.cut_and_tidy("missing"), Fault);
}

TEST_CASE("cut keeps exactly the entries a fresh trailing pass would keep") {
    std::mt19937_64 rng(11);
    for (int round = 0; round < 50; ++round) {
        Machine m(quiet(128));
        std::vector<Address> vars;
        int depth = 0;
        for (int step = 0; step < 200; ++step) {
            int op = std::uniform_int_distribution<int>(0, 5)(rng);
            if (op <= 1 || vars.empty()) {
                vars.push_back(m.new_var());
            } else if (op == 2 && depth < 6) {
                m.push_choicepoint("c" + std::to_string(depth++));
            } else {
                Address v = vars[std::uniform_int_distribution<std::size_t>(0, vars.size() - 1)(rng)];
                if (m.heap().at(v).is_unbound_at(v)) {
                    m.bind(v, Cell::integer(step));
                }
            }
        }
        if (depth < 2) {
            continue;
        }
        int keep = std::uniform_int_distribution<int>(0, depth - 2)(rng);
        std::vector<Address> before = m.trail();
        m.cut_and_tidy("c" + std::to_string(keep + 1));
        std::vector<Address> expected;
        for (Address a : before) {
            if (m.would_trail(a)) {
                expected.push_back(a);
            }
        }
        REQUIRE(m.trail() == expected);
    }
}

TEST_CASE("environment frames protected by a choice point are copied on write") {
    Machine m(quiet());
    m.push_frame(2);
    m.set_env_slot(0, Cell::integer(1));
    m.push_choicepoint("c");
    std::size_t env_at_cp = m.current_env();
    m.set_env_slot(0, Cell::integer(2));
    CHECK(m.env_slot(0) == Cell::integer(2));
    CHECK(m.current_env() != env_at_cp);
    CHECK(m.frames()[env_at_cp].slots[0] == Cell::integer(1));
    m.backtrack();
    CHECK(m.env_slot(0) == Cell::integer(1));
}
