#include <doctest.h>

#include <vector>

#include "wamgc/heap.hpp"
#include "wamgc/remset.hpp"

using namespace wamgc;

namespace {

HeapConfig cfg() {
    HeapConfig c;
    c.block_size = 256;
    c.address_limit = 64 * 256;
    return c;
}

// Block A is older; block B is current and holds the source cells.
struct Fixture {
    Heap heap{cfg()};
    RememberedSets rs{heap};
    BlockId a = heap.current();
    Address target = heap.alloc(10);
    BlockId b = heap.expand();
    Address s0 = heap.alloc(50);
};

} // namespace

TEST_CASE("barrier records only inter-block pointers") {
    Fixture f;
    CHECK_FALSE(f.rs.barrier_record(f.s0, Cell::integer(3), false));
    CHECK_FALSE(f.rs.barrier_record(f.s0, Cell::ref(f.s0 + 4), false));
    CHECK(f.rs.barrier_record(f.s0, Cell::list(f.target), false));
    CHECK(f.rs.barrier_record(f.s0 + 1, Cell::structure(f.target), true));
    const auto *set = f.rs.find({f.b, f.a});
    REQUIRE(set != nullptr);
    CHECK(*set == std::vector<RemEntry>{{f.s0, EntryKind::Normal}, {f.s0 + 1, EntryKind::Gc}});
    CHECK(f.rs.entry_count() == 2);
    CHECK(f.rs.find({f.a, f.b}) == nullptr);
}

TEST_CASE("roots_for collects every source of a target and skips GcTop entries") {
    Fixture f;
    BlockId c = f.heap.expand();
    Address s1 = f.heap.alloc(5);
    f.rs.barrier_record(f.s0, Cell::ref(f.target), true);
    f.rs.append_gc_tops(f.s0 + 10);
    f.rs.barrier_record(s1, Cell::ref(f.target), false);
    f.rs.barrier_record(s1 + 1, Cell::ref(f.s0), false);
    auto roots = f.rs.roots_for(f.a);
    CHECK(roots.size() == 2);
    for (const RemEntry &e : roots) {
        CHECK(e.kind != EntryKind::GcTop);
    }
    CHECK(f.rs.roots_for(f.b) == std::vector<RemEntry>{{s1 + 1, EntryKind::Normal}});
    CHECK(f.rs.roots_for(c).empty());
}

TEST_CASE("drop_sets_of removes sets on either side of a block") {
    Fixture f;
    BlockId c = f.heap.expand();
    Address s1 = f.heap.alloc(5);
    f.rs.barrier_record(f.s0, Cell::ref(f.target), false);
    f.rs.barrier_record(s1, Cell::ref(f.s0), false);
    f.rs.barrier_record(s1 + 1, Cell::ref(f.target), false);
    f.rs.drop_sets_of(f.b);
    CHECK(f.rs.find({f.b, f.a}) == nullptr);
    CHECK(f.rs.find({c, f.b}) == nullptr);
    CHECK(f.rs.find({c, f.a}) != nullptr);
    CHECK(f.rs.entry_count() == 1);
}

TEST_CASE("untrail removes the trailed entry and everything pushed after it") {
    Fixture f;
    Cell v = Cell::ref(f.target);
    f.rs.barrier_record(f.s0, v, false);
    f.rs.barrier_record(f.s0 + 1, v, false);
    f.rs.barrier_record(f.s0 + 2, v, false);

    SUBCASE("middle entry") {
        f.rs.untrail_hook(f.s0 + 1, v);
        CHECK(*f.rs.find({f.b, f.a}) == std::vector<RemEntry>{{f.s0, EntryKind::Normal}});
        CHECK(f.rs.counters().untrail_removed == 2);
        CHECK(f.rs.entry_count() == 1);
    }
    SUBCASE("bottom entry empties the set") {
        f.rs.untrail_hook(f.s0, v);
        CHECK(f.rs.find({f.b, f.a}) == nullptr);
        CHECK(f.rs.entry_count() == 0);
    }
    SUBCASE("intra-block and atomic contents are ignored") {
        f.rs.untrail_hook(f.s0, Cell::integer(1));
        f.rs.untrail_hook(f.s0, Cell::ref(f.s0 + 3));
        CHECK(f.rs.entry_count() == 3);
    }
    SUBCASE("missing entry is counted, or faults in strict mode") {
        f.rs.untrail_hook(f.s0 + 7, v);
        CHECK(f.rs.counters().untrail_missing == 1);
        CHECK(f.rs.entry_count() == 3);
        f.rs.set_strict(true);
        CHECK_THROWS_AS(f.rs.untrail_hook(f.s0 + 7, v), Fault);
    }
}

TEST_CASE("untrail leaves a set alone once a collection has sealed it") {
    Fixture f;
    Cell v = Cell::ref(f.target);
    f.rs.barrier_record(f.s0, v, false);
    f.rs.barrier_record(f.s0 + 1, v, true);
    f.rs.append_gc_tops(f.s0 + 20);
    f.rs.untrail_hook(f.s0, v);
    CHECK(f.rs.find({f.b, f.a})->size() == 3);
}

TEST_CASE("append_gc_tops seals only the sets touched since the last call") {
    Fixture f;
    BlockId c = f.heap.expand();
    Address s1 = f.heap.alloc(5);
    f.rs.barrier_record(f.s0, Cell::ref(f.target), true);
    f.rs.barrier_record(s1, Cell::ref(f.target), false);
    f.rs.append_gc_tops(f.s0 + 30);
    CHECK(f.rs.find({f.b, f.a})->back() == RemEntry{f.s0 + 30, EntryKind::GcTop});
    CHECK(f.rs.find({c, f.a})->back().kind == EntryKind::Normal);
    std::size_t n = f.rs.entry_count();
    f.rs.append_gc_tops(f.s0 + 31);
    CHECK(f.rs.entry_count() == n);
}

TEST_CASE("post_backtrack_scan drops entries for reclaimed cells") {
    Fixture f;
    Cell v = Cell::ref(f.target);
    Address mark = f.s0 + 20;

    SUBCASE("normal entries above the new H") {
        f.rs.barrier_record(f.s0, v, false);
        f.rs.barrier_record(f.s0 + 25, v, false);
        f.rs.barrier_record(f.s0 + 30, v, false);
        f.rs.post_backtrack_scan(f.b, mark);
        CHECK(*f.rs.find({f.b, f.a}) == std::vector<RemEntry>{{f.s0, EntryKind::Normal}});
        CHECK(f.rs.counters().reclaimed_removed == 2);
    }
    SUBCASE("a Gc run whose top was passed is released") {
        f.rs.barrier_record(f.s0, v, true);
        f.rs.barrier_record(f.s0 + 40, v, true);
        f.rs.append_gc_tops(f.s0 + 45);
        f.rs.post_backtrack_scan(f.b, mark);
        CHECK(*f.rs.find({f.b, f.a}) == std::vector<RemEntry>{{f.s0, EntryKind::Gc}});
        CHECK(f.rs.counters().gc_runs_released == 1);
    }
    SUBCASE("a Gc run below the new H is kept whole") {
        f.rs.barrier_record(f.s0, v, true);
        f.rs.barrier_record(f.s0 + 5, v, true);
        f.rs.append_gc_tops(f.s0 + 10);
        f.rs.post_backtrack_scan(f.b, mark);
        CHECK(f.rs.find({f.b, f.a})->size() == 3);
    }
    SUBCASE("sets with sources in other blocks are untouched") {
        BlockId c = f.heap.expand();
        Address s1 = f.heap.alloc(40);
        f.rs.barrier_record(s1 + 30, v, false);
        f.rs.post_backtrack_scan(f.b, mark);
        CHECK(f.rs.find({c, f.a})->size() == 1);
    }
}
