#include <doctest.h>

#include <random>
#include <vector>

#include "wamgc/heap.hpp"

using namespace wamgc;

namespace {

HeapConfig small(std::uint64_t block_size = 1024) {
    HeapConfig c;
    c.block_size = block_size;
    c.address_limit = 64 * block_size;
    return c;
}

std::vector<std::uint64_t> stamps(const Heap &h) {
    std::vector<std::uint64_t> out;
    for (BlockId b : h.chain()) {
        out.push_back(h.block(b).timestamp);
    }
    return out;
}

bool strictly_increasing(const std::vector<std::uint64_t> &v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i - 1] >= v[i]) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("block_of masks the low address bits") {
    Heap h(small());
    h.expand();
    h.expand();
    CHECK(h.block(h.block_of(Address{2050})).base == Address{2048});
    CHECK(h.block(h.block_of(Address{0})).base == Address{0});
    CHECK(h.block(h.block_of(Address{1023})).base == Address{0});
    CHECK_THROWS_AS(h.block_of(Address{64 * 1024}), Fault);
    CHECK_THROWS_AS(h.block_of(Address{3 * 1024}), Fault);
}

TEST_CASE("cell_older compares addresses within a block and timestamps across blocks") {
    Heap h(small());
    BlockId first = h.current();
    CHECK(h.cell_older(Address{10}, Address{20}));
    CHECK_FALSE(h.cell_older(Address{20}, Address{10}));
    CHECK_FALSE(h.cell_older(Address{10}, Address{10}));

    BlockId second = h.expand();
    Address in_second = h.block(second).base;
    CHECK(h.block(first).timestamp < h.block(second).timestamp);
    CHECK(h.cell_older(Address{1000}, in_second));
    CHECK_FALSE(h.cell_older(in_second + 5, Address{3}));
}

TEST_CASE("alloc bumps H and never straddles a block") {
    HeapConfig c = small();
    Heap h(c);
    Address base = h.block(h.current()).base;
    CHECK(h.alloc(3) == base);
    CHECK(h.h() == base + 3);

    // Fill up to one cell below the usable end, then ask for two.
    std::uint64_t usable = c.block_size - c.overflow_margin;
    h.alloc(usable - 3 - 1);
    BlockId before = h.current();
    Address a = h.alloc(2);
    CHECK(h.current() != before);
    CHECK(a == h.block(h.current()).base);
    CHECK(h.block(before).free_top == h.block(before).base + (usable - 1));

    CHECK_THROWS_AS(h.alloc(c.block_size), Fault);
    CHECK_THROWS_AS(h.alloc(0), Fault);
}

TEST_CASE("alloc matches a straddle-free reference allocator") {
    HeapConfig c = small(256);
    c.address_limit = 1 << 20;
    Heap h(c);
    std::mt19937_64 rng(7);
    std::uint64_t usable = c.block_size - c.overflow_margin;
    // Reference: blocks are appended in creation order; an allocation that
    // does not fit below the usable end moves to the next block's base.
    std::uint64_t ref_block = 0;
    std::uint64_t ref_offset = 0;
    for (int i = 0; i < 5000; ++i) {
        std::uint64_t n = std::uniform_int_distribution<std::uint64_t>(1, 40)(rng);
        if (ref_offset + n > usable) {
            ++ref_block;
            ref_offset = 0;
        }
        Address a = h.alloc(n);
        REQUIRE(a.value == ref_block * c.block_size + ref_offset);
        REQUIRE(h.block_of(a) == h.current());
        REQUIRE(h.same_block(a, a + (n - 1)));
        ref_offset += n;
    }
    h.check_invariants();
}

TEST_CASE("expand takes free blocks first and stamps them newest") {
    Heap h(small());
    BlockId b1 = h.current();
    BlockId b2 = h.expand();
    BlockId b3 = h.expand();
    CHECK(h.chain() == std::vector<BlockId>{b1, b2, b3});
    CHECK(stamps(h) == std::vector<std::uint64_t>{1, 2, 3});

    h.instant_reclaim(h.block(b1).base + 0);
    CHECK(h.free_list().size() == 2);
    CHECK(h.chain() == std::vector<BlockId>{b1});

    BlockId reused = h.expand();
    CHECK((reused == b2 || reused == b3));
    CHECK(h.current() == reused);
    CHECK(h.block(reused).timestamp == h.block(b1).timestamp + 1);
    CHECK(h.blocks_created() == 3);

    h.expand();
    BlockId fresh = h.expand();
    CHECK(fresh == 3);
    CHECK(h.blocks_created() == 4);
}

TEST_CASE("instant_reclaim frees every newer block") {
    Heap h(small());
    BlockId b1 = h.current();
    h.alloc(10);
    Address mark = h.h();
    BlockId b2 = h.expand();
    h.alloc(5);
    Address mid_b2 = h.h();
    h.alloc(5);
    BlockId b3 = h.expand();
    h.alloc(7);

    SUBCASE("back into the middle block") {
        auto freed = h.instant_reclaim(mid_b2);
        CHECK(freed == std::vector<BlockId>{b3});
        CHECK(h.current() == b2);
        CHECK(h.h() == mid_b2);
        CHECK(h.block(b2).free_top == mid_b2);
    }
    SUBCASE("back into the oldest block") {
        auto freed = h.instant_reclaim(mark);
        CHECK(freed.size() == 2);
        CHECK(h.chain() == std::vector<BlockId>{b1});
        CHECK(h.h() == mark);
        CHECK_FALSE(h.is_active(b2));
        CHECK_FALSE(h.is_active(b3));
    }
    SUBCASE("at H is a no-op") {
        Address top = h.h();
        auto freed = h.instant_reclaim(top);
        CHECK(freed.empty());
        CHECK(h.h() == top);
        CHECK(h.current() == b3);
    }
    h.check_invariants();
}

TEST_CASE("reallocation after instant_reclaim reuses the same addresses") {
    Heap h(small());
    h.alloc(4);
    Address mark = h.h();
    std::vector<Address> first;
    for (int i = 0; i < 600; ++i) {
        first.push_back(h.alloc(3));
    }
    h.instant_reclaim(mark);
    for (int i = 0; i < 600; ++i) {
        REQUIRE(h.alloc(3) == first[static_cast<std::size_t>(i)]);
    }
}

TEST_CASE("insert_to_blocks_before splices and renumbers") {
    Heap h(small());
    BlockId a = h.current();
    BlockId f = h.expand();
    BlockId c = h.expand();

    SUBCASE("two new blocks") {
        BlockId x = h.reserve_block();
        BlockId y = h.reserve_block();
        std::vector<BlockId> fresh{x, y};
        h.insert_to_blocks_before(f, fresh);
        CHECK(h.chain() == std::vector<BlockId>{a, x, y, c});
        CHECK(stamps(h) == std::vector<std::uint64_t>{1, 2, 3, 4});
        CHECK(h.block(f).status == BlockStatus::Free);
    }
    SUBCASE("no new blocks") {
        h.insert_to_blocks_before(f, {});
        CHECK(h.chain() == std::vector<BlockId>{a, c});
        CHECK(stamps(h) == std::vector<std::uint64_t>{1, 2});
    }
    h.check_invariants();
}

TEST_CASE("timestamps stay strictly increasing under random heap operations") {
    HeapConfig cfg = small(128);
    cfg.address_limit = 1 << 16;
    Heap h(cfg);
    std::mt19937_64 rng(42);
    std::vector<Address> marks;
    for (int step = 0; step < 1000; ++step) {
        int op = std::uniform_int_distribution<int>(0, 9)(rng);
        if (op < 5) {
            h.alloc(std::uniform_int_distribution<std::uint64_t>(1, 30)(rng));
        } else if (op == 5) {
            marks.push_back(h.h());
        } else if (op == 6 && !marks.empty()) {
            h.instant_reclaim(marks.back());
            marks.pop_back();
        } else if (op == 7) {
            // Collection-shaped splice of an older block with fresh blocks.
            std::vector<BlockId> ch = h.chain();
            if (ch.size() > 1) {
                BlockId from = ch[std::uniform_int_distribution<std::size_t>(0, ch.size() - 2)(rng)];
                bool marked = false;
                for (Address m : marks) {
                    marked = marked || h.block_of(m) == from;
                }
                if (!marked) {
                    std::vector<BlockId> fresh;
                    std::size_t n = std::uniform_int_distribution<std::size_t>(0, 2)(rng);
                    for (std::size_t i = 0; i < n; ++i) {
                        fresh.push_back(h.reserve_block());
                        h.block(fresh.back()).free_top = h.block(fresh.back()).base + 1;
                    }
                    h.insert_to_blocks_before(from, fresh);
                }
            }
        } else {
            h.expand();
        }
        REQUIRE(strictly_increasing(stamps(h)));
        REQUIRE(h.tail() == h.current());
        h.check_invariants();
    }
}
