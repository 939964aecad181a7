#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "wamgc/cell.hpp"
#include "wamgc/heap.hpp"

namespace wamgc {

enum class EntryKind : std::uint8_t { Normal, Gc, GcTop };

const char *entry_kind_name(EntryKind k);

// For GcTop entries addr holds the garbage-collection top, not a source cell.
struct RemEntry {
    Address addr;
    EntryKind kind = EntryKind::Normal;

    bool operator==(const RemEntry &) const = default;
};

struct SetKey {
    BlockId source = kNoBlock;
    BlockId target = kNoBlock;

    auto operator<=>(const SetKey &) const = default;
};

struct RemsetCounters {
    std::uint64_t recorded = 0;
    std::uint64_t untrail_removed = 0;
    std::uint64_t untrail_missing = 0;
    std::uint64_t gc_runs_released = 0;
    std::uint64_t reclaimed_removed = 0;
    std::uint64_t residual_removed = 0;
};

//
// Remembered sets, one stack per (source block, target block) pair,
// together with the write barrier that fills them and the bookkeeping
// that keeps them valid across backtracking.
//
class RememberedSets {
public:
    using Stack = std::vector<RemEntry>;

    explicit RememberedSets(const Heap &heap) : heap_(heap) {}

    // Write barrier. Returns true when an entry was added.
    bool barrier_record(Address source, const Cell &v, bool during_gc);

    std::vector<RemEntry> roots_for(BlockId target) const;
    void drop_sets_of(BlockId b);

    void untrail_hook(Address trailed, const Cell &contents_before_reset);
    void post_backtrack_scan(BlockId backtrack_block, Address new_h);

    // Pushes a GcTop onto every set that received Gc entries since the last call.
    void append_gc_tops(Address gc_top);

    const Stack *find(SetKey key) const;
    const std::map<SetKey, Stack> &sets() const { return sets_; }
    std::size_t entry_count() const { return entries_; }
    std::size_t high_watermark() const { return high_watermark_; }
    const RemsetCounters &counters() const { return counters_; }

    // Strict mode turns tolerated anomalies (missing untrail entries) into faults.
    void set_strict(bool strict) { strict_ = strict; }

private:
    bool gc_top_passed(Address gc_top, Address new_h) const;
    void note_size();
    void erase_if_empty(std::map<SetKey, Stack>::iterator it);

    const Heap &heap_;
    std::map<SetKey, Stack> sets_;
    std::set<SetKey> touched_;
    std::size_t entries_ = 0;
    std::size_t high_watermark_ = 0;
    RemsetCounters counters_;
    bool strict_ = false;
};

} // namespace wamgc
