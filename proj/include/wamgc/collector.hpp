#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wamgc/cell.hpp"

namespace wamgc {

class Machine;

struct CollectOptions {
    // Copy into the free space left at the top of the from block's predecessor.
    bool use_predecessor_space = true;
    // Reset trailed bindings of from-block cells not reachable in forward execution.
    bool early_reset = true;
    // When the current block is collected, continue allocating after the copies
    // in the last to-block instead of in a fresh block (semi-space mode).
    bool allocate_in_to_space = false;
};

struct ToBlockShare {
    BlockId block = kNoBlock;
    std::uint64_t live_block = 0;
};

struct CollectionReport {
    std::vector<BlockId> from_blocks;
    std::uint64_t gc_total = 0;
    std::uint64_t live_total = 0;
    // Predecessor (if used) first, then fresh blocks in chain order.
    std::vector<ToBlockShare> per_to_block;
    std::vector<BlockId> fresh_blocks;
    bool used_predecessor = false;
    Address gc_top;
    std::chrono::nanoseconds pause{0};
    // Deterministic cost: roots, remset entries and trail entries examined,
    // plus cells copied and scanned.
    std::uint64_t work_units = 0;
    std::uint64_t double_copies = 0;
    std::uint64_t early_resets = 0;
    std::uint64_t optimistic_hits = 0;
    std::uint32_t max_copies_per_cell = 0;
    std::uint64_t remset_roots = 0;
    std::size_t remset_entries_after = 0;
    std::size_t collected_choicepoints = 0;
};

//
// Optimistic copying of one from block (or, in semi-space mode, of the
// whole chain). Forwarding starts from the remembered sets, then the
// current registers and environment, then each choice point from new to
// old; the trail is compacted on the way back from old to new.
//
class Collector {
public:
    Collector(Machine &m, std::span<const BlockId> from, const CollectOptions &options);

    CollectionReport run();

private:
    Cell forward(Cell v);
    struct Region {
        BlockId block;
        Address start;
        Address end;
    };

    bool in_from(Address a) const;
    Address to_alloc(std::uint64_t n);
    void count_copy(Address from_cell);
    void copy_slot(Address from_cell, Address to_cell);
    void forward_in_place(Cell &slot);
    void forward_frame_chain(std::size_t frame);
    void drain();
    void scan_trail_segment(std::size_t lo, std::size_t hi);
    void compact_trail();
    void finish();

    Machine &m_;
    CollectOptions options_;
    CollectionReport report_;
    std::vector<std::uint8_t> from_mask_;
    std::vector<Region> regions_;
    std::size_t scan_region_ = 0;
    Address scan_;
    BlockId predecessor_ = kNoBlock;
    std::vector<bool> reset_mark_;
    std::unordered_map<Address, std::uint8_t> copies_;
    std::vector<std::size_t> forwarded_frames_;
};

} // namespace wamgc
