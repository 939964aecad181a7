#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "wamgc/cell.hpp"

namespace wamgc {

enum class BlockStatus : std::uint8_t {
    Active,
    Current,
    Free,
    // Taken from the free pool as to-space by a running collection, not yet linked.
    Reserved,
};

struct HeapBlock {
    Address base;
    std::uint64_t size = 0;
    std::uint64_t timestamp = 0;
    BlockId prev = kNoBlock;
    BlockId next = kNoBlock;
    Address free_top;
    BlockStatus status = BlockStatus::Free;
    double block_live = 0.0;
    double block_total = 0.0;

    bool in_chain() const { return status == BlockStatus::Active || status == BlockStatus::Current; }
    std::uint64_t used() const { return free_top - base; }
};

struct HeapConfig {
    std::uint64_t block_size = 4096;
    std::uint64_t address_limit = std::uint64_t{1} << 26;
    std::uint64_t overflow_margin = 64;
};

//
// The block-based heap. Blocks live at power-of-two aligned bases in a
// simulated address space; the chain orders them by age independently
// of their addresses. The current block is always the chain tail and
// holds H.
//
class Heap {
public:
    explicit Heap(const HeapConfig &config);

    const HeapConfig &config() const { return config_; }
    std::uint64_t block_size() const { return config_.block_size; }

    BlockId block_of(Address a) const;
    bool same_block(Address a, Address b) const { return (a.value >> shift_) == (b.value >> shift_); }
    bool cell_older(Address a, Address b) const;

    Address alloc(std::uint64_t n);
    BlockId expand();
    std::vector<BlockId> instant_reclaim(Address saved_h);
    void insert_to_blocks_before(BlockId from, std::span<const BlockId> new_blocks);

    // Unlinks an active non-current block and frees it.
    void release_block(BlockId b);
    // Pops a free block (or creates one) for use as to-space.
    BlockId reserve_block();
    // Makes the chain tail the current block with H at h.
    void make_current(BlockId b, Address h);

    Cell &at(Address a) { return cells_[a.value]; }
    const Cell &at(Address a) const { return cells_[a.value]; }

    Address h() const { return h_; }
    BlockId current() const { return current_; }
    BlockId head() const { return head_; }
    BlockId tail() const { return tail_; }
    const HeapBlock &block(BlockId b) const { return blocks_[b]; }
    HeapBlock &block(BlockId b) { return blocks_[b]; }
    bool is_active(BlockId b) const { return b < blocks_.size() && blocks_[b].in_chain(); }
    Address usable_end(BlockId b) const;
    void set_free_top(BlockId b, Address top);

    std::vector<BlockId> chain() const;
    const std::deque<BlockId> &free_list() const { return free_list_; }
    std::size_t active_blocks() const { return active_count_; }
    std::size_t blocks_created() const { return blocks_.size(); }
    // Cells in use across the chain (H counts for the current block).
    std::uint64_t used_cells() const;

    // Throws Fault(Corruption) when a structural invariant is broken.
    void check_invariants() const;

private:
    BlockId create_block();
    void link_after_tail(BlockId b);
    void unlink(BlockId b);
    void free_block(BlockId b);
    void renumber();

    HeapConfig config_;
    unsigned shift_ = 0;
    std::vector<HeapBlock> blocks_;
    std::vector<Cell> cells_;
    std::deque<BlockId> free_list_;
    BlockId head_ = kNoBlock;
    BlockId tail_ = kNoBlock;
    BlockId current_ = kNoBlock;
    Address h_;
    std::size_t active_count_ = 0;
};

} // namespace wamgc
