#include "wamgc/heap.hpp"

#include <bit>
#include <string>

namespace wamgc {

const char *tag_name(Tag t) {
    switch (t) {
    case Tag::Ref: return "REF";
    case Tag::Struct: return "STR";
    case Tag::List: return "LIS";
    case Tag::Functor: return "FUN";
    case Tag::Int: return "INT";
    case Tag::Atom: return "ATM";
    case Tag::Forward: return "FWD";
    }
    return "?";
}

std::string to_string(const Cell &c) {
    std::string s = tag_name(c.tag);
    s += '(';
    if (c.tag == Tag::Int) {
        s += std::to_string(c.int_value());
    } else {
        s += std::to_string(c.data);
    }
    if (c.tag == Tag::Functor) {
        s += '/' + std::to_string(c.arity);
    }
    return s + ')';
}

const char *fault_name(FaultKind k) {
    switch (k) {
    case FaultKind::Corruption: return "corruption";
    case FaultKind::OutOfMemory: return "out of memory";
    case FaultKind::AllocationTooLarge: return "allocation too large";
    case FaultKind::NoChoicePoint: return "no choice point";
    case FaultKind::ContractViolation: return "contract violation";
    case FaultKind::UnknownLabel: return "unknown label";
    }
    return "fault";
}

Heap::Heap(const HeapConfig &config) : config_(config) {
    if (config_.block_size < 4 || !std::has_single_bit(config_.block_size)) {
        throw std::invalid_argument("block size must be a power of two >= 4");
    }
    if (config_.overflow_margin < 1 || config_.overflow_margin >= config_.block_size) {
        throw std::invalid_argument("overflow margin must be in [1, block_size)");
    }
    if (config_.address_limit < config_.block_size) {
        throw std::invalid_argument("address limit smaller than one block");
    }
    shift_ = static_cast<unsigned>(std::countr_zero(config_.block_size));
    expand();
}

BlockId Heap::block_of(Address a) const {
    BlockId b = static_cast<BlockId>(a.value >> shift_);
    if (a.value >= config_.address_limit || b >= blocks_.size()) {
        throw Fault(FaultKind::Corruption, "address " + std::to_string(a.value) + " outside any allocated block");
    }
    return b;
}

bool Heap::cell_older(Address a, Address b) const {
    BlockId ba = block_of(a);
    BlockId bb = block_of(b);
    if (ba == bb) {
        return a < b;
    }
    return blocks_[ba].timestamp < blocks_[bb].timestamp;
}

Address Heap::usable_end(BlockId b) const {
    return blocks_[b].base + (config_.block_size - config_.overflow_margin);
}

Address Heap::alloc(std::uint64_t n) {
    if (n == 0 || n > config_.block_size - config_.overflow_margin) {
        throw Fault(FaultKind::AllocationTooLarge, std::to_string(n) + " cells");
    }
    if (h_ + n > usable_end(current_)) {
        expand();
    }
    Address result = h_;
    h_ = h_ + n;
    blocks_[current_].free_top = h_;
    return result;
}

BlockId Heap::create_block() {
    std::uint64_t base = blocks_.size() * config_.block_size;
    if (base + config_.block_size > config_.address_limit) {
        throw Fault(FaultKind::OutOfMemory, "address space limit of " + std::to_string(config_.address_limit) +
                                                " cells reached");
    }
    HeapBlock blk;
    blk.base = Address{base};
    blk.size = config_.block_size;
    blk.free_top = blk.base;
    blocks_.push_back(blk);
    cells_.resize(cells_.size() + config_.block_size);
    return static_cast<BlockId>(blocks_.size() - 1);
}

BlockId Heap::reserve_block() {
    BlockId b;
    if (!free_list_.empty()) {
        b = free_list_.front();
        free_list_.pop_front();
    } else {
        b = create_block();
    }
    HeapBlock &blk = blocks_[b];
    blk.status = BlockStatus::Reserved;
    blk.prev = blk.next = kNoBlock;
    blk.free_top = blk.base;
    blk.block_live = blk.block_total = 0.0;
    std::fill(cells_.begin() + static_cast<std::ptrdiff_t>(blk.base.value),
              cells_.begin() + static_cast<std::ptrdiff_t>(blk.base.value + blk.size), Cell{});
    return b;
}

void Heap::link_after_tail(BlockId b) {
    HeapBlock &blk = blocks_[b];
    blk.prev = tail_;
    blk.next = kNoBlock;
    blk.timestamp = tail_ == kNoBlock ? 1 : blocks_[tail_].timestamp + 1;
    if (tail_ == kNoBlock) {
        head_ = b;
    } else {
        blocks_[tail_].next = b;
    }
    tail_ = b;
    ++active_count_;
}

BlockId Heap::expand() {
    BlockId b = reserve_block();
    if (current_ != kNoBlock && blocks_[current_].status == BlockStatus::Current) {
        blocks_[current_].status = BlockStatus::Active;
        blocks_[current_].free_top = h_;
    }
    link_after_tail(b);
    blocks_[b].status = BlockStatus::Current;
    current_ = b;
    h_ = blocks_[b].base;
    return b;
}

void Heap::unlink(BlockId b) {
    HeapBlock &blk = blocks_[b];
    if (blk.prev != kNoBlock) {
        blocks_[blk.prev].next = blk.next;
    } else {
        head_ = blk.next;
    }
    if (blk.next != kNoBlock) {
        blocks_[blk.next].prev = blk.prev;
    } else {
        tail_ = blk.prev;
    }
    blk.prev = blk.next = kNoBlock;
    --active_count_;
}

void Heap::free_block(BlockId b) {
    HeapBlock &blk = blocks_[b];
    blk.status = BlockStatus::Free;
    blk.free_top = blk.base;
    blk.block_live = blk.block_total = 0.0;
    free_list_.push_back(b);
}

std::vector<BlockId> Heap::instant_reclaim(Address saved_h) {
    BlockId target = block_of(saved_h);
    if (!blocks_[target].in_chain()) {
        throw Fault(FaultKind::Corruption, "reclaim target " + std::to_string(saved_h.value) + " lies in a free block");
    }
    if (target == current_ && h_ < saved_h) {
        throw Fault(FaultKind::Corruption, "reclaim target above H");
    }
    std::vector<BlockId> freed;
    while (tail_ != target) {
        BlockId b = tail_;
        unlink(b);
        free_block(b);
        freed.push_back(b);
    }
    current_ = target;
    blocks_[target].status = BlockStatus::Current;
    blocks_[target].free_top = saved_h;
    h_ = saved_h;
    return freed;
}

void Heap::renumber() {
    std::uint64_t stamp = 1;
    for (BlockId b = head_; b != kNoBlock; b = blocks_[b].next) {
        blocks_[b].timestamp = stamp++;
    }
}

void Heap::insert_to_blocks_before(BlockId from, std::span<const BlockId> new_blocks) {
    if (!blocks_[from].in_chain()) {
        throw Fault(FaultKind::Corruption, "from block not in chain");
    }
    BlockId before = blocks_[from].prev;
    for (BlockId b : new_blocks) {
        HeapBlock &blk = blocks_[b];
        blk.status = BlockStatus::Active;
        blk.prev = before;
        blk.next = from;
        if (before == kNoBlock) {
            head_ = b;
        } else {
            blocks_[before].next = b;
        }
        blocks_[from].prev = b;
        before = b;
        ++active_count_;
    }
    bool was_current = from == current_;
    unlink(from);
    free_block(from);
    if (was_current) {
        current_ = kNoBlock;
    }
    renumber();
}

void Heap::release_block(BlockId b) {
    if (!blocks_[b].in_chain()) {
        throw Fault(FaultKind::Corruption, "release of a block outside the chain");
    }
    if (b == current_) {
        current_ = kNoBlock;
    }
    unlink(b);
    free_block(b);
    renumber();
}

void Heap::make_current(BlockId b, Address h) {
    if (b != tail_ || block_of(h) != b) {
        throw Fault(FaultKind::Corruption, "current block must be the chain tail and contain H");
    }
    if (current_ != kNoBlock && current_ != b && blocks_[current_].status == BlockStatus::Current) {
        blocks_[current_].status = BlockStatus::Active;
    }
    current_ = b;
    blocks_[b].status = BlockStatus::Current;
    blocks_[b].free_top = h;
    h_ = h;
}

void Heap::set_free_top(BlockId b, Address top) {
    blocks_[b].free_top = top;
    if (b == current_) {
        h_ = top;
    }
}

std::vector<BlockId> Heap::chain() const {
    std::vector<BlockId> out;
    out.reserve(active_count_);
    for (BlockId b = head_; b != kNoBlock; b = blocks_[b].next) {
        out.push_back(b);
    }
    return out;
}

std::uint64_t Heap::used_cells() const {
    std::uint64_t total = 0;
    for (BlockId b = head_; b != kNoBlock; b = blocks_[b].next) {
        total += (b == current_ ? h_ : blocks_[b].free_top) - blocks_[b].base;
    }
    return total;
}

void Heap::check_invariants() const {
    auto fail = [](const std::string &what) { throw Fault(FaultKind::Corruption, what); };
    if (current_ == kNoBlock || current_ != tail_) {
        fail("current block is not the chain tail");
    }
    if (block_of(h_) != current_) {
        fail("H outside the current block");
    }
    std::size_t n = 0;
    std::uint64_t last_stamp = 0;
    BlockId prev = kNoBlock;
    for (BlockId b = head_; b != kNoBlock; b = blocks_[b].next) {
        const HeapBlock &blk = blocks_[b];
        if (blk.prev != prev) {
            fail("broken back link at block " + std::to_string(b));
        }
        if (!blk.in_chain()) {
            fail("inactive block " + std::to_string(b) + " in chain");
        }
        if (n > 0 && blk.timestamp <= last_stamp) {
            fail("timestamps not strictly increasing at block " + std::to_string(b));
        }
        if (blk.base.value % blk.size != 0) {
            fail("misaligned block base");
        }
        if (blk.free_top < blk.base || blk.free_top > blk.base + blk.size) {
            fail("free top outside block " + std::to_string(b));
        }
        if (blk.block_live < 0 || blk.block_total < 0 || blk.block_live > blk.block_total + 1e-9) {
            fail("survival statistics out of range at block " + std::to_string(b));
        }
        last_stamp = blk.timestamp;
        prev = b;
        ++n;
    }
    if (prev != tail_ || n != active_count_) {
        fail("chain length mismatch");
    }
    for (BlockId b : free_list_) {
        if (blocks_[b].status != BlockStatus::Free) {
            fail("non-free block on free list");
        }
    }
}

} // namespace wamgc
