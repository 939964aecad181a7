#include "wamgc/collector.hpp"

#include <algorithm>
#include <string>

#include "wamgc/machine.hpp"

namespace wamgc {

Collector::Collector(Machine &m, std::span<const BlockId> from, const CollectOptions &options)
    : m_(m), options_(options) {
    Heap &heap = m_.heap_;
    if (from.empty()) {
        throw Fault(FaultKind::ContractViolation, "collection without a from block");
    }
    from_mask_.assign(heap.blocks_created(), 0);
    for (BlockId b : from) {
        if (!heap.is_active(b)) {
            throw Fault(FaultKind::ContractViolation, "from block " + std::to_string(b) + " is not active");
        }
        from_mask_[b] = 1;
        report_.from_blocks.push_back(b);
        report_.gc_total += (b == heap.current() ? heap.h() : heap.block(b).free_top) - heap.block(b).base;
    }
    if (options_.use_predecessor_space && from.size() == 1) {
        BlockId p = heap.block(from[0]).prev;
        if (p != kNoBlock && !from_mask_[p]) {
            predecessor_ = p;
            Address top = heap.block(p).free_top;
            regions_.push_back(Region{p, top, top});
        }
    }
}

bool Collector::in_from(Address a) const {
    BlockId b = m_.heap_.block_of(a);
    return b < from_mask_.size() && from_mask_[b] != 0;
}

Address Collector::to_alloc(std::uint64_t n) {
    Heap &heap = m_.heap_;
    if (regions_.empty() || regions_.back().end + n > heap.usable_end(regions_.back().block)) {
        BlockId b = heap.reserve_block();
        Address base = heap.block(b).base;
        if (regions_.empty()) {
            scan_ = base;
        }
        regions_.push_back(Region{b, base, base});
        report_.fresh_blocks.push_back(b);
    }
    Region &r = regions_.back();
    Address a = r.end;
    r.end = r.end + n;
    return a;
}

void Collector::count_copy(Address from_cell) {
    std::uint8_t &n = copies_[from_cell];
    ++n;
    report_.max_copies_per_cell = std::max<std::uint32_t>(report_.max_copies_per_cell, n);
    ++report_.work_units;
}

void Collector::copy_slot(Address from_cell, Address to_cell) {
    Heap &heap = m_.heap_;
    Cell c = heap.at(from_cell);
    count_copy(from_cell);
    if (c.tag == Tag::Forward) {
        // Already copied elsewhere: the new cell becomes an indirection to it
        // and the marker keeps naming the first copy.
        heap.at(to_cell) = Cell::ref(c.address());
        ++report_.double_copies;
        return;
    }
    heap.at(to_cell) = c;
    heap.at(from_cell) = Cell::forward(to_cell);
}

Cell Collector::forward(Cell v) {
    if (!v.is_pointer()) {
        if (v.tag == Tag::Forward) {
            throw Fault(FaultKind::Corruption, "forward marker used as a value");
        }
        return v;
    }
    Address p = v.address();
    if (!in_from(p)) {
        return v;
    }
    Heap &heap = m_.heap_;
    switch (v.tag) {
    case Tag::Ref: {
        const Cell &c = heap.at(p);
        if (c.tag == Tag::Forward) {
            return Cell::ref(c.address());
        }
        Address q = to_alloc(1);
        copy_slot(p, q);
        return Cell::ref(q);
    }
    case Tag::Struct: {
        Cell header = heap.at(p);
        if (header.tag == Tag::Forward) {
            return Cell::structure(header.address());
        }
        if (header.tag != Tag::Functor) {
            throw Fault(FaultKind::Corruption, "structure pointer " + std::to_string(p.value) + " to " + to_string(header));
        }
        Address q = to_alloc(std::uint64_t{header.arity} + 1);
        heap.at(q) = header;
        count_copy(p);
        heap.at(p) = Cell::forward(q);
        for (std::uint32_t i = 1; i <= header.arity; ++i) {
            copy_slot(p + i, q + i);
        }
        return Cell::structure(q);
    }
    case Tag::List: {
        const Cell &c0 = heap.at(p);
        const Cell &c1 = heap.at(p + 1);
        if (c0.tag == Tag::Forward && c1.tag == Tag::Forward && c1.address() == c0.address() + 1) {
            ++report_.optimistic_hits;
            return Cell::list(c0.address());
        }
        Address q = to_alloc(2);
        copy_slot(p, q);
        copy_slot(p + 1, q + 1);
        return Cell::list(q);
    }
    default:
        return v;
    }
}

void Collector::forward_in_place(Cell &slot) {
    ++report_.work_units;
    slot = forward(slot);
}

void Collector::forward_frame_chain(std::size_t frame) {
    while (frame != kNoFrame) {
        if (frame >= forwarded_frames_.size()) {
            forwarded_frames_.resize(m_.frames_.size(), false);
        }
        if (forwarded_frames_[frame]) {
            return;
        }
        forwarded_frames_[frame] = true;
        for (Cell &c : m_.frames_[frame].slots) {
            forward_in_place(c);
        }
        frame = m_.frames_[frame].parent;
    }
}

void Collector::drain() {
    Heap &heap = m_.heap_;
    while (scan_region_ < regions_.size()) {
        if (scan_ < regions_[scan_region_].end) {
            Address s = scan_;
            scan_ = scan_ + 1;
            ++report_.work_units;
            Cell c = heap.at(s);
            if (!c.is_pointer()) {
                continue;
            }
            Cell nv = forward(c);
            heap.at(s) = nv;
            if (m_.config_.write_barrier) {
                m_.remsets_.barrier_record(s, nv, true);
            }
        } else if (scan_region_ + 1 < regions_.size()) {
            ++scan_region_;
            scan_ = regions_[scan_region_].start;
        } else {
            break;
        }
    }
}

void Collector::scan_trail_segment(std::size_t lo, std::size_t hi) {
    Heap &heap = m_.heap_;
    for (std::size_t i = lo; i < hi; ++i) {
        Address a = m_.trail_[i];
        ++report_.work_units;
        if (!in_from(a) || heap.at(a).tag == Tag::Forward) {
            continue;
        }
        if (options_.early_reset) {
            heap.at(a) = Cell::ref(a);
            reset_mark_[i] = true;
            ++report_.early_resets;
        } else {
            forward(Cell::ref(a));
        }
    }
    drain();
}

void Collector::compact_trail() {
    Heap &heap = m_.heap_;
    std::vector<Address> &trail = m_.trail_;
    std::vector<std::size_t> new_index(trail.size() + 1, 0);
    std::size_t out = 0;
    for (std::size_t i = 0; i < trail.size(); ++i) {
        new_index[i] = out;
        if (reset_mark_[i]) {
            continue;
        }
        Address a = trail[i];
        if (in_from(a)) {
            if (heap.at(a).tag != Tag::Forward) {
                throw Fault(FaultKind::Corruption, "trailed from-block cell " + std::to_string(a.value) + " was not forwarded");
            }
            a = heap.at(a).address();
        }
        trail[out++] = a;
    }
    new_index[trail.size()] = out;
    trail.resize(out);
    for (ChoicePoint &cp : m_.cps_) {
        cp.saved_trail_top = new_index[cp.saved_trail_top];
    }
}

void Collector::finish() {
    Heap &heap = m_.heap_;
    BlockId successor = heap.block(report_.from_blocks.back()).next;
    bool from_current = std::find(report_.from_blocks.begin(), report_.from_blocks.end(), heap.current()) !=
                        report_.from_blocks.end();

    for (const Region &r : regions_) {
        std::uint64_t n = r.end - r.start;
        report_.live_total += n;
        if (r.block == predecessor_) {
            if (n > 0) {
                report_.used_predecessor = true;
                report_.per_to_block.push_back(ToBlockShare{r.block, n});
            }
            heap.set_free_top(r.block, r.end);
        } else {
            heap.block(r.block).free_top = r.end;
            report_.per_to_block.push_back(ToBlockShare{r.block, n});
        }
    }
    bool to_space_used = report_.live_total > 0;
    Address frontier = regions_.empty() ? Address{} : regions_.back().end;

    heap.insert_to_blocks_before(report_.from_blocks.front(), report_.fresh_blocks);
    for (std::size_t i = 1; i < report_.from_blocks.size(); ++i) {
        heap.release_block(report_.from_blocks[i]);
    }
    if (from_current) {
        if (options_.allocate_in_to_space && !report_.fresh_blocks.empty()) {
            heap.make_current(report_.fresh_blocks.back(), frontier);
        } else {
            heap.expand();
        }
    }

    if (to_space_used) {
        report_.gc_top = frontier;
    } else if (predecessor_ != kNoBlock) {
        report_.gc_top = heap.block(predecessor_).free_top;
    } else if (successor != kNoBlock && heap.is_active(successor)) {
        report_.gc_top = heap.block(successor).base;
    } else {
        report_.gc_top = heap.block(heap.current()).base;
    }

    if (m_.config_.write_barrier) {
        for (BlockId b : report_.from_blocks) {
            m_.remsets_.drop_sets_of(b);
        }
        m_.remsets_.append_gc_tops(report_.gc_top);
    }
    report_.remset_entries_after = m_.remsets_.entry_count();

    for (ChoicePoint &cp : m_.cps_) {
        if (in_from(cp.saved_h)) {
            cp.saved_h = report_.gc_top;
            cp.collected = true;
            ++report_.collected_choicepoints;
        }
    }
}

CollectionReport Collector::run() {
    auto started = std::chrono::steady_clock::now();
    Heap &heap = m_.heap_;
    if (!regions_.empty()) {
        scan_ = regions_.front().start;
    }
    reset_mark_.assign(m_.trail_.size(), false);
    forwarded_frames_.assign(m_.frames_.size(), false);

    // Remembered-set entries are treated as live roots.
    if (m_.config_.write_barrier) {
        for (BlockId f : report_.from_blocks) {
            for (const RemEntry &e : m_.remsets_.roots_for(f)) {
                ++report_.work_units;
                if (in_from(e.addr) || !heap.is_active(heap.block_of(e.addr))) {
                    continue;
                }
                Cell src = heap.at(e.addr);
                if (!src.is_pointer() || !in_from(src.address())) {
                    continue;
                }
                ++report_.remset_roots;
                src = forward(src);
                heap.at(e.addr) = src;
                m_.remsets_.barrier_record(e.addr, src, true);
            }
        }
    }
    drain();

    for (Cell &r : m_.regs_) {
        forward_in_place(r);
    }
    forward_frame_chain(m_.env_);
    drain();

    // New to old: each choice point's segment is scanned once every
    // continuation that can still see its bindings has been forwarded.
    std::size_t hi = m_.trail_.size();
    for (std::size_t k = m_.cps_.size(); k > 0; --k) {
        ChoicePoint &cp = m_.cps_[k - 1];
        scan_trail_segment(cp.saved_trail_top, hi);
        hi = cp.saved_trail_top;
        for (Cell &r : cp.saved_registers) {
            forward_in_place(r);
        }
        forward_frame_chain(cp.saved_env);
        drain();
    }
    scan_trail_segment(0, hi);

    // Old to new: drop reset entries and move the choice-point marks.
    compact_trail();
    finish();
    report_.pause = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - started);
    return report_;
}

} // namespace wamgc
