#include "wamgc/machine.hpp"

#include <algorithm>
#include <string>
#include <utility>

namespace wamgc {

Machine::Machine(const MachineConfig &config)
    : config_(config), heap_(config.heap), remsets_(heap_), policy_(make_policy(config.policy, config.heap)) {
    remsets_.set_strict(config_.strict);
}

Machine::~Machine() = default;

std::uint32_t Machine::intern(const std::string &name) {
    auto [it, inserted] = symbol_ids_.try_emplace(name, static_cast<std::uint32_t>(symbols_.size()));
    if (inserted) {
        symbols_.push_back(name);
    }
    return it->second;
}

Address Machine::alloc(std::uint64_t n) {
    Address a = heap_.alloc(n);
    stats_.cells_allocated += n;
    if (policy_->config().auto_gc && policy_->on_allocation(n)) {
        gc_pending_ = true;
    }
    if (hooks_.on_alloc) {
        hooks_.on_alloc(a, n);
    }
    return a;
}

void Machine::store(Address a, Cell v) {
    if (config_.write_barrier) {
        remsets_.barrier_record(a, v, false);
    }
    heap_.at(a) = v;
}

Address Machine::new_var() {
    Address a = alloc(1);
    heap_.at(a) = Cell::ref(a);
    return a;
}

Cell Machine::make_struct(std::uint32_t functor, std::span<const Cell> args) {
    Address a = alloc(args.size() + 1);
    heap_.at(a) = Cell::functor(functor, static_cast<std::uint32_t>(args.size()));
    for (std::size_t i = 0; i < args.size(); ++i) {
        store(a + (i + 1), args[i]);
    }
    return Cell::structure(a);
}

Cell Machine::make_list(Cell head, Cell tail) {
    Address a = alloc(2);
    store(a, head);
    store(a + 1, tail);
    return Cell::list(a);
}

Cell Machine::deref(Cell v) const {
    while (v.tag == Tag::Ref) {
        const Cell &c = heap_.at(v.address());
        if (c.is_unbound_at(v.address())) {
            return v;
        }
        v = c;
    }
    return v;
}

std::optional<Address> Machine::bh() const {
    if (cps_.empty()) {
        return std::nullopt;
    }
    return cps_.back().saved_h;
}

bool Machine::would_trail(Address a) const {
    return !cps_.empty() && heap_.cell_older(a, cps_.back().saved_h);
}

void Machine::note_trail() { stats_.trail_hwm = std::max(stats_.trail_hwm, trail_.size()); }

void Machine::cond_trail(Address a) {
    if (would_trail(a)) {
        trail_.push_back(a);
        note_trail();
    }
}

void Machine::bind(Address a, Cell v) {
    if (!heap_.at(a).is_unbound_at(a)) {
        throw Fault(FaultKind::ContractViolation, "bind target " + std::to_string(a.value) + " is not an unbound variable");
    }
    if (v.tag == Tag::Functor || v.tag == Tag::Forward) {
        throw Fault(FaultKind::ContractViolation, std::string("cannot bind to a ") + tag_name(v.tag) + " value");
    }
    v = deref(v);
    if (v.tag == Tag::Ref) {
        Address b = v.address();
        if (b == a) {
            return;
        }
        // The younger variable points at the older one.
        if (heap_.cell_older(a, b)) {
            std::swap(a, b);
        }
        v = Cell::ref(b);
    }
    bool trailed = would_trail(a);
    if (trailed) {
        trail_.push_back(a);
        note_trail();
    }
    store(a, v);
    if (hooks_.on_bind) {
        hooks_.on_bind(a, trailed);
    }
}

bool Machine::unify(Cell x, Cell y) {
    std::vector<std::pair<Cell, Cell>> todo{{x, y}};
    while (!todo.empty()) {
        auto [l, r] = todo.back();
        todo.pop_back();
        l = deref(l);
        r = deref(r);
        if (l == r) {
            continue;
        }
        if (l.tag == Tag::Ref) {
            bind(l.address(), r);
            continue;
        }
        if (r.tag == Tag::Ref) {
            bind(r.address(), l);
            continue;
        }
        if (l.tag != r.tag) {
            return false;
        }
        switch (l.tag) {
        case Tag::Int:
        case Tag::Atom:
            return false;
        case Tag::List:
            todo.emplace_back(heap_.at(l.address() + 1), heap_.at(r.address() + 1));
            todo.emplace_back(heap_.at(l.address()), heap_.at(r.address()));
            break;
        case Tag::Struct: {
            const Cell &fl = heap_.at(l.address());
            const Cell &fr = heap_.at(r.address());
            if (fl != fr) {
                return false;
            }
            for (std::uint32_t i = fl.arity; i > 0; --i) {
                todo.emplace_back(heap_.at(l.address() + i), heap_.at(r.address() + i));
            }
            break;
        }
        default:
            throw Fault(FaultKind::Corruption, std::string("unify met a ") + tag_name(l.tag) + " value");
        }
    }
    return true;
}

void Machine::push_choicepoint(const std::string &label) {
    ChoicePoint cp;
    cp.saved_h = heap_.h();
    cp.saved_trail_top = trail_.size();
    cp.saved_registers = regs_;
    cp.saved_env = env_;
    cp.saved_frame_count = frames_.size();
    cp.label = label;
    cps_.push_back(std::move(cp));
    if (hooks_.on_choicepoint) {
        hooks_.on_choicepoint(cps_.back());
    }
}

void Machine::reset_cell(Address a) {
    if (config_.write_barrier) {
        remsets_.untrail_hook(a, heap_.at(a));
    }
    heap_.at(a) = Cell::ref(a);
}

// Cells moved below a choice point by a collection survive a backtrack to it
// while still pointing into space the backtrack reclaimed. They are garbage.
// The remembered sets for the reclaimed space find those in other blocks; a
// collected choice point also needs a scan of the block it resumes in.
void Machine::clear_stale_references(bool collected) {
    BlockId cur = heap_.current();
    Address h = heap_.h();
    if (collected) {
        for (Address a = heap_.block(cur).base; a < h; a = a + 1) {
            Cell &c = heap_.at(a);
            if (c.is_pointer() && c.address() >= h && heap_.same_block(a, c.address())) {
                c = Cell::ref(a);
                ++stats_.stale_cleared;
            }
        }
    }
    for (const auto &[key, stack] : remsets_.sets()) {
        if (key.target != cur && heap_.is_active(key.target)) {
            continue;
        }
        for (const RemEntry &e : stack) {
            if (e.kind == EntryKind::GcTop || !heap_.is_active(heap_.block_of(e.addr))) {
                continue;
            }
            Cell &c = heap_.at(e.addr);
            if (!c.is_pointer()) {
                continue;
            }
            BlockId t = heap_.block_of(c.address());
            if (!heap_.is_active(t) || (t == cur && c.address() >= h)) {
                c = Cell::ref(e.addr);
                ++stats_.stale_cleared;
            }
        }
    }
}

void Machine::backtrack_once() {
    ChoicePoint &cp = cps_.back();
    for (std::size_t i = trail_.size(); i > cp.saved_trail_top; --i) {
        reset_cell(trail_[i - 1]);
    }
    trail_.resize(cp.saved_trail_top);

    Address old_h = heap_.h();
    bool collected = cp.collected;
    std::vector<BlockId> freed = heap_.instant_reclaim(cp.saved_h);
    if (config_.write_barrier) {
        clear_stale_references(collected);
        for (BlockId b : freed) {
            remsets_.drop_sets_of(b);
        }
        if (!freed.empty() || old_h != cp.saved_h) {
            remsets_.post_backtrack_scan(heap_.current(), heap_.h());
        }
    }

    regs_ = cp.saved_registers;
    frames_.resize(cp.saved_frame_count);
    env_ = cp.saved_env;
    std::string label = std::move(cp.label);
    cps_.pop_back();
    ++stats_.backtracks;
    policy_->after_backtrack(*this);
    if (hooks_.on_backtrack) {
        hooks_.on_backtrack(label);
    }
}

void Machine::backtrack() {
    if (cps_.empty()) {
        throw Fault(FaultKind::NoChoicePoint, "backtrack with an empty choice-point stack");
    }
    backtrack_once();
}

void Machine::backtrack_to(const std::string &label) {
    auto it = std::find_if(cps_.rbegin(), cps_.rend(), [&](const ChoicePoint &cp) { return cp.label == label; });
    if (it == cps_.rend()) {
        throw Fault(FaultKind::UnknownLabel, "no choice point labelled " + label);
    }
    std::size_t target = static_cast<std::size_t>(cps_.rend() - it) - 1;
    while (cps_.size() > target) {
        backtrack_once();
    }
}

void Machine::cut_and_tidy(const std::string &label) {
    auto it = std::find_if(cps_.rbegin(), cps_.rend(), [&](const ChoicePoint &cp) { return cp.label == label; });
    if (it == cps_.rend()) {
        throw Fault(FaultKind::UnknownLabel, "no choice point labelled " + label);
    }
    cps_.resize(static_cast<std::size_t>(cps_.rend() - it) - 1);
    if (cps_.empty()) {
        trail_.clear();
        return;
    }
    std::size_t mark = cps_.back().saved_trail_top;
    auto kept = std::remove_if(trail_.begin() + static_cast<std::ptrdiff_t>(mark), trail_.end(),
                               [&](Address a) { return !would_trail(a); });
    trail_.erase(kept, trail_.end());
}

void Machine::set_reg(std::size_t i, Cell v) {
    if (i >= kNumRegisters) {
        throw Fault(FaultKind::ContractViolation, "register index " + std::to_string(i) + " out of range");
    }
    regs_[i] = v;
}

std::size_t Machine::push_frame(std::size_t slots) {
    frames_.push_back(Frame{std::vector<Cell>(slots, Cell::integer(0)), env_});
    env_ = frames_.size() - 1;
    return env_;
}

bool Machine::frame_protected(std::size_t frame) const {
    return !cps_.empty() && frame < cps_.back().saved_frame_count;
}

Cell Machine::env_slot(std::size_t i) const {
    if (env_ == kNoFrame || i >= frames_[env_].slots.size()) {
        throw Fault(FaultKind::ContractViolation, "environment slot " + std::to_string(i) + " out of range");
    }
    return frames_[env_].slots[i];
}

void Machine::set_env_slot(std::size_t i, Cell v) {
    if (env_ == kNoFrame || i >= frames_[env_].slots.size()) {
        throw Fault(FaultKind::ContractViolation, "environment slot " + std::to_string(i) + " out of range");
    }
    if (frame_protected(env_)) {
        // A choice point still needs the old frame contents.
        frames_.push_back(frames_[env_]);
        env_ = frames_.size() - 1;
    }
    frames_[env_].slots[i] = v;
}

void Machine::safepoint() {
    stats_.heap_hwm = std::max(stats_.heap_hwm, heap_.used_cells());
    if (!policy_->config().auto_gc) {
        gc_pending_ = false;
        return;
    }
    if (gc_pending_ || policy_->wants_collection(heap_)) {
        run_policy(false);
    }
}

void Machine::run_policy(bool forced) {
    gc_pending_ = false;
    policy_->reset_counter();
    policy_->run(*this, forced);
}

CollectionReport Machine::collect(BlockId from, const CollectOptions &options) {
    std::array<BlockId, 1> one{from};
    return collect(one, options);
}

CollectionReport Machine::collect(std::span<const BlockId> from, const CollectOptions &options) {
    stats_.heap_hwm = std::max(stats_.heap_hwm, heap_.used_cells());
    if (hooks_.before_collection) {
        hooks_.before_collection(from);
    }
    collecting_ = true;
    CollectionReport report;
    try {
        Collector collector(*this, from, options);
        report = collector.run();
    } catch (...) {
        collecting_ = false;
        throw;
    }
    collecting_ = false;
    update_survival(heap_, report);

    ++stats_.n_gc;
    stats_.cells_copied += report.live_total;
    stats_.double_copies += report.double_copies;
    stats_.early_resets += report.early_resets;
    stats_.max_copies_per_cell = std::max(stats_.max_copies_per_cell, report.max_copies_per_cell);
    PauseRecord rec;
    rec.from_blocks = report.from_blocks;
    rec.gc_total = report.gc_total;
    rec.live_total = report.live_total;
    rec.pause = report.pause;
    rec.work_units = report.work_units;
    rec.double_copies = report.double_copies;
    rec.early_resets = report.early_resets;
    rec.max_copies_per_cell = report.max_copies_per_cell;
    rec.remset_entries = remsets_.entry_count();
    rec.trail_size = trail_.size();
    stats_.pauses.push_back(std::move(rec));

    if (hooks_.after_collection) {
        hooks_.after_collection(report);
    }
    return report;
}

void Machine::check_invariants() const {
    heap_.check_invariants();
    auto fail = [](const std::string &what) { throw Fault(FaultKind::Corruption, what); };
    auto live_address = [&](Address a) {
        BlockId b = heap_.block_of(a);
        return heap_.is_active(b) && (b != heap_.current() || a < heap_.h());
    };
    auto legal_root = [&](const Cell &c, const char *where) {
        if (c.tag == Tag::Functor || c.tag == Tag::Forward) {
            fail(std::string(tag_name(c.tag)) + " value in " + where);
        }
        if (c.is_pointer() && !live_address(c.address())) {
            fail(std::string("dangling root in ") + where + ": " + to_string(c));
        }
    };
    for (const Cell &c : regs_) {
        legal_root(c, "register");
    }
    for (std::size_t f = env_; f != kNoFrame; f = frames_[f].parent) {
        for (const Cell &c : frames_[f].slots) {
            legal_root(c, "environment");
        }
    }
    std::size_t last_mark = 0;
    for (const ChoicePoint &cp : cps_) {
        if (cp.saved_trail_top < last_mark || cp.saved_trail_top > trail_.size()) {
            fail("choice-point trail marks out of order");
        }
        last_mark = cp.saved_trail_top;
        BlockId b = heap_.block_of(cp.saved_h);
        if (!heap_.is_active(b) || (b == heap_.current() && heap_.h() < cp.saved_h)) {
            fail("choice point " + cp.label + " has a saved H beyond the heap top");
        }
        for (const Cell &c : cp.saved_registers) {
            legal_root(c, "saved register");
        }
        for (std::size_t f = cp.saved_env; f != kNoFrame; f = frames_[f].parent) {
            for (const Cell &c : frames_[f].slots) {
                legal_root(c, "saved environment");
            }
        }
    }
    for (Address a : trail_) {
        if (!live_address(a)) {
            fail("trail entry " + std::to_string(a.value) + " at or above H");
        }
        if (heap_.at(a).tag == Tag::Forward) {
            fail("trail entry targets a forwarded cell");
        }
    }
}

} // namespace wamgc
