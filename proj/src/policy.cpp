#include "wamgc/policy.hpp"

#include <algorithm>
#include <limits>

#include "wamgc/machine.hpp"

namespace wamgc {

const char *policy_name(PolicyKind k) {
    switch (k) {
    case PolicyKind::Semispace: return "semispace";
    case PolicyKind::Incremental: return "inc";
    case PolicyKind::Generational: return "gen";
    }
    return "?";
}

std::optional<PolicyKind> parse_policy(const std::string &s) {
    if (s == "semispace") {
        return PolicyKind::Semispace;
    }
    if (s == "inc" || s == "incremental") {
        return PolicyKind::Incremental;
    }
    if (s == "gen" || s == "generational") {
        return PolicyKind::Generational;
    }
    return std::nullopt;
}

double survival_rate(const HeapBlock &b) {
    if (b.block_total <= 0.0) {
        return 0.0;
    }
    return b.block_live / b.block_total;
}

void update_survival(Heap &heap, const CollectionReport &report) {
    if (report.live_total == 0) {
        return;
    }
    for (const ToBlockShare &share : report.per_to_block) {
        double frac = static_cast<double>(share.live_block) / static_cast<double>(report.live_total);
        HeapBlock &b = heap.block(share.block);
        b.block_live += frac * static_cast<double>(report.live_total);
        b.block_total += frac * static_cast<double>(report.gc_total);
        // Double copies can make a to-block hold more cells than its share of gc_total.
        b.block_total = std::max(b.block_total, b.block_live);
    }
}

std::optional<BlockId> RoundRobin::select(Heap &heap, const std::vector<BlockId> &candidates, double threshold,
                                          double decay) {
    if (candidates.empty()) {
        return std::nullopt;
    }
    std::size_t start = 0;
    auto pos = std::find(candidates.begin(), candidates.end(), cursor_);
    if (pos != candidates.end()) {
        start = static_cast<std::size_t>(pos - candidates.begin());
    }
    std::optional<BlockId> chosen;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        BlockId b = candidates[(start + i) % candidates.size()];
        HeapBlock &blk = heap.block(b);
        if (survival_rate(blk) > threshold) {
            blk.block_live *= 1.0 - decay;
            ++skips_;
            continue;
        }
        chosen = b;
        break;
    }
    if (!chosen) {
        chosen = *std::min_element(candidates.begin(), candidates.end(), [&](BlockId a, BlockId b) {
            return survival_rate(heap.block(a)) < survival_rate(heap.block(b));
        });
    }
    cursor_ = heap.block(*chosen).next;
    return chosen;
}

Policy::Policy(const PolicyConfig &config, const HeapConfig &heap_config)
    : config_(config), trigger_threshold_(heap_config.block_size / std::max<std::uint64_t>(config.trigger_divisor, 1)) {
    if (config_.kind == PolicyKind::Semispace) {
        trigger_threshold_ = std::numeric_limits<std::uint64_t>::max();
    }
}

bool Policy::on_allocation(std::uint64_t n) {
    cells_since_gc_ += n;
    return cells_since_gc_ >= trigger_threshold_;
}

bool Policy::wants_collection(const Heap &) const { return false; }

namespace {

CollectOptions block_options(const Machine &m, bool use_predecessor) {
    CollectOptions o;
    o.use_predecessor_space = use_predecessor;
    o.early_reset = m.config().early_reset;
    return o;
}

} // namespace

std::optional<BlockId> IncrementalPolicy::select_victim(Heap &heap) {
    std::vector<BlockId> candidates = heap.chain();
    std::erase(candidates, heap.current());
    return rr_.select(heap, candidates, config_.skip_threshold, config_.skip_decay);
}

void IncrementalPolicy::run(Machine &m, bool) {
    std::optional<BlockId> victim = select_victim(m.heap());
    if (victim) {
        m.collect(*victim, block_options(m, true));
    }
}

void IncrementalPolicy::after_backtrack(Machine &m) {
    if (rr_.cursor() != kNoBlock && !m.heap().is_active(rr_.cursor())) {
        rr_.set_cursor(m.heap().head());
    }
}

std::vector<BlockId> GenerationalPolicy::old_generation(const Heap &heap) const {
    std::vector<BlockId> out;
    for (BlockId b : heap.chain()) {
        auto it = roles_.find(b);
        if (it != roles_.end() && it->second == Role::Old && b != heap.current()) {
            out.push_back(b);
        }
    }
    return out;
}

std::vector<BlockId> GenerationalPolicy::aging(const Heap &heap) const {
    std::vector<BlockId> out;
    for (BlockId b : heap.chain()) {
        auto it = roles_.find(b);
        if (it != roles_.end() && it->second == Role::Aging && b != heap.current()) {
            out.push_back(b);
        }
    }
    return out;
}

std::vector<BlockId> GenerationalPolicy::young(const Heap &heap) const {
    std::vector<BlockId> out;
    for (BlockId b : heap.chain()) {
        if (b == heap.current() || !roles_.contains(b)) {
            out.push_back(b);
        }
    }
    return out;
}

std::uint32_t GenerationalPolicy::min_survivals(BlockId b) const {
    auto it = survivals_.find(b);
    return it == survivals_.end() ? 0 : it->second;
}

void GenerationalPolicy::refresh(const Heap &heap) {
    std::erase_if(roles_, [&](const auto &kv) { return !heap.is_active(kv.first); });
    std::erase_if(survivals_, [&](const auto &kv) { return !heap.is_active(kv.first); });
}

void GenerationalPolicy::assign(const CollectionReport &report, BlockId from, Role role) {
    std::uint32_t age = min_survivals(from) + 1;
    for (std::size_t i = 0; i < report.per_to_block.size(); ++i) {
        BlockId b = report.per_to_block[i].block;
        if (i == 0 && report.used_predecessor) {
            auto it = survivals_.find(b);
            survivals_[b] = it == survivals_.end() ? age : std::min(it->second, age);
        } else {
            survivals_[b] = age;
            roles_[b] = role;
        }
    }
}

void GenerationalPolicy::collect_into(Machine &m, BlockId from, Role pred_role, Role to_role) {
    Heap &heap = m.heap();
    BlockId pred = heap.block(from).prev;
    bool use_pred = false;
    if (pred != kNoBlock) {
        auto it = roles_.find(pred);
        use_pred = it != roles_.end() && it->second == pred_role && pred != heap.current();
    }
    CollectionReport report = m.collect(from, block_options(m, use_pred));
    assign(report, from, to_role);
    refresh(heap);
}

void GenerationalPolicy::collect_nursery(Machine &m, bool include_current) {
    Heap &heap = m.heap();
    for (BlockId b : young(heap)) {
        if (include_current || b != heap.current()) {
            collect_into(m, b, Role::Aging, Role::Aging);
        }
    }
    // The aging space overflowed: everything but its newest block moves to
    // the top of the old generation.
    std::vector<BlockId> ag = aging(heap);
    if (ag.size() > 1) {
        ag.pop_back();
        for (BlockId b : ag) {
            collect_into(m, b, Role::Old, Role::Old);
        }
        alternation_pending_ = old_generation(heap).size();
    }
}

void GenerationalPolicy::run(Machine &m, bool forced) {
    refresh(m.heap());
    if (alternation_pending_ > 0 && !last_was_old_) {
        std::vector<BlockId> old = old_generation(m.heap());
        --alternation_pending_;
        last_was_old_ = true;
        std::optional<BlockId> victim = rr_.select(m.heap(), old, config_.skip_threshold, config_.skip_decay);
        if (victim) {
            collect_into(m, *victim, Role::Old, Role::Old);
            return;
        }
    }
    last_was_old_ = false;
    // The nursery is collected once it has overflowed into the next block,
    // where allocation continues; the trigger in between is left to the old
    // generation.
    if (forced || young(m.heap()).size() > 1) {
        collect_nursery(m, forced);
    }
}

void GenerationalPolicy::after_backtrack(Machine &m) {
    Heap &heap = m.heap();
    refresh(heap);
    // Allocation always continues in a nursery block.
    if (roles_.contains(heap.current())) {
        heap.expand();
    }
    if (rr_.cursor() != kNoBlock && !heap.is_active(rr_.cursor())) {
        rr_.set_cursor(kNoBlock);
    }
}

SemispacePolicy::SemispacePolicy(const PolicyConfig &config, const HeapConfig &heap_config)
    : Policy(config, heap_config),
      block_size_(heap_config.block_size),
      capacity_(config.semispace_initial_cells ? config.semispace_initial_cells : 4 * heap_config.block_size) {}

bool SemispacePolicy::wants_collection(const Heap &heap) const {
    return heap.active_blocks() * block_size_ > capacity_;
}

void SemispacePolicy::run(Machine &m, bool) {
    std::vector<BlockId> from = m.heap().chain();
    CollectOptions o;
    o.use_predecessor_space = false;
    o.early_reset = m.config().early_reset;
    o.allocate_in_to_space = true;
    CollectionReport report = m.collect(from, o);
    while (static_cast<double>(report.live_total) > config_.semispace_grow_threshold * static_cast<double>(capacity_)) {
        capacity_ *= 2;
    }
}

std::unique_ptr<Policy> make_policy(const PolicyConfig &config, const HeapConfig &heap_config) {
    switch (config.kind) {
    case PolicyKind::Semispace: return std::make_unique<SemispacePolicy>(config, heap_config);
    case PolicyKind::Incremental: return std::make_unique<IncrementalPolicy>(config, heap_config);
    case PolicyKind::Generational: return std::make_unique<GenerationalPolicy>(config, heap_config);
    }
    return nullptr;
}

} // namespace wamgc
