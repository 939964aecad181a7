#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "wamgc/cell.hpp"
#include "wamgc/collector.hpp"
#include "wamgc/heap.hpp"

namespace wamgc {

class Machine;

enum class PolicyKind { Semispace, Incremental, Generational };

const char *policy_name(PolicyKind k);
std::optional<PolicyKind> parse_policy(const std::string &s);

struct PolicyConfig {
    PolicyKind kind = PolicyKind::Incremental;
    double skip_threshold = 0.8;
    double skip_decay = 0.10;
    std::uint64_t trigger_divisor = 2;
    // Semi-space baseline: initial heap capacity (0 means four blocks) and
    // the survival fraction above which the capacity doubles.
    std::uint64_t semispace_initial_cells = 0;
    double semispace_grow_threshold = 0.7;
    bool auto_gc = true;
};

double survival_rate(const HeapBlock &b);

// Credits each to-block with its share of the collection.
void update_survival(Heap &heap, const CollectionReport &report);

//
// Round-robin selection over an ordered candidate list starting at a
// cursor. Blocks whose survival rate exceeds the threshold are skipped
// and their block_live decays; if everything is skipped the lowest rate
// wins. The cursor advances past the chosen block.
//
class RoundRobin {
public:
    std::optional<BlockId> select(Heap &heap, const std::vector<BlockId> &candidates, double threshold, double decay);

    BlockId cursor() const { return cursor_; }
    void set_cursor(BlockId b) { cursor_ = b; }
    std::uint64_t skips() const { return skips_; }

private:
    BlockId cursor_ = kNoBlock;
    std::uint64_t skips_ = 0;
};

class Policy {
public:
    Policy(const PolicyConfig &config, const HeapConfig &heap_config);
    virtual ~Policy() = default;

    PolicyKind kind() const { return config_.kind; }
    const PolicyConfig &config() const { return config_; }

    // Returns true once the allocation volume since the last collection
    // reaches the trigger threshold.
    bool on_allocation(std::uint64_t n);
    std::uint64_t cells_since_gc() const { return cells_since_gc_; }
    std::uint64_t trigger_threshold() const { return trigger_threshold_; }
    void reset_counter() { cells_since_gc_ = 0; }

    virtual bool wants_collection(const Heap &heap) const;
    // Runs the collections scheduled for one trigger.
    virtual void run(Machine &m, bool forced) = 0;
    virtual void after_backtrack(Machine &) {}

protected:
    PolicyConfig config_;
    std::uint64_t trigger_threshold_;
    std::uint64_t cells_since_gc_ = 0;
};

class IncrementalPolicy : public Policy {
public:
    using Policy::Policy;

    // Candidates: all active blocks except the current one, oldest first.
    std::optional<BlockId> select_victim(Heap &heap);
    void run(Machine &m, bool forced) override;
    void after_backtrack(Machine &m) override;

    RoundRobin &round_robin() { return rr_; }

private:
    RoundRobin rr_;
};

//
// Nursery (the current block and any young blocks it spilled into), an
// aging space and an old generation, laid out in that order from the
// chain tail backwards. Once the nursery overflows into a second block
// the next trigger collects it into the aging space; when the aging space
// spills into a second block its older part is collected into the top of
// the old generation. Triggers then alternate between an old block and
// the nursery until every old block has been visited.
//
class GenerationalPolicy : public Policy {
public:
    enum class Role : std::uint8_t { Aging, Old };

    using Policy::Policy;

    void run(Machine &m, bool forced) override;
    void after_backtrack(Machine &m) override;

    std::vector<BlockId> young(const Heap &heap) const;
    std::vector<BlockId> aging(const Heap &heap) const;
    std::vector<BlockId> old_generation(const Heap &heap) const;
    std::size_t alternation_pending() const { return alternation_pending_; }
    // Minimum number of collections survived by the cells of a block.
    std::uint32_t min_survivals(BlockId b) const;

private:
    void collect_nursery(Machine &m, bool include_current);
    void collect_into(Machine &m, BlockId from, Role pred_role, Role to_role);
    void assign(const CollectionReport &report, BlockId from, Role role);
    void refresh(const Heap &heap);

    std::unordered_map<BlockId, Role> roles_;
    std::unordered_map<BlockId, std::uint32_t> survivals_;
    std::size_t alternation_pending_ = 0;
    bool last_was_old_ = false;
    RoundRobin rr_;
};

class SemispacePolicy : public Policy {
public:
    SemispacePolicy(const PolicyConfig &config, const HeapConfig &heap_config);

    bool wants_collection(const Heap &heap) const override;
    void run(Machine &m, bool forced) override;

    std::uint64_t capacity_cells() const { return capacity_; }

private:
    std::uint64_t block_size_;
    std::uint64_t capacity_;
};

std::unique_ptr<Policy> make_policy(const PolicyConfig &config, const HeapConfig &heap_config);

} // namespace wamgc
