#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "wamgc/cell.hpp"
#include "wamgc/collector.hpp"
#include "wamgc/heap.hpp"
#include "wamgc/policy.hpp"
#include "wamgc/remset.hpp"

namespace wamgc {

inline constexpr std::size_t kNumRegisters = 16;
inline constexpr std::size_t kNoFrame = ~std::size_t{0};

using Registers = std::array<Cell, kNumRegisters>;

struct Frame {
    std::vector<Cell> slots;
    std::size_t parent = kNoFrame;
};

struct ChoicePoint {
    Address saved_h;
    std::size_t saved_trail_top = 0;
    Registers saved_registers{};
    std::size_t saved_env = kNoFrame;
    std::size_t saved_frame_count = 0;
    std::string label;
    bool collected = false;
};

struct MachineConfig {
    HeapConfig heap;
    PolicyConfig policy;
    bool early_reset = true;
    // The write barrier is only needed when single blocks are collected.
    bool write_barrier = true;
    bool strict = false;
};

struct PauseRecord {
    std::vector<BlockId> from_blocks;
    std::uint64_t gc_total = 0;
    std::uint64_t live_total = 0;
    std::chrono::nanoseconds pause{0};
    std::uint64_t work_units = 0;
    std::uint64_t double_copies = 0;
    std::uint64_t early_resets = 0;
    std::uint32_t max_copies_per_cell = 0;
    std::size_t remset_entries = 0;
    std::size_t trail_size = 0;
};

struct MachineStats {
    std::uint64_t n_gc = 0;
    std::uint64_t cells_allocated = 0;
    std::uint64_t cells_copied = 0;
    std::uint64_t double_copies = 0;
    std::uint64_t early_resets = 0;
    std::uint64_t backtracks = 0;
    std::uint64_t stale_cleared = 0;
    std::size_t trail_hwm = 0;
    std::uint64_t heap_hwm = 0;
    std::uint32_t max_copies_per_cell = 0;
    std::vector<PauseRecord> pauses;
};

//
// A small WAM-style abstract machine over the block heap: term building,
// binding with conditional trailing, choice points, backtracking with
// instant reclaiming and cut with tidy trail. Collections run only at
// safepoints, either on a pending policy trigger or when forced.
//
class Machine {
public:
    explicit Machine(const MachineConfig &config);
    ~Machine();

    Machine(const Machine &) = delete;
    Machine &operator=(const Machine &) = delete;

    const MachineConfig &config() const { return config_; }
    Heap &heap() { return heap_; }
    const Heap &heap() const { return heap_; }
    RememberedSets &remsets() { return remsets_; }
    const RememberedSets &remsets() const { return remsets_; }
    Policy &policy() { return *policy_; }
    const Policy &policy() const { return *policy_; }
    const MachineStats &stats() const { return stats_; }

    std::uint32_t intern(const std::string &name);
    const std::string &symbol_name(std::uint32_t sym) const { return symbols_[sym]; }

    // Term construction.
    Address new_var();
    Cell make_struct(std::uint32_t functor, std::span<const Cell> args);
    Cell make_list(Cell head, Cell tail);
    Cell deref(Cell v) const;

    // Binding.
    bool would_trail(Address a) const;
    void cond_trail(Address a);
    void bind(Address a, Cell v);
    bool unify(Cell x, Cell y);

    // Control.
    void push_choicepoint(const std::string &label);
    void backtrack();
    void backtrack_to(const std::string &label);
    void cut_and_tidy(const std::string &label);
    const std::vector<ChoicePoint> &choicepoints() const { return cps_; }
    const std::vector<Address> &trail() const { return trail_; }
    // Saved H of the newest choice point, if any.
    std::optional<Address> bh() const;

    // Roots.
    const Registers &registers() const { return regs_; }
    Cell reg(std::size_t i) const { return regs_.at(i); }
    void set_reg(std::size_t i, Cell v);
    std::size_t push_frame(std::size_t slots);
    std::size_t current_env() const { return env_; }
    const std::vector<Frame> &frames() const { return frames_; }
    Cell env_slot(std::size_t i) const;
    void set_env_slot(std::size_t i, Cell v);

    // Collection.
    bool gc_pending() const { return gc_pending_; }
    void safepoint();
    // A forced run always collects; a triggered one may find nothing to do.
    void run_policy(bool forced = true);
    CollectionReport collect(std::span<const BlockId> from, const CollectOptions &options);
    CollectionReport collect(BlockId from, const CollectOptions &options);
    bool collecting() const { return collecting_; }

    // Throws Fault(Corruption) on a broken structural invariant.
    void check_invariants() const;

    struct Hooks {
        std::function<void(Address, std::uint64_t)> on_alloc;
        std::function<void(const ChoicePoint &)> on_choicepoint;
        std::function<void(Address /*cell*/, bool /*trailed*/)> on_bind;
        std::function<void(const std::string &)> on_backtrack;
        std::function<void(std::span<const BlockId>)> before_collection;
        std::function<void(const CollectionReport &)> after_collection;
    };
    Hooks &hooks() { return hooks_; }

private:
    friend class Collector;

    Address alloc(std::uint64_t n);
    void store(Address a, Cell v);
    void reset_cell(Address a);
    void backtrack_once();
    void clear_stale_references(bool collected);
    bool frame_protected(std::size_t frame) const;
    void note_trail();

    MachineConfig config_;
    Heap heap_;
    RememberedSets remsets_;
    std::unique_ptr<Policy> policy_;
    Registers regs_{};
    std::vector<Frame> frames_;
    std::size_t env_ = kNoFrame;
    std::vector<Address> trail_;
    std::vector<ChoicePoint> cps_;
    std::vector<std::string> symbols_;
    std::unordered_map<std::string, std::uint32_t> symbol_ids_;
    MachineStats stats_;
    Hooks hooks_;
    bool gc_pending_ = false;
    bool collecting_ = false;
};

} // namespace wamgc
