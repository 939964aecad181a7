#include "wamgc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

#include "wamgc/oracle.hpp"

namespace wamgc::harness {

namespace {

using Clock = std::chrono::steady_clock;

class Runner {
public:
    Runner(const RunConfig &config, const std::vector<Command> &commands)
        : config_(config), commands_(commands), m_(config.machine) {
        for (const Command &c : commands_) {
            std::visit([&](const auto &x) { declare(x); }, c);
        }
        m_.push_frame(slots_.size());
        defined_.assign(slots_.size(), false);
        if (config_.verify || config_.gc_log) {
            install_hooks();
        }
    }

    RunStats run() {
        auto started = Clock::now();
        for (const Command &c : commands_) {
            std::visit([&](const auto &x) { exec(x); }, c);
            ++stats_.commands;
            m_.safepoint();
        }
        auto total = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - started);
        finish(total);
        return stats_;
    }

private:
    template <typename T> void declare(const T &x) {
        if constexpr (requires { x.name; }) {
            if constexpr (!std::is_same_v<T, cmd::SetReg>) {
                slots_.try_emplace(x.name, slots_.size());
            }
        }
    }

    std::size_t slot(const std::string &name) const {
        auto it = slots_.find(name);
        if (it == slots_.end() || !defined_[it->second]) {
            throw Fault(FaultKind::ContractViolation, "name '" + name + "' used before it was defined");
        }
        return it->second;
    }
    Cell value(const std::string &name) const { return m_.env_slot(slot(name)); }
    void define(const std::string &name, Cell v) {
        std::size_t s = slots_.at(name);
        defined_[s] = true;
        m_.set_env_slot(s, v);
    }

    void exec(const cmd::Var &c) { define(c.name, Cell::ref(m_.new_var())); }
    void exec(const cmd::Int &c) { define(c.name, Cell::integer(c.value)); }
    void exec(const cmd::Struct &c) {
        std::vector<Cell> args;
        args.reserve(c.args.size());
        for (const auto &a : c.args) {
            args.push_back(value(a));
        }
        define(c.name, m_.make_struct(m_.intern(c.functor), args));
    }
    void exec(const cmd::List &c) { define(c.name, m_.make_list(value(c.head), value(c.tail))); }
    void exec(const cmd::Bind &c) {
        Cell a = m_.deref(value(c.a));
        Cell b = m_.deref(value(c.b));
        if (a.tag == Tag::Ref) {
            m_.bind(a.address(), b);
        } else if (b.tag == Tag::Ref) {
            m_.bind(b.address(), a);
        } else {
            throw Fault(FaultKind::ContractViolation, "bind " + c.a + " " + c.b + ": neither side is unbound");
        }
    }
    void exec(const cmd::Unify &c) {
        if (!m_.unify(value(c.a), value(c.b))) {
            ++stats_.unify_failures;
        }
    }
    void exec(const cmd::SetReg &c) { m_.set_reg(c.index, value(c.name)); }
    void exec(const cmd::Cp &c) { m_.push_choicepoint(c.label); }
    void exec(const cmd::Bt &c) { m_.backtrack_to(c.label); }
    void exec(const cmd::Cut &c) { m_.cut_and_tidy(c.label); }
    void exec(const cmd::ForceGc &) { m_.run_policy(); }
    void exec(const cmd::Checkpoint &) {
        if (!config_.verify) {
            return;
        }
        ++stats_.checkpoints;
        invariants();
        if (m_.config().write_barrier) {
            ++stats_.completeness_checks;
            auto missing = oracle::missing_remset_entries(m_);
            if (!missing.empty()) {
                fail(Check::RemsetCompleteness, "checkpoint: " + std::to_string(missing.size()) +
                     " inter-block references without a remembered-set entry, first " + describe_ref(missing.front()));
            }
        }
    }

    oracle::Snapshot graph() const {
        return m_.config().early_reset ? oracle::continuations_snapshot(m_) : oracle::full_snapshot(m_);
    }

    std::string describe_ref(Address s) const {
        const Heap &heap = m_.heap();
        Address t = heap.at(s).address();
        return std::to_string(s.value) + " (block " + std::to_string(heap.block_of(s)) + ") -> " +
               std::to_string(t.value) + " (block " + std::to_string(heap.block_of(t)) + ")";
    }

    [[noreturn]] void fail(Check check, const std::string &what) const {
        throw VerifyFailure(check, "after command " + std::to_string(stats_.commands + 1) + ": " + what);
    }

    void invariants() const {
        try {
            m_.check_invariants();
        } catch (const Fault &f) {
            fail(Check::Invariants, f.what());
        }
    }

    void install_hooks() {
        Machine::Hooks &h = m_.hooks();
        if (config_.verify) {
            h.before_collection = [this](std::span<const BlockId>) { before_ = graph(); };
            h.on_choicepoint = [this](const ChoicePoint &) {
                at_cp_.resize(m_.choicepoints().size() - 1);
                at_cp_.push_back(oracle::continuation_snapshot(m_, m_.choicepoints().size()));
            };
            h.on_backtrack = [this](const std::string &label) {
                std::size_t idx = m_.choicepoints().size();
                ++stats_.backtrack_checks;
                if (oracle::continuation_snapshot(m_, idx) != at_cp_.at(idx)) {
                    fail(Check::Backtrack, "state after backtracking to " + label + " differs from the state at its choice point");
                }
                at_cp_.resize(idx);
                if (m_.config().write_barrier) {
                    ++stats_.remset_safety_checks;
                    auto bad = oracle::unsafe_remset_entries(m_);
                    if (!bad.empty()) {
                        fail(Check::RemsetSafety, "after backtracking to " + label + ": " + bad.front());
                    }
                }
                invariants();
            };
        }
        h.after_collection = [this](const CollectionReport &r) {
            if (config_.gc_log) {
                nlohmann::json j;
                j["from"] = r.from_blocks;
                j["gc_total"] = r.gc_total;
                j["live_total"] = r.live_total;
                j["pause_ns"] = config_.timing ? r.pause.count() : 0;
                j["work_units"] = r.work_units;
                j["double_copies"] = r.double_copies;
                j["early_resets"] = r.early_resets;
                j["optimistic_hits"] = r.optimistic_hits;
                nlohmann::json to = nlohmann::json::array();
                for (const auto &s : r.per_to_block) {
                    to.push_back({{"block", s.block}, {"live_block", s.live_block}});
                }
                j["to"] = to;
                j["remset_entries"] = r.remset_entries_after;
                j["remset_roots"] = r.remset_roots;
                j["trail_size"] = m_.trail().size();
                *config_.gc_log << j.dump() << '\n';
            }
            if (config_.verify) {
                ++stats_.graph_checks;
                invariants();
                if (graph() != before_) {
                    fail(Check::Graph, "term graph changed by the collection of block " + std::to_string(r.from_blocks.front()));
                }
                if (r.max_copies_per_cell > 2) {
                    fail(Check::CopyBound, "a cell was copied " + std::to_string(r.max_copies_per_cell) + " times");
                }
                if (m_.config().write_barrier) {
                    ++stats_.collection_scans;
                    auto missing = oracle::missing_remset_entries(m_);
                    if (!missing.empty()) {
                        fail(Check::RemsetCompleteness, "collection left " + std::to_string(missing.size()) +
                             " unrecorded inter-block references, first " + describe_ref(missing.front()));
                    }
                }
            }
        };
    }

    void finish(std::chrono::nanoseconds total) {
        const MachineStats &ms = m_.stats();
        stats_.workload = config_.workload;
        stats_.policy = policy_name(config_.machine.policy.kind);
        stats_.block_size = config_.machine.heap.block_size;
        stats_.n_gc = ms.n_gc;
        stats_.t_tot_ns = config_.timing ? static_cast<std::uint64_t>(total.count()) : 0;
        if (!ms.pauses.empty()) {
            std::uint64_t t_min = UINT64_MAX, t_max = 0, t_sum = 0;
            std::uint64_t w_min = UINT64_MAX, w_max = 0, w_sum = 0;
            for (const PauseRecord &p : ms.pauses) {
                auto t = static_cast<std::uint64_t>(p.pause.count());
                t_min = std::min(t_min, t);
                t_max = std::max(t_max, t);
                t_sum += t;
                w_min = std::min(w_min, p.work_units);
                w_max = std::max(w_max, p.work_units);
                w_sum += p.work_units;
            }
            if (config_.timing) {
                stats_.t_gc_ns = t_sum;
                stats_.t_l_ns = t_min;
                stats_.t_a_ns = t_sum / ms.pauses.size();
                stats_.t_u_ns = t_max;
            }
            stats_.w_gc = w_sum;
            stats_.w_l = w_min;
            stats_.w_a = static_cast<double>(w_sum) / static_cast<double>(ms.pauses.size());
            stats_.w_u = w_max;
        }
        stats_.m_alloc_blocks = m_.heap().blocks_created();
        stats_.m_alloc_cells = stats_.m_alloc_blocks * m_.heap().block_size();
        stats_.m_hp = std::max(ms.heap_hwm, m_.heap().used_cells());
        stats_.m_rs = m_.remsets().high_watermark();
        stats_.double_copies = ms.double_copies;
        stats_.early_resets = ms.early_resets;
        stats_.trail_hwm = ms.trail_hwm;
        stats_.cells_allocated = ms.cells_allocated;
        stats_.cells_copied = ms.cells_copied;
        stats_.max_copies_per_cell = ms.max_copies_per_cell;
        stats_.backtracks = ms.backtracks;
    }

    RunConfig config_;
    const std::vector<Command> &commands_;
    Machine m_;
    std::unordered_map<std::string, std::size_t> slots_;
    std::vector<bool> defined_;
    std::vector<oracle::Snapshot> at_cp_;
    oracle::Snapshot before_;
    RunStats stats_;
};

} // namespace

const char *check_name(Check c) {
    switch (c) {
    case Check::Graph: return "graph";
    case Check::Backtrack: return "backtrack";
    case Check::RemsetSafety: return "remset-safety";
    case Check::RemsetCompleteness: return "remset-completeness";
    case Check::CopyBound: return "copy-bound";
    case Check::Invariants: return "invariants";
    }
    return "?";
}

RunStats run(const RunConfig &config, const std::vector<Command> &commands) {
    Runner r(config, commands);
    return r.run();
}

std::string to_json(const RunStats &s) {
    nlohmann::ordered_json j;
    j["workload"] = s.workload;
    j["policy"] = s.policy;
    j["block_size"] = s.block_size;
    j["n_gc"] = s.n_gc;
    j["t_gc_ns"] = s.t_gc_ns;
    j["t_tot_ns"] = s.t_tot_ns;
    j["t_l_ns"] = s.t_l_ns;
    j["t_a_ns"] = s.t_a_ns;
    j["t_u_ns"] = s.t_u_ns;
    j["w_gc"] = s.w_gc;
    j["w_l"] = s.w_l;
    j["w_a"] = s.w_a;
    j["w_u"] = s.w_u;
    j["m_alloc_blocks"] = s.m_alloc_blocks;
    j["m_alloc_cells"] = s.m_alloc_cells;
    j["m_hp"] = s.m_hp;
    j["m_rs"] = s.m_rs;
    j["double_copies"] = s.double_copies;
    j["early_resets"] = s.early_resets;
    j["trail_hwm"] = s.trail_hwm;
    j["cells_allocated"] = s.cells_allocated;
    j["cells_copied"] = s.cells_copied;
    j["max_copies_per_cell"] = s.max_copies_per_cell;
    j["commands"] = s.commands;
    j["backtracks"] = s.backtracks;
    j["unify_failures"] = s.unify_failures;
    j["graph_checks"] = s.graph_checks;
    j["backtrack_checks"] = s.backtrack_checks;
    j["remset_safety_checks"] = s.remset_safety_checks;
    j["completeness_checks"] = s.completeness_checks;
    j["checkpoints"] = s.checkpoints;
    j["collection_scans"] = s.collection_scans;
    return j.dump(2);
}

std::string csv_header() {
    return "workload,policy,block_size,n_gc,t_gc,t_tot,t_l,t_a,t_u,m_alloc_blocks,m_alloc_cells,m_hp,m_rs";
}

std::string to_csv_row(const RunStats &s) {
    auto ms = [](std::uint64_t ns) { return nlohmann::json(static_cast<double>(ns) / 1e6).dump(); };
    return s.workload + "," + s.policy + "," + std::to_string(s.block_size) + "," + std::to_string(s.n_gc) + "," +
           ms(s.t_gc_ns) + "," + ms(s.t_tot_ns) + "," + ms(s.t_l_ns) + "," + ms(s.t_a_ns) + "," + ms(s.t_u_ns) + "," +
           std::to_string(s.m_alloc_blocks) + "," + std::to_string(s.m_alloc_cells) + "," + std::to_string(s.m_hp) +
           "," + std::to_string(s.m_rs);
}

} // namespace wamgc::harness
