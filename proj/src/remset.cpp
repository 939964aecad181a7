#include "wamgc/remset.hpp"

#include <algorithm>
#include <string>

namespace wamgc {

const char *entry_kind_name(EntryKind k) {
    switch (k) {
    case EntryKind::Normal: return "normal";
    case EntryKind::Gc: return "gc";
    case EntryKind::GcTop: return "gctop";
    }
    return "?";
}

void RememberedSets::note_size() { high_watermark_ = std::max(high_watermark_, entries_); }

void RememberedSets::erase_if_empty(std::map<SetKey, Stack>::iterator it) {
    if (it->second.empty()) {
        sets_.erase(it);
    }
}

bool RememberedSets::barrier_record(Address source, const Cell &v, bool during_gc) {
    if (!v.is_pointer() || heap_.same_block(source, v.address())) {
        return false;
    }
    SetKey key{heap_.block_of(source), heap_.block_of(v.address())};
    sets_[key].push_back(RemEntry{source, during_gc ? EntryKind::Gc : EntryKind::Normal});
    if (during_gc) {
        touched_.insert(key);
    }
    ++entries_;
    ++counters_.recorded;
    note_size();
    return true;
}

std::vector<RemEntry> RememberedSets::roots_for(BlockId target) const {
    std::vector<RemEntry> out;
    for (const auto &[key, stack] : sets_) {
        if (key.target != target) {
            continue;
        }
        for (const RemEntry &e : stack) {
            if (e.kind != EntryKind::GcTop) {
                out.push_back(e);
            }
        }
    }
    return out;
}

void RememberedSets::drop_sets_of(BlockId b) {
    for (auto it = sets_.begin(); it != sets_.end();) {
        if (it->first.source == b || it->first.target == b) {
            entries_ -= it->second.size();
            touched_.erase(it->first);
            it = sets_.erase(it);
        } else {
            ++it;
        }
    }
}

void RememberedSets::untrail_hook(Address trailed, const Cell &before) {
    if (!before.is_pointer() || heap_.same_block(trailed, before.address())) {
        return;
    }
    auto it = sets_.find(SetKey{heap_.block_of(trailed), heap_.block_of(before.address())});
    if (it == sets_.end() || it->second.back().kind == EntryKind::GcTop) {
        return;
    }
    Stack &stack = it->second;
    // Entries above the trailed one were added later and die with it.
    std::size_t i = stack.size();
    while (i > 0) {
        const RemEntry &e = stack[i - 1];
        if (e.kind != EntryKind::Normal) {
            i = 0;
            break;
        }
        if (e.addr == trailed) {
            break;
        }
        --i;
    }
    if (i == 0) {
        ++counters_.untrail_missing;
        if (strict_) {
            throw Fault(FaultKind::Corruption,
                        "untrailed cell " + std::to_string(trailed.value) + " has no remembered-set entry");
        }
        return;
    }
    std::size_t removed = stack.size() - (i - 1);
    stack.resize(i - 1);
    entries_ -= removed;
    counters_.untrail_removed += removed;
    erase_if_empty(it);
}

bool RememberedSets::gc_top_passed(Address gc_top, Address new_h) const {
    BlockId b = heap_.block_of(gc_top);
    if (!heap_.is_active(b)) {
        return true;
    }
    return heap_.cell_older(new_h, gc_top);
}

void RememberedSets::post_backtrack_scan(BlockId backtrack_block, Address new_h) {
    // Source cells of the scanned sets all live in the backtrack block, so
    // "younger than new H" is plain address order there.
    auto reclaimed = [&](const RemEntry &e) { return e.addr >= new_h; };
    for (auto it = sets_.begin(); it != sets_.end();) {
        if (it->first.source != backtrack_block) {
            ++it;
            continue;
        }
        Stack &stack = it->second;
        std::size_t before = stack.size();

        // Collected regions given back by backtracking release their Gc run.
        while (!stack.empty() && stack.back().kind == EntryKind::GcTop && gc_top_passed(stack.back().addr, new_h)) {
            stack.pop_back();
            std::size_t run_start = stack.size();
            while (run_start > 0 && stack[run_start - 1].kind == EntryKind::Gc) {
                --run_start;
            }
            auto kept = std::remove_if(stack.begin() + static_cast<std::ptrdiff_t>(run_start), stack.end(), reclaimed);
            stack.erase(kept, stack.end());
            ++counters_.gc_runs_released;
        }

        while (!stack.empty() && stack.back().kind == EntryKind::Normal && reclaimed(stack.back())) {
            stack.pop_back();
            ++counters_.reclaimed_removed;
        }

        // A collection may have left older entries for reclaimed cells below a
        // guarded run; those must go too.
        std::size_t mid = stack.size();
        auto kept = std::remove_if(stack.begin(), stack.end(),
                                   [&](const RemEntry &e) { return e.kind != EntryKind::GcTop && reclaimed(e); });
        stack.erase(kept, stack.end());
        counters_.residual_removed += mid - stack.size();

        entries_ -= before - stack.size();
        if (stack.empty()) {
            touched_.erase(it->first);
            it = sets_.erase(it);
        } else {
            ++it;
        }
    }
}

void RememberedSets::append_gc_tops(Address gc_top) {
    for (const SetKey &key : touched_) {
        auto it = sets_.find(key);
        if (it == sets_.end()) {
            continue;
        }
        it->second.push_back(RemEntry{gc_top, EntryKind::GcTop});
        ++entries_;
    }
    touched_.clear();
    note_size();
}

const RememberedSets::Stack *RememberedSets::find(SetKey key) const {
    auto it = sets_.find(key);
    return it == sets_.end() ? nullptr : &it->second;
}

} // namespace wamgc
