#include "vthm/hwds.hpp"

#include <cassert>

namespace vthm {

std::optional<uint32_t> HwdsPool::sget(uint16_t owner_pid) {
    // Reuse the lowest free index before growing the cell namespace.
    uint32_t idx = uint32_t(cells_.size());
    for (uint32_t i = 0; i < cells_.size(); ++i) {
        if (!cells_[i].allocated) {
            idx = i;
            break;
        }
    }
    if (idx == cells_.size()) {
        if (cells_.size() >= max_cells_) return std::nullopt;
        cells_.emplace_back();
        cells_.back().resident = false;
    }
    Cell& c = cells_[idx];
    c.allocated = true;
    c.poisoned = false;
    c.owner_pid = owner_pid;
    c.ci.reset();
    c.mutex_q.clear();
    c.event_q.clear();
    c.counters.clear();
    if (!c.resident) {
        c.resident = true;  // fresh cells need no reload
        ++resident_;
    }
    ++allocated_;
    touch(c);
    if (resident_ > top_cells_) {
        // Spill the least recently used other resident cell.
        uint32_t victim = idx;
        uint64_t oldest = ~0ull;
        for (uint32_t i = 0; i < cells_.size(); ++i) {
            if (i == idx || !cells_[i].resident) continue;
            if (cells_[i].last_use < oldest) {
                oldest = cells_[i].last_use;
                victim = i;
            }
        }
        if (victim != idx) {
            cells_[victim].resident = false;
            --resident_;
        }
    }
    return idx;
}

CompletionCode HwdsPool::sfree(uint32_t cell, uint16_t pid) {
    Cell& c = cells_[cell];
    if (!c.allocated || c.owner_pid != pid) return CompletionCode::Fault;
    if (c.ci || !c.mutex_q.empty() || !c.event_q.empty())
        return CompletionCode::Busy;
    c.allocated = false;
    c.poisoned = false;
    armed_ -= c.counters.size();
    c.counters.clear();
    --allocated_;
    return CompletionCode::Ok;
}

bool HwdsPool::ensure_resident(uint32_t cell) {
    Cell& c = cells_[cell];
    touch(c);
    if (c.resident) return false;
    if (resident_ >= top_cells_) {
        uint32_t victim = cell;
        uint64_t oldest = ~0ull;
        for (uint32_t i = 0; i < cells_.size(); ++i) {
            if (i == cell || !cells_[i].resident) continue;
            if (cells_[i].last_use < oldest) {
                oldest = cells_[i].last_use;
                victim = i;
            }
        }
        assert(victim != cell);
        cells_[victim].resident = false;
        --resident_;
    }
    c.resident = true;
    ++resident_;
    return true;
}

bool HwdsPool::is_allocated(uint32_t cell) const {
    return cell < cells_.size() && cells_[cell].allocated;
}

std::optional<SemAgent> HwdsPool::ci_owner(uint32_t cell) const {
    return cells_[cell].ci;
}

bool HwdsPool::has_waiters(uint32_t cell) const {
    const Cell& c = cells_[cell];
    return !c.mutex_q.empty() || !c.event_q.empty();
}

size_t HwdsPool::waiter_count(uint32_t cell) const {
    const Cell& c = cells_[cell];
    return c.mutex_q.size() + c.event_q.size();
}

std::vector<std::pair<SemAgent, bool>> HwdsPool::waiters(uint32_t cell) const {
    std::vector<std::pair<SemAgent, bool>> out;
    for (const auto& e : cells_[cell].mutex_q.entries())
        out.emplace_back(e.payload, false);
    for (const auto& e : cells_[cell].event_q.entries())
        out.emplace_back(e.payload, true);
    return out;
}

void HwdsPool::discard_counter(Cell& c, SemAgent a) {
    auto it = c.counters.find(a.key());
    if (it != c.counters.end()) {
        c.counters.erase(it);
        --armed_;
    }
}

void HwdsPool::enter_ci(Cell& c, uint32_t idx, SemAgent a, CompletionCode code,
                        Priority prio) {
    assert(!c.ci);
    c.ci = a;
    if (cb_.on_enter) cb_.on_enter(idx, a);
    cb_.complete(idx, a, code, prio);
}

void HwdsPool::leave_ci(Cell& c, uint32_t idx, SemAgent a) {
    c.ci.reset();
    if (cb_.on_exit) cb_.on_exit(idx, a);
}

// Admits the next entrant after `from` left the critical interval.
// SemaphorePass browses the event queue first; SemaphoreUnlock only ever
// admits from the mutex queue.
void HwdsPool::admit_next(Cell& c, uint32_t idx, bool browse_event_q,
                          SemAgent from) {
    if (browse_event_q && !c.event_q.empty()) {
        auto e = c.event_q.pop();
        discard_counter(c, e.payload);
        if (cb_.on_handoff) cb_.on_handoff(idx, from, e.payload, true, true);
        enter_ci(c, idx, e.payload, CompletionCode::Passed, e.priority);
        return;
    }
    if (!c.mutex_q.empty()) {
        auto e = c.mutex_q.pop();
        discard_counter(c, e.payload);
        if (cb_.on_handoff)
            cb_.on_handoff(idx, from, e.payload, browse_event_q, false);
        enter_ci(c, idx, e.payload, CompletionCode::Ok, e.priority);
        return;
    }
    if (cb_.on_handoff)
        cb_.on_handoff(idx, from, SemAgent{}, browse_event_q, false);
}

void HwdsPool::fault(uint32_t idx, SemAgent a, Priority prio) {
    cb_.complete(idx, a, CompletionCode::Fault, prio);
}

void HwdsPool::op(SemOpKind kind, uint32_t cell, SemAgent agent, Priority prio,
                  uint32_t timeout) {
    Cell& c = cells_[cell];
    touch(c);
    if (!c.allocated || c.poisoned) {
        fault(cell, agent, prio);
        return;
    }
    switch (kind) {
    case SemOpKind::Lock:
        if (!c.ci) {
            enter_ci(c, cell, agent, CompletionCode::Ok, prio);
        } else if (*c.ci == agent) {
            fault(cell, agent, prio);  // recursive entry
        } else {
            c.mutex_q.push(prio, arrival_++, agent);
            if (cb_.on_queue) cb_.on_queue(cell, agent, false);
            if (timeout > 0) {
                c.counters[agent.key()] = {timeout, prio};
                ++armed_;
            }
        }
        break;
    case SemOpKind::Unlock:
        if (!c.ci || !(*c.ci == agent)) {
            fault(cell, agent, prio);
            break;
        }
        leave_ci(c, cell, agent);
        admit_next(c, cell, /*browse_event_q=*/false, agent);
        cb_.complete(cell, agent, CompletionCode::Ok, prio);
        break;
    case SemOpKind::Wait:
        if (!c.ci || !(*c.ci == agent)) {
            fault(cell, agent, prio);
            break;
        }
        // One indivisible step: unlock semantics, then join the event queue.
        leave_ci(c, cell, agent);
        admit_next(c, cell, /*browse_event_q=*/false, agent);
        c.event_q.push(prio, arrival_++, agent);
        if (cb_.on_queue) cb_.on_queue(cell, agent, true);
        if (timeout > 0) {
            c.counters[agent.key()] = {timeout, prio};
            ++armed_;
        }
        break;
    case SemOpKind::Pass:
        if (!c.ci || !(*c.ci == agent)) {
            fault(cell, agent, prio);
            break;
        }
        leave_ci(c, cell, agent);
        admit_next(c, cell, /*browse_event_q=*/true, agent);
        cb_.complete(cell, agent, CompletionCode::Ok, prio);
        break;
    }
}

size_t HwdsPool::tick_counters() {
    for (uint32_t idx = 0; idx < cells_.size(); ++idx) {
        Cell& c = cells_[idx];
        if (c.counters.empty()) continue;
        std::vector<std::pair<SemAgent, Priority>> expired;
        for (auto& [key, counter] : c.counters) {
            if (--counter.first == 0) {
                expired.push_back({SemAgent{SemAgent::Kind(key >> 32),
                                            uint32_t(key & 0xFFFFFFFF)},
                                   counter.second});
            }
        }
        for (auto [a, prio] : expired) {
            c.counters.erase(a.key());
            --armed_;
            auto match = [a = a](const SemAgent& x) { return x == a; };
            bool removed = c.mutex_q.remove_if(match).has_value() ||
                           c.event_q.remove_if(match).has_value();
            assert(removed);
            (void)removed;
            if (cb_.on_timeout) cb_.on_timeout(idx, a);
            cb_.complete(idx, a, CompletionCode::TimedOut, prio);
        }
    }
    return armed_;
}

void HwdsPool::drop_agent(SemAgent agent) {
    for (uint32_t idx = 0; idx < cells_.size(); ++idx) {
        Cell& c = cells_[idx];
        if (!c.allocated) continue;
        auto match = [agent](const SemAgent& x) { return x == agent; };
        if (c.mutex_q.remove_if(match) || c.event_q.remove_if(match))
            discard_counter(c, agent);
        if (c.ci && *c.ci == agent) {
            // The owner died inside the critical interval: poison the cell
            // and fail every queued waiter.
            c.poisoned = true;
            c.ci.reset();
            std::vector<std::pair<SemAgent, Priority>> victims;
            for (const auto& e : c.mutex_q.entries())
                victims.push_back({e.payload, e.priority});
            for (const auto& e : c.event_q.entries())
                victims.push_back({e.payload, e.priority});
            c.mutex_q.clear();
            c.event_q.clear();
            armed_ -= c.counters.size();
            c.counters.clear();
            for (auto [v, p] : victims)
                cb_.complete(idx, v, CompletionCode::Fault, p);
        }
    }
}

}  // namespace vthm
