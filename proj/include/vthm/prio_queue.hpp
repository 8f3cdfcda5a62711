#pragma once

#include <cassert>
#include <cstdint>
#include <optional>
#include <vector>

#include "vthm/types.hpp"

namespace vthm {

// Prioritized queue used at the entrance of every unit with independent
// activity: pop yields the highest priority entry, ties broken by smallest
// arrival sequence (FIFO). Entries can also be removed out of order
// (timeouts, preemption victims), so this is a plain vector with linear
// scans; queues stay small.
template <typename T>
class PrioQueue {
public:
    struct Entry {
        Priority priority;
        uint64_t arrival_seq;
        T payload;
    };

    void push(Priority prio, uint64_t arrival_seq, T payload) {
        entries_.push_back(Entry{prio, arrival_seq, std::move(payload)});
    }

    bool empty() const { return entries_.empty(); }
    size_t size() const { return entries_.size(); }

    // Index of the (max priority, min arrival) entry.
    size_t top_index() const {
        assert(!entries_.empty());
        size_t best = 0;
        for (size_t i = 1; i < entries_.size(); ++i) {
            const auto& e = entries_[i];
            const auto& b = entries_[best];
            if (e.priority > b.priority ||
                (e.priority == b.priority && e.arrival_seq < b.arrival_seq))
                best = i;
        }
        return best;
    }

    const Entry& top() const { return entries_[top_index()]; }

    Entry pop() {
        size_t i = top_index();
        Entry e = std::move(entries_[i]);
        entries_.erase(entries_.begin() + ptrdiff_t(i));
        return e;
    }

    // The (min priority, max arrival) entry: the preemption victim.
    std::optional<size_t> min_index() const {
        if (entries_.empty()) return std::nullopt;
        size_t worst = 0;
        for (size_t i = 1; i < entries_.size(); ++i) {
            const auto& e = entries_[i];
            const auto& w = entries_[worst];
            if (e.priority < w.priority ||
                (e.priority == w.priority && e.arrival_seq > w.arrival_seq))
                worst = i;
        }
        return worst;
    }

    Entry remove_at(size_t i) {
        Entry e = std::move(entries_[i]);
        entries_.erase(entries_.begin() + ptrdiff_t(i));
        return e;
    }

    template <typename Pred>
    std::optional<Entry> remove_if(Pred pred) {
        for (size_t i = 0; i < entries_.size(); ++i) {
            if (pred(entries_[i].payload)) return remove_at(i);
        }
        return std::nullopt;
    }

    template <typename Pred>
    bool contains(Pred pred) const {
        for (const auto& e : entries_)
            if (pred(e.payload)) return true;
        return false;
    }

    const std::vector<Entry>& entries() const { return entries_; }
    void clear() { entries_.clear(); }

private:
    std::vector<Entry> entries_;
};

}  // namespace vthm
