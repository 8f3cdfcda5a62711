#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "vthm/prio_queue.hpp"
#include "vthm/types.hpp"

namespace vthm {

// An agent cooperating over a semaphore: a computational thread, or an
// interruption-unit channel acting as the supplier side of the IO protocol.
struct SemAgent {
    enum class Kind : uint8_t { Thread = 0, IcbSupplier = 1 };
    Kind kind = Kind::Thread;
    uint32_t id = 0;  // packed tid, or ICB index

    static SemAgent thread(Tid t) { return {Kind::Thread, t.packed()}; }
    static SemAgent supplier(uint32_t icb) { return {Kind::IcbSupplier, icb}; }

    uint64_t key() const { return uint64_t(kind) << 32 | id; }
    bool operator==(const SemAgent&) const = default;
};

enum class SemOpKind : uint8_t { Lock, Unlock, Wait, Pass };

// Hardware-driven semaphore pool. Each operation executes as one
// indivisible step; completions (immediate or deferred) are delivered
// through the callbacks below, inside the same step that causes them.
//
// The pool is virtual: cells above the top-level capacity are spilled and
// reloaded on demand. The caller charges the reload latency; the pool just
// tracks residency.
class HwdsPool {
public:
    struct Callbacks {
        // Entered/Passed/TimedOut/Fault delivery for a deferred or
        // immediate op, with the agent's priority.
        std::function<void(uint32_t cell, SemAgent, CompletionCode, Priority)>
            complete;
        // Trace hooks; any may be empty.
        std::function<void(uint32_t cell, SemAgent)> on_enter;
        std::function<void(uint32_t cell, SemAgent)> on_exit;
        std::function<void(uint32_t cell, SemAgent, bool event_q)> on_queue;
        // next is the admitted agent (id 0 when the interval frees);
        // from_event says which queue it came from.
        std::function<void(uint32_t cell, SemAgent, SemAgent next, bool pass,
                           bool from_event)>
            on_handoff;
        std::function<void(uint32_t cell, SemAgent)> on_timeout;
    };

    HwdsPool(uint32_t top_cells, uint32_t max_cells, Callbacks cb)
        : top_cells_(top_cells), max_cells_(max_cells), cb_(std::move(cb)) {}

    // SemaphoreGet: allocates a free cell or returns nullopt (Empty).
    std::optional<uint32_t> sget(uint16_t owner_pid);

    // SemaphoreFree. Ok, Busy (waiters or CI held), or Fault (not the
    // owning process).
    CompletionCode sfree(uint32_t cell, uint16_t pid);

    // The four synchronization operations. Deferred outcomes arrive via
    // callbacks; an immediate Entered is also delivered via `complete`.
    void op(SemOpKind kind, uint32_t cell, SemAgent agent, Priority prio,
            uint32_t timeout);

    // Decrements every armed counter; expiries complete with TimedOut.
    // Returns the number of armed counters remaining.
    size_t tick_counters();
    size_t armed_counters() const { return armed_; }

    // Abort cleanup: if `agent` owns a cell, the cell is poisoned and all
    // queued waiters complete with Fault; the agent is also removed from
    // any queue it waits in.
    void drop_agent(SemAgent agent);

    bool is_allocated(uint32_t cell) const;
    bool is_valid(uint32_t cell) const { return cell < cells_.size(); }
    uint16_t owner_pid(uint32_t cell) const { return cells_[cell].owner_pid; }
    bool poisoned(uint32_t cell) const { return cells_[cell].poisoned; }
    std::optional<SemAgent> ci_owner(uint32_t cell) const;
    bool has_waiters(uint32_t cell) const;
    size_t waiter_count(uint32_t cell) const;

    // Virtual-pool residency. ensure_resident returns true when the cell
    // had to be reloaded from the spill store.
    bool is_resident(uint32_t cell) const { return cells_[cell].resident; }
    bool ensure_resident(uint32_t cell);

    size_t allocated_count() const { return allocated_; }

    // Waiting agents of a cell together with the queue they sit in, used
    // for deadlock reports. Pairs of (agent, in_event_q).
    std::vector<std::pair<SemAgent, bool>> waiters(uint32_t cell) const;

private:
    struct Cell {
        bool allocated = false;
        bool poisoned = false;
        bool resident = true;
        uint16_t owner_pid = 0;
        uint64_t last_use = 0;
        std::optional<SemAgent> ci;
        PrioQueue<SemAgent> mutex_q;
        PrioQueue<SemAgent> event_q;
        // agent key -> (remaining ticks, queue priority)
        std::map<uint64_t, std::pair<uint32_t, Priority>> counters;
    };

    void enter_ci(Cell& c, uint32_t idx, SemAgent a, CompletionCode code,
                  Priority prio);
    void leave_ci(Cell& c, uint32_t idx, SemAgent a);
    void admit_next(Cell& c, uint32_t idx, bool browse_event_q, SemAgent from);
    void discard_counter(Cell& c, SemAgent a);
    void fault(uint32_t idx, SemAgent a, Priority prio);
    void touch(Cell& c) { c.last_use = ++use_clock_; }

    uint32_t top_cells_;
    uint32_t max_cells_;
    Callbacks cb_;
    std::vector<Cell> cells_;
    size_t allocated_ = 0;
    size_t resident_ = 0;
    size_t armed_ = 0;
    uint64_t use_clock_ = 0;
    uint64_t arrival_ = 0;
};

}  // namespace vthm
