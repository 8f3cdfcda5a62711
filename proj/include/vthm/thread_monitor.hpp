#pragma once

#include <map>
#include <optional>

#include "vthm/env.hpp"
#include "vthm/packet.hpp"
#include "vthm/prio_queue.hpp"

namespace vthm {

enum class ThreadState : uint8_t {
    ReadyToSchedule,
    AwaitingCompletion,
    BlockedOnSemaphore,
    Halted,
    Aborted,
};

struct ThreadRoot {
    Tid tid;
    Privilege tstat = Privilege::NonPrivileged;
    Priority tprior{0};
    uint32_t pc = 0;
    uint32_t next_pc = 0;
    Word cc = 0;
    ThreadState state = ThreadState::ReadyToSchedule;
    bool resident = true;  // L0 root storage vs the descriptor store
    uint32_t program = 0;  // image index
    std::vector<std::pair<uint8_t, Word>> pending_writes;
    uint8_t blocked_reg = 0;
    uint32_t blocked_cell = 0;
    // A semaphore completion may overtake the blocking transaction's own
    // result on the network; it parks here until the block lands.
    std::optional<CompletionCode> early_wake;
};

enum class CreateError : uint8_t {
    None,
    PriorityExceedsProcess,
    StatusExceedsProcess,
    ThreadSpaceExhausted,
    InvalidEntry,
};

// Holds thread-descriptor roots in two waiting queues (ready to schedule,
// awaiting completion), forms prioritized transactions with dependency
// graphs, and applies completion results.
class ThreadMonitor : public Unit {
public:
    ThreadMonitor(Env& env, uint32_t index);

    uint16_t unit_id() const { return unit_id_; }
    void on_input() override { ensure_step(); }

    // Installs a new ready root (bootstrap and SPAWN paths).
    void insert_root(ThreadRoot root);

    const std::map<uint32_t, ThreadRoot>& roots() const { return roots_; }
    const ThreadRoot* root_of(Tid tid) const;

    // Queue-partition invariant: every root is in exactly one place.
    bool check_partition() const;

    // Forms the next transaction for `root`: code from pc up to the window
    // limit, the first non-local control transfer, or the first
    // transaction-ending opcode. Exposed for unit tests.
    Transaction form_transaction(const ThreadRoot& root) const;

private:
    void ensure_step();
    void step();
    void try_form();
    void issue(Transaction&& txn);
    void complete_transaction(const TxnResult& res);
    void apply_wake(const SemWake& wake);
    void handle_spawn(ThreadRoot& parent, const SpawnRequest& sp);
    void abort_thread(ThreadRoot& root, uint32_t reason);
    void retire(ThreadRoot& root);

    Env& env_;
    uint32_t index_;
    uint16_t unit_id_;
    uint16_t trace_id_;
    UnitAccount account_;

    std::map<uint32_t, ThreadRoot> roots_;
    PrioQueue<uint32_t> ready_q_;
    bool forming_ = false;
    bool step_pending_ = false;
};

}  // namespace vthm
