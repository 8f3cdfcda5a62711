#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "vthm/env.hpp"
#include "vthm/packet.hpp"
#include "vthm/prio_queue.hpp"

namespace vthm {

// Architectural registers r0..r31 are split into 4 swappable blocks of 8.
constexpr uint32_t kRegsPerBlock = 8;
constexpr uint32_t kBlocksPerThread = kNumRegisters / kRegsPerBlock;

inline uint64_t block_key(Tid tid, uint32_t block_id) {
    return uint64_t(tid.packed()) << 8 | block_id;
}

// Executive cluster: accepts transactions, maps architectural registers to
// resident register-block slots (allocating and swapping on demand with
// priority/aging eviction), dispatches ready instructions by priority with
// preemption, executes ALU and branch instructions locally and routes
// everything else to the MIOMU over the load-store path.
class ExecCluster : public Unit {
public:
    ExecCluster(Env& env, uint32_t index);

    uint16_t unit_id() const { return unit_id_; }
    void on_input() override { ensure_step(); }

    // Architectural state through the block hierarchy (L0, spill, zeros).
    std::array<Word, kNumRegisters> read_registers(Tid tid) const;
    // Writes a register wherever the block lives, without timing effects
    // (deferred completion values restored ahead of a transaction).
    void poke_register(Tid tid, uint8_t reg, Word v);

    size_t resident_blocks() const;
    uint32_t capacity() const { return capacity_; }  // 0 = unbounded

    uint64_t dispatched_count() const { return dispatched_count_; }

private:
    struct BlockData {
        std::array<Word, kRegsPerBlock> w{};
    };
    struct Slot {
        bool used = false;
        bool reserved = false;  // fetch or writeback in progress
        uint64_t key = 0;
        BlockData data;
        bool dirty = false;
        Tick last_access = 0;
        Priority prio{0};
        int pins = 0;
        std::unique_ptr<UnitAccount> account;
    };

    enum class IStage : uint8_t { Waiting, Ready, Executing, Parked, Done, Cancelled };
    struct IState {
        IStage stage = IStage::Waiting;
        uint64_t arrival = 0;
        uint64_t pred_mask = 0;
        uint64_t demand_keys = 0;  // bitmask over the txn's block list
        bool alloc_queued = false;
        bool reserved = false;  // holds reservation pins on its demand set
    };
    struct TxnRec {
        Transaction txn;
        uint64_t id = 0;
        std::vector<IState> st;
        std::vector<uint64_t> blocks;  // demanded block keys
        uint64_t completed = 0;        // done | cancelled bits
        uint64_t cancelled = 0;
        int in_flight = 0;
        bool finalized = false;
        std::optional<uint32_t> terminal_next_pc;
        bool halted = false;
        std::optional<SpawnRequest> spawn;
        bool blocked = false;
        uint32_t blocked_cell = 0;
        uint8_t blocked_reg = 0;
        bool aborted = false;
        uint32_t abort_reason = 0;
    };

    void ensure_step();
    void step();
    void accept(Transaction&& txn);
    void apply_reply(const MiomuReply& rep);
    void progress();
    void promote();
    void dispatch();
    void execute(TxnRec& t, uint32_t idx);
    void complete_instr(TxnRec& t, uint32_t idx);
    void cancel_range(TxnRec& t, uint32_t after, uint32_t upto);
    void resolve_branch(TxnRec& t, uint32_t idx);
    void try_finalize(TxnRec& t);
    void cleanup(uint64_t txn_id);

    // Register-block machinery. The mapping unit serves one instruction's
    // block demand at a time; blocks are pinned as they arrive so a
    // concurrent demand can never undo a half-assembled operand set.
    void enqueue_alloc(TxnRec& t, uint32_t idx);
    void pump_alloc();
    void batch_fetch_missing();
    void batch_abort();
    void batch_key_arrived(uint64_t key, int slot);
    bool block_resident(uint64_t key) const;
    int find_slot(uint64_t key) const;
    void evict_thread_blocks(Tid tid);
    void spill_to_l1(uint64_t key, const BlockData& data, bool dirty);
    Word reg_value(Tid tid, uint8_t reg) const;
    void write_reg(Tid tid, uint8_t reg, Word v);
    void pin_blocks(const TxnRec& t, uint32_t idx, int delta);
    void release_reservation(TxnRec& t, uint32_t idx);
    void refresh_slot_hold(size_t slot);
    UnitAccount& slot_account(size_t slot);

    ResolvedAddr make_addr(const Operand& o, Tid tid) const;
    void send_request(TxnRec& t, uint32_t idx);

    bool deps_satisfied(const TxnRec& t, uint32_t idx) const {
        return (t.st[idx].pred_mask & ~t.completed) == 0;
    }
    bool blocks_ready(const TxnRec& t, uint32_t idx) const;

    Env& env_;
    uint32_t index_;
    uint16_t unit_id_;
    uint16_t trace_id_;
    UnitAccount account_;

    uint32_t capacity_;
    std::vector<Slot> slots_;
    std::map<uint64_t, std::pair<BlockData, uint64_t>> l1_;  // key -> (data, age)
    std::map<uint64_t, BlockData> l2_;
    uint64_t l1_age_ = 0;

    struct AllocBatch {
        uint64_t txn = 0;
        uint32_t idx = 0;
        Priority prio{0};
        std::vector<uint64_t> missing;   // keys still being fetched
        std::vector<uint64_t> fetching;  // keys with a fetch in flight
        std::vector<uint64_t> pinned;    // keys holding a reservation pin
        bool retry_scheduled = false;
    };
    std::optional<AllocBatch> batch_;
    PrioQueue<std::pair<uint64_t, uint32_t>> alloc_q_;

    std::map<uint64_t, TxnRec> txns_;
    uint64_t next_txn_id_ = 1;
    uint64_t next_req_id_ = 1;
    std::map<uint64_t, std::pair<uint64_t, uint32_t>> req_map_;  // req -> txn, idx

    // Pipeline input: ready instructions ordered by priority and arrival.
    PrioQueue<std::pair<uint64_t, uint32_t>> ready_q_;

    Tick last_dispatch_tick_ = ~0ull;
    uint32_t dispatched_this_tick_ = 0;
    uint64_t dispatched_count_ = 0;
    bool step_pending_ = false;
    bool pumping_ = false;
    bool alloc_retry_scheduled_ = false;
};

}  // namespace vthm
