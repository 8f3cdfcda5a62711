#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "vthm/access.hpp"
#include "vthm/isa.hpp"
#include "vthm/types.hpp"

namespace vthm {

// A priority-tagged instruction block plus its information-dependency
// graph, the unit of work a thread monitor hands to an executive cluster.
struct Transaction {
    Tid tid;
    Priority priority;
    Privilege tstat = Privilege::NonPrivileged;
    uint32_t start_pc = 0;
    std::vector<Instruction> instrs;
    // Read-after-write register dependencies: edge i -> j means instrs[j]
    // reads a register instrs[i] writes.
    std::vector<std::pair<uint16_t, uint16_t>> dep_edges;
    // Deferred register writes applied before execution (results of
    // blocking instructions completed while the thread was away).
    std::vector<std::pair<uint8_t, Word>> pending_writes;
};

// Builds the RAW edges for an instruction window.
std::vector<std::pair<uint16_t, uint16_t>> build_dep_graph(
    const std::vector<Instruction>& instrs);

struct SpawnRequest {
    bool process = false;  // true: create process from image index
    uint32_t entry = 0;    // entry pc, or program image index
    uint32_t attr = 0;     // (stat << 4) | prior
    uint8_t dest_reg = 0;
};

enum class TxnOutcome : uint8_t { Normal, Blocked, Halted, Aborted };

struct TxnResult {
    Tid tid;
    TxnOutcome outcome = TxnOutcome::Normal;
    uint32_t next_pc = 0;
    CompletionCode cc = CompletionCode::Ok;
    uint32_t sem_cell = 0;        // Blocked: which cell the thread waits on
    uint8_t blocked_reg = 0;      // Blocked: rd awaiting the completion code
    uint32_t abort_reason = 0;
    std::optional<SpawnRequest> spawn;
};

// A memory / synchronization / block-processing request on the load-store
// path, with operand registers already read out.
struct ResolvedAddr {
    bool phys = false;
    Acva acva;
    uint32_t asi = 0;
    uint64_t pha = 0;
};

struct MiomuRequest {
    uint64_t req_id = 0;
    Tid tid;
    Priority prio;
    Privilege tstat = Privilege::NonPrivileged;
    uint32_t arch_no = 0;
    Opcode op = Opcode::LD;
    ResolvedAddr a;   // primary address (LD/ST target, sync cell, BLKCPY dst)
    ResolvedAddr b;   // BLKCPY src
    Word v0 = 0;      // ST value / BLKCPY len / GRANT pids
    Word v1 = 0;      // GRANT orva
    Word v2 = 0;      // GRANT (l << 4) | mode
    uint32_t timeout = 0;
};

struct MiomuReply {
    uint64_t req_id = 0;
    Tid tid;
    uint32_t arch_no = 0;
    CompletionCode code = CompletionCode::Ok;
    bool blocked = false;  // thread parked on a semaphore; txn finalizes
    bool fault = false;    // abnormal completion; thread aborts
    Word value = 0;
    uint32_t sem_cell = 0;
};

// Deferred semaphore completion delivered to the blocked thread's monitor.
struct SemWake {
    Tid tid;
    CompletionCode code = CompletionCode::Ok;
    uint32_t sem_cell = 0;
};

// Monitor tells the MIOMU a thread died so owned cells can be poisoned.
struct AbortNotice {
    Tid tid;
};

struct Packet {
    uint16_t src = 0;
    uint16_t dst = 0;
    Priority priority;
    Tid producer_tid;
    Tick enqueue_tick = 0;
    std::variant<Transaction, TxnResult, MiomuRequest, MiomuReply, SemWake,
                 AbortNotice>
        payload;
};

}  // namespace vthm
