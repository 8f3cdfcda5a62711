#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "vthm/access.hpp"
#include "vthm/devices.hpp"
#include "vthm/env.hpp"
#include "vthm/hwds.hpp"
#include "vthm/memory.hpp"
#include "vthm/packet.hpp"

namespace vthm {

// Interruption control block: binds a device event source to a dual
// thread's semaphore. The channel of the interruption unit affiliated with
// an armed ICB plays the supplier role of the IO protocol.
struct Icb {
    enum class State : uint8_t { Free, Allocated, Armed };
    enum class Supplier : uint8_t { Idle, Locking, Waiting };

    State state = State::Free;
    uint16_t owner_pid = 0;
    Word window[kIcbWindowWords] = {0};
    Supplier sstate = Supplier::Idle;
    std::deque<std::pair<Word, Word>> pending;  // (code, aux) raised events

    bool in_flight() const {
        return sstate != Supplier::Idle || !pending.empty();
    }
    Tid dual_tid() const { return Tid::unpack(window[kIcbDualTid]); }
    Priority dual_prio() const { return Priority{uint8_t(window[kIcbDualPrio] & 7)}; }
};

// Memory and IO management unit: access validation against the grant
// directory, ACVA translation, physical memory and device control access,
// the HWDS synchronization unit, the ICB interruption unit, and the block
// processing (DMA) unit.
class Miomu : public Unit {
public:
    explicit Miomu(Env& env);

    uint16_t unit_id() const { return unit_id_; }
    void on_input() override { ensure_step(); }

    // --- direct state access (bootstrap, snapshots, tests) ---
    PhysicalMemory& memory() { return mem_; }
    AccessDirectory& directory() { return directory_; }
    HwdsPool& hwds() { return hwds_; }
    ProcessContext& context(uint16_t pid);
    bool has_context(uint16_t pid) const { return contexts_.count(pid) != 0; }
    void create_context(uint16_t pid);
    const std::vector<DeviceChannel>& channels() const { return channels_; }
    DeviceChannel& channel(uint32_t id) { return channels_[id]; }
    const std::vector<Icb>& icbs() const { return icbs_; }
    uint64_t dropped_interrupts() const { return dropped_interrupts_; }

    // Validation per the grant directory. Hyper-privileged physical
    // addressing bypasses this entirely.
    bool validate_access(const Acva& a, uint8_t mode, Word len) const;

    // Devices raise completion events here.
    void raise_interrupt(uint32_t source, Word code, Word aux);

    // Exposed for the tick-counter contract tests.
    size_t armed_counters() const { return hwds_.armed_counters(); }

private:
    friend class System;

    void ensure_step();
    void step();
    void handle(MiomuRequest&& rq);
    void reply_to(const MiomuRequest& rq, MiomuReply&& rep, uint32_t extra_latency = 0);

    // Region-resolved target of a load/store.
    struct Target {
        enum class Kind : uint8_t { Ram, SemCell, IcbWord, DevWord, Invalid } kind;
        uint16_t ctx_pid = 0;  // Ram: owning context
        uint32_t index = 0;    // cell / icb / channel index
        Word off = 0;
    };
    Target resolve_target(const ResolvedAddr& addr, uint16_t refpid);

    // Load/store with validation; centre of translate_and_access.
    void do_mem_op(MiomuRequest& rq);
    void do_sync_op(MiomuRequest& rq);
    void do_pool_op(MiomuRequest& rq);   // SGET/SFREE/GETICB/FREEICB
    void do_grant(MiomuRequest& rq);
    void do_blkcpy(MiomuRequest& rq);

    // ICB control-window semantics.
    Word icb_read(uint32_t idx, Word off);
    CompletionCode icb_write(uint32_t idx, Word off, Word v, uint16_t pid);
    std::optional<CompletionCode> supplier_issue(uint32_t icb, SemOpKind kind);
    void supplier_start(uint32_t icb);
    void supplier_resume(uint32_t icb, CompletionCode code);
    void hwds_completion(uint32_t cell, SemAgent agent, CompletionCode code,
                         Priority prio);
    void arm_counter_sweep();

    // Device control and DMA.
    Word dev_ctrl_read(uint32_t ch, Word off);
    void dev_ctrl_write(uint32_t ch, Word off, Word v, uint16_t writer_pid,
                        Privilege writer_stat);
    void doorbell(uint32_t ch);
    void finish_device_transfer(uint32_t ch, Word code, Word moved);

    // Shared word-by-word copy used by BLKCPY and device DMA. Returns the
    // number of words moved and a completion code.
    struct CopyEnd {
        Word moved = 0;
        Word code = kIoNormal;
    };
    CopyEnd copy_words(const ResolvedAddr& dst, const ResolvedAddr& src,
                       Word len, uint16_t refpid, Privilege stat,
                       DeviceChannel* dev_dst, DeviceChannel* dev_src);

    Word read_word(const Target& t);
    void write_word(const Target& t, Word v, uint16_t pid, Privilege stat);

    void refresh_cell_hold(uint32_t cell);
    UnitAccount& cell_account(uint32_t cell);
    void refresh_hold();

    Env& env_;
    uint16_t unit_id_;
    uint16_t trace_id_;
    uint16_t hwds_trace_id_;
    UnitAccount account_;

    PhysicalMemory mem_;
    std::map<uint16_t, ProcessContext> contexts_;
    AccessDirectory directory_;
    HwdsPool hwds_;
    std::vector<Icb> icbs_;
    std::vector<DeviceChannel> channels_;
    std::map<uint32_t, uint32_t> source_to_icb_;

    std::vector<std::unique_ptr<UnitAccount>> cell_accounts_;
    std::vector<std::unique_ptr<UnitAccount>> dev_accounts_;
    std::vector<uint16_t> dev_trace_ids_;

    bool step_pending_ = false;
    bool sweep_pending_ = false;
    uint64_t in_flight_ = 0;  // outstanding timed replies / transfers
    uint64_t dropped_interrupts_ = 0;

    // Context of the synchronization op currently executing, used to split
    // the issuer's immediate completion from deferred wakes.
    struct SyncCtx {
        bool active = false;
        SemAgent issuer;
        bool completed = false;
        CompletionCode code = CompletionCode::Ok;
    };
    SyncCtx sync_ctx_;
};

}  // namespace vthm
