#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "vthm/types.hpp"

namespace vthm {

enum class TraceKind : uint8_t {
    PROC_CREATE,
    THREAD_CREATE,
    THREAD_WAKE,
    THREAD_BLOCK,
    THREAD_ABORT,
    TXN_ISSUE,
    TXN_COMPLETE,
    BLK_ALLOC,
    BLK_EVICT,
    BLK_WB,
    INSTR_DISPATCH,
    INSTR_PREEMPT,
    INSTR_DONE,
    ACC_PERMIT,
    ACC_DENY,
    SEM_GET,
    SEM_FREE,
    SEM_ENTER,
    SEM_EXIT,
    SEM_QUEUE,
    SEM_PASS,
    SEM_UNLOCK,
    SEM_TIMEOUT,
    ICB_RAISE,
    ICB_DELIVER,
    ICB_DROP,
    DMA_START,
    DMA_DONE,
    ROOT_SWAP_IN,
    ROOT_SWAP_OUT,
    HALT_ALL,
    DEADLOCK,
};

const char* trace_kind_name(TraceKind k);

struct TraceRecord {
    Tick tick = 0;
    uint16_t unit = 0;
    TraceKind kind = TraceKind::PROC_CREATE;
    uint32_t tid = 0;  // packed tid, 0 where not applicable
    uint64_t a = 0, b = 0, c = 0;
};

// Formats a record as the line `tick unit event tid detail`.
std::string format_trace(const TraceRecord& r, const std::string& unit_name);

class Trace {
public:
    using Observer = std::function<void(const TraceRecord&)>;

    uint16_t register_unit(const std::string& name) {
        unit_names_.push_back(name);
        return uint16_t(unit_names_.size() - 1);
    }
    const std::string& unit_name(uint16_t u) const { return unit_names_[u]; }

    void emit(const TraceRecord& r) {
        hash_record(r);
        if (text_out_) (*text_out_) << format_trace(r, unit_names_[r.unit]) << "\n";
        for (auto& obs : observers_) obs(r);
    }

    void set_text_output(std::ostream* os) { text_out_ = os; }
    void add_observer(Observer obs) { observers_.push_back(std::move(obs)); }

    // FNV-1a over the raw record fields; a pure function of the event
    // sequence, used for the determinism contract.
    uint64_t hash() const { return hash_; }

private:
    void hash_record(const TraceRecord& r) {
        auto mix = [this](uint64_t v) {
            for (int i = 0; i < 8; ++i) {
                hash_ ^= (v >> (i * 8)) & 0xFF;
                hash_ *= 0x100000001B3ull;
            }
        };
        mix(r.tick);
        mix(uint64_t(r.unit) << 32 | uint64_t(r.kind));
        mix(r.tid);
        mix(r.a);
        mix(r.b);
        mix(r.c);
    }

    std::vector<std::string> unit_names_;
    std::ostream* text_out_ = nullptr;
    std::vector<Observer> observers_;
    uint64_t hash_ = 0xCBF29CE484222325ull;
};

}  // namespace vthm
