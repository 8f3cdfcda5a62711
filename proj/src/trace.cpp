#include "vthm/trace.hpp"

#include <sstream>

#include "vthm/isa.hpp"

namespace vthm {

const char* trace_kind_name(TraceKind k) {
    switch (k) {
    case TraceKind::PROC_CREATE: return "PROC_CREATE";
    case TraceKind::THREAD_CREATE: return "THREAD_CREATE";
    case TraceKind::THREAD_WAKE: return "THREAD_WAKE";
    case TraceKind::THREAD_BLOCK: return "THREAD_BLOCK";
    case TraceKind::THREAD_ABORT: return "THREAD_ABORT";
    case TraceKind::TXN_ISSUE: return "TXN_ISSUE";
    case TraceKind::TXN_COMPLETE: return "TXN_COMPLETE";
    case TraceKind::BLK_ALLOC: return "BLK_ALLOC";
    case TraceKind::BLK_EVICT: return "BLK_EVICT";
    case TraceKind::BLK_WB: return "BLK_WB";
    case TraceKind::INSTR_DISPATCH: return "INSTR_DISPATCH";
    case TraceKind::INSTR_PREEMPT: return "INSTR_PREEMPT";
    case TraceKind::INSTR_DONE: return "INSTR_DONE";
    case TraceKind::ACC_PERMIT: return "ACC_PERMIT";
    case TraceKind::ACC_DENY: return "ACC_DENY";
    case TraceKind::SEM_GET: return "SEM_GET";
    case TraceKind::SEM_FREE: return "SEM_FREE";
    case TraceKind::SEM_ENTER: return "SEM_ENTER";
    case TraceKind::SEM_EXIT: return "SEM_EXIT";
    case TraceKind::SEM_QUEUE: return "SEM_QUEUE";
    case TraceKind::SEM_PASS: return "SEM_PASS";
    case TraceKind::SEM_UNLOCK: return "SEM_UNLOCK";
    case TraceKind::SEM_TIMEOUT: return "SEM_TIMEOUT";
    case TraceKind::ICB_RAISE: return "ICB_RAISE";
    case TraceKind::ICB_DELIVER: return "ICB_DELIVER";
    case TraceKind::ICB_DROP: return "ICB_DROP";
    case TraceKind::DMA_START: return "DMA_START";
    case TraceKind::DMA_DONE: return "DMA_DONE";
    case TraceKind::ROOT_SWAP_IN: return "ROOT_SWAP_IN";
    case TraceKind::ROOT_SWAP_OUT: return "ROOT_SWAP_OUT";
    case TraceKind::HALT_ALL: return "HALT_ALL";
    case TraceKind::DEADLOCK: return "DEADLOCK";
    }
    return "?";
}

std::string format_trace(const TraceRecord& r, const std::string& unit_name) {
    std::ostringstream os;
    os << r.tick << " " << unit_name << " " << trace_kind_name(r.kind) << " "
       << tid_to_string(Tid::unpack(r.tid));
    switch (r.kind) {
    case TraceKind::PROC_CREATE:
        os << " pid=" << r.a << " pprior=" << r.b << " pstat=" << r.c;
        break;
    case TraceKind::THREAD_CREATE:
        os << " tprior=" << r.a << " pc=" << r.b;
        break;
    case TraceKind::THREAD_WAKE:
    case TraceKind::THREAD_BLOCK:
        os << " sem=0x" << std::hex << r.a << std::dec << " code=" << r.b;
        break;
    case TraceKind::THREAD_ABORT:
        os << " reason=" << r.a << " pc=" << r.b;
        break;
    case TraceKind::TXN_ISSUE:
        os << " prio=" << r.a << " pc=" << r.b << " n=" << r.c;
        break;
    case TraceKind::TXN_COMPLETE:
        os << " next_pc=" << r.a << " state=" << r.b;
        break;
    case TraceKind::BLK_ALLOC:
    case TraceKind::BLK_EVICT:
    case TraceKind::BLK_WB:
        os << " block=" << r.a << " level=" << r.b;
        break;
    case TraceKind::INSTR_DISPATCH:
    case TraceKind::INSTR_PREEMPT:
    case TraceKind::INSTR_DONE:
        os << " arch_no=" << r.a << " prio=" << r.b;
        break;
    case TraceKind::ACC_PERMIT:
    case TraceKind::ACC_DENY:
        os << " lva=0x" << std::hex << r.a << std::dec << " mode=" << r.b
           << " len=" << r.c;
        break;
    case TraceKind::SEM_GET:
    case TraceKind::SEM_FREE:
    case TraceKind::SEM_ENTER:
    case TraceKind::SEM_EXIT:
    case TraceKind::SEM_QUEUE:
    case TraceKind::SEM_TIMEOUT:
        os << " sem=0x" << std::hex << r.a << std::dec;
        if (r.kind == TraceKind::SEM_QUEUE) os << " q=" << (r.b ? "event" : "mutex");
        break;
    case TraceKind::SEM_PASS:
    case TraceKind::SEM_UNLOCK:
        os << " sem=0x" << std::hex << r.a << std::dec << " next=0x" << std::hex
           << r.b << std::dec;
        break;
    case TraceKind::ICB_RAISE:
    case TraceKind::ICB_DELIVER:
    case TraceKind::ICB_DROP:
        os << " icb=" << r.a << " source=" << r.b << " code=" << r.c;
        break;
    case TraceKind::DMA_START:
    case TraceKind::DMA_DONE:
        os << " len=" << r.a << " code=" << r.b;
        break;
    case TraceKind::ROOT_SWAP_IN:
    case TraceKind::ROOT_SWAP_OUT:
        break;
    case TraceKind::HALT_ALL:
        os << " final_tick=" << r.a;
        break;
    case TraceKind::DEADLOCK:
        os << " blocked=" << r.a;
        break;
    }
    return os.str();
}

}  // namespace vthm
