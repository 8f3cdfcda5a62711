#include "vthm/thread_monitor.hpp"

#include <cassert>

namespace vthm {

std::vector<std::pair<uint16_t, uint16_t>> build_dep_graph(
    const std::vector<Instruction>& instrs) {
    std::vector<std::pair<uint16_t, uint16_t>> edges;
    for (size_t j = 0; j < instrs.size(); ++j) {
        RegSet reads = reg_reads(instrs[j]);
        for (size_t i = 0; i < j; ++i) {
            if (reg_writes(instrs[i]).mask & reads.mask)
                edges.emplace_back(uint16_t(i), uint16_t(j));
        }
    }
    return edges;
}

ThreadMonitor::ThreadMonitor(Env& env, uint32_t index)
    : env_(env), index_(index) {
    unit_id_ = env_.router.attach(this);
    trace_id_ = env_.trace.register_unit("monitor" + std::to_string(index));
    account_.attach(&env_.metrics, "monitor" + std::to_string(index),
                    env_.cfg.weight_monitor, 0);
}

const ThreadRoot* ThreadMonitor::root_of(Tid tid) const {
    auto it = roots_.find(tid.packed());
    return it == roots_.end() ? nullptr : &it->second;
}

void ThreadMonitor::insert_root(ThreadRoot root) {
    root.state = ThreadState::ReadyToSchedule;
    uint32_t packed = root.tid.packed();
    env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::THREAD_CREATE,
                     packed, root.tprior.value, root.pc});
    roots_[packed] = std::move(root);
    ready_q_.push(roots_[packed].tprior, env_.engine.next_arrival_seq(), packed);
    ++env_.live_threads;
    ensure_step();
}

void ThreadMonitor::ensure_step() {
    if (step_pending_) return;
    step_pending_ = true;
    env_.engine.schedule(0, [this] {
        step_pending_ = false;
        step();
    });
}

void ThreadMonitor::step() {
    bool any = false;
    while (auto pkt = env_.router.fetch(unit_id_)) {
        any = true;
        if (auto* res = std::get_if<TxnResult>(&pkt->payload)) {
            complete_transaction(*res);
        } else if (auto* wake = std::get_if<SemWake>(&pkt->payload)) {
            apply_wake(*wake);
        }
    }
    if (any) account_.mark_useful(env_.engine.now());
    try_form();
}

Transaction ThreadMonitor::form_transaction(const ThreadRoot& root) const {
    const ProgramImage& img = env_.images[root.program];
    Transaction txn;
    txn.tid = root.tid;
    txn.priority = root.tprior;
    txn.tstat = root.tstat;
    txn.start_pc = root.pc;
    uint32_t pc = root.pc;
    uint32_t window = env_.cfg.window;
    for (uint32_t i = pc; i < img.code.size(); ++i) {
        const Instruction& in = img.code[i];
        txn.instrs.push_back(in);
        if (op_ends_transaction(in.op)) break;
        if (auto t = branch_target(in)) {
            // Local forward targets stay inside the transaction; anything
            // else finalizes it at the jump.
            bool local_forward = *t > i && *t < pc + window;
            if (!local_forward) break;
        }
        if (txn.instrs.size() >= window) break;
    }
    txn.dep_edges = build_dep_graph(txn.instrs);
    return txn;
}

void ThreadMonitor::try_form() {
    if (forming_ || ready_q_.empty()) return;
    uint32_t packed = ready_q_.pop().payload;
    ThreadRoot& root = roots_.at(packed);
    assert(root.state == ThreadState::ReadyToSchedule);

    const ProgramImage& img = env_.images[root.program];
    if (root.pc >= img.code.size()) {
        abort_thread(root, /*reason=*/1);
        ensure_step();
        return;
    }

    account_.mark_useful(env_.engine.now());
    uint32_t duration = env_.lat_fetch();
    if (!root.resident) {
        // The root descriptor is reloaded from the descriptor store first.
        env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::ROOT_SWAP_IN,
                         packed});
        root.resident = true;
        duration += env_.cfg.l1_latency;
    }

    Transaction txn = form_transaction(root);
    txn.pending_writes = std::move(root.pending_writes);
    root.pending_writes.clear();
    root.state = ThreadState::AwaitingCompletion;
    env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::TXN_ISSUE, packed,
                     root.tprior.value, root.pc, txn.instrs.size()});

    forming_ = true;
    auto shared = std::make_shared<Transaction>(std::move(txn));
    env_.engine.schedule(duration, [this, shared] {
        forming_ = false;
        issue(std::move(*shared));
        try_form();
    });
}

void ThreadMonitor::issue(Transaction&& txn) {
    Packet pkt;
    pkt.src = unit_id_;
    pkt.dst = env_.cluster_for(txn.tid);
    pkt.priority = txn.priority;
    pkt.producer_tid = txn.tid;
    pkt.payload = std::move(txn);
    env_.router.route(std::move(pkt));
}

void ThreadMonitor::complete_transaction(const TxnResult& res) {
    auto it = roots_.find(res.tid.packed());
    if (it == roots_.end() || it->second.state != ThreadState::AwaitingCompletion)
        throw std::logic_error("transaction result for unknown or idle thread");
    ThreadRoot& root = it->second;
    env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::TXN_COMPLETE,
                     res.tid.packed(), res.next_pc, uint64_t(res.outcome)});

    root.next_pc = res.next_pc;
    switch (res.outcome) {
    case TxnOutcome::Normal:
        root.pc = res.next_pc;
        root.cc = Word(res.cc);
        if (res.spawn) handle_spawn(root, *res.spawn);
        if (root.state == ThreadState::Aborted) break;  // spawn authority fault
        root.state = ThreadState::ReadyToSchedule;
        ready_q_.push(root.tprior, env_.engine.next_arrival_seq(),
                      root.tid.packed());
        break;
    case TxnOutcome::Blocked:
        root.pc = res.next_pc;
        root.blocked_reg = res.blocked_reg;
        root.blocked_cell = res.sem_cell;
        root.state = ThreadState::BlockedOnSemaphore;
        env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::THREAD_BLOCK,
                         res.tid.packed(), kSemRegionBase + res.sem_cell});
        if (root.early_wake) {
            CompletionCode code = *root.early_wake;
            root.early_wake.reset();
            apply_wake(SemWake{root.tid, code, res.sem_cell});
            break;
        }
        // Long waits sink the whole distributed thread representation to
        // lower memory levels; the root goes to the descriptor store.
        env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::ROOT_SWAP_OUT,
                         res.tid.packed()});
        root.resident = false;
        break;
    case TxnOutcome::Halted:
        root.pc = res.next_pc;
        retire(root);
        root.state = ThreadState::Halted;
        break;
    case TxnOutcome::Aborted:
        abort_thread(root, res.abort_reason);
        break;
    }
    ensure_step();
}

void ThreadMonitor::apply_wake(const SemWake& wake) {
    auto it = roots_.find(wake.tid.packed());
    if (it == roots_.end()) return;
    ThreadRoot& root = it->second;
    if (root.state == ThreadState::AwaitingCompletion) {
        root.early_wake = wake.code;
        return;
    }
    if (root.state != ThreadState::BlockedOnSemaphore) return;
    if (wake.code == CompletionCode::Fault) {
        // The critical interval was poisoned under the waiter.
        abort_thread(root, /*reason=*/2);
        return;
    }
    root.cc = Word(wake.code);
    root.pending_writes.emplace_back(root.blocked_reg, Word(wake.code));
    root.state = ThreadState::ReadyToSchedule;
    env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::THREAD_WAKE,
                     wake.tid.packed(), kSemRegionBase + wake.sem_cell,
                     uint64_t(wake.code)});
    ready_q_.push(root.tprior, env_.engine.next_arrival_seq(),
                  root.tid.packed());
    account_.mark_useful(env_.engine.now());
}

void ThreadMonitor::handle_spawn(ThreadRoot& parent, const SpawnRequest& sp) {
    uint32_t child = 0;
    if (sp.process) {
        if (parent.tstat != Privilege::HyperPrivileged) {
            abort_thread(parent, /*reason=*/3);
            return;
        }
        child = env_.create_process(sp.entry, sp.attr, parent.tid);
    } else {
        if (parent.tstat < Privilege::Privileged) {
            abort_thread(parent, /*reason=*/3);
            return;
        }
        child = env_.create_thread(parent.tid.pid, parent.program, sp.entry,
                                   sp.attr);
    }
    parent.pending_writes.emplace_back(sp.dest_reg, child);
}

void ThreadMonitor::abort_thread(ThreadRoot& root, uint32_t reason) {
    env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::THREAD_ABORT,
                     root.tid.packed(), reason, root.pc});
    retire(root);
    root.state = ThreadState::Aborted;
    Packet pkt;
    pkt.src = unit_id_;
    pkt.dst = env_.miomu_unit;
    pkt.priority = Priority{Priority::kMax};
    pkt.producer_tid = root.tid;
    pkt.payload = AbortNotice{root.tid};
    env_.router.route(std::move(pkt));
}

void ThreadMonitor::retire(ThreadRoot& root) {
    root.resident = false;
    --env_.live_threads;
}

bool ThreadMonitor::check_partition() const {
    for (const auto& [packed, root] : roots_) {
        bool in_ready = ready_q_.contains(
            [packed = packed](uint32_t p) { return p == packed; });
        switch (root.state) {
        case ThreadState::ReadyToSchedule:
            if (!in_ready) return false;
            break;
        default:
            if (in_ready) return false;
            break;
        }
    }
    return true;
}

}  // namespace vthm
