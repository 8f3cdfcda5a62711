#include "vthm/exec_cluster.hpp"

#include <algorithm>
#include <cassert>

namespace vthm {

ExecCluster::ExecCluster(Env& env, uint32_t index)
    : env_(env), index_(index), capacity_(env.cfg.blocks_capacity) {
    unit_id_ = env_.router.attach(this);
    trace_id_ = env_.trace.register_unit("cluster" + std::to_string(index));
    account_.attach(&env_.metrics, "cluster" + std::to_string(index),
                    env_.cfg.weight_cluster, 0);
    if (capacity_ > 0) slots_.resize(capacity_);
}

void ExecCluster::ensure_step() {
    if (step_pending_) return;
    step_pending_ = true;
    env_.engine.schedule(0, [this] {
        step_pending_ = false;
        step();
    });
}

void ExecCluster::step() {
    bool any = false;
    while (auto pkt = env_.router.fetch(unit_id_)) {
        any = true;
        if (auto* txn = std::get_if<Transaction>(&pkt->payload)) {
            accept(std::move(*txn));
        } else if (auto* rep = std::get_if<MiomuReply>(&pkt->payload)) {
            apply_reply(*rep);
        }
    }
    if (any) account_.mark_useful(env_.engine.now());
    progress();
}

// --- transaction acceptance -------------------------------------------------

void ExecCluster::accept(Transaction&& txn) {
    uint64_t id = next_txn_id_++;
    TxnRec& t = txns_[id];
    t.txn = std::move(txn);
    t.id = id;
    size_t n = t.txn.instrs.size();
    assert(n <= 64);
    t.st.resize(n);

    // Deferred completion values are restored before anything executes.
    for (auto [reg, val] : t.txn.pending_writes)
        poke_register(t.txn.tid, reg, val);

    // Register-block demand per instruction.
    auto key_bit = [&](uint64_t key) -> uint64_t {
        for (size_t k = 0; k < t.blocks.size(); ++k)
            if (t.blocks[k] == key) return 1ull << k;
        t.blocks.push_back(key);
        return 1ull << (t.blocks.size() - 1);
    };
    for (size_t i = 0; i < n; ++i) {
        RegSet touched = reg_reads(t.txn.instrs[i]);
        touched.mask |= reg_writes(t.txn.instrs[i]).mask;
        for (uint8_t r = 0; r < kNumRegisters; ++r)
            if (touched.contains(r))
                t.st[i].demand_keys |=
                    key_bit(block_key(t.txn.tid, r / kRegsPerBlock));
        t.st[i].arrival = env_.engine.next_arrival_seq();
    }

    // Scheduling order: the RAW graph from the monitor plus in-place
    // execution hazards (WAR/WAW), program-ordered memory operations, and
    // control barriers after unresolved branches.
    for (auto [i, j] : t.txn.dep_edges) t.st[j].pred_mask |= 1ull << i;
    std::optional<size_t> prev_mem;
    for (size_t j = 0; j < n; ++j) {
        RegSet wj = reg_writes(t.txn.instrs[j]);
        for (size_t i = 0; i < j; ++i) {
            RegSet ri = reg_reads(t.txn.instrs[i]);
            RegSet wi = reg_writes(t.txn.instrs[i]);
            if ((ri.mask & wj.mask) || (wi.mask & wj.mask))
                t.st[j].pred_mask |= 1ull << i;
        }
        if (op_class(t.txn.instrs[j].op) == OpClass::Miomu) {
            if (prev_mem) t.st[j].pred_mask |= 1ull << *prev_mem;
            prev_mem = j;
        }
        if (op_class(t.txn.instrs[j].op) == OpClass::Branch) {
            for (size_t k = j + 1; k < n; ++k) t.st[k].pred_mask |= 1ull << j;
        }
    }
    if (n > 0 && op_ends_transaction(t.txn.instrs[n - 1].op))
        t.st[n - 1].pred_mask = (n == 1) ? 0 : ((1ull << (n - 1)) - 1);

    account_.mark_useful(env_.engine.now());
}

// --- register blocks --------------------------------------------------------

int ExecCluster::find_slot(uint64_t key) const {
    for (size_t i = 0; i < slots_.size(); ++i)
        if (slots_[i].used && slots_[i].key == key) return int(i);
    return -1;
}

bool ExecCluster::block_resident(uint64_t key) const {
    return find_slot(key) >= 0;
}

size_t ExecCluster::resident_blocks() const {
    size_t n = 0;
    for (const auto& s : slots_)
        if (s.used || s.reserved) ++n;
    return n;
}

UnitAccount& ExecCluster::slot_account(size_t slot) {
    Slot& s = slots_[slot];
    if (!s.account) {
        s.account = std::make_unique<UnitAccount>(
            &env_.metrics,
            "cluster" + std::to_string(index_) + ".blk" + std::to_string(slot),
            env_.cfg.weight_block, env_.engine.now());
    }
    return *s.account;
}

void ExecCluster::refresh_slot_hold(size_t slot) {
    Slot& s = slots_[slot];
    if (!s.account) return;
    CostClass c = CostClass::Idle;
    if (s.used && s.pins > 0) c = CostClass::Latency;
    s.account->set_hold(env_.engine.now(), c);
}

void ExecCluster::spill_to_l1(uint64_t key, const BlockData& data, bool dirty) {
    if (dirty) {
        l1_[key] = {data, ++l1_age_};
    } else if (!l1_.count(key) && !l2_.count(key)) {
        // Clean blocks with no lower-level copy are all-zero by
        // construction and reload as fresh.
        return;
    }
    while (l1_.size() > env_.cfg.l1_capacity) {
        auto oldest = l1_.begin();
        for (auto it = l1_.begin(); it != l1_.end(); ++it)
            if (it->second.second < oldest->second.second) oldest = it;
        l2_[oldest->first] = oldest->second.first;
        l1_.erase(oldest);
    }
}

void ExecCluster::enqueue_alloc(TxnRec& t, uint32_t idx) {
    IState& s = t.st[idx];
    if (s.alloc_queued || s.reserved) return;
    s.alloc_queued = true;
    alloc_q_.push(t.txn.priority, s.arrival, std::make_pair(t.id, idx));
    pump_alloc();
}

void ExecCluster::pump_alloc() {
    if (pumping_) return;
    pumping_ = true;
    bool any_reserved = false;
    while (!batch_ && !alloc_q_.empty()) {
        auto [id, idx] = alloc_q_.pop().payload;
        auto it = txns_.find(id);
        if (it == txns_.end()) continue;
        TxnRec& t = it->second;
        IState& s = t.st[idx];
        s.alloc_queued = false;
        if (s.stage != IStage::Waiting || s.reserved) continue;

        // Pin what is already resident, then fetch the rest; the pins keep
        // a competing demand from undoing a half-assembled operand set.
        AllocBatch b;
        b.txn = id;
        b.idx = idx;
        b.prio = t.txn.priority;
        uint64_t keys = s.demand_keys;
        for (size_t k = 0; k < t.blocks.size(); ++k) {
            if (!(keys & (1ull << k))) continue;
            uint64_t key = t.blocks[k];
            int slot = find_slot(key);
            if (slot >= 0) {
                Slot& sl = slots_[size_t(slot)];
                ++sl.pins;
                sl.last_access = env_.engine.now();
                refresh_slot_hold(size_t(slot));
                b.pinned.push_back(key);
            } else {
                b.missing.push_back(key);
            }
        }
        if (b.missing.empty()) {
            s.reserved = true;
            any_reserved = true;
            continue;
        }
        batch_ = std::move(b);
        batch_fetch_missing();
    }
    pumping_ = false;
    if (any_reserved) progress();
}

void ExecCluster::batch_fetch_missing() {
    AllocBatch& b = *batch_;
    bool stalled = false;
    for (uint64_t key : b.missing) {
        if (std::count(b.fetching.begin(), b.fetching.end(), key)) continue;

        int slot = -1;
        for (size_t i = 0; i < slots_.size(); ++i) {
            if (!slots_[i].used && !slots_[i].reserved) {
                slot = int(i);
                break;
            }
        }
        if (slot < 0 && capacity_ == 0) {
            slots_.emplace_back();
            slot = int(slots_.size() - 1);
        }
        uint32_t delay = 0;
        if (slot < 0) {
            // Evict the unpinned victim with the lowest priority, oldest
            // first; dirty victims are written back before the slot reuse.
            int victim = -1;
            for (size_t i = 0; i < slots_.size(); ++i) {
                const Slot& s = slots_[i];
                if (!s.used || s.reserved || s.pins > 0) continue;
                if (victim < 0 || s.prio < slots_[size_t(victim)].prio ||
                    (s.prio == slots_[size_t(victim)].prio &&
                     s.last_access < slots_[size_t(victim)].last_access))
                    victim = int(i);
            }
            if (victim < 0) {
                stalled = true;  // everything pinned: retry next tick
                continue;
            }
            Slot& v = slots_[size_t(victim)];
            env_.trace.emit({env_.engine.now(), trace_id_,
                             v.dirty ? TraceKind::BLK_WB : TraceKind::BLK_EVICT,
                             uint32_t(v.key >> 8), v.key & 0xFF, 1});
            if (v.dirty) delay += env_.cfg.l1_latency;
            spill_to_l1(v.key, v.data, v.dirty);
            v.used = false;
            v.dirty = false;
            refresh_slot_hold(size_t(victim));
            slot = victim;
        }

        Slot& sl = slots_[size_t(slot)];
        sl.reserved = true;
        BlockData data{};
        if (auto it = l1_.find(key); it != l1_.end()) {
            data = it->second.first;
            delay += env_.cfg.l1_latency;
        } else if (auto it2 = l2_.find(key); it2 != l2_.end()) {
            data = it2->second;
            delay += env_.cfg.l2_latency;
        }  // else: first touch, zero-filled, free

        b.fetching.push_back(key);
        Priority prio = b.prio;
        env_.engine.schedule(delay, [this, slot, key, prio, data] {
            Slot& s2 = slots_[size_t(slot)];
            s2.reserved = false;
            s2.used = true;
            s2.key = key;
            s2.data = data;
            s2.dirty = false;
            s2.prio = prio;
            s2.pins = 0;
            s2.last_access = env_.engine.now();
            env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::BLK_ALLOC,
                             uint32_t(key >> 8), key & 0xFF, 0});
            slot_account(size_t(slot)).mark_useful(env_.engine.now());
            batch_key_arrived(key, slot);
        });
    }
    if (stalled && !alloc_retry_scheduled_) {
        alloc_retry_scheduled_ = true;
        env_.engine.schedule(1, [this] {
            alloc_retry_scheduled_ = false;
            if (batch_) batch_fetch_missing();
        });
    }
}

void ExecCluster::batch_abort() {
    AllocBatch b = std::move(*batch_);
    batch_.reset();
    for (uint64_t key : b.pinned) {
        int slot = find_slot(key);
        if (slot >= 0) {
            --slots_[size_t(slot)].pins;
            refresh_slot_hold(size_t(slot));
        }
    }
    pump_alloc();
}

void ExecCluster::batch_key_arrived(uint64_t key, int slot) {
    if (!batch_ ||
        !std::count(batch_->fetching.begin(), batch_->fetching.end(), key)) {
        // The demand went away while the fetch was in flight; the block is
        // simply resident now.
        progress();
        return;
    }
    AllocBatch& b = *batch_;
    ++slots_[size_t(slot)].pins;
    b.pinned.push_back(key);
    b.missing.erase(std::find(b.missing.begin(), b.missing.end(), key));
    b.fetching.erase(std::find(b.fetching.begin(), b.fetching.end(), key));
    if (!b.missing.empty()) return;

    // The operand set is complete; hand the pins to the instruction.
    auto it = txns_.find(b.txn);
    if (it == txns_.end() || it->second.st[b.idx].stage != IStage::Waiting) {
        batch_abort();
        progress();
        return;
    }
    it->second.st[b.idx].reserved = true;
    batch_.reset();
    pump_alloc();
    progress();
}

void ExecCluster::evict_thread_blocks(Tid tid) {
    for (size_t i = 0; i < slots_.size(); ++i) {
        Slot& s = slots_[i];
        if (!s.used || s.pins > 0) continue;
        if (uint32_t(s.key >> 8) != tid.packed()) continue;
        env_.trace.emit({env_.engine.now(), trace_id_,
                         s.dirty ? TraceKind::BLK_WB : TraceKind::BLK_EVICT,
                         uint32_t(s.key >> 8), s.key & 0xFF, 1});
        spill_to_l1(s.key, s.data, s.dirty);
        s.used = false;
        s.dirty = false;
        refresh_slot_hold(i);
    }
}

Word ExecCluster::reg_value(Tid tid, uint8_t reg) const {
    int slot = find_slot(block_key(tid, reg / kRegsPerBlock));
    assert(slot >= 0 && "operand block not resident");
    return slots_[size_t(slot)].data.w[reg % kRegsPerBlock];
}

void ExecCluster::write_reg(Tid tid, uint8_t reg, Word v) {
    int slot = find_slot(block_key(tid, reg / kRegsPerBlock));
    assert(slot >= 0 && "destination block not resident");
    Slot& s = slots_[size_t(slot)];
    s.data.w[reg % kRegsPerBlock] = v;
    s.dirty = true;
    s.last_access = env_.engine.now();
    slot_account(size_t(slot)).mark_useful(env_.engine.now());
}

void ExecCluster::poke_register(Tid tid, uint8_t reg, Word v) {
    uint64_t key = block_key(tid, reg / kRegsPerBlock);
    if (int slot = find_slot(key); slot >= 0) {
        slots_[size_t(slot)].data.w[reg % kRegsPerBlock] = v;
        slots_[size_t(slot)].dirty = true;
        return;
    }
    if (auto it = l1_.find(key); it != l1_.end()) {
        it->second.first.w[reg % kRegsPerBlock] = v;
        return;
    }
    if (auto it = l2_.find(key); it != l2_.end()) {
        it->second.w[reg % kRegsPerBlock] = v;
        return;
    }
    BlockData d{};
    d.w[reg % kRegsPerBlock] = v;
    spill_to_l1(key, d, true);
}

std::array<Word, kNumRegisters> ExecCluster::read_registers(Tid tid) const {
    std::array<Word, kNumRegisters> out{};
    for (uint32_t b = 0; b < kBlocksPerThread; ++b) {
        uint64_t key = block_key(tid, b);
        const BlockData* data = nullptr;
        if (int slot = find_slot(key); slot >= 0) {
            data = &slots_[size_t(slot)].data;
        } else if (auto it = l1_.find(key); it != l1_.end()) {
            data = &it->second.first;
        } else if (auto it2 = l2_.find(key); it2 != l2_.end()) {
            data = &it2->second;
        }
        if (data)
            for (uint32_t r = 0; r < kRegsPerBlock; ++r)
                out[b * kRegsPerBlock + r] = data->w[r];
    }
    return out;
}

void ExecCluster::pin_blocks(const TxnRec& t, uint32_t idx, int delta) {
    uint64_t keys = t.st[idx].demand_keys;
    for (size_t k = 0; k < t.blocks.size(); ++k) {
        if (!(keys & (1ull << k))) continue;
        int slot = find_slot(t.blocks[k]);
        assert(slot >= 0);
        Slot& s = slots_[size_t(slot)];
        s.pins += delta;
        assert(s.pins >= 0);
        s.last_access = env_.engine.now();
        if (delta >= 0) slot_account(size_t(slot)).mark_useful(env_.engine.now());
        refresh_slot_hold(size_t(slot));
    }
}

void ExecCluster::release_reservation(TxnRec& t, uint32_t idx) {
    if (!t.st[idx].reserved) return;
    t.st[idx].reserved = false;
    pin_blocks(t, idx, -1);
}

bool ExecCluster::blocks_ready(const TxnRec& t, uint32_t idx) const {
    uint64_t keys = t.st[idx].demand_keys;
    for (size_t k = 0; k < t.blocks.size(); ++k)
        if ((keys & (1ull << k)) && !block_resident(t.blocks[k])) return false;
    return true;
}

// --- scheduling -------------------------------------------------------------

void ExecCluster::progress() {
    promote();
    dispatch();
    promote();  // keep the pipeline input queue topped up
    bool live = !txns_.empty();
    account_.set_hold(env_.engine.now(),
                      live ? CostClass::Latency : CostClass::Idle);
}

void ExecCluster::promote() {
    struct Cand {
        Priority prio;
        uint64_t arrival;
        uint64_t txn;
        uint32_t idx;
    };
    std::vector<Cand> cands;
    for (auto& [id, t] : txns_) {
        if (t.finalized) continue;
        for (uint32_t i = 0; i < t.st.size(); ++i) {
            if (t.st[i].stage != IStage::Waiting) continue;
            if (!deps_satisfied(t, i)) continue;
            if (!blocks_ready(t, i)) {
                enqueue_alloc(t, i);
                continue;
            }
            cands.push_back({t.txn.priority, t.st[i].arrival, id, i});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.prio != b.prio) return a.prio > b.prio;
        return a.arrival < b.arrival;
    });
    for (const Cand& c : cands) {
        TxnRec& t = txns_.at(c.txn);
        if (ready_q_.size() < env_.cfg.ready_depth) {
            ready_q_.push(c.prio, c.arrival, std::make_pair(c.txn, c.idx));
            t.st[c.idx].stage = IStage::Ready;
            continue;
        }
        // Input queue full: a higher priority instruction forces out the
        // lowest priority one, which returns to the waiting queue with its
        // original arrival stamp.
        auto victim_idx = ready_q_.min_index();
        const auto& victim = ready_q_.entries()[*victim_idx];
        if (victim.priority >= c.prio) break;  // nothing preemptable
        auto ve = ready_q_.remove_at(*victim_idx);
        TxnRec& vt = txns_.at(ve.payload.first);
        vt.st[ve.payload.second].stage = IStage::Waiting;
        env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::INSTR_PREEMPT,
                         vt.txn.tid.packed(),
                         vt.txn.instrs[ve.payload.second].arch_no,
                         vt.txn.priority.value});
        ready_q_.push(c.prio, c.arrival, std::make_pair(c.txn, c.idx));
        t.st[c.idx].stage = IStage::Ready;
    }
}

void ExecCluster::dispatch() {
    Tick now = env_.engine.now();
    if (now != last_dispatch_tick_) {
        last_dispatch_tick_ = now;
        dispatched_this_tick_ = 0;
    }
    while (dispatched_this_tick_ < env_.cfg.issue_width && !ready_q_.empty()) {
        auto e = ready_q_.pop();
        auto [id, idx] = e.payload;
        TxnRec& t = txns_.at(id);
        if (!blocks_ready(t, idx)) {
            t.st[idx].stage = IStage::Waiting;
            enqueue_alloc(t, idx);
            continue;
        }
        ++dispatched_this_tick_;
        ++dispatched_count_;
        if (t.st[idx].reserved) {
            t.st[idx].reserved = false;  // the reservation pins carry over
            pin_blocks(t, idx, 0);       // refresh ages and accounting
        } else {
            pin_blocks(t, idx, +1);
        }
        t.st[idx].stage = IStage::Executing;
        ++t.in_flight;
        env_.trace.emit({now, trace_id_, TraceKind::INSTR_DISPATCH,
                         t.txn.tid.packed(), t.txn.instrs[idx].arch_no,
                         t.txn.priority.value});
        account_.mark_useful(now);
        execute(t, idx);
    }
    if (!ready_q_.empty()) {
        // Width exhausted with work left: continue next tick.
        env_.engine.schedule(1, [this] { progress(); });
    }
}

ResolvedAddr ExecCluster::make_addr(const Operand& o, Tid tid) const {
    ResolvedAddr a;
    switch (o.kind) {
    case Operand::Kind::AcvaLocal:
        a.acva = Acva::local(tid.pid, Word(o.imm));
        break;
    case Operand::Kind::AcvaShared: {
        Word lva = o.lva_in_reg ? reg_value(tid, o.reg) + Word(o.disp)
                                : Word(o.imm);
        a.acva = Acva::shared(uint16_t(o.opid), tid.pid, lva);
        break;
    }
    case Operand::Kind::RegIndirect:
        a.acva = Acva::local(tid.pid, reg_value(tid, o.reg) + Word(o.disp));
        break;
    case Operand::Kind::Phys:
        a.phys = true;
        a.asi = o.opid;
        a.pha = uint64_t(o.imm);
        break;
    default:
        break;
    }
    return a;
}

void ExecCluster::send_request(TxnRec& t, uint32_t idx) {
    const Instruction& in = t.txn.instrs[idx];
    Tid tid = t.txn.tid;
    MiomuRequest rq;
    rq.req_id = next_req_id_++;
    rq.tid = tid;
    rq.prio = t.txn.priority;
    rq.tstat = t.txn.tstat;
    rq.arch_no = in.arch_no;
    rq.op = in.op;
    switch (in.op) {
    case Opcode::LD:
        rq.a = make_addr(in.ops[1], tid);
        break;
    case Opcode::ST:
        rq.a = make_addr(in.ops[1], tid);
        rq.v0 = reg_value(tid, in.ops[0].reg);
        break;
    case Opcode::SLOCK:
    case Opcode::SWAIT:
        rq.a = make_addr(in.ops[1], tid);
        rq.timeout = uint32_t(in.ops[2].imm);
        break;
    case Opcode::SFREE:
    case Opcode::FREEICB:
        rq.a = make_addr(in.ops[1], tid);
        break;
    case Opcode::SUNLOCK:
    case Opcode::SPASS:
        rq.a = make_addr(in.ops[0], tid);
        break;
    case Opcode::SGET:
    case Opcode::GETICB:
        break;
    case Opcode::BLKCPY:
        rq.a = make_addr(in.ops[0], tid);
        rq.b = make_addr(in.ops[1], tid);
        rq.v0 = reg_value(tid, in.ops[2].reg);
        break;
    case Opcode::GRANT:
        rq.v0 = reg_value(tid, in.ops[0].reg);
        rq.v1 = reg_value(tid, in.ops[1].reg);
        rq.v2 = reg_value(tid, in.ops[2].reg);
        break;
    default:
        assert(false);
    }
    req_map_[rq.req_id] = {t.id, idx};
    t.st[idx].stage = IStage::Parked;
    Packet pkt;
    pkt.src = unit_id_;
    pkt.dst = env_.miomu_unit;
    pkt.priority = t.txn.priority;
    pkt.producer_tid = tid;
    pkt.payload = rq;
    env_.router.route(std::move(pkt));
    // Blocks pinned by a parked instruction hold latency state.
    uint64_t keys = t.st[idx].demand_keys;
    for (size_t k = 0; k < t.blocks.size(); ++k) {
        if (!(keys & (1ull << k))) continue;
        int slot = find_slot(t.blocks[k]);
        if (slot >= 0) refresh_slot_hold(size_t(slot));
    }
}

void ExecCluster::execute(TxnRec& t, uint32_t idx) {
    const Instruction& in = t.txn.instrs[idx];
    Tid tid = t.txn.tid;
    uint64_t id = t.id;
    uint32_t alu = env_.cfg.alu_latency;

    switch (op_class(in.op)) {
    case OpClass::Alu: {
        Word v = 0;
        switch (in.op) {
        case Opcode::ADD:
            v = reg_value(tid, in.ops[1].reg) + reg_value(tid, in.ops[2].reg);
            break;
        case Opcode::SUB:
            v = reg_value(tid, in.ops[1].reg) - reg_value(tid, in.ops[2].reg);
            break;
        case Opcode::MUL:
            v = Word(uint64_t(reg_value(tid, in.ops[1].reg)) *
                     uint64_t(reg_value(tid, in.ops[2].reg)));
            break;
        case Opcode::LDI:
            v = Word(in.ops[1].imm);
            break;
        default:
            assert(false);
        }
        uint8_t rd = in.ops[0].reg;
        env_.engine.schedule(alu, [this, id, idx, rd, v] {
            TxnRec& t2 = txns_.at(id);
            write_reg(t2.txn.tid, rd, v);
            complete_instr(t2, idx);
            progress();
        });
        break;
    }
    case OpClass::Branch: {
        bool taken = true;
        if (in.op == Opcode::BEQ)
            taken = reg_value(tid, in.ops[0].reg) == reg_value(tid, in.ops[1].reg);
        else if (in.op == Opcode::BNE)
            taken = reg_value(tid, in.ops[0].reg) != reg_value(tid, in.ops[1].reg);
        uint32_t target = *branch_target(in);
        env_.engine.schedule(alu, [this, id, idx, taken, target] {
            TxnRec& t2 = txns_.at(id);
            if (taken) {
                uint32_t start = t2.txn.start_pc;
                uint32_t n = uint32_t(t2.txn.instrs.size());
                if (target > start + idx && target < start + n) {
                    // Local forward jump: skipped instructions never run.
                    cancel_range(t2, idx, target - start);
                } else {
                    t2.terminal_next_pc = target;
                    cancel_range(t2, idx, n);
                }
            }
            complete_instr(t2, idx);
            progress();
        });
        break;
    }
    case OpClass::Monitor: {
        bool halt = in.op == Opcode::HALT;
        SpawnRequest sp;
        if (!halt) {
            sp.dest_reg = in.ops[0].reg;
            sp.entry = in.ops[1].kind == Operand::Kind::Reg
                           ? reg_value(tid, in.ops[1].reg)
                           : uint32_t(in.ops[1].imm);
            sp.attr = in.ops[2].kind == Operand::Kind::Reg
                          ? reg_value(tid, in.ops[2].reg)
                          : uint32_t(in.ops[2].imm);
            sp.process = (sp.attr & kSpawnAttrProcess) != 0;
        }
        env_.engine.schedule(alu, [this, id, idx, halt, sp] {
            TxnRec& t2 = txns_.at(id);
            if (halt) t2.halted = true;
            else t2.spawn = sp;
            complete_instr(t2, idx);
            progress();
        });
        break;
    }
    case OpClass::Miomu:
        send_request(t, idx);
        break;
    }
}

void ExecCluster::cancel_range(TxnRec& t, uint32_t after, uint32_t upto) {
    for (uint32_t j = after + 1; j < upto; ++j) {
        IState& s = t.st[j];
        if (s.stage == IStage::Done || s.stage == IStage::Cancelled) continue;
        assert(s.stage == IStage::Waiting || s.stage == IStage::Ready);
        if (s.stage == IStage::Ready) {
            ready_q_.remove_if([&](const std::pair<uint64_t, uint32_t>& p) {
                return p.first == t.id && p.second == j;
            });
        }
        release_reservation(t, j);
        s.stage = IStage::Cancelled;
        t.cancelled |= 1ull << j;
        t.completed |= 1ull << j;
    }
    pump_alloc();
}

void ExecCluster::complete_instr(TxnRec& t, uint32_t idx) {
    IState& s = t.st[idx];
    s.stage = IStage::Done;
    t.completed |= 1ull << idx;
    --t.in_flight;
    pin_blocks(t, idx, -1);
    env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::INSTR_DONE,
                     t.txn.tid.packed(), t.txn.instrs[idx].arch_no,
                     t.txn.priority.value});
    account_.mark_useful(env_.engine.now());
    uint64_t id = t.id;
    try_finalize(t);
    cleanup(id);
    pump_alloc();  // released pins may unblock a waiting operand set
}

void ExecCluster::apply_reply(const MiomuReply& rep) {
    auto it = req_map_.find(rep.req_id);
    assert(it != req_map_.end());
    auto [id, idx] = it->second;
    req_map_.erase(it);
    auto tit = txns_.find(id);
    assert(tit != txns_.end());
    TxnRec& t = tit->second;
    IState& s = t.st[idx];
    assert(s.stage == IStage::Parked);

    if (t.finalized) {
        // Late reply for an aborted transaction: drop the effect.
        s.stage = IStage::Done;
        t.completed |= 1ull << idx;
        --t.in_flight;
        pin_blocks(t, idx, -1);
        cleanup(id);
        return;
    }
    if (rep.fault) {
        t.aborted = true;
        t.abort_reason = uint32_t(rep.code);
        complete_instr(t, idx);
        return;
    }
    if (rep.blocked) {
        t.blocked = true;
        t.blocked_cell = rep.sem_cell;
        if (auto rd = dest_reg(t.txn.instrs[idx])) t.blocked_reg = *rd;
        complete_instr(t, idx);
        return;
    }
    if (auto rd = dest_reg(t.txn.instrs[idx]))
        write_reg(t.txn.tid, *rd, rep.value);
    complete_instr(t, idx);
}

void ExecCluster::try_finalize(TxnRec& t) {
    if (t.finalized) return;
    size_t n = t.txn.instrs.size();
    uint64_t all = n >= 64 ? ~0ull : ((1ull << n) - 1);

    TxnResult res;
    res.tid = t.txn.tid;
    if (t.aborted) {
        // Undispatched instructions of a dead transaction never run.
        for (uint32_t j = 0; j < n; ++j) {
            IState& s = t.st[j];
            if (s.stage != IStage::Waiting && s.stage != IStage::Ready) continue;
            if (s.stage == IStage::Ready) {
                ready_q_.remove_if([&](const std::pair<uint64_t, uint32_t>& p) {
                    return p.first == t.id && p.second == j;
                });
            }
            release_reservation(t, j);
            s.stage = IStage::Cancelled;
            t.cancelled |= 1ull << j;
            t.completed |= 1ull << j;
        }
        res.outcome = TxnOutcome::Aborted;
        res.abort_reason = t.abort_reason;
        res.next_pc = t.txn.start_pc;
    } else if ((t.completed & all) != all) {
        return;
    } else if (t.blocked) {
        res.outcome = TxnOutcome::Blocked;
        res.next_pc = t.txn.start_pc + uint32_t(n);
        res.sem_cell = t.blocked_cell;
        res.blocked_reg = t.blocked_reg;
    } else if (t.halted) {
        res.outcome = TxnOutcome::Halted;
        res.next_pc = t.txn.start_pc + uint32_t(n);
    } else {
        res.outcome = TxnOutcome::Normal;
        res.next_pc = t.terminal_next_pc ? *t.terminal_next_pc
                                         : t.txn.start_pc + uint32_t(n);
        res.spawn = t.spawn;
    }
    t.finalized = true;

    // Long-lasting waits force the whole thread representation down the
    // memory hierarchy; a finished transaction just leaves its blocks
    // resident but unpinned.
    if (t.blocked || t.aborted) evict_thread_blocks(t.txn.tid);

    Packet pkt;
    pkt.src = unit_id_;
    pkt.dst = env_.monitor_for(t.txn.tid);
    pkt.priority = t.txn.priority;
    pkt.producer_tid = t.txn.tid;
    pkt.payload = res;
    env_.router.route(std::move(pkt));
    cleanup(t.id);
}

void ExecCluster::cleanup(uint64_t txn_id) {
    auto it = txns_.find(txn_id);
    if (it == txns_.end()) return;
    if (!it->second.finalized || it->second.in_flight > 0) return;
    txns_.erase(it);
}

}  // namespace vthm
