#include "vthm/miomu.hpp"

#include <cassert>

namespace vthm {

namespace {
// Supplier agents appear in traces under a reserved pid.
uint32_t agent_trace_tid(SemAgent a) {
    return a.kind == SemAgent::Kind::Thread ? a.id : (0xFFFFu << 16) | a.id;
}
}  // namespace

Miomu::Miomu(Env& env)
    : env_(env),
      hwds_(env.cfg.hwds_top_cells, env.cfg.hwds_max_cells,
            HwdsPool::Callbacks{
                [this](uint32_t c, SemAgent a, CompletionCode code,
                       Priority prio) { hwds_completion(c, a, code, prio); },
                [this](uint32_t c, SemAgent a) {
                    env_.trace.emit({env_.engine.now(), hwds_trace_id_,
                                     TraceKind::SEM_ENTER, agent_trace_tid(a),
                                     c});
                },
                [this](uint32_t c, SemAgent a) {
                    env_.trace.emit({env_.engine.now(), hwds_trace_id_,
                                     TraceKind::SEM_EXIT, agent_trace_tid(a),
                                     c});
                },
                [this](uint32_t c, SemAgent a, bool eq) {
                    env_.trace.emit({env_.engine.now(), hwds_trace_id_,
                                     TraceKind::SEM_QUEUE, agent_trace_tid(a),
                                     c, eq ? 1u : 0u});
                },
                [this](uint32_t c, SemAgent from, SemAgent next, bool pass,
                       bool from_event) {
                    env_.trace.emit({env_.engine.now(), hwds_trace_id_,
                                     pass ? TraceKind::SEM_PASS
                                          : TraceKind::SEM_UNLOCK,
                                     agent_trace_tid(from), c,
                                     next.id ? agent_trace_tid(next) : 0,
                                     from_event ? 1u : 0u});
                },
                [this](uint32_t c, SemAgent a) {
                    env_.trace.emit({env_.engine.now(), hwds_trace_id_,
                                     TraceKind::SEM_TIMEOUT, agent_trace_tid(a),
                                     c});
                },
            }) {
    unit_id_ = env_.router.attach(this);
    trace_id_ = env_.trace.register_unit("miomu");
    hwds_trace_id_ = env_.trace.register_unit("miomu.hwds");
    account_.attach(&env_.metrics, "miomu", env_.cfg.weight_miomu, 0);
    icbs_.resize(env_.cfg.icb_cells);
    channels_ = build_device_channels(env_.cfg.devices);
    for (auto& ch : channels_) {
        dev_trace_ids_.push_back(env_.trace.register_unit(
            "dev." + ch.dev_name + ".ch" + std::to_string(ch.global_id)));
        dev_accounts_.push_back(std::make_unique<UnitAccount>(
            &env_.metrics, ch.dev_name + ".ch" + std::to_string(ch.global_id),
            env_.cfg.weight_device, 0));
    }
}

ProcessContext& Miomu::context(uint16_t pid) {
    auto it = contexts_.find(pid);
    assert(it != contexts_.end() && "no context for pid");
    return it->second;
}

void Miomu::create_context(uint16_t pid) {
    contexts_.emplace(pid, ProcessContext(pid));
}

bool Miomu::validate_access(const Acva& a, uint8_t mode, Word len) const {
    if (!a.vashr || a.opid == a.refpid) return true;  // own context
    return directory_.permits(a, mode, len);
}

void Miomu::ensure_step() {
    if (step_pending_) return;
    step_pending_ = true;
    env_.engine.schedule(0, [this] {
        step_pending_ = false;
        step();
    });
}

void Miomu::step() {
    bool any = false;
    while (auto pkt = env_.router.fetch(unit_id_)) {
        any = true;
        if (auto* rq = std::get_if<MiomuRequest>(&pkt->payload)) {
            handle(std::move(*rq));
        } else if (auto* ab = std::get_if<AbortNotice>(&pkt->payload)) {
            hwds_.drop_agent(SemAgent::thread(ab->tid));
            arm_counter_sweep();
        }
    }
    if (any) account_.mark_useful(env_.engine.now());
    refresh_hold();
}

void Miomu::refresh_hold() {
    account_.set_hold(env_.engine.now(),
                      in_flight_ > 0 ? CostClass::Latency : CostClass::Idle);
}

UnitAccount& Miomu::cell_account(uint32_t cell) {
    if (cell_accounts_.size() <= cell) cell_accounts_.resize(cell + 1);
    if (!cell_accounts_[cell]) {
        cell_accounts_[cell] = std::make_unique<UnitAccount>(
            &env_.metrics, "hwds" + std::to_string(cell), env_.cfg.weight_hwds,
            env_.engine.now());
    }
    return *cell_accounts_[cell];
}

void Miomu::refresh_cell_hold(uint32_t cell) {
    cell_account(cell).set_hold(env_.engine.now(),
                                hwds_.is_allocated(cell) && hwds_.has_waiters(cell)
                                    ? CostClass::Latency
                                    : CostClass::Idle);
}

void Miomu::reply_to(const MiomuRequest& rq, MiomuReply&& rep,
                     uint32_t extra_latency) {
    rep.req_id = rq.req_id;
    rep.tid = rq.tid;
    rep.arch_no = rq.arch_no;
    Packet pkt;
    pkt.src = unit_id_;
    pkt.dst = env_.cluster_for(rq.tid);
    pkt.priority = rq.prio;
    pkt.producer_tid = rq.tid;
    pkt.payload = std::move(rep);
    if (extra_latency == 0) {
        env_.router.route(std::move(pkt));
        return;
    }
    ++in_flight_;
    auto shared = std::make_shared<Packet>(std::move(pkt));
    env_.engine.schedule(extra_latency, [this, shared] {
        --in_flight_;
        env_.router.route(std::move(*shared));
        refresh_hold();
    });
}

void Miomu::handle(MiomuRequest&& rq) {
    switch (rq.op) {
    case Opcode::LD:
    case Opcode::ST:
        do_mem_op(rq);
        break;
    case Opcode::SLOCK:
    case Opcode::SUNLOCK:
    case Opcode::SWAIT:
    case Opcode::SPASS:
        do_sync_op(rq);
        break;
    case Opcode::SGET:
    case Opcode::SFREE:
    case Opcode::GETICB:
    case Opcode::FREEICB:
        do_pool_op(rq);
        break;
    case Opcode::GRANT:
        do_grant(rq);
        break;
    case Opcode::BLKCPY:
        do_blkcpy(rq);
        break;
    default:
        assert(false && "non-MIOMU opcode routed to MIOMU");
    }
}

Miomu::Target Miomu::resolve_target(const ResolvedAddr& addr, uint16_t refpid) {
    Target t{Target::Kind::Invalid, 0, 0, 0};
    if (addr.phys) {
        switch (addr.asi) {
        case 0:
            t.kind = Target::Kind::Ram;
            t.ctx_pid = 0xFFFF;  // raw physical, handled in read/write
            t.off = Word(addr.pha);
            return t;
        case 1:
            t.kind = Target::Kind::DevWord;
            t.index = uint32_t(addr.pha / kDevWindowWords);
            t.off = Word(addr.pha % kDevWindowWords);
            return t;
        case 2:
            t.kind = Target::Kind::SemCell;
            t.index = uint32_t(addr.pha);
            return t;
        case 3:
            t.kind = Target::Kind::IcbWord;
            t.index = uint32_t(addr.pha / kIcbWindowWords);
            t.off = Word(addr.pha % kIcbWindowWords);
            return t;
        default:
            return t;
        }
    }
    const Acva& a = addr.acva;
    Word lva = a.lva;
    uint16_t ctx = a.vashr ? a.opid : refpid;
    if (lva < kSemRegionBase) {
        if (!contexts_.count(ctx)) return t;
        t.kind = Target::Kind::Ram;
        t.ctx_pid = ctx;
        t.off = lva;
        return t;
    }
    if (lva >= kSemRegionBase && lva < kIcbRegionBase) {
        t.kind = Target::Kind::SemCell;
        t.index = lva - kSemRegionBase;
        return t;
    }
    if (lva >= kIcbRegionBase && lva < kDevRegionBase) {
        t.kind = Target::Kind::IcbWord;
        t.index = (lva - kIcbRegionBase) / kIcbWindowWords;
        t.off = (lva - kIcbRegionBase) % kIcbWindowWords;
        return t;
    }
    // Device control registers live in the hyperuser's context.
    if (ctx != 0) return t;
    t.kind = Target::Kind::DevWord;
    t.index = (lva - kDevRegionBase) / kDevWindowWords;
    t.off = (lva - kDevRegionBase) % kDevWindowWords;
    return t;
}

Word Miomu::read_word(const Target& t) {
    switch (t.kind) {
    case Target::Kind::Ram:
        if (t.ctx_pid == 0xFFFF) return mem_.read(t.off);
        return context(t.ctx_pid).read(t.off, mem_);
    case Target::Kind::IcbWord:
        return icb_read(t.index, t.off);
    case Target::Kind::DevWord:
        return dev_ctrl_read(t.index, t.off);
    default:
        return 0;
    }
}

void Miomu::do_mem_op(MiomuRequest& rq) {
    uint16_t pid = rq.tid.pid;
    bool is_load = rq.op == Opcode::LD;
    uint8_t mode = is_load ? kModeRead : kModeWrite;

    auto deny = [&](Word lva) {
        env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::ACC_DENY,
                         rq.tid.packed(), lva, mode, 1});
        reply_to(rq, MiomuReply{.code = CompletionCode::Fault, .fault = true});
    };

    if (rq.a.phys) {
        // Hyper-privileged physical addressing bypasses validation.
        if (rq.tstat != Privilege::HyperPrivileged) {
            deny(Word(rq.a.pha));
            return;
        }
        Target t = resolve_target(rq.a, pid);
        if (t.kind == Target::Kind::Invalid ||
            (t.kind == Target::Kind::SemCell)) {
            deny(Word(rq.a.pha));
            return;
        }
        Word value = 0;
        if (is_load) value = read_word(t);
        else write_word(t, rq.v0, pid, rq.tstat);
        reply_to(rq, MiomuReply{.code = CompletionCode::Ok, .value = value},
                 env_.lat_mem());
        return;
    }

    Acva a = rq.a.acva;
    a.refpid = pid;  // the issuer's pid always overwrites RefPID
    bool shared = a.vashr && a.opid != a.refpid;
    if (shared && !validate_access(a, mode, 1)) {
        deny(a.lva);
        return;
    }
    Target t = resolve_target(rq.a, pid);
    if (t.kind == Target::Kind::Invalid || t.kind == Target::Kind::SemCell) {
        // Plain loads/stores cannot touch semaphore cells or unmapped
        // regions.
        deny(a.lva);
        return;
    }
    if (t.kind == Target::Kind::IcbWord) {
        uint16_t owner = a.vashr ? a.opid : pid;
        if (t.index >= icbs_.size() || icbs_[t.index].state == Icb::State::Free ||
            icbs_[t.index].owner_pid != owner) {
            deny(a.lva);
            return;
        }
    }
    if (shared) {
        env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::ACC_PERMIT,
                         rq.tid.packed(), a.lva, mode, 1});
    }
    Word value = 0;
    if (is_load) {
        value = read_word(t);
    } else if (t.kind == Target::Kind::IcbWord) {
        CompletionCode cc = icb_write(t.index, t.off, rq.v0, pid);
        if (cc != CompletionCode::Ok) {
            reply_to(rq, MiomuReply{.code = cc, .fault = true});
            return;
        }
    } else {
        write_word(t, rq.v0, pid, rq.tstat);
    }
    reply_to(rq, MiomuReply{.code = CompletionCode::Ok, .value = value},
             env_.lat_mem());
}

void Miomu::write_word(const Target& t, Word v, uint16_t pid, Privilege stat) {
    switch (t.kind) {
    case Target::Kind::Ram:
        if (t.ctx_pid == 0xFFFF) mem_.write(t.off, v);
        else context(t.ctx_pid).write(t.off, v, mem_);
        break;
    case Target::Kind::IcbWord:
        icb_write(t.index, t.off, v, pid);
        break;
    case Target::Kind::DevWord:
        dev_ctrl_write(t.index, t.off, v, pid, stat);
        break;
    default:
        break;
    }
}

// --- synchronization unit -------------------------------------------------

void Miomu::do_sync_op(MiomuRequest& rq) {
    uint16_t pid = rq.tid.pid;
    uint32_t cell = 0;
    bool ok = false;
    if (rq.a.phys) {
        ok = rq.tstat == Privilege::HyperPrivileged && rq.a.asi == 2;
        cell = uint32_t(rq.a.pha);
    } else {
        const Acva& a = rq.a.acva;
        if (a.lva >= kSemRegionBase && a.lva < kIcbRegionBase) {
            cell = a.lva - kSemRegionBase;
            if (hwds_.is_valid(cell) && hwds_.is_allocated(cell)) {
                if (!a.vashr || a.opid == pid) {
                    // A process's own semaphores need no directory record.
                    ok = hwds_.owner_pid(cell) == pid;
                } else {
                    ok = hwds_.owner_pid(cell) == a.opid &&
                         validate_access(Acva::shared(a.opid, pid, a.lva),
                                         kModeAtomic, 1);
                }
            }
        }
    }
    if (!ok || !hwds_.is_valid(cell) || !hwds_.is_allocated(cell)) {
        env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::ACC_DENY,
                         rq.tid.packed(), rq.a.acva.lva, kModeAtomic, 1});
        reply_to(rq, MiomuReply{.code = CompletionCode::Fault, .fault = true});
        return;
    }

    // Spilled cells are reloaded first; the reload cost rides on the reply.
    uint32_t reload = hwds_.ensure_resident(cell) ? env_.cfg.l2_latency : 0;

    SemOpKind kind;
    switch (rq.op) {
    case Opcode::SLOCK: kind = SemOpKind::Lock; break;
    case Opcode::SUNLOCK: kind = SemOpKind::Unlock; break;
    case Opcode::SWAIT: kind = SemOpKind::Wait; break;
    default: kind = SemOpKind::Pass; break;
    }

    sync_ctx_ = SyncCtx{true, SemAgent::thread(rq.tid), false, CompletionCode::Ok};
    hwds_.op(kind, cell, SemAgent::thread(rq.tid), rq.prio, rq.timeout);
    SyncCtx ctx = sync_ctx_;
    sync_ctx_.active = false;

    cell_account(cell).mark_useful(env_.engine.now());
    refresh_cell_hold(cell);
    arm_counter_sweep();

    if (ctx.completed) {
        bool fault = ctx.code == CompletionCode::Fault;
        reply_to(rq,
                 MiomuReply{.code = ctx.code,
                            .fault = fault,
                            .value = Word(ctx.code),
                            .sem_cell = cell},
                 reload);
    } else {
        // Queued: the transaction finalizes blocked; the completion code
        // arrives later as a SemWake.
        reply_to(rq,
                 MiomuReply{.code = CompletionCode::Ok,
                            .blocked = true,
                            .sem_cell = cell},
                 reload);
    }
}

void Miomu::hwds_completion(uint32_t cell, SemAgent agent, CompletionCode code,
                            Priority prio) {
    if (sync_ctx_.active && agent == sync_ctx_.issuer && !sync_ctx_.completed) {
        sync_ctx_.completed = true;
        sync_ctx_.code = code;
        return;
    }
    if (agent.kind == SemAgent::Kind::Thread) {
        Tid tid = Tid::unpack(agent.id);
        Packet pkt;
        pkt.src = unit_id_;
        pkt.dst = env_.monitor_for(tid);
        pkt.priority = prio;  // the woken thread's own priority
        pkt.producer_tid = tid;
        pkt.payload = SemWake{tid, code, cell};
        env_.router.route(std::move(pkt));
        refresh_cell_hold(cell);
        return;
    }
    uint32_t icb = agent.id;
    env_.engine.schedule(1, [this, icb, code] { supplier_resume(icb, code); });
}

void Miomu::arm_counter_sweep() {
    if (sweep_pending_ || hwds_.armed_counters() == 0) return;
    sweep_pending_ = true;
    env_.engine.schedule(
        1,
        [this] {
            sweep_pending_ = false;
            hwds_.tick_counters();
            for (uint32_t c = 0; c < cell_accounts_.size(); ++c)
                if (cell_accounts_[c]) refresh_cell_hold(c);
            arm_counter_sweep();
        },
        EventPhase::Timeout);
}

// --- pool instructions ----------------------------------------------------

void Miomu::do_pool_op(MiomuRequest& rq) {
    uint16_t pid = rq.tid.pid;
    switch (rq.op) {
    case Opcode::SGET: {
        auto idx = hwds_.sget(pid);
        if (!idx) {
            reply_to(rq, MiomuReply{.code = CompletionCode::Empty, .value = 0});
            return;
        }
        env_.trace.emit({env_.engine.now(), hwds_trace_id_, TraceKind::SEM_GET,
                         rq.tid.packed(), *idx});
        cell_account(*idx).mark_useful(env_.engine.now());
        reply_to(rq, MiomuReply{.code = CompletionCode::Ok,
                                .value = kSemRegionBase + *idx});
        return;
    }
    case Opcode::SFREE: {
        uint32_t cell = 0;
        if (!rq.a.phys && rq.a.acva.lva >= kSemRegionBase &&
            rq.a.acva.lva < kIcbRegionBase) {
            cell = rq.a.acva.lva - kSemRegionBase;
        } else {
            reply_to(rq, MiomuReply{.code = CompletionCode::Fault, .fault = true});
            return;
        }
        if (!hwds_.is_valid(cell)) {
            reply_to(rq, MiomuReply{.code = CompletionCode::Fault, .fault = true});
            return;
        }
        CompletionCode cc = hwds_.sfree(cell, pid);
        if (cc == CompletionCode::Fault) {
            env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::ACC_DENY,
                             rq.tid.packed(), rq.a.acva.lva, kModeAtomic, 1});
            reply_to(rq, MiomuReply{.code = cc, .fault = true});
            return;
        }
        if (cc == CompletionCode::Ok) {
            env_.trace.emit({env_.engine.now(), hwds_trace_id_,
                             TraceKind::SEM_FREE, rq.tid.packed(), cell});
            refresh_cell_hold(cell);
        }
        reply_to(rq, MiomuReply{.code = cc, .value = Word(cc)});
        return;
    }
    case Opcode::GETICB: {
        for (uint32_t i = 0; i < icbs_.size(); ++i) {
            if (icbs_[i].state == Icb::State::Free) {
                icbs_[i] = Icb{};
                icbs_[i].state = Icb::State::Allocated;
                icbs_[i].owner_pid = pid;
                reply_to(rq, MiomuReply{.code = CompletionCode::Ok,
                                        .value = kIcbRegionBase +
                                                 i * kIcbWindowWords});
                return;
            }
        }
        reply_to(rq, MiomuReply{.code = CompletionCode::Empty, .value = 0});
        return;
    }
    case Opcode::FREEICB: {
        if (rq.a.phys || rq.a.acva.lva < kIcbRegionBase ||
            rq.a.acva.lva >= kDevRegionBase) {
            reply_to(rq, MiomuReply{.code = CompletionCode::Fault, .fault = true});
            return;
        }
        uint32_t idx = (rq.a.acva.lva - kIcbRegionBase) / kIcbWindowWords;
        if (idx >= icbs_.size() || icbs_[idx].state == Icb::State::Free ||
            icbs_[idx].owner_pid != pid) {
            reply_to(rq, MiomuReply{.code = CompletionCode::Fault, .fault = true});
            return;
        }
        Icb& b = icbs_[idx];
        if (b.state == Icb::State::Armed && b.in_flight()) {
            reply_to(rq, MiomuReply{.code = CompletionCode::Busy,
                                    .value = Word(CompletionCode::Busy)});
            return;
        }
        if (b.state == Icb::State::Armed) {
            auto it = source_to_icb_.find(b.window[kIcbSource]);
            if (it != source_to_icb_.end() && it->second == idx)
                source_to_icb_.erase(it);
        }
        b = Icb{};
        reply_to(rq, MiomuReply{.code = CompletionCode::Ok, .value = 0});
        return;
    }
    default:
        assert(false);
    }
}

void Miomu::do_grant(MiomuRequest& rq) {
    uint16_t opid = uint16_t(rq.v0 >> 16);
    uint16_t gntpid = uint16_t(rq.v0 & 0xFFFF);
    Word orva = rq.v1;
    Word l = rq.v2 >> 4;
    uint8_t mode = rq.v2 & 0xF;
    bool owner = rq.tid.pid == opid &&
                 rq.tstat >= Privilege::Privileged;
    if (!(owner || rq.tstat == Privilege::HyperPrivileged) || l < 1) {
        env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::ACC_DENY,
                         rq.tid.packed(), orva, mode, l});
        reply_to(rq, MiomuReply{.code = CompletionCode::Fault, .fault = true});
        return;
    }
    directory_.add(AccessRecord{opid, gntpid, orva, l, mode});
    reply_to(rq, MiomuReply{.code = CompletionCode::Ok});
}

// --- block processing unit ------------------------------------------------

Miomu::CopyEnd Miomu::copy_words(const ResolvedAddr& dst,
                                 const ResolvedAddr& src, Word len,
                                 uint16_t refpid, Privilege stat,
                                 DeviceChannel* dev_dst,
                                 DeviceChannel* dev_src) {
    // All movements run through a scratch buffer, so overlapping ranges
    // behave as if double buffered.
    std::vector<Word> scratch;
    scratch.reserve(len);
    auto word_addr = [&](const ResolvedAddr& base, Word i) {
        ResolvedAddr w = base;
        if (w.phys) w.pha += i;
        else w.acva.lva += i;
        return w;
    };
    auto validate_side = [&](const ResolvedAddr& w, uint8_t mode) -> bool {
        if (w.phys) return stat == Privilege::HyperPrivileged;
        Acva a = w.acva;
        a.refpid = refpid;
        if (a.vashr && a.opid != a.refpid && !validate_access(a, mode, 1))
            return false;
        Target t = resolve_target(w, refpid);
        return t.kind == Target::Kind::Ram;
    };

    Word readable = 0;
    for (Word i = 0; i < len; ++i) {
        if (dev_src) {
            Word io = src.acva.lva + i;
            if (io >= dev_src->store.size()) break;
            scratch.push_back(dev_src->store[io]);
        } else {
            ResolvedAddr w = word_addr(src, i);
            if (!validate_side(w, kModeRead)) {
                env_.trace.emit({env_.engine.now(), trace_id_,
                                 TraceKind::ACC_DENY, uint32_t(refpid) << 16,
                                 w.acva.lva, kModeRead, 1});
                break;
            }
            scratch.push_back(read_word(resolve_target(w, refpid)));
        }
        ++readable;
    }
    Word moved = 0;
    for (Word i = 0; i < readable; ++i) {
        if (dev_dst) {
            Word io = dst.acva.lva + i;
            if (io >= dev_dst->store.size()) break;
            dev_dst->store[io] = scratch[i];
        } else {
            ResolvedAddr w = word_addr(dst, i);
            if (!validate_side(w, kModeWrite)) {
                env_.trace.emit({env_.engine.now(), trace_id_,
                                 TraceKind::ACC_DENY, uint32_t(refpid) << 16,
                                 w.acva.lva, kModeWrite, 1});
                break;
            }
            write_word(resolve_target(w, refpid), scratch[i], refpid, stat);
        }
        ++moved;
    }
    return CopyEnd{moved, moved == len ? kIoNormal : kIoError};
}

void Miomu::do_blkcpy(MiomuRequest& rq) {
    Word len = rq.v0;
    env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::DMA_START,
                     rq.tid.packed(), len});
    ResolvedAddr dst = rq.a;
    ResolvedAddr src = rq.b;
    if (!dst.phys) dst.acva.refpid = rq.tid.pid;
    if (!src.phys) src.acva.refpid = rq.tid.pid;
    CopyEnd end = copy_words(dst, src, len, rq.tid.pid, rq.tstat, nullptr, nullptr);
    uint32_t latency = (len + env_.cfg.dma_width - 1) / env_.cfg.dma_width;
    env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::DMA_DONE,
                     rq.tid.packed(), end.moved, end.code});
    if (end.code != kIoNormal) {
        reply_to(rq, MiomuReply{.code = CompletionCode::Fault, .fault = true},
                 latency);
    } else {
        reply_to(rq, MiomuReply{.code = CompletionCode::Ok, .value = end.moved},
                 latency);
    }
}

// --- ICB window and the interruption unit ----------------------------------

Word Miomu::icb_read(uint32_t idx, Word off) {
    if (idx >= icbs_.size() || off >= kIcbWindowWords) return 0;
    return icbs_[idx].window[off];
}

CompletionCode Miomu::icb_write(uint32_t idx, Word off, Word v, uint16_t pid) {
    if (idx >= icbs_.size() || off >= kIcbWindowWords)
        return CompletionCode::Fault;
    Icb& b = icbs_[idx];
    if (off == kIcbCounter && b.state == Icb::State::Allocated && v == 0) {
        // The activation signal: counter := 0 arms the block. The semaphore
        // must reference an allocated cell of the arming process.
        Word sem = b.window[kIcbSemLva];
        if (sem < kSemRegionBase || sem >= kIcbRegionBase)
            return CompletionCode::Fault;
        uint32_t cell = sem - kSemRegionBase;
        if (!hwds_.is_valid(cell) || !hwds_.is_allocated(cell) ||
            hwds_.owner_pid(cell) != pid)
            return CompletionCode::Fault;
        b.state = Icb::State::Armed;
        b.window[kIcbCounter] = 0;
        source_to_icb_[b.window[kIcbSource]] = idx;
        return CompletionCode::Ok;
    }
    b.window[off] = v;
    return CompletionCode::Ok;
}

void Miomu::raise_interrupt(uint32_t source, Word code, Word aux) {
    auto it = source_to_icb_.find(source);
    if (it == source_to_icb_.end() ||
        icbs_[it->second].state != Icb::State::Armed) {
        ++dropped_interrupts_;
        env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::ICB_DROP, 0,
                         0, source, code});
        return;
    }
    uint32_t idx = it->second;
    Icb& b = icbs_[idx];
    env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::ICB_RAISE,
                     b.window[kIcbDualTid], idx, source, code});
    b.pending.emplace_back(code, aux);
    for (uint32_t ch = 0; ch < channels_.size(); ++ch)
        if (channels_[ch].source == source)
            dev_accounts_[ch]->set_hold(env_.engine.now(), CostClass::Latency);
    if (b.sstate == Icb::Supplier::Idle) supplier_start(idx);
}

std::optional<CompletionCode> Miomu::supplier_issue(uint32_t icb,
                                                    SemOpKind kind) {
    Icb& b = icbs_[icb];
    uint32_t cell = b.window[kIcbSemLva] - kSemRegionBase;
    sync_ctx_ = SyncCtx{true, SemAgent::supplier(icb), false, CompletionCode::Ok};
    hwds_.op(kind, cell, SemAgent::supplier(icb), b.dual_prio(), 0);
    SyncCtx ctx = sync_ctx_;
    sync_ctx_.active = false;
    cell_account(cell).mark_useful(env_.engine.now());
    refresh_cell_hold(cell);
    if (ctx.completed) return ctx.code;
    return std::nullopt;
}

void Miomu::supplier_start(uint32_t icb) {
    Icb& b = icbs_[icb];
    b.sstate = Icb::Supplier::Locking;
    auto r = supplier_issue(icb, SemOpKind::Lock);
    if (r) {
        CompletionCode code = *r;
        env_.engine.schedule(1, [this, icb, code] { supplier_resume(icb, code); });
    }
}

void Miomu::supplier_resume(uint32_t icb, CompletionCode code) {
    Icb& b = icbs_[icb];
    if (b.state != Icb::State::Armed) return;
    if (code == CompletionCode::Fault) {
        b.pending.clear();
        b.sstate = Icb::Supplier::Idle;
        return;
    }
    // In the critical interval now, either through Lock or a Pass.
    if (b.window[kIcbCounter] == 0) {
        assert(!b.pending.empty());
        auto [pcode, paux] = b.pending.front();
        b.pending.pop_front();
        b.window[kIcbPayload] = pcode;
        b.window[kIcbAux] = paux;
        b.window[kIcbCounter] = 1;
        env_.trace.emit({env_.engine.now(), trace_id_, TraceKind::ICB_DELIVER,
                         b.window[kIcbDualTid], icb, b.window[kIcbSource],
                         pcode});
        if (b.pending.empty()) {
            for (uint32_t ch = 0; ch < channels_.size(); ++ch)
                if (channels_[ch].source == b.window[kIcbSource] &&
                    channels_[ch].state == DeviceChannel::State::Idle)
                    dev_accounts_[ch]->set_hold(env_.engine.now(),
                                                CostClass::Idle);
        }
        b.sstate = Icb::Supplier::Idle;
        auto r = supplier_issue(icb, SemOpKind::Pass);
        assert(r && *r == CompletionCode::Ok);
        (void)r;
        if (!b.pending.empty()) supplier_start(icb);
    } else {
        // The previous cycle is unfinished by the dual thread; wait for it
        // to pass back.
        b.sstate = Icb::Supplier::Waiting;
        auto r = supplier_issue(icb, SemOpKind::Wait);
        assert(!r);
        (void)r;
    }
}

// --- device control -------------------------------------------------------

Word Miomu::dev_ctrl_read(uint32_t ch, Word off) {
    if (ch >= channels_.size()) return 0;
    return channels_[ch].ctrl_read(off);
}

void Miomu::dev_ctrl_write(uint32_t ch, Word off, Word v, uint16_t writer_pid,
                           Privilege) {
    if (ch >= channels_.size() || off >= kDevWindowWords) return;
    DeviceChannel& c = channels_[ch];
    c.ctrl[off] = v;
    if (off == kDevDoorbell) {
        c.bound_refpid = writer_pid;
        c.programmed = true;
        doorbell(ch);
    }
}

void Miomu::doorbell(uint32_t ch) {
    DeviceChannel& c = channels_[ch];
    if (c.state != DeviceChannel::State::Idle) {
        c.ctrl[kDevStatus] = kIoError;  // doorbell while busy
        return;
    }
    Word op = c.ctrl[kDevOp];
    Word len = c.ctrl[kDevLen];
    Word io_lva = c.ctrl[kDevIoLva];
    uint32_t source = c.source;

    auto finish_after = [this, ch](uint32_t delay, Word code, Word moved) {
        ++in_flight_;
        env_.engine.schedule(delay, [this, ch, code, moved] {
            --in_flight_;
            finish_device_transfer(ch, code, moved);
        });
    };

    if (op == kDevOpInjectError) {
        c.state = DeviceChannel::State::RaisingInterrupt;
        finish_after(1, kIoError, 0);
        return;
    }
    if (op == kDevOpInjectTimeout) {
        // Watchdog expiry: the transfer never makes progress.
        c.state = DeviceChannel::State::Transferring;
        dev_accounts_[ch]->set_hold(env_.engine.now(), CostClass::Latency);
        finish_after(50, kIoTimeout, 0);
        return;
    }
    if ((op != kDevOpDevToMem && op != kDevOpMemToDev) || len == 0 ||
        uint64_t(io_lva) + len > c.store.size()) {
        c.state = DeviceChannel::State::RaisingInterrupt;
        finish_after(1, kIoError, 0);
        return;
    }

    // Build the process-side address; the transfer runs with the authority
    // of the process remembered at the doorbell write.
    ResolvedAddr proc;
    Word opid_field = c.ctrl[kDevProcOpid];
    Word proc_lva = c.ctrl[kDevProcLva];
    if (opid_field == kDevOpidLocal || opid_field == c.bound_refpid) {
        proc.acva = Acva::local(c.bound_refpid, proc_lva);
    } else {
        proc.acva = Acva::shared(uint16_t(opid_field), c.bound_refpid, proc_lva);
    }
    ResolvedAddr dev_side;
    dev_side.acva.lva = io_lva;

    env_.trace.emit({env_.engine.now(), dev_trace_ids_[ch], TraceKind::DMA_START,
                     uint32_t(c.bound_refpid) << 16, len, op});
    c.state = DeviceChannel::State::Transferring;
    dev_accounts_[ch]->set_hold(env_.engine.now(), CostClass::Useful);

    CopyEnd end;
    if (op == kDevOpDevToMem) {
        end = copy_words(proc, dev_side, len, c.bound_refpid,
                         Privilege::NonPrivileged, nullptr, &c);
    } else {
        end = copy_words(dev_side, proc, len, c.bound_refpid,
                         Privilege::NonPrivileged, &c, nullptr);
    }
    uint32_t latency = (len + env_.cfg.dma_width - 1) / env_.cfg.dma_width;
    (void)source;
    finish_after(latency, end.code, end.moved);
}

void Miomu::finish_device_transfer(uint32_t ch, Word code, Word moved) {
    DeviceChannel& c = channels_[ch];
    c.ctrl[kDevStatus] = code;
    c.state = DeviceChannel::State::Idle;
    dev_accounts_[ch]->set_hold(env_.engine.now(), CostClass::Idle);
    env_.trace.emit({env_.engine.now(), dev_trace_ids_[ch], TraceKind::DMA_DONE,
                     uint32_t(c.bound_refpid) << 16, moved, code});
    raise_interrupt(c.source, code, moved);
}


}  // namespace vthm
