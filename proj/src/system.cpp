#include "vthm/system.hpp"

#include <cassert>
#include <sstream>

#include "vthm/assembler.hpp"

namespace vthm {

System::System(const SimConfig& cfg, std::vector<ProgramImage> programs,
               std::optional<ProgramImage> boot_override)
    : cfg_(cfg), env_(cfg_) {
    cfg_.validate();
    kernel_trace_id_ = env_.trace.register_unit("kernel");

    env_.images.emplace_back();  // boot image slot
    for (auto& p : programs) env_.images.push_back(std::move(p));
    env_.images[0] = boot_override
                         ? std::move(*boot_override)
                         : synthesize_boot_image(env_.images.size() - 1);

    miomu_ = std::make_unique<Miomu>(env_);
    env_.miomu_unit = miomu_->unit_id();
    for (uint32_t i = 0; i < cfg_.monitors; ++i) {
        monitors_.push_back(std::make_unique<ThreadMonitor>(env_, i));
        env_.monitor_units.push_back(monitors_.back()->unit_id());
    }
    for (uint32_t i = 0; i < cfg_.clusters; ++i) {
        clusters_.push_back(std::make_unique<ExecCluster>(env_, i));
        env_.cluster_units.push_back(clusters_.back()->unit_id());
    }

    env_.create_process = [this](uint32_t image_idx, uint32_t attr, Tid creator) {
        return do_create_process(image_idx, attr, creator);
    };
    env_.create_thread = [this](uint16_t pid, uint32_t image_idx, uint32_t entry,
                                uint32_t attr) {
        return do_create_thread(pid, image_idx, entry, attr);
    };
}

ProgramImage System::synthesize_boot_image(size_t user_programs) const {
    // The stub hyperuser loader: grant every device channel's control block
    // to every user process, launch each program as a process, halt.
    std::ostringstream os;
    os << "; generated boot loader\n";
    auto channels = build_device_channels(cfg_.devices);
    for (size_t p = 1; p <= user_programs; ++p) {
        for (const auto& ch : channels) {
            Word lva = kDevRegionBase + ch.global_id * kDevWindowWords;
            os << "LDI r1, " << p << "\n";
            os << "LDI r2, 0x" << std::hex << lva << std::dec << "\n";
            os << "LDI r3, " << ((kDevWindowWords << 4) | kModeRead | kModeWrite)
               << "\n";
            os << "GRANT r1, r2, r3\n";
        }
    }
    for (size_t k = 1; k <= user_programs; ++k) {
        // Image attributes travel in the spawn attribute word.
        const ProgramImage& img = env_.images[k];
        uint32_t attr = make_spawn_attr(img.req_pprior, img.req_pstat, true);
        os << "SPAWN r4, " << k << ", 0x" << std::hex << attr << std::dec << "\n";
    }
    os << "HALT\n";
    return parse_program(os.str(), "boot");
}

void System::bootstrap() {
    if (bootstrapped_) return;
    bootstrapped_ = true;
    // Power-on is an atomic action: the bootstrap process and its thread
    // come to life with no event in between, owning the full physical
    // context.
    ProcessEntry pe;
    pe.desc = ProcessDescriptor{0, Privilege::HyperPrivileged, Priority{7}, 0};
    env_.processes[0] = pe;
    next_pid_ = 1;
    miomu_->create_context(0);
    env_.trace.emit({env_.engine.now(), kernel_trace_id_, TraceKind::PROC_CREATE,
                     0, 0, 7, uint64_t(Privilege::HyperPrivileged)});
    uint32_t tid = do_create_thread(
        0, 0, env_.images[0].entry,
        make_spawn_attr(Priority{7}, Privilege::HyperPrivileged));
    assert(tid == 0);
    (void)tid;
}

uint32_t System::do_create_process(uint32_t image_idx, uint32_t attr,
                                   Tid creator) {
    if (image_idx == 0 || image_idx >= env_.images.size()) return 0;
    if (next_pid_ == 0xFFFF) return 0;
    const ProcessEntry& parent = env_.processes.at(creator.pid);
    Priority pprior = spawn_attr_prior(attr);
    Privilege pstat = spawn_attr_stat(attr);
    if (pprior > parent.desc.pprior || pstat > parent.desc.pstat) return 0;

    uint16_t pid = next_pid_++;
    ProcessEntry pe;
    pe.desc.pid = pid;
    pe.desc.pstat = pstat;
    pe.desc.pprior = pprior;
    pe.desc.uid = pstat == Privilege::HyperPrivileged ? 0 : 100u + pid;
    env_.processes[pid] = pe;
    miomu_->create_context(pid);
    // Materialize the image's initial data words in the fresh context.
    for (auto [lva, value] : env_.images[image_idx].data)
        miomu_->context(pid).write(lva, value, miomu_->memory());
    env_.trace.emit({env_.engine.now(), kernel_trace_id_, TraceKind::PROC_CREATE,
                     tid_pack(pid, 0), pid, pprior.value, uint64_t(pstat)});
    // The spawn of a new process launches its primary thread.
    return do_create_thread(pid, image_idx, env_.images[image_idx].entry,
                            make_spawn_attr(pprior, pstat));
}

std::pair<CreateError, uint32_t> System::try_create_thread(uint16_t pid,
                                                           uint32_t image_idx,
                                                           uint32_t entry,
                                                           uint32_t attr) {
    ProcessEntry& pe = env_.processes.at(pid);
    Priority tprior = spawn_attr_prior(attr);
    Privilege tstat = spawn_attr_stat(attr);
    if (tprior > pe.desc.pprior)
        return {CreateError::PriorityExceedsProcess, 0};
    if (tstat > pe.desc.pstat) return {CreateError::StatusExceedsProcess, 0};
    if (pe.next_tno > 0xFFFF) return {CreateError::ThreadSpaceExhausted, 0};
    if (entry >= env_.images[image_idx].code.size())
        return {CreateError::InvalidEntry, 0};
    return {CreateError::None, do_create_thread(pid, image_idx, entry, attr)};
}

uint32_t System::do_create_thread(uint16_t pid, uint32_t image_idx,
                                  uint32_t entry, uint32_t attr) {
    ProcessEntry& pe = env_.processes.at(pid);
    Priority tprior = spawn_attr_prior(attr);
    Privilege tstat = spawn_attr_stat(attr);
    if (tprior > pe.desc.pprior) return 0;  // PriorityExceedsProcess
    if (tstat > pe.desc.pstat) return 0;    // StatusExceedsProcess
    if (pe.next_tno > 0xFFFF) return 0;     // thread-number space exhausted
    if (entry >= env_.images[image_idx].code.size()) return 0;

    Tid tid{pid, uint16_t(pe.next_tno++)};
    ThreadRoot root;
    root.tid = tid;
    root.tstat = tstat;
    root.tprior = tprior;
    root.pc = entry;
    root.program = image_idx;
    size_t mon = tid.packed() % monitors_.size();
    monitors_[mon]->insert_root(std::move(root));
    return tid.packed();
}

const ThreadRoot* System::find_root(Tid tid) const {
    return monitors_[tid.packed() % monitors_.size()]->root_of(tid);
}

SimResult System::run(Tick max_ticks) {
    bootstrap();
    bool drained = env_.engine.run(max_ticks);

    SimResult r;
    r.final_tick = env_.engine.now();
    for (const auto& mon : monitors_) {
        for (const auto& [packed, root] : mon->roots()) {
            if (root.state == ThreadState::BlockedOnSemaphore)
                r.blocked.push_back(
                    {root.tid, kSemRegionBase + root.blocked_cell});
            if (root.state == ThreadState::Aborted) ++r.aborted_threads;
        }
    }
    if (!drained) {
        r.reason = HaltReason::MaxTicks;
    } else if (env_.live_threads > 0) {
        r.reason = HaltReason::Deadlock;
        env_.trace.emit({r.final_tick, kernel_trace_id_, TraceKind::DEADLOCK, 0,
                         r.blocked.size()});
    } else {
        r.reason = HaltReason::AllHalted;
        env_.trace.emit({r.final_tick, kernel_trace_id_, TraceKind::HALT_ALL, 0,
                         r.final_tick});
    }
    env_.metrics.finalize(r.final_tick + 1);
    r.glt = compute_glt(env_.metrics);
    r.trace_hash = env_.trace.hash();
    collect_state(r);
    return r;
}

void System::collect_state(SimResult& r) const {
    for (const auto& mon : monitors_) {
        for (const auto& [packed, root] : mon->roots()) {
            size_t cl = packed % clusters_.size();
            r.registers[packed] = clusters_[cl]->read_registers(root.tid);
        }
    }
    for (const auto& [pid, pe] : env_.processes)
        r.memory[pid] = miomu_->context(pid).snapshot(miomu_->memory());
    for (const auto& ch : miomu_->channels())
        r.device_stores[ch.global_id] = ch.store;
}

std::string System::stats_document(const SimResult& r) const {
    std::ostringstream os;
    const char* reason = r.reason == HaltReason::AllHalted ? "all-halted"
                         : r.reason == HaltReason::Deadlock ? "deadlock"
                                                            : "max-ticks";
    os << "halt_reason = " << reason << "\n";
    os << "final_tick = " << r.final_tick << "\n";
    os << "e = " << r.glt.e << "\n";
    os << "c_total = " << r.glt.c_total << "\n";
    os << "c_latency = " << r.glt.c_latency << "\n";
    os << "idle_ratio = " << r.glt.idle_ratio << "\n";
    char hash[32];
    snprintf(hash, sizeof hash, "0x%016llx", (unsigned long long)r.trace_hash);
    os << "trace_hash = " << hash << "\n";
    os << "aborted_threads = " << r.aborted_threads << "\n";
    os << "blocked_threads = " << r.blocked.size() << "\n";
    for (const auto& b : r.blocked)
        os << "blocked." << tid_to_string(b.tid) << " = 0x" << std::hex
           << b.sem_lva << std::dec << "\n";
    for (size_t i = 0; i < env_.metrics.unit_count(); ++i) {
        const auto& u = env_.metrics.unit(i);
        os << "unit." << u.name << ".useful_ticks = "
           << u.ticks[size_t(CostClass::Useful)] << "\n";
        os << "unit." << u.name << ".latency_ticks = "
           << u.ticks[size_t(CostClass::Latency)] << "\n";
        os << "unit." << u.name << ".idle_ticks = "
           << u.ticks[size_t(CostClass::Idle)] << "\n";
    }
    return os.str();
}

}  // namespace vthm
