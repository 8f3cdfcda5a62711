#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vthm/env.hpp"
#include "vthm/exec_cluster.hpp"
#include "vthm/miomu.hpp"
#include "vthm/thread_monitor.hpp"

namespace vthm {

enum class HaltReason : uint8_t { AllHalted, Deadlock, MaxTicks };

struct BlockedInfo {
    Tid tid;
    Word sem_lva;
};

struct SimResult {
    HaltReason reason = HaltReason::AllHalted;
    Tick final_tick = 0;
    uint64_t trace_hash = 0;
    uint64_t aborted_threads = 0;
    std::vector<BlockedInfo> blocked;
    GltReport glt;
    // Architectural state: registers per thread, memory words per process,
    // device stores per channel. Keys are stable across timing changes.
    std::map<uint32_t, std::array<Word, kNumRegisters>> registers;
    std::map<uint16_t, std::map<Word, Word>> memory;
    std::map<uint32_t, std::vector<Word>> device_stores;
};

// Builds the configured unit graph, bootstraps the initial hyper-privileged
// process and thread, and runs the event loop to completion.
class System {
public:
    // `programs` are launched at boot as separate processes, in order, by a
    // synthesized hyper-privileged loader running as PID 0 / TID 0.
    // Tests may substitute their own boot program.
    System(const SimConfig& cfg, std::vector<ProgramImage> programs,
           std::optional<ProgramImage> boot_override = std::nullopt);

    // Power-on: creates PID 0 and TID 0 atomically and schedules the first
    // monitor step. Called by run() if not called explicitly.
    void bootstrap();

    SimResult run(Tick max_ticks);

    Env& env() { return env_; }
    Miomu& miomu() { return *miomu_; }
    ThreadMonitor& monitor(size_t i) { return *monitors_[i]; }
    ExecCluster& cluster(size_t i) { return *clusters_[i]; }
    size_t monitor_count() const { return monitors_.size(); }

    const ThreadRoot* find_root(Tid tid) const;

    // Thread creation with the bound checks exposed; the SPAWN path wraps
    // this and reports failures as a zero result register.
    std::pair<CreateError, uint32_t> try_create_thread(uint16_t pid,
                                                       uint32_t image_idx,
                                                       uint32_t entry,
                                                       uint32_t attr);

    // Stats document (flat key = value text).
    std::string stats_document(const SimResult& r) const;

private:
    uint32_t do_create_process(uint32_t image_idx, uint32_t attr, Tid creator);
    uint32_t do_create_thread(uint16_t pid, uint32_t image_idx, uint32_t entry,
                              uint32_t attr);
    ProgramImage synthesize_boot_image(size_t user_programs) const;
    void collect_state(SimResult& r) const;

    SimConfig cfg_;
    Env env_;
    std::unique_ptr<Miomu> miomu_;
    std::vector<std::unique_ptr<ThreadMonitor>> monitors_;
    std::vector<std::unique_ptr<ExecCluster>> clusters_;
    uint16_t kernel_trace_id_;
    uint16_t next_pid_ = 0;
    bool bootstrapped_ = false;
};

}  // namespace vthm
