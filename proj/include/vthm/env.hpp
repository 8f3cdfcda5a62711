#pragma once

#include <functional>
#include <map>
#include <vector>

#include "vthm/config.hpp"
#include "vthm/engine.hpp"
#include "vthm/isa.hpp"
#include "vthm/metrics.hpp"
#include "vthm/router.hpp"
#include "vthm/trace.hpp"

namespace vthm {

struct ProcessEntry {
    ProcessDescriptor desc;
    uint32_t next_tno = 0;
};

// Shared wiring for every unit: clock, network, trace and cost sinks, the
// live process table, and the unit topology. Owned by System; units hold a
// reference.
class Env {
public:
    Env(const SimConfig& cfg_) : cfg(cfg_), rng(cfg_.seed), router(engine, cfg_.network_latency) {
        if (cfg.perturb_enabled()) {
            router.set_latency_fn([this] { return lat_perturbed(); });
        }
    }

    const SimConfig& cfg;
    Engine engine;
    Rng rng;
    Trace trace;
    MetricsSink metrics;
    Router router;

    // Unit topology, filled during system construction.
    std::vector<uint16_t> monitor_units;
    std::vector<uint16_t> cluster_units;
    uint16_t miomu_unit = 0;

    uint16_t monitor_for(Tid tid) const {
        return monitor_units[tid.packed() % monitor_units.size()];
    }
    uint16_t cluster_for(Tid tid) const {
        return cluster_units[tid.packed() % cluster_units.size()];
    }

    std::map<uint16_t, ProcessEntry> processes;
    std::vector<ProgramImage> images;  // [0] is the synthesized boot image

    // Latencies, drawn fresh per use in perturbation mode.
    uint32_t lat_mem() { return perturb() ? lat_perturbed() : cfg.mem_latency; }
    uint32_t lat_fetch() { return perturb() ? lat_perturbed() : cfg.fetch_latency; }
    bool perturb() const { return cfg.perturb_enabled(); }
    uint32_t lat_perturbed() {
        return uint32_t(rng.uniform(cfg.perturb_lo, cfg.perturb_hi));
    }

    // Installed by System: creates a process plus its primary thread from a
    // loaded image index; returns the primary thread's packed tid, or 0.
    std::function<uint32_t(uint32_t image_idx, uint32_t attr, Tid creator)>
        create_process;

    // Installed by System: creates a thread in an existing process at the
    // given entry; returns the packed tid, or 0 on a bound violation.
    std::function<uint32_t(uint16_t pid, uint32_t image_idx, uint32_t entry,
                           uint32_t attr)>
        create_thread;

    // Live (not halted, not aborted) thread count, maintained by monitors.
    int64_t live_threads = 0;
};

// Spawn attribute encoding used by the SPAWN instruction:
// bits [2:0] priority, bits [5:4] status, bit 8 set = create a process
// from the image index given in the entry operand.
constexpr uint32_t kSpawnAttrProcess = 0x100;
inline Priority spawn_attr_prior(uint32_t attr) { return Priority{uint8_t(attr & 7)}; }
inline Privilege spawn_attr_stat(uint32_t attr) {
    uint32_t s = (attr >> 4) & 3;
    return s >= 2 ? Privilege::HyperPrivileged
                  : (s == 1 ? Privilege::Privileged : Privilege::NonPrivileged);
}
inline uint32_t make_spawn_attr(Priority p, Privilege s, bool process = false) {
    return uint32_t(p.value) | (uint32_t(s) << 4) | (process ? kSpawnAttrProcess : 0);
}

}  // namespace vthm
