#pragma once

#include <cassert>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vthm/types.hpp"

namespace vthm {

enum class CostClass : uint8_t { Useful = 0, Latency = 1, Idle = 2 };

// Per-tick, per-unit cost accounting. Every engaged unit is classified
// exactly once per tick; the latency-tolerance figure E = 1 - Cl / C is
// computed over the accumulated weighted samples.
class MetricsSink {
public:
    struct Unit {
        std::string name;
        double weight = 1;
        Tick engaged_at = 0;
        uint64_t ticks[3] = {0, 0, 0};
        Tick next_tick = 0;  // first tick not yet classified
    };

    // Engages a unit. Ticks before `now` are backfilled as Idle so that
    // every engaged unit has exactly run-length samples.
    size_t register_unit(const std::string& name, double weight, Tick now = 0) {
        if (weight <= 0) throw std::invalid_argument("cost weight must be > 0");
        Unit u;
        u.name = name;
        u.weight = weight;
        u.engaged_at = now;
        u.ticks[size_t(CostClass::Idle)] = now;
        u.next_tick = now;
        units_.push_back(std::move(u));
        hold_.push_back(CostClass::Idle);
        return units_.size() - 1;
    }

    // Classifies every tick in [next_tick, upto) as `c`.
    void record_range(size_t unit, Tick upto, CostClass c) {
        Unit& u = units_[unit];
        if (upto <= u.next_tick) return;
        u.ticks[size_t(c)] += upto - u.next_tick;
        u.next_tick = upto;
    }

    // Classifies a single tick; asserts against double classification.
    void record_state(size_t unit, Tick tick, CostClass c) {
        Unit& u = units_[unit];
        assert(tick >= u.next_tick && "unit already classified at this tick");
        if (tick > u.next_tick) record_range(unit, tick, hold_[unit]);
        u.ticks[size_t(c)] += 1;
        u.next_tick = tick + 1;
    }

    size_t unit_count() const { return units_.size(); }
    const Unit& unit(size_t i) const { return units_[i]; }

    CostClass hold(size_t unit) const { return hold_[unit]; }
    void set_hold_class(size_t unit, CostClass c) { hold_[unit] = c; }

    void finalize(Tick run_end) {
        for (size_t i = 0; i < units_.size(); ++i)
            record_range(i, run_end, hold_[i]);
    }

private:
    std::vector<Unit> units_;
    std::vector<CostClass> hold_;
};

// Convenience wrapper owned by each unit: point events are marked Useful,
// the gaps in between take the unit's current holding class.
class UnitAccount {
public:
    UnitAccount() = default;
    UnitAccount(MetricsSink* sink, std::string name, double weight, Tick now) {
        attach(sink, std::move(name), weight, now);
    }
    void attach(MetricsSink* sink, std::string name, double weight, Tick now) {
        sink_ = sink;
        id_ = sink->register_unit(std::move(name), weight, now);
    }

    void mark_useful(Tick t) {
        if (!sink_) return;
        if (t < sink_->unit(id_).next_tick) return;  // already classified
        sink_->record_state(id_, t, CostClass::Useful);
    }

    void set_hold(Tick t, CostClass c) {
        if (!sink_) return;
        sink_->record_range(id_, t, sink_->hold(id_));
        sink_->set_hold_class(id_, c);
    }

    size_t id() const { return id_; }
    bool attached() const { return sink_ != nullptr; }

private:
    MetricsSink* sink_ = nullptr;
    size_t id_ = 0;
};

struct GltReport {
    double c_total = 0;
    double c_latency = 0;
    double c_idle = 0;
    double e = 0;
    double idle_ratio = 0;
};

// E = 1 - Cl / C over all recorded samples. Throws if no cost accrued.
GltReport compute_glt(const MetricsSink& sink);

}  // namespace vthm
