#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "vthm/types.hpp"

namespace vthm {

// Deterministic discrete-event engine with a global tick clock.
// Events fire in (tick, phase, seq) order; seq is assigned at schedule
// time, so identical schedules replay identically. The Timeout phase runs
// after all Normal events of a tick, which makes same-tick semaphore
// admission win over counter expiry.
enum class EventPhase : uint8_t { Normal = 0, Timeout = 1 };

class Engine {
public:
    using Action = std::function<void()>;

    Tick now() const { return now_; }

    void schedule_at(Tick tick, Action fn, EventPhase phase = EventPhase::Normal) {
        if (tick < now_) tick = now_;
        heap_.push(Ev{tick, phase, next_seq_++, std::move(fn)});
        ++scheduled_;
    }
    void schedule(Tick delay, Action fn, EventPhase phase = EventPhase::Normal) {
        schedule_at(now_ + delay, std::move(fn), phase);
    }

    // Monotone stamp for queue arrival ordering.
    uint64_t next_arrival_seq() { return arrival_seq_++; }

    bool empty() const { return heap_.empty(); }

    // Runs until the queue drains or an event fires beyond max_tick.
    // Returns true if the queue drained.
    bool run(Tick max_tick) {
        while (!heap_.empty()) {
            const Ev& top = heap_.top();
            if (top.tick > max_tick) return false;
            Ev ev{top.tick, top.phase, top.seq, std::move(const_cast<Ev&>(top).fn)};
            heap_.pop();
            now_ = ev.tick;
            ++fired_;
            ev.fn();
        }
        return true;
    }

    uint64_t scheduled_count() const { return scheduled_; }
    uint64_t fired_count() const { return fired_; }

private:
    struct Ev {
        Tick tick;
        EventPhase phase;
        uint64_t seq;
        Action fn;
    };
    struct Later {
        bool operator()(const Ev& a, const Ev& b) const {
            if (a.tick != b.tick) return a.tick > b.tick;
            if (a.phase != b.phase) return a.phase > b.phase;
            return a.seq > b.seq;
        }
    };
    std::priority_queue<Ev, std::vector<Ev>, Later> heap_;
    Tick now_ = 0;
    uint64_t next_seq_ = 0;
    uint64_t arrival_seq_ = 0;
    uint64_t scheduled_ = 0;
    uint64_t fired_ = 0;
};

// Deterministic uniform draws for the latency perturbation mode. Avoids
// std::uniform_int_distribution so results do not depend on the standard
// library implementation.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ^ 0x9E3779B97F4A7C15ull) {}
    uint64_t next() {
        // splitmix64
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    uint64_t uniform(uint64_t lo, uint64_t hi) {
        return lo + next() % (hi - lo + 1);
    }

private:
    uint64_t state_;
};

}  // namespace vthm
