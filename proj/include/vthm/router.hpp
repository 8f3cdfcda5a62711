#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "vthm/engine.hpp"
#include "vthm/packet.hpp"
#include "vthm/prio_queue.hpp"

namespace vthm {

// A unit attached to the processor network.
class Unit {
public:
    virtual ~Unit() = default;
    // A packet became available in the unit's input queue.
    virtual void on_input() = 0;
};

// Single-crossbar priority packet switching. Each destination owns a
// prioritized input queue; a routed packet becomes available there after
// the hop latency and is consumed in (priority, arrival) order.
class Router {
public:
    Router(Engine& engine, uint32_t hop_latency)
        : engine_(engine), hop_latency_(hop_latency) {}

    uint16_t attach(Unit* u) {
        ports_.push_back(Port{u, {}});
        return uint16_t(ports_.size() - 1);
    }

    // Optional per-packet latency override (the perturbation mode).
    void set_latency_fn(std::function<uint32_t()> fn) { latency_fn_ = std::move(fn); }

    void route(Packet&& pkt) {
        if (pkt.dst >= ports_.size())
            throw std::logic_error("route_packet: unknown destination unit");
        uint32_t lat = latency_fn_ ? latency_fn_() : hop_latency_;
        pkt.enqueue_tick = engine_.now();
        uint64_t seq = engine_.next_arrival_seq();
        uint16_t dst = pkt.dst;
        auto shared = std::make_shared<Packet>(std::move(pkt));
        engine_.schedule(lat, [this, dst, seq, shared]() {
            Port& p = ports_[dst];
            p.in.push(shared->priority, seq, std::move(*shared));
            p.unit->on_input();
        });
    }

    std::optional<Packet> fetch(uint16_t port) {
        Port& p = ports_[port];
        if (p.in.empty()) return std::nullopt;
        return p.in.pop().payload;
    }

    bool has_input(uint16_t port) const { return !ports_[port].in.empty(); }

private:
    struct Port {
        Unit* unit;
        PrioQueue<Packet> in;
    };
    Engine& engine_;
    uint32_t hop_latency_;
    std::function<uint32_t()> latency_fn_;
    std::vector<Port> ports_;
};

}  // namespace vthm
