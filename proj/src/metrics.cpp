#include "vthm/metrics.hpp"

namespace vthm {

GltReport compute_glt(const MetricsSink& sink) {
    GltReport r;
    for (size_t i = 0; i < sink.unit_count(); ++i) {
        const auto& u = sink.unit(i);
        double useful = double(u.ticks[size_t(CostClass::Useful)]) * u.weight;
        double latency = double(u.ticks[size_t(CostClass::Latency)]) * u.weight;
        double idle = double(u.ticks[size_t(CostClass::Idle)]) * u.weight;
        r.c_total += useful + latency + idle;
        r.c_latency += latency;
        r.c_idle += idle;
    }
    if (r.c_total <= 0)
        throw std::domain_error("GLT undefined: no hardware cost accrued");
    r.e = 1.0 - r.c_latency / r.c_total;
    r.idle_ratio = r.c_idle / r.c_total;
    return r;
}

}  // namespace vthm
