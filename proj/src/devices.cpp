#include "vthm/devices.hpp"

namespace vthm {

std::vector<DeviceChannel> build_device_channels(
    const std::vector<DeviceSpec>& specs) {
    std::vector<DeviceChannel> out;
    uint32_t next_source = 0;
    for (const auto& spec : specs) {
        for (uint32_t ch = 0; ch < spec.channels; ++ch) {
            DeviceChannel c;
            c.global_id = uint32_t(out.size());
            c.dev_name = spec.name;
            c.kind = spec.kind;
            // A fixed line id multiplexes every channel of the device onto
            // one interrupt source; otherwise each channel gets its own.
            c.source = spec.line >= 0 ? uint32_t(spec.line) : next_source;
            c.store.assign(spec.words, 0);
            if (spec.kind == "echo-char") {
                for (uint32_t i = 0; i < spec.words; ++i)
                    c.store[i] = (i * 7 + 3) & 0xFF;
            }
            out.push_back(std::move(c));
            ++next_source;
        }
    }
    return out;
}

}  // namespace vthm
