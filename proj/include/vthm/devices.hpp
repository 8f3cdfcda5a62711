#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vthm/config.hpp"
#include "vthm/types.hpp"

namespace vthm {

// One independent-activity channel of an IO unit. The control-register
// window is exposed as a hyperuser-owned shared object; nothing here moves
// until a granted thread writes the doorbell.
struct DeviceChannel {
    enum class State : uint8_t { Idle, Transferring, RaisingInterrupt };

    uint32_t global_id = 0;   // index across all devices
    uint32_t source = 0;      // interrupt source line
    std::string dev_name;
    std::string kind;
    State state = State::Idle;
    Word ctrl[kDevWindowWords] = {0};
    bool programmed = false;
    uint16_t bound_refpid = 0;  // remembered from the doorbell write
    std::vector<Word> store;    // device-local word store

    Word ctrl_read(Word off) const { return off < kDevWindowWords ? ctrl[off] : 0; }

    Word store_read(Word io_lva) const {
        return io_lva < store.size() ? store[io_lva] : 0;
    }
    void store_write(Word io_lva, Word v) {
        if (io_lva < store.size()) store[io_lva] = v;
    }
};

// Builds channels for the configured devices. echo-char stores start with
// a byte pattern so device-to-memory reads have content; blockdev stores
// start zeroed.
std::vector<DeviceChannel> build_device_channels(const std::vector<DeviceSpec>& specs);

}  // namespace vthm
