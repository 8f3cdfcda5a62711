#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>

namespace vthm {

using Word = uint32_t;
using Tick = uint64_t;

// Thread identifier: process id in the high half, local thread number in
// the low half.
struct Tid {
    uint16_t pid = 0;
    uint16_t tno = 0;

    constexpr uint32_t packed() const { return (uint32_t(pid) << 16) | tno; }
    static constexpr Tid unpack(uint32_t v) {
        return Tid{uint16_t(v >> 16), uint16_t(v & 0xFFFF)};
    }
    constexpr auto operator<=>(const Tid&) const = default;
};

constexpr uint32_t tid_pack(uint32_t pid, uint32_t tno) {
    return (pid << 16) | tno;
}
constexpr std::pair<uint16_t, uint16_t> tid_unpack(uint32_t v) {
    return {uint16_t(v >> 16), uint16_t(v & 0xFFFF)};
}

enum class Privilege : uint8_t {
    NonPrivileged = 0,
    Privileged = 1,
    HyperPrivileged = 2,
};

inline const char* to_string(Privilege p) {
    switch (p) {
    case Privilege::NonPrivileged: return "nonpriv";
    case Privilege::Privileged: return "priv";
    case Privilege::HyperPrivileged: return "hyper";
    }
    return "?";
}

// Priorities are small integers, 7 highest.
struct Priority {
    uint8_t value = 0;
    static constexpr uint8_t kMax = 7;
    constexpr auto operator<=>(const Priority&) const = default;
};

struct ProcessDescriptor {
    uint16_t pid = 0;
    Privilege pstat = Privilege::NonPrivileged;
    Priority pprior{0};
    uint32_t uid = 0;
    bool live = true;
};

// Completion codes delivered to the destination register of synchronization
// and pool instructions, and recorded in the thread root's cc field.
enum class CompletionCode : uint32_t {
    Ok = 0,        // normal / Entered
    Empty = 1,     // pool exhausted (SGET / GETICB)
    TimedOut = 2,  // lock or wait counter expired
    Passed = 3,    // wait completed through a pass
    Busy = 4,      // free refused, waiters present / in-flight activity
    Fault = 5,     // protocol fault (recorded in cc before abort)
};

// Address space layout of a process context (word addressed lvas).
// Everything below kSemRegionBase is ordinary pageable memory; the high
// regions map MIOMU-internal cells and device control registers.
constexpr Word kSemRegionBase = 0x7F000000;  // one word per HWDS cell
constexpr Word kIcbRegionBase = 0x7F100000;  // 8-word ICB control windows
constexpr Word kDevRegionBase = 0x7F200000;  // 8-word device channel windows
constexpr Word kIcbWindowWords = 8;
constexpr Word kDevWindowWords = 8;

// ICB control window word offsets.
enum : Word {
    kIcbDualTid = 0,
    kIcbDualPrio = 1,
    kIcbSemLva = 2,
    kIcbCounter = 3,   // writing 0 to an allocated, unarmed ICB arms it
    kIcbPayload = 4,
    kIcbAux = 5,
    kIcbSource = 6,
};

// Device channel control window word offsets.
enum : Word {
    kDevOp = 0,
    kDevIoLva = 1,
    kDevProcOpid = 2,  // kDevOpidLocal selects the writer's own context
    kDevProcLva = 3,
    kDevLen = 4,
    kDevDoorbell = 5,
    kDevStatus = 6,
};
constexpr Word kDevOpidLocal = 0xFFFFFFFF;

// Device operation codes written to kDevOp.
enum : Word {
    kDevOpDevToMem = 1,
    kDevOpMemToDev = 2,
    kDevOpInjectError = 0x10,    // diagnostic: complete with ERROR
    kDevOpInjectTimeout = 0x11,  // diagnostic: complete with TIMEOUT
};

// Device completion codes (ICB payload word).
enum : Word {
    kIoNormal = 0,
    kIoError = 1,
    kIoTimeout = 2,
};

std::string tid_to_string(Tid tid);

}  // namespace vthm
