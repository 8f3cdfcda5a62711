#pragma once

#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include "vthm/types.hpp"

namespace vthm {

struct PhysicalAddress {
    uint32_t asi = 0;  // 0 = RAM banks; devices and cells resolve separately
    uint64_t pha = 0;
};

constexpr Word kPageWords = 256;

// Flat physical word store, allocated frame by frame.
class PhysicalMemory {
public:
    uint64_t alloc_frame() { return next_frame_++; }
    Word read(uint64_t pha) const {
        auto it = words_.find(pha);
        return it == words_.end() ? 0 : it->second;
    }
    void write(uint64_t pha, Word v) {
        if (v == 0) words_.erase(pha);
        else words_[pha] = v;
    }

private:
    uint64_t next_frame_ = 1;
    std::unordered_map<uint64_t, Word> words_;
};

// Per-process page table over the ordinary region. Pages are resident by
// configuration: a miss allocates a fresh zero frame.
class ProcessContext {
public:
    explicit ProcessContext(uint16_t pid = 0) : pid_(pid) {}

    PhysicalAddress translate(Word lva, PhysicalMemory& mem) {
        Word page = lva / kPageWords;
        auto it = pages_.find(page);
        uint64_t frame;
        if (it == pages_.end()) {
            frame = mem.alloc_frame();
            pages_.emplace(page, frame);
        } else {
            frame = it->second;
        }
        return PhysicalAddress{0, frame * kPageWords + lva % kPageWords};
    }

    Word read(Word lva, PhysicalMemory& mem) {
        return mem.read(translate(lva, mem).pha);
    }
    void write(Word lva, Word v, PhysicalMemory& mem) {
        mem.write(translate(lva, mem).pha, v);
    }

    // Non-zero words of the mapped context, keyed by lva. Frame numbers are
    // timing dependent; contents keyed by lva are not.
    std::map<Word, Word> snapshot(const PhysicalMemory& mem) const {
        std::map<Word, Word> out;
        for (const auto& [page, frame] : pages_) {
            for (Word off = 0; off < kPageWords; ++off) {
                Word v = mem.read(frame * kPageWords + off);
                if (v != 0) out[page * kPageWords + off] = v;
            }
        }
        return out;
    }

    uint16_t pid() const { return pid_; }

private:
    uint16_t pid_;
    std::map<Word, uint64_t> pages_;
};

}  // namespace vthm
