#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "vthm/types.hpp"

namespace vthm {

// Access modes; GntMode is a mask of these.
enum : uint8_t {
    kModeRead = 1,
    kModeWrite = 2,
    kModeExec = 4,
    kModeAtomic = 8,  // synchronization atomic access
};

// Resolved access-controlled virtual address. Local form implies
// opid == refpid; the referencer's pid always overwrites refpid when a
// request is issued, so a thread cannot speak for another process.
struct Acva {
    bool vashr = false;
    uint16_t opid = 0;
    uint16_t refpid = 0;
    Word lva = 0;

    static Acva local(uint16_t pid, Word lva) {
        return Acva{false, pid, pid, lva};
    }
    static Acva shared(uint16_t opid, uint16_t refpid, Word lva) {
        return Acva{true, opid, refpid, lva};
    }
};

struct AccessRecord {
    uint16_t opid = 0;
    uint16_t gntpid = 0;
    Word orva = 0;
    Word l = 1;
    uint8_t gntmode = 0;

    bool operator==(const AccessRecord&) const = default;
};

// The grant directory. Lookup is indexed by (opid, gntpid); the acceptance
// suite checks its decisions against a flat brute-force scan.
class AccessDirectory {
public:
    // Appends a record; duplicates are idempotent.
    void add(const AccessRecord& r) {
        auto& v = index_[key(r.opid, r.gntpid)];
        for (const auto& e : v)
            if (e == r) return;
        v.push_back(r);
        count_++;
    }

    // True iff some record covers [lva, lva+len-1] of opid's context for
    // refpid with the mode bit set.
    bool permits(const Acva& a, uint8_t mode, Word len) const {
        auto it = index_.find(key(a.opid, a.refpid));
        if (it == index_.end()) return false;
        for (const auto& r : it->second) {
            if ((r.gntmode & mode) != mode) continue;
            if (a.lva < r.orva) continue;
            if (uint64_t(a.lva) + len > uint64_t(r.orva) + r.l) continue;
            return true;
        }
        return false;
    }

    size_t size() const { return count_; }

    std::vector<AccessRecord> all() const {
        std::vector<AccessRecord> out;
        for (const auto& [k, v] : index_)
            out.insert(out.end(), v.begin(), v.end());
        return out;
    }

    // One record per line: `opid gntpid orva l mode-mask`.
    std::string dump() const;

private:
    static uint32_t key(uint16_t opid, uint16_t gntpid) {
        return uint32_t(opid) << 16 | gntpid;
    }
    std::map<uint32_t, std::vector<AccessRecord>> index_;
    size_t count_ = 0;
};

}  // namespace vthm
