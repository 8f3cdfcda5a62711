#include "vthm/access.hpp"

#include <sstream>

namespace vthm {

std::string AccessDirectory::dump() const {
    std::ostringstream os;
    for (const auto& r : all()) {
        os << r.opid << " " << r.gntpid << " 0x" << std::hex << r.orva
           << std::dec << " " << r.l << " " << int(r.gntmode) << "\n";
    }
    return os.str();
}

}  // namespace vthm
