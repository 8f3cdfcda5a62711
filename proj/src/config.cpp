#include "vthm/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace vthm {

SimConfig default_config() {
    SimConfig c;
    c.devices.push_back(DeviceSpec{"echo0", "echo-char", 1, 256, -1});
    c.devices.push_back(DeviceSpec{"disk0", "blockdev", 1, 4096, -1});
    return c;
}

void SimConfig::validate() const {
    auto need = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("invalid config: " + what);
    };
    need(monitors >= 1, "monitors must be >= 1");
    need(clusters >= 1, "clusters must be >= 1");
    need(issue_width >= 1, "issue_width must be >= 1");
    need(window >= 1 && window <= 64, "window must be in [1, 64]");
    need(ready_depth >= 1, "ready_depth must be >= 1");
    need(hwds_top_cells >= 1, "hwds_top_cells must be >= 1");
    need(hwds_max_cells >= hwds_top_cells, "hwds_max_cells < hwds_top_cells");
    need(icb_cells >= 1, "icb_cells must be >= 1");
    need(dma_width >= 1, "dma_width must be >= 1");
    need(weight_cluster > 0 && weight_monitor > 0 && weight_miomu > 0 &&
             weight_hwds > 0 && weight_block > 0 && weight_device > 0,
         "cost weights must be > 0");
    for (const auto& d : devices) {
        need(d.kind == "echo-char" || d.kind == "blockdev",
             "unknown device kind '" + d.kind + "'");
        need(d.channels >= 1, "device channels must be >= 1");
        need(d.words >= 1, "device words must be >= 1");
    }
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

DeviceSpec parse_device_stanza(const std::string& rest, int line) {
    // device <name> kind=<k> channels=<n> words=<w> [line=<l>]
    DeviceSpec d;
    std::istringstream is(rest);
    if (!(is >> d.name))
        throw ConfigError("line " + std::to_string(line) + ": device needs a name");
    std::string field;
    while (is >> field) {
        auto eq = field.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line) +
                              ": malformed device field '" + field + "'");
        std::string key = field.substr(0, eq);
        std::string val = field.substr(eq + 1);
        try {
            if (key == "kind") d.kind = val;
            else if (key == "channels") d.channels = uint32_t(std::stoul(val, nullptr, 0));
            else if (key == "words") d.words = uint32_t(std::stoul(val, nullptr, 0));
            else if (key == "line") d.line = std::stoll(val, nullptr, 0);
            else
                throw ConfigError("line " + std::to_string(line) +
                                  ": unknown device key '" + key + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (...) {
            throw ConfigError("line " + std::to_string(line) +
                              ": bad value for device key '" + key + "'");
        }
    }
    return d;
}

}  // namespace

SimConfig parse_config(const std::string& text) {
    SimConfig c = default_config();
    bool devices_overridden = false;

    std::map<std::string, std::function<void(const std::string&)>> setters;
    auto u32 = [](uint32_t& ref) {
        return [&ref](const std::string& v) { ref = uint32_t(std::stoul(v, nullptr, 0)); };
    };
    auto u64 = [](uint64_t& ref) {
        return [&ref](const std::string& v) { ref = std::stoull(v, nullptr, 0); };
    };
    auto dbl = [](double& ref) {
        return [&ref](const std::string& v) { ref = std::stod(v); };
    };
    setters["monitors"] = u32(c.monitors);
    setters["clusters"] = u32(c.clusters);
    setters["issue_width"] = u32(c.issue_width);
    setters["window"] = u32(c.window);
    setters["blocks_capacity"] = u32(c.blocks_capacity);
    setters["l1_capacity"] = u32(c.l1_capacity);
    setters["ready_depth"] = u32(c.ready_depth);
    setters["hwds_top_cells"] = u32(c.hwds_top_cells);
    setters["hwds_max_cells"] = u32(c.hwds_max_cells);
    setters["icb_cells"] = u32(c.icb_cells);
    setters["network_latency"] = u32(c.network_latency);
    setters["l1_latency"] = u32(c.l1_latency);
    setters["l2_latency"] = u32(c.l2_latency);
    setters["mem_latency"] = u32(c.mem_latency);
    setters["fetch_latency"] = u32(c.fetch_latency);
    setters["alu_latency"] = u32(c.alu_latency);
    setters["dma_width"] = u32(c.dma_width);
    setters["seed"] = u64(c.seed);
    setters["weight_cluster"] = dbl(c.weight_cluster);
    setters["weight_monitor"] = dbl(c.weight_monitor);
    setters["weight_miomu"] = dbl(c.weight_miomu);
    setters["weight_hwds"] = dbl(c.weight_hwds);
    setters["weight_block"] = dbl(c.weight_block);
    setters["weight_device"] = dbl(c.weight_device);

    std::istringstream is(text);
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        std::string s = trim(raw);
        if (s.empty()) continue;

        if (s.rfind("device ", 0) == 0 || s == "device") {
            if (!devices_overridden) {
                c.devices.clear();
                devices_overridden = true;
            }
            c.devices.push_back(parse_device_stanza(trim(s.substr(6)), line));
            continue;
        }

        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line) +
                              ": expected 'key = value', got '" + s + "'");
        std::string key = trim(s.substr(0, eq));
        std::string val = trim(s.substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end())
            throw ConfigError("line " + std::to_string(line) +
                              ": unknown config key '" + key + "'");
        try {
            it->second(val);
        } catch (const ConfigError&) {
            throw;
        } catch (...) {
            throw ConfigError("line " + std::to_string(line) +
                              ": bad value for key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

SimConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse_config(os.str());
}

}  // namespace vthm
