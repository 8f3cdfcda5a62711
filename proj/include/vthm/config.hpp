#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vthm/types.hpp"

namespace vthm {

struct DeviceSpec {
    std::string name;
    std::string kind;  // "echo-char" | "blockdev"
    uint32_t channels = 1;
    uint32_t words = 256;   // per-channel device store size
    int64_t line = -1;      // shared interrupt line; -1 = unique per channel
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key = value configuration plus one-line device stanzas.
struct SimConfig {
    uint32_t monitors = 1;
    uint32_t clusters = 1;
    uint32_t issue_width = 1;
    uint32_t window = 8;
    uint32_t blocks_capacity = 16;  // register blocks per cluster; 0 = unbounded
    uint32_t l1_capacity = 64;      // spilled blocks per cluster before L2
    uint32_t ready_depth = 16;
    uint32_t hwds_top_cells = 16;
    uint32_t hwds_max_cells = 1024;
    uint32_t icb_cells = 16;
    uint32_t network_latency = 2;
    uint32_t l1_latency = 2;
    uint32_t l2_latency = 20;
    uint32_t mem_latency = 20;
    uint32_t fetch_latency = 2;
    uint32_t alu_latency = 1;
    uint32_t dma_width = 4;
    uint64_t seed = 0;
    double weight_cluster = 4;
    double weight_monitor = 2;
    double weight_miomu = 4;
    double weight_hwds = 1;
    double weight_block = 1;
    double weight_device = 1;
    std::vector<DeviceSpec> devices;

    // Random latency perturbation for speed-independence testing;
    // enabled when hi >= lo >= 1.
    uint32_t perturb_lo = 0;
    uint32_t perturb_hi = 0;
    bool perturb_enabled() const { return perturb_hi >= perturb_lo && perturb_lo >= 1; }

    void validate() const;
};

// Two stock devices so every bundled workload runs without a config file.
SimConfig default_config();

SimConfig parse_config(const std::string& text);
SimConfig load_config_file(const std::string& path);

}  // namespace vthm
