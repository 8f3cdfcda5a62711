// vthm-sim: deterministic discrete-event simulator of a virtual-threaded
// processor reference model. Loads one or more assembly programs, runs them
// as boot-launched processes, and writes a stats document and optional
// trace.
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vthm/assembler.hpp"
#include "vthm/config.hpp"
#include "vthm/system.hpp"

int main(int argc, char** argv) {
    CLI::App app{"virtual-threaded machine simulator"};

    std::vector<std::string> program_paths;
    std::string config_path;
    std::string trace_path;
    std::string stats_path;
    std::string perturb;
    uint64_t seed = 0;
    bool seed_set = false;
    uint64_t max_ticks = 1000000;

    app.add_option("--program", program_paths,
                   "assembly program, launched as a boot process (repeatable)")
        ->required();
    app.add_option("--config", config_path, "configuration file");
    app.add_option("--seed", seed, "random seed")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--max-ticks", max_ticks, "tick budget");
    app.add_option("--trace", trace_path, "write the event trace to a file");
    app.add_option("--stats", stats_path,
                   "write the stats document to a file (default: stdout)");
    app.add_option("--perturb", perturb,
                   "lo:hi random latency range for speed-independence runs");
    std::string dump_dir_path;
    app.add_option("--dump-directory", dump_dir_path,
                   "write the final access directory, one record per line");

    CLI11_PARSE(app, argc, argv);

    try {
        vthm::SimConfig cfg =
            config_path.empty() ? vthm::default_config()
                                : vthm::load_config_file(config_path);
        if (seed_set) cfg.seed = seed;
        if (!perturb.empty()) {
            auto colon = perturb.find(':');
            if (colon == std::string::npos)
                throw vthm::ConfigError("--perturb expects lo:hi");
            cfg.perturb_lo = uint32_t(std::stoul(perturb.substr(0, colon)));
            cfg.perturb_hi = uint32_t(std::stoul(perturb.substr(colon + 1)));
            if (!cfg.perturb_enabled() || cfg.perturb_hi < cfg.perturb_lo)
                throw vthm::ConfigError("--perturb range must satisfy 1 <= lo <= hi");
        }

        std::vector<vthm::ProgramImage> programs;
        for (const auto& p : program_paths)
            programs.push_back(vthm::load_program_file(p));

        vthm::System sys(cfg, std::move(programs));

        std::ofstream trace_file;
        if (!trace_path.empty()) {
            trace_file.open(trace_path);
            if (!trace_file) throw std::runtime_error("cannot open " + trace_path);
            sys.env().trace.set_text_output(&trace_file);
        }

        vthm::SimResult result = sys.run(max_ticks);

        if (!dump_dir_path.empty()) {
            std::ofstream f(dump_dir_path);
            if (!f) throw std::runtime_error("cannot open " + dump_dir_path);
            f << sys.miomu().directory().dump();
        }

        std::string stats = sys.stats_document(result);
        if (stats_path.empty()) {
            std::cout << stats;
        } else {
            std::ofstream f(stats_path);
            if (!f) throw std::runtime_error("cannot open " + stats_path);
            f << stats;
        }

        if (result.reason == vthm::HaltReason::Deadlock) {
            std::cerr << "deadlock: " << result.blocked.size()
                      << " thread(s) blocked\n";
            for (const auto& b : result.blocked)
                std::cerr << "  " << vthm::tid_to_string(b.tid) << " waits on 0x"
                          << std::hex << b.sem_lva << std::dec << "\n";
            return 2;
        }
        if (result.reason == vthm::HaltReason::MaxTicks) {
            std::cerr << "tick budget exhausted at " << result.final_tick << "\n";
            return 2;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
