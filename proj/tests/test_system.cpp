#include <doctest.h>

#include <sstream>

#include "vthm/assembler.hpp"
#include "vthm/system.hpp"
#include "vthm/trace.hpp"

using namespace vthm;

namespace {

SimConfig bare_cfg() {
    SimConfig c;  // no devices
    return c;
}

std::string workload(const char* name) {
    return std::string(VTHM_WORKLOADS_DIR) + "/" + name;
}

// A cut-down producer/consumer used by several integration tests.
const char* kMiniProdcons = R"(
.process 5 priv
.equ NP1  11
main:
    SGET  r1
    ST    r1, @local(0)
    SPAWN r2, producer, 3
    SPAWN r3, consumer, 3
    HALT
producer:
    LD    r1, @local(0)
    LDI   r2, 1
    LDI   r3, NP1
    LDI   r10, 0
    LDI   r11, 1
    LDI   r6, 3
ploop:
    SLOCK r4, (r1), 0
pchk:
    LD    r5, @local(1)
    BEQ   r5, r10, pput
    SWAIT r6, (r1), 0
    JMP   pchk
pput:
    ST    r2, @local(2)
    ST    r11, @local(1)
    SPASS (r1)
    ADD   r2, r2, r11
    BNE   r2, r3, ploop
    HALT
consumer:
    LD    r1, @local(0)
    LDI   r2, 0x100
    LDI   r7, 1
    LDI   r3, NP1
    LDI   r10, 0
    LDI   r11, 1
    LDI   r6, 3
cloop:
    SLOCK r4, (r1), 0
cchk:
    LD    r5, @local(1)
    BNE   r5, r10, ctake
    SWAIT r6, (r1), 0
    JMP   cchk
ctake:
    LD    r9, @local(2)
    ST    r9, (r2)
    ADD   r2, r2, r11
    ST    r10, @local(1)
    SPASS (r1)
    ADD   r7, r7, r11
    BNE   r7, r3, cloop
    HALT
)";

}  // namespace

TEST_CASE("bootstrap: one hyper process and thread, devices idle, atomic") {
    SimConfig cfg = default_config();
    std::vector<TraceRecord> records;
    System sys(cfg, {}, parse_program("HALT"));
    sys.env().trace.add_observer(
        [&](const TraceRecord& r) { records.push_back(r); });
    sys.bootstrap();

    CHECK(sys.env().processes.size() == 1);
    const auto& boot = sys.env().processes.at(0);
    CHECK(boot.desc.pstat == Privilege::HyperPrivileged);
    CHECK(boot.desc.uid == 0);
    const ThreadRoot* root = sys.find_root(Tid{0, 0});
    REQUIRE(root);
    CHECK(root->tstat == Privilege::HyperPrivileged);

    for (const auto& ch : sys.miomu().channels())
        CHECK(ch.state == DeviceChannel::State::Idle);

    // No event fires between the process and thread creation records.
    REQUIRE(records.size() >= 2);
    CHECK(records[0].kind == TraceKind::PROC_CREATE);
    CHECK(records[1].kind == TraceKind::THREAD_CREATE);
    CHECK(records[1].tid == 0);

    // Nothing moves on any device before a doorbell write.
    auto r = sys.run(10000);
    CHECK(r.reason == HaltReason::AllHalted);
    for (const auto& rec : records)
        CHECK(rec.kind != TraceKind::DMA_START);
}

TEST_CASE("single thread timing equals the latency table sum") {
    SimConfig cfg = bare_cfg();
    System sys(cfg, {}, parse_program("LDI r1, 5\nHALT"));
    auto r = sys.run(1000);
    CHECK(r.reason == HaltReason::AllHalted);
    // fetch, network to the cluster, two unit-latency instructions, network
    // back to the monitor.
    Tick expect = cfg.fetch_latency + cfg.network_latency + 2 * cfg.alu_latency +
                  cfg.network_latency;
    CHECK(r.final_tick == expect);
    CHECK(r.registers.at(0)[1] == 5);
}

TEST_CASE("thread creation bounds") {
    SimConfig cfg = bare_cfg();
    System sys(cfg, {}, parse_program("HALT\nHALT\nHALT"));
    sys.bootstrap();
    // A constrained process to test against.
    sys.env().processes[9].desc =
        ProcessDescriptor{9, Privilege::Privileged, Priority{5}, 109};
    sys.miomu().create_context(9);

    auto [e1, t1] = sys.try_create_thread(
        9, 0, 0, make_spawn_attr(Priority{7}, Privilege::NonPrivileged));
    CHECK(e1 == CreateError::PriorityExceedsProcess);
    CHECK(t1 == 0);

    auto [e2, t2] = sys.try_create_thread(
        9, 0, 0, make_spawn_attr(Priority{3}, Privilege::HyperPrivileged));
    CHECK(e2 == CreateError::StatusExceedsProcess);

    auto [e3, t3] = sys.try_create_thread(
        9, 0, 99, make_spawn_attr(Priority{3}, Privilege::NonPrivileged));
    CHECK(e3 == CreateError::InvalidEntry);

    auto [e4, t4] = sys.try_create_thread(
        9, 0, 2, make_spawn_attr(Priority{3}, Privilege::NonPrivileged));
    CHECK(e4 == CreateError::None);
    CHECK(Tid::unpack(t4) == Tid{9, 0});

    // Packing: the next thread number lands in the low half.
    auto [e5, t5] = sys.try_create_thread(
        9, 0, 1, make_spawn_attr(Priority{3}, Privilege::NonPrivileged));
    CHECK(e5 == CreateError::None);
    CHECK(t5 == 0x00090001u);
}

TEST_CASE("mini producer-consumer transfers everything in order") {
    SimConfig cfg = bare_cfg();
    System sys(cfg, {parse_program(kMiniProdcons, "mini")});
    auto r = sys.run(200000);
    REQUIRE(r.reason == HaltReason::AllHalted);
    const auto& mem = r.memory.at(1);
    for (Word i = 0; i < 10; ++i) {
        REQUIRE(mem.count(0x100 + i));
        CHECK(mem.at(0x100 + i) == i + 1);
    }
    CHECK(r.glt.e >= 0.0);
    CHECK(r.glt.e <= 1.0);
    for (size_t i = 0; i < sys.monitor_count(); ++i)
        CHECK(sys.monitor(i).check_partition());

    // Per-unit sample conservation over the run length.
    const auto& m = sys.env().metrics;
    for (size_t i = 0; i < m.unit_count(); ++i) {
        const auto& u = m.unit(i);
        CHECK(u.ticks[0] + u.ticks[1] + u.ticks[2] == r.final_tick + 1);
    }
}

TEST_CASE("circular lock wait is reported as a deadlock") {
    SimConfig cfg = bare_cfg();
    System sys(cfg, {load_program_file(workload("deadlock.vasm"))});
    auto r = sys.run(200000);
    CHECK(r.reason == HaltReason::Deadlock);
    REQUIRE(r.blocked.size() == 2);
    CHECK(r.blocked[0].tid == Tid{1, 1});
    CHECK(r.blocked[1].tid == Tid{1, 2});
    // Each waits on the semaphore the other holds.
    CHECK(r.blocked[0].sem_lva != r.blocked[1].sem_lva);
}

TEST_CASE("identical inputs give byte-identical traces") {
    auto run_once = [](uint64_t seed) {
        SimConfig cfg = bare_cfg();
        cfg.seed = seed;
        cfg.perturb_lo = 1;
        cfg.perturb_hi = 9;
        std::ostringstream trace;
        System sys(cfg, {parse_program(kMiniProdcons, "mini")});
        sys.env().trace.set_text_output(&trace);
        auto r = sys.run(500000);
        return std::pair<std::string, uint64_t>(trace.str(), r.trace_hash);
    };
    auto [text1, hash1] = run_once(42);
    auto [text2, hash2] = run_once(42);
    CHECK(text1 == text2);
    CHECK(hash1 == hash2);
    auto [text3, hash3] = run_once(43);
    CHECK(hash3 != hash1);  // a different seed perturbs differently
    (void)text3;
}

TEST_CASE("swapping is transparent to the architectural state") {
    auto run_with = [](uint32_t capacity, uint32_t width) {
        SimConfig cfg = bare_cfg();
        cfg.blocks_capacity = capacity;
        cfg.issue_width = width;
        System sys(cfg, {parse_program(kMiniProdcons, "mini")});
        return sys.run(500000);
    };
    auto base = run_with(0, 1);  // unbounded
    REQUIRE(base.reason == HaltReason::AllHalted);
    for (uint32_t cap : {2u, 4u}) {
        for (uint32_t width : {1u, 2u}) {
            auto r = run_with(cap, width);
            REQUIRE(r.reason == HaltReason::AllHalted);
            CHECK(r.registers == base.registers);
            CHECK(r.memory == base.memory);
        }
    }
}

TEST_CASE("every bundled workload finishes within the tick budget") {
    struct Expect {
        const char* file;
        const char* cfg;
        HaltReason reason;
    };
    std::vector<Expect> table = {
        {"prodcons.vasm", nullptr, HaltReason::AllHalted},
        {"glt-spin-vs-wait.vasm", nullptr, HaltReason::AllHalted},
        {"prio-inversion.vasm", nullptr, HaltReason::AllHalted},
        {"io-echo.vasm", nullptr, HaltReason::AllHalted},
        {"io-fault.vasm", nullptr, HaltReason::AllHalted},
        {"io-mux.vasm", "io-mux.cfg", HaltReason::AllHalted},
        {"deadlock.vasm", nullptr, HaltReason::Deadlock},
    };
    for (const auto& e : table) {
        CAPTURE(e.file);
        SimConfig cfg = e.cfg ? load_config_file(workload(e.cfg)) : default_config();
        System sys(cfg, {load_program_file(workload(e.file))});
        auto r = sys.run(1000000);
        CHECK(r.reason == e.reason);
        CHECK(r.aborted_threads == 0);
    }
}

TEST_CASE("several programs launch as separate processes") {
    SimConfig cfg = bare_cfg();
    auto a = parse_program(".process 4 priv\nLDI r1, 7\nST r1, @local(0x10)\nHALT", "a");
    auto b = parse_program(".process 2 nonpriv\nLDI r1, 9\nST r1, @local(0x10)\nHALT", "b");
    System sys(cfg, {a, b});
    auto r = sys.run(100000);
    REQUIRE(r.reason == HaltReason::AllHalted);
    CHECK(r.memory.at(1).at(0x10) == 7);
    CHECK(r.memory.at(2).at(0x10) == 9);
    CHECK(sys.env().processes.at(1).desc.pprior.value == 4);
    CHECK(sys.env().processes.at(2).desc.pstat == Privilege::NonPrivileged);
    CHECK(sys.env().processes.at(2).desc.uid == 102);
}

TEST_CASE("multiple monitors and clusters partition the work") {
    auto run_with = [](uint32_t monitors, uint32_t clusters) {
        SimConfig cfg = bare_cfg();
        cfg.monitors = monitors;
        cfg.clusters = clusters;
        System sys(cfg, {parse_program(kMiniProdcons, "mini")});
        return sys.run(500000);
    };
    auto base = run_with(1, 1);
    auto multi = run_with(2, 2);
    REQUIRE(base.reason == HaltReason::AllHalted);
    REQUIRE(multi.reason == HaltReason::AllHalted);
    CHECK(base.registers == multi.registers);
    CHECK(base.memory == multi.memory);
}

TEST_CASE("contention storm: six threads increment under one lock") {
    // The classic lost-update check: N threads, M locked increments each;
    // the final counter equals N*M only if the critical interval held.
    const char* src = R"(
.process 7 priv
.equ SEMP 0
.equ COUNTER 1
.equ ROUNDS 10
.equ DONE 11
main:
    SGET  r1
    ST    r1, @local(SEMP)
    SPAWN r2, worker, 1
    SPAWN r2, worker, 2
    SPAWN r2, worker, 3
    SPAWN r2, worker, 4
    SPAWN r2, worker, 5
    SPAWN r2, worker, 5
    HALT
worker:
    LD    r1, @local(SEMP)
    LDI   r2, 0
    LDI   r3, ROUNDS
    LDI   r4, 1
wloop:
    SLOCK r5, (r1), 0
    LD    r6, @local(COUNTER)
    ADD   r6, r6, r4
    ST    r6, @local(COUNTER)
    SUNLOCK (r1)
    ADD   r2, r2, r4
    BNE   r2, r3, wloop
    HALT
)";
    for (uint64_t seed : {0ull, 7ull, 23ull}) {
        SimConfig cfg = bare_cfg();
        cfg.seed = seed;
        if (seed) {
            cfg.perturb_lo = 1;
            cfg.perturb_hi = 13;
        }
        System sys(cfg, {parse_program(src, "storm")});
        auto r = sys.run(2000000);
        REQUIRE(r.reason == HaltReason::AllHalted);
        CHECK(r.memory.at(1).at(1) == 60);
        CHECK(r.aborted_threads == 0);
    }
}

TEST_CASE("virtual semaphore pool spills and reloads under contention") {
    // Five live cells on two top-level slots: every operation on a spilled
    // cell reloads it first.
    const char* src = R"(
.process 5 priv
main:
    LDI  r10, 0
    LDI  r11, 1
    LDI  r12, 5
    LDI  r13, 0x20
    LDI  r2, 0
gets:
    SGET r1
    ST   r1, (r13)
    ADD  r13, r13, r11
    ADD  r2, r2, r11
    BNE  r2, r12, gets
    LDI  r2, 0
    LDI  r13, 0x20
    LDI  r14, 3
round:
    LDI  r15, 0x20
    LDI  r3, 0
cell:
    LD   r1, (r15)
    SLOCK r4, (r1), 0
    SUNLOCK (r1)
    ADD  r15, r15, r11
    ADD  r3, r3, r11
    BNE  r3, r12, cell
    ADD  r2, r2, r11
    BNE  r2, r14, round
    HALT
)";
    SimConfig cfg = bare_cfg();
    cfg.hwds_top_cells = 2;
    System sys(cfg, {parse_program(src, "pool")});
    auto r = sys.run(1000000);
    REQUIRE(r.reason == HaltReason::AllHalted);
    CHECK(r.aborted_threads == 0);
    // Fifteen lock/unlock pairs across five cells all completed.
    CHECK(r.registers.at(tid_pack(1, 0))[4] == 0);
}

TEST_CASE("spawn authority: a non-privileged thread cannot spawn") {
    SimConfig cfg = bare_cfg();
    const char* src = R"(
.process 5 priv
main:
    SPAWN r2, worker, 0x00   ; child runs non-privileged
    HALT
worker:
    SPAWN r3, worker, 0x00   ; not allowed at this status
    HALT
)";
    System sys(cfg, {parse_program(src)});
    auto r = sys.run(100000);
    CHECK(r.reason == HaltReason::AllHalted);
    CHECK(r.aborted_threads == 1);
}
