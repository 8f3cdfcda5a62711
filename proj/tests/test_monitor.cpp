#include <doctest.h>

#include "rig.hpp"
#include "vthm/assembler.hpp"
#include "vthm/thread_monitor.hpp"

using namespace vthm;
using test::CaptureUnit;

namespace {

struct MonitorRig {
    SimConfig cfg;
    Env env;
    ThreadMonitor mon;
    CaptureUnit cluster;
    CaptureUnit miomu;

    explicit MonitorRig(const std::string& program, SimConfig c = {})
        : cfg(std::move(c)), env(cfg), mon(env, 0), cluster(env), miomu(env) {
        env.monitor_units = {mon.unit_id()};
        env.cluster_units = {cluster.id};
        env.miomu_unit = miomu.id;
        env.images.push_back(parse_program(program));
        env.processes[1].desc =
            ProcessDescriptor{1, Privilege::Privileged, Priority{5}, 101};
    }

    ThreadRoot make_root(uint16_t tno, uint8_t prio) {
        ThreadRoot r;
        r.tid = Tid{1, tno};
        r.tstat = Privilege::Privileged;
        r.tprior = Priority{prio};
        r.program = 0;
        return r;
    }
};

}  // namespace

TEST_CASE("transaction window: independent instructions carry no edges") {
    MonitorRig rig("LDI r1, 1\nLDI r2, 2\nLDI r3, 3\nLDI r4, 4\nHALT");
    auto txn = rig.mon.form_transaction(rig.make_root(0, 3));
    CHECK(txn.instrs.size() == 5);  // four LDIs + HALT boundary
    CHECK(txn.dep_edges.empty());
}

TEST_CASE("transaction window: raw edges") {
    MonitorRig rig("LDI r1, 1\nLDI r2, 2\nADD r3, r1, r2\nHALT");
    auto txn = rig.mon.form_transaction(rig.make_root(0, 3));
    REQUIRE(txn.instrs.size() == 4);
    using E = std::pair<uint16_t, uint16_t>;
    CHECK(txn.dep_edges == std::vector<E>{{0, 2}, {1, 2}});
}

TEST_CASE("transaction window: non-local jump finalizes") {
    // A jump at position 2 leaving the window cuts the transaction there.
    MonitorRig rig(
        "LDI r1, 1\n"
        "LDI r2, 2\n"
        "JMP far\n"
        "LDI r3, 3\nLDI r3, 4\nLDI r3, 5\nLDI r3, 6\nLDI r3, 7\nLDI r3, 8\n"
        "LDI r3, 9\nLDI r3, 10\n"
        "far: HALT");
    auto txn = rig.mon.form_transaction(rig.make_root(0, 3));
    CHECK(txn.instrs.size() == 3);
    CHECK(txn.instrs.back().op == Opcode::JMP);
}

TEST_CASE("transaction window: local forward branch is aggregated") {
    MonitorRig rig(
        "BEQ r1, r2, skip\n"
        "LDI r3, 1\n"
        "skip: LDI r4, 2\n"
        "HALT");
    auto txn = rig.mon.form_transaction(rig.make_root(0, 3));
    CHECK(txn.instrs.size() == 4);  // branch stays inside
}

TEST_CASE("transaction window: blocking opcode ends the block") {
    MonitorRig rig(
        "LDI r1, 1\n"
        "SLOCK r2, @local(0x7F000000), 0\n"
        "LDI r3, 1\n"
        "HALT");
    auto txn = rig.mon.form_transaction(rig.make_root(0, 3));
    CHECK(txn.instrs.size() == 2);
    CHECK(txn.instrs.back().op == Opcode::SLOCK);
}

TEST_CASE("window size bounds the block") {
    SimConfig cfg;
    cfg.window = 2;
    MonitorRig rig("LDI r1, 1\nLDI r2, 2\nLDI r3, 3\nHALT", cfg);
    auto txn = rig.mon.form_transaction(rig.make_root(0, 3));
    CHECK(txn.instrs.size() == 2);
}

TEST_CASE("monitor issues in priority order and round-trips results") {
    MonitorRig rig("LDI r1, 1\nHALT\nLDI r2, 2\nHALT");
    rig.mon.insert_root(rig.make_root(0, 3));
    rig.mon.insert_root(rig.make_root(1, 7));
    test::drain(rig.env);

    auto txns = rig.cluster.payloads<Transaction>();
    REQUIRE(txns.size() == 2);
    CHECK(txns[0].priority.value == 7);  // services the higher priority first
    CHECK(txns[1].priority.value == 3);
    CHECK(rig.mon.check_partition());
    CHECK(rig.mon.root_of(Tid{1, 0})->state == ThreadState::AwaitingCompletion);

    // Normal completion: pc is copied and the thread requeues, forming its
    // next transaction from there.
    Packet p;
    p.dst = rig.mon.unit_id();
    p.priority = Priority{3};
    p.payload = TxnResult{Tid{1, 0}, TxnOutcome::Normal, 2, CompletionCode::Ok};
    rig.env.router.route(std::move(p));
    test::drain(rig.env);
    auto after = rig.cluster.payloads<Transaction>();
    REQUIRE(after.size() == 3);
    CHECK(after[2].tid == Tid{1, 0});
    CHECK(after[2].start_pc == 2);

    // A result whose pc runs off the program aborts the thread instead.
    Packet bad;
    bad.dst = rig.mon.unit_id();
    bad.priority = Priority{3};
    bad.payload = TxnResult{Tid{1, 0}, TxnOutcome::Normal, 12, CompletionCode::Ok};
    rig.env.router.route(std::move(bad));
    test::drain(rig.env);
    CHECK(rig.mon.root_of(Tid{1, 0})->state == ThreadState::Aborted);
}

TEST_CASE("completion transitions: blocked, halted, aborted, wake") {
    MonitorRig rig("LDI r1, 1\nHALT");
    rig.mon.insert_root(rig.make_root(0, 3));
    test::drain(rig.env);
    REQUIRE(rig.cluster.payloads<Transaction>().size() == 1);

    SUBCASE("blocked then woken") {
        Packet p;
        p.dst = rig.mon.unit_id();
        p.priority = Priority{3};
        TxnResult res{Tid{1, 0}, TxnOutcome::Blocked, 1, CompletionCode::Ok};
        res.sem_cell = 5;
        res.blocked_reg = 9;
        p.payload = res;
        rig.env.router.route(std::move(p));
        test::drain(rig.env);
        const ThreadRoot* root = rig.mon.root_of(Tid{1, 0});
        CHECK(root->state == ThreadState::BlockedOnSemaphore);
        CHECK(root->resident == false);  // swapped out while waiting
        CHECK(rig.mon.check_partition());

        Packet w;
        w.dst = rig.mon.unit_id();
        w.priority = Priority{7};
        w.payload = SemWake{Tid{1, 0}, CompletionCode::TimedOut, 5};
        rig.env.router.route(std::move(w));
        test::drain(rig.env);
        // Woken: ready again, and the completion code is restored into the
        // blocked destination register via the next transaction.
        auto txns = rig.cluster.payloads<Transaction>();
        REQUIRE(txns.size() == 2);
        REQUIRE(txns[1].pending_writes.size() == 1);
        CHECK(txns[1].pending_writes[0] ==
              std::pair<uint8_t, Word>{9, Word(CompletionCode::TimedOut)});
    }

    SUBCASE("halted retires the thread") {
        Packet p;
        p.dst = rig.mon.unit_id();
        p.priority = Priority{3};
        p.payload = TxnResult{Tid{1, 0}, TxnOutcome::Halted, 2, CompletionCode::Ok};
        rig.env.router.route(std::move(p));
        test::drain(rig.env);
        CHECK(rig.mon.root_of(Tid{1, 0})->state == ThreadState::Halted);
        CHECK(rig.env.live_threads == 0);
    }

    SUBCASE("abnormal completion aborts and notifies the miomu") {
        Packet p;
        p.dst = rig.mon.unit_id();
        p.priority = Priority{3};
        TxnResult res{Tid{1, 0}, TxnOutcome::Aborted, 0, CompletionCode::Fault};
        res.abort_reason = 5;
        p.payload = res;
        rig.env.router.route(std::move(p));
        test::drain(rig.env);
        CHECK(rig.mon.root_of(Tid{1, 0})->state == ThreadState::Aborted);
        CHECK(rig.miomu.payloads<AbortNotice>().size() == 1);
    }
}

TEST_CASE("result for an unknown thread is a protocol fault") {
    MonitorRig rig("HALT");
    Packet p;
    p.dst = rig.mon.unit_id();
    p.priority = Priority{3};
    p.payload = TxnResult{Tid{9, 9}, TxnOutcome::Normal, 1, CompletionCode::Ok};
    rig.env.router.route(std::move(p));
    CHECK_THROWS_AS(test::drain(rig.env), std::logic_error);
}
