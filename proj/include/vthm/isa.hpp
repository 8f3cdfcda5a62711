#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vthm/types.hpp"

namespace vthm {

enum class Opcode : uint8_t {
    ADD, SUB, MUL, LDI, LD, ST, BEQ, BNE, JMP, HALT,
    SPAWN, SGET, SFREE, SLOCK, SUNLOCK, SWAIT, SPASS,
    GETICB, FREEICB, BLKCPY, GRANT,
};
constexpr int kOpcodeCount = 21;
constexpr int kNumRegisters = 32;

const char* opcode_name(Opcode op);

// Where an opcode is carried out once it reaches an executive cluster.
enum class OpClass : uint8_t {
    Alu,      // executed by a cluster functional unit
    Branch,   // executed by the cluster, may re-steer or finalize
    Monitor,  // terminates the transaction, resolved by the thread monitor
    Miomu,    // issued over the load-store path to the MIOMU
};
OpClass op_class(Opcode op);

// True for opcodes that always end the transaction they appear in:
// monitor-resolved ops and synchronization ops that may block.
bool op_ends_transaction(Opcode op);

struct Operand {
    enum class Kind : uint8_t {
        None,
        Reg,          // r<n>
        Imm,          // integer or resolved label
        AcvaLocal,    // @local(imm)
        AcvaShared,   // @shared(opid, imm)  or  @shared(opid, r<n>+disp)
        RegIndirect,  // (r<n>)  or  disp(r<n>) : local lva = reg + disp
        Phys,         // @phys(asi, pha), hyper-privileged only
    };
    Kind kind = Kind::None;
    uint8_t reg = 0;        // Reg / RegIndirect / AcvaShared-with-reg
    bool lva_in_reg = false;  // AcvaShared: lva comes from `reg`
    int64_t imm = 0;        // Imm / AcvaLocal lva / AcvaShared lva / Phys pha
    uint32_t opid = 0;      // AcvaShared owner pid / Phys asi
    int32_t disp = 0;       // displacement for register forms

    bool operator==(const Operand&) const = default;
};

struct Instruction {
    Opcode op = Opcode::HALT;
    std::array<Operand, 3> ops{};
    uint32_t arch_no = 0;  // sequence number within the program

    bool operator==(const Instruction&) const = default;
};

struct ProgramImage {
    std::string name;
    uint32_t entry = 0;
    std::vector<Instruction> code;
    std::map<Word, Word> data;  // initial words per local virtual address
    // Launch attributes requested via the .process directive.
    Priority req_pprior{5};
    Privilege req_pstat = Privilege::Privileged;

    bool operator==(const ProgramImage&) const = default;
};

// Architectural register read/write sets, used for dependency analysis and
// register-block demand.
struct RegSet {
    uint32_t mask = 0;
    void add(uint8_t r) { mask |= 1u << r; }
    bool contains(uint8_t r) const { return mask & (1u << r); }
};
RegSet reg_reads(const Instruction& in);
RegSet reg_writes(const Instruction& in);

// Destination register of the instruction's completion value, if any.
std::optional<uint8_t> dest_reg(const Instruction& in);

// Static branch target for JMP/BEQ/BNE.
std::optional<uint32_t> branch_target(const Instruction& in);

std::string to_string(const Operand& op);
std::string to_string(const Instruction& in);

// Canonical text form; parse_program(disassemble(img)) == img.
std::string disassemble(const ProgramImage& img);

}  // namespace vthm
