#include "vthm/isa.hpp"

#include <sstream>

namespace vthm {

std::string tid_to_string(Tid tid) {
    char buf[16];
    snprintf(buf, sizeof buf, "0x%08X", tid.packed());
    return buf;
}

const char* opcode_name(Opcode op) {
    static const char* names[kOpcodeCount] = {
        "ADD", "SUB", "MUL", "LDI", "LD", "ST", "BEQ", "BNE", "JMP", "HALT",
        "SPAWN", "SGET", "SFREE", "SLOCK", "SUNLOCK", "SWAIT", "SPASS",
        "GETICB", "FREEICB", "BLKCPY", "GRANT",
    };
    return names[size_t(op)];
}

OpClass op_class(Opcode op) {
    switch (op) {
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::MUL:
    case Opcode::LDI:
        return OpClass::Alu;
    case Opcode::BEQ:
    case Opcode::BNE:
    case Opcode::JMP:
        return OpClass::Branch;
    case Opcode::HALT:
    case Opcode::SPAWN:
        return OpClass::Monitor;
    case Opcode::LD:
    case Opcode::ST:
    case Opcode::SGET:
    case Opcode::SFREE:
    case Opcode::SLOCK:
    case Opcode::SUNLOCK:
    case Opcode::SWAIT:
    case Opcode::SPASS:
    case Opcode::GETICB:
    case Opcode::FREEICB:
    case Opcode::BLKCPY:
    case Opcode::GRANT:
        return OpClass::Miomu;
    }
    return OpClass::Alu;
}

bool op_ends_transaction(Opcode op) {
    // Monitor ops hand control back; SLOCK/SWAIT may leave the thread
    // blocked, so nothing after them is fetched into the same transaction.
    return op == Opcode::HALT || op == Opcode::SPAWN ||
           op == Opcode::SLOCK || op == Opcode::SWAIT;
}

static void add_operand_reads(const Operand& o, RegSet& s) {
    switch (o.kind) {
    case Operand::Kind::Reg: s.add(o.reg); break;
    case Operand::Kind::RegIndirect: s.add(o.reg); break;
    case Operand::Kind::AcvaShared:
        if (o.lva_in_reg) s.add(o.reg);
        break;
    default: break;
    }
}

RegSet reg_reads(const Instruction& in) {
    RegSet s;
    switch (in.op) {
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::MUL:
        add_operand_reads(in.ops[1], s);
        add_operand_reads(in.ops[2], s);
        break;
    case Opcode::LDI:
        break;
    case Opcode::LD:
        add_operand_reads(in.ops[1], s);  // address registers
        break;
    case Opcode::ST:
        add_operand_reads(in.ops[0], s);  // value
        add_operand_reads(in.ops[1], s);  // address registers
        break;
    case Opcode::BEQ:
    case Opcode::BNE:
        add_operand_reads(in.ops[0], s);
        add_operand_reads(in.ops[1], s);
        break;
    case Opcode::JMP:
    case Opcode::HALT:
        break;
    case Opcode::SPAWN:
        add_operand_reads(in.ops[1], s);
        add_operand_reads(in.ops[2], s);
        break;
    case Opcode::SGET:
    case Opcode::GETICB:
        break;
    case Opcode::SFREE:
    case Opcode::FREEICB:
        add_operand_reads(in.ops[1], s);
        break;
    case Opcode::SLOCK:
    case Opcode::SWAIT:
        add_operand_reads(in.ops[1], s);
        break;
    case Opcode::SUNLOCK:
    case Opcode::SPASS:
        add_operand_reads(in.ops[0], s);
        break;
    case Opcode::BLKCPY:
        add_operand_reads(in.ops[0], s);
        add_operand_reads(in.ops[1], s);
        add_operand_reads(in.ops[2], s);
        break;
    case Opcode::GRANT:
        add_operand_reads(in.ops[0], s);
        add_operand_reads(in.ops[1], s);
        add_operand_reads(in.ops[2], s);
        break;
    }
    return s;
}

std::optional<uint8_t> dest_reg(const Instruction& in) {
    switch (in.op) {
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::MUL:
    case Opcode::LDI:
    case Opcode::LD:
    case Opcode::SPAWN:
    case Opcode::SGET:
    case Opcode::SFREE:
    case Opcode::SLOCK:
    case Opcode::SWAIT:
    case Opcode::GETICB:
    case Opcode::FREEICB:
        if (in.ops[0].kind == Operand::Kind::Reg) return in.ops[0].reg;
        return std::nullopt;
    default:
        return std::nullopt;
    }
}

RegSet reg_writes(const Instruction& in) {
    RegSet s;
    if (auto rd = dest_reg(in)) s.add(*rd);
    return s;
}

std::optional<uint32_t> branch_target(const Instruction& in) {
    switch (in.op) {
    case Opcode::JMP:
        return uint32_t(in.ops[0].imm);
    case Opcode::BEQ:
    case Opcode::BNE:
        return uint32_t(in.ops[2].imm);
    default:
        return std::nullopt;
    }
}

std::string to_string(const Operand& o) {
    std::ostringstream os;
    switch (o.kind) {
    case Operand::Kind::None: break;
    case Operand::Kind::Reg: os << 'r' << int(o.reg); break;
    case Operand::Kind::Imm: os << o.imm; break;
    case Operand::Kind::AcvaLocal: os << "@local(" << o.imm << ")"; break;
    case Operand::Kind::AcvaShared:
        os << "@shared(" << o.opid << ", ";
        if (o.lva_in_reg) {
            if (o.disp) os << o.disp << "(r" << int(o.reg) << ")";
            else os << "(r" << int(o.reg) << ")";
        } else {
            os << o.imm;
        }
        os << ")";
        break;
    case Operand::Kind::RegIndirect:
        if (o.disp) os << o.disp;
        os << "(r" << int(o.reg) << ")";
        break;
    case Operand::Kind::Phys:
        os << "@phys(" << o.opid << ", " << o.imm << ")";
        break;
    }
    return os.str();
}

std::string to_string(const Instruction& in) {
    std::string s = opcode_name(in.op);
    bool first = true;
    for (const auto& o : in.ops) {
        if (o.kind == Operand::Kind::None) continue;
        s += first ? " " : ", ";
        s += to_string(o);
        first = false;
    }
    return s;
}

std::string disassemble(const ProgramImage& img) {
    std::ostringstream os;
    os << ".process " << int(img.req_pprior.value) << " "
       << to_string(img.req_pstat) << "\n";

    // Collect label targets (branch targets and the entry point).
    std::map<uint32_t, std::string> labels;
    auto want_label = [&](uint32_t idx) {
        if (!labels.count(idx))
            labels[idx] = "L" + std::to_string(labels.size());
    };
    if (img.entry != 0) want_label(img.entry);
    for (const auto& in : img.code)
        if (auto t = branch_target(in)) want_label(*t);

    if (img.entry != 0) os << ".entry " << labels[img.entry] << "\n";
    for (const auto& [lva, val] : img.data)
        os << ".word 0x" << std::hex << lva << " 0x" << val << std::dec << "\n";

    for (uint32_t i = 0; i < img.code.size(); ++i) {
        auto in = img.code[i];
        if (labels.count(i)) os << labels[i] << ":";
        // Rewrite branch-target immediates as label references.
        std::string text = to_string(in);
        if (auto t = branch_target(in)) {
            auto pos = text.rfind(std::to_string(*t));
            text = text.substr(0, pos) + labels[*t];
        }
        os << "    " << text << "\n";
    }
    return os.str();
}

}  // namespace vthm
