#include "vthm/assembler.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

namespace vthm {

namespace {

struct Token {
    std::string text;
};

// Splits an operand field respecting parentheses, so
// "@shared(2, 0x10)" stays one operand.
std::vector<std::string> split_operands(const std::string& s, int line) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char c : s) {
        if (c == '(') depth++;
        if (c == ')') depth--;
        if (depth < 0) throw AsmError(line, "unbalanced ')'");
        if (c == ',' && depth == 0) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (depth != 0) throw AsmError(line, "unbalanced '('");
    if (!cur.empty() || !out.empty()) out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct Parser {
    std::map<std::string, int64_t> equs;
    std::map<std::string, uint32_t> labels;
    struct PendingOperand {
        uint32_t instr;
        int slot;
        std::string label;
        int line;
    };
    std::vector<PendingOperand> pending;

    bool is_int(const std::string& s, int64_t& out) const {
        if (s.empty()) return false;
        size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
        if (i >= s.size()) return false;
        try {
            size_t used = 0;
            out = std::stoll(s, &used, 0);
            return used == s.size();
        } catch (...) {
            return false;
        }
    }

    // Immediate value: integer literal or .equ constant. Labels are
    // resolved later.
    std::optional<int64_t> try_value(const std::string& s) const {
        int64_t v;
        if (is_int(s, v)) return v;
        auto it = equs.find(s);
        if (it != equs.end()) return it->second;
        return std::nullopt;
    }

    int64_t value_or_throw(const std::string& s, int line) const {
        auto v = try_value(s);
        if (!v) throw AsmError(line, "expected integer or constant: '" + s + "'");
        return *v;
    }

    std::optional<uint8_t> try_reg(const std::string& s, int line) const {
        if (s.size() < 2 || (s[0] != 'r' && s[0] != 'R')) return std::nullopt;
        int64_t n;
        if (!is_int(s.substr(1), n)) return std::nullopt;
        if (n < 0 || n >= kNumRegisters)
            throw AsmError(line, "register index out of range: " + s);
        return uint8_t(n);
    }

    // "(rN)" or "disp(rN)"; returns (reg, disp).
    std::optional<std::pair<uint8_t, int32_t>> try_indirect(
        const std::string& s, int line) const {
        size_t open = s.find('(');
        if (open == std::string::npos || s.back() != ')') return std::nullopt;
        std::string inner = trim(s.substr(open + 1, s.size() - open - 2));
        auto reg = try_reg(inner, line);
        if (!reg) return std::nullopt;
        int32_t disp = 0;
        std::string d = trim(s.substr(0, open));
        if (!d.empty()) disp = int32_t(value_or_throw(d, line));
        return std::make_pair(*reg, disp);
    }

    Operand parse_operand(const std::string& raw, uint32_t instr, int slot,
                          int line) {
        std::string s = trim(raw);
        if (s.empty()) throw AsmError(line, "empty operand");
        Operand o;
        if (auto r = try_reg(s, line)) {
            o.kind = Operand::Kind::Reg;
            o.reg = *r;
            return o;
        }
        if (s[0] == '@') {
            size_t open = s.find('(');
            if (open == std::string::npos || s.back() != ')')
                throw AsmError(line, "malformed address operand: " + s);
            std::string head = s.substr(0, open);
            std::string body = s.substr(open + 1, s.size() - open - 2);
            auto parts = split_operands(body, line);
            if (head == "@local") {
                if (parts.size() != 1)
                    throw AsmError(line, "@local takes one argument");
                o.kind = Operand::Kind::AcvaLocal;
                o.imm = value_or_throw(trim(parts[0]), line);
                return o;
            }
            if (head == "@shared") {
                if (parts.size() != 2)
                    throw AsmError(line, "@shared takes two arguments");
                o.kind = Operand::Kind::AcvaShared;
                o.opid = uint32_t(value_or_throw(trim(parts[0]), line));
                std::string lva = trim(parts[1]);
                if (auto ind = try_indirect(lva, line)) {
                    o.lva_in_reg = true;
                    o.reg = ind->first;
                    o.disp = ind->second;
                } else {
                    o.imm = value_or_throw(lva, line);
                }
                return o;
            }
            if (head == "@phys") {
                if (parts.size() != 2)
                    throw AsmError(line, "@phys takes two arguments");
                o.kind = Operand::Kind::Phys;
                o.opid = uint32_t(value_or_throw(trim(parts[0]), line));
                o.imm = value_or_throw(trim(parts[1]), line);
                return o;
            }
            throw AsmError(line, "unknown address form: " + head);
        }
        if (auto ind = try_indirect(s, line)) {
            o.kind = Operand::Kind::RegIndirect;
            o.reg = ind->first;
            o.disp = ind->second;
            return o;
        }
        if (auto v = try_value(s)) {
            o.kind = Operand::Kind::Imm;
            o.imm = *v;
            return o;
        }
        // Assume a label; resolved after all lines are read.
        o.kind = Operand::Kind::Imm;
        pending.push_back({instr, slot, s, line});
        return o;
    }
};

std::optional<Opcode> opcode_from_name(const std::string& s) {
    for (int i = 0; i < kOpcodeCount; ++i)
        if (s == opcode_name(Opcode(i))) return Opcode(i);
    return std::nullopt;
}

Privilege priv_from_name(const std::string& s, int line) {
    if (s == "nonpriv") return Privilege::NonPrivileged;
    if (s == "priv") return Privilege::Privileged;
    if (s == "hyper") return Privilege::HyperPrivileged;
    throw AsmError(line, "unknown privilege: " + s);
}

void validate_instruction(const Instruction& in, int line) {
    auto expect = [&](int slot, std::initializer_list<Operand::Kind> kinds) {
        for (auto k : kinds)
            if (in.ops[slot].kind == k) return;
        throw AsmError(line, std::string("bad operand ") +
                                 std::to_string(slot + 1) + " for " +
                                 opcode_name(in.op));
    };
    using K = Operand::Kind;
    auto addr = {K::AcvaLocal, K::AcvaShared, K::RegIndirect, K::Phys};
    switch (in.op) {
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::MUL:
        expect(0, {K::Reg}); expect(1, {K::Reg}); expect(2, {K::Reg});
        break;
    case Opcode::LDI:
        expect(0, {K::Reg}); expect(1, {K::Imm}); expect(2, {K::None});
        break;
    case Opcode::LD:
        expect(0, {K::Reg}); expect(1, addr); expect(2, {K::None});
        break;
    case Opcode::ST:
        expect(0, {K::Reg}); expect(1, addr); expect(2, {K::None});
        break;
    case Opcode::BEQ:
    case Opcode::BNE:
        expect(0, {K::Reg}); expect(1, {K::Reg}); expect(2, {K::Imm});
        break;
    case Opcode::JMP:
        expect(0, {K::Imm}); expect(1, {K::None}); expect(2, {K::None});
        break;
    case Opcode::HALT:
        expect(0, {K::None});
        break;
    case Opcode::SPAWN:
        expect(0, {K::Reg}); expect(1, {K::Imm, K::Reg});
        expect(2, {K::Imm, K::Reg});
        break;
    case Opcode::SGET:
    case Opcode::GETICB:
        expect(0, {K::Reg}); expect(1, {K::None});
        break;
    case Opcode::SFREE:
    case Opcode::FREEICB:
        expect(0, {K::Reg}); expect(1, addr); expect(2, {K::None});
        break;
    case Opcode::SLOCK:
    case Opcode::SWAIT:
        expect(0, {K::Reg}); expect(1, addr); expect(2, {K::Imm});
        if (in.ops[2].imm < 0)
            throw AsmError(line, "timeout must be >= 0");
        break;
    case Opcode::SUNLOCK:
    case Opcode::SPASS:
        expect(0, addr); expect(1, {K::None});
        break;
    case Opcode::BLKCPY:
        expect(0, addr); expect(1, addr); expect(2, {K::Reg});
        break;
    case Opcode::GRANT:
        expect(0, {K::Reg}); expect(1, {K::Reg}); expect(2, {K::Reg});
        break;
    }
}

}  // namespace

ProgramImage parse_program(const std::string& text, const std::string& name) {
    ProgramImage img;
    img.name = name;
    Parser p;
    std::optional<std::string> entry_label;

    std::istringstream is(text);
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        // Strip comment and whitespace.
        auto semi = raw.find(';');
        if (semi != std::string::npos) raw = raw.substr(0, semi);
        std::string s = trim(raw);
        if (s.empty()) continue;

        if (s[0] == '.') {
            std::istringstream ds(s);
            std::string dir;
            ds >> dir;
            if (dir == ".process") {
                std::string prior, priv;
                ds >> prior >> priv;
                int64_t pv = p.value_or_throw(prior, line);
                if (pv < 0 || pv > Priority::kMax)
                    throw AsmError(line, "priority out of range");
                img.req_pprior = Priority{uint8_t(pv)};
                img.req_pstat = priv_from_name(priv, line);
            } else if (dir == ".entry") {
                std::string lbl;
                ds >> lbl;
                if (lbl.empty()) throw AsmError(line, ".entry needs a label");
                entry_label = lbl;
            } else if (dir == ".word") {
                std::string a;
                ds >> a;
                int64_t lva = p.value_or_throw(a, line);
                std::string v;
                bool any = false;
                while (ds >> v) {
                    img.data[Word(lva++)] = Word(p.value_or_throw(v, line));
                    any = true;
                }
                if (!any) throw AsmError(line, ".word needs values");
            } else if (dir == ".equ") {
                std::string n, v;
                ds >> n >> v;
                if (n.empty() || v.empty())
                    throw AsmError(line, ".equ needs name and value");
                p.equs[n] = p.value_or_throw(v, line);
            } else {
                throw AsmError(line, "unknown directive: " + dir);
            }
            continue;
        }

        // Leading labels (possibly several on one line).
        for (;;) {
            size_t colon = s.find(':');
            if (colon == std::string::npos) break;
            std::string head = trim(s.substr(0, colon));
            // Avoid treating something like "LD r1, (r2)" oddly: labels are
            // single identifiers with no spaces.
            if (head.empty() || head.find_first_of(" \t,(") != std::string::npos)
                break;
            if (p.labels.count(head))
                throw AsmError(line, "duplicate label: " + head);
            p.labels[head] = uint32_t(img.code.size());
            s = trim(s.substr(colon + 1));
            if (s.empty()) break;
        }
        if (s.empty()) continue;

        std::string mnemonic;
        size_t sp = s.find_first_of(" \t");
        mnemonic = s.substr(0, sp);
        auto op = opcode_from_name(mnemonic);
        if (!op) throw AsmError(line, "unknown opcode: " + mnemonic);

        Instruction in;
        in.op = *op;
        in.arch_no = uint32_t(img.code.size());
        if (sp != std::string::npos) {
            auto fields = split_operands(s.substr(sp + 1), line);
            if (fields.size() > 3)
                throw AsmError(line, "too many operands");
            for (size_t i = 0; i < fields.size(); ++i) {
                std::string f = trim(fields[i]);
                if (f.empty()) throw AsmError(line, "empty operand");
                in.ops[i] = p.parse_operand(f, in.arch_no, int(i), line);
            }
        }
        validate_instruction(in, line);
        img.code.push_back(in);
    }

    // Resolve label references.
    for (const auto& pd : p.pending) {
        auto it = p.labels.find(pd.label);
        if (it == p.labels.end())
            throw AsmError(pd.line, "undefined label: " + pd.label);
        img.code[pd.instr].ops[pd.slot].imm = it->second;
    }
    if (entry_label) {
        auto it = p.labels.find(*entry_label);
        if (it == p.labels.end())
            throw AsmError(1, "undefined entry label: " + *entry_label);
        img.entry = it->second;
    }

    if (img.code.empty()) throw AsmError(line, "empty program");
    if (img.entry >= img.code.size())
        throw AsmError(1, "entry out of bounds");
    for (const auto& in : img.code)
        if (auto t = branch_target(in))
            if (*t >= img.code.size())
                throw AsmError(int(in.arch_no) + 1,
                               "branch target out of bounds");
    return img;
}

ProgramImage load_program_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open program file: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    // Use the basename as the program name.
    auto slash = path.find_last_of('/');
    std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
    return parse_program(os.str(), name);
}

}  // namespace vthm
