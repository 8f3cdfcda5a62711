#pragma once

#include <stdexcept>
#include <string>

#include "vthm/isa.hpp"

namespace vthm {

struct AsmError : std::runtime_error {
    int line;
    AsmError(int line_, const std::string& what)
        : std::runtime_error("line " + std::to_string(line_) + ": " + what),
          line(line_) {}
};

// Parses line-oriented assembly text:
//   LABEL: OPCODE op1, op2, op3   ; comment
// Directives: .process <prior> <priv>, .entry <label>,
// .word <lva> <v> [<v>...], .equ <name> <value>.
// Operands: r<n>, integer immediates, labels, @local(lva),
// @shared(opid, lva), @phys(asi, pha), (r<n>), disp(r<n>),
// @shared(opid, (r<n>)) and @shared(opid, disp(r<n>)).
ProgramImage parse_program(const std::string& text,
                           const std::string& name = "program");

ProgramImage load_program_file(const std::string& path);

}  // namespace vthm
