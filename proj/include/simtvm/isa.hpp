// Copyright 2026 The simtvm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SIMTVM_ISA_HPP_
#define SIMTVM_ISA_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace simtvm {

// Every instruction occupies one 8-byte slot of code space.
inline constexpr std::uint64_t kInstructionBytes = 8;

using CodeOffset = std::uint64_t;

enum class Opcode : std::uint8_t {
  kMov32i,
  kMov,
  kLdl,
  kStl,
  kLdg,
  kStg,
  kIadd,
  kImul,
  kShl,
  kShr,
  kIsetp,
  kBra,
  kBrx,
  kPret,
  kRet,
  kJcal,
  kNop,
  kExit,
};

enum class Compare : std::uint8_t { kNone, kLt, kLe, kGt, kGe, kEq, kNe };

struct Reg {
  static constexpr std::uint8_t kZero = 255;  // RZ
  static constexpr std::uint8_t kCount = 32;
  std::uint8_t index = 0;
  bool is_zero() const { return index == kZero; }
  friend bool operator==(const Reg&, const Reg&) = default;
};

struct Pred {
  static constexpr std::uint8_t kTrue = 7;  // PT
  std::uint8_t index = 0;
  friend bool operator==(const Pred&, const Pred&) = default;
};

struct Imm {
  std::int64_t value = 0;
  friend bool operator==(const Imm&, const Imm&) = default;
};

// [Rn], [Rn+0x10], [Rn-0x8]
struct Mem {
  Reg base;
  std::int32_t disp = 0;
  friend bool operator==(const Mem&, const Mem&) = default;
};

using Operand = std::variant<Reg, Pred, Imm, Mem>;

// `@P0` / `@!P0` guard; only conditional BRA carries one.
struct Guard {
  Pred pred;
  bool negated = false;
  friend bool operator==(const Guard&, const Guard&) = default;
};

struct Instruction {
  Opcode opcode = Opcode::kNop;
  bool wide = false;  // `.64` modifier: operates on an even/odd register pair
  Compare compare = Compare::kNone;  // ISETP only
  std::optional<Guard> guard;
  std::vector<Operand> operands;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

std::string_view opcode_name(Opcode op);
std::optional<Opcode> opcode_from_name(std::string_view name);

// Instruction factories. These canonicalize immediates the same way the
// parser does, so built and parsed instructions compare equal.
namespace ops {
Reg r(unsigned index);
inline constexpr Reg RZ{Reg::kZero};
Pred p(unsigned index);
inline constexpr Pred PT{Pred::kTrue};

Instruction mov32i(Reg dst, std::int64_t imm);
Instruction mov(Reg dst, Reg src, bool wide = false);
Instruction ldl(Reg dst, Reg base, std::int32_t disp = 0, bool wide = false);
Instruction stl(Reg base, std::int32_t disp, Reg src, bool wide = false);
Instruction ldg(Reg dst, Reg base, std::int32_t disp = 0, bool wide = false);
Instruction stg(Reg base, std::int32_t disp, Reg src, bool wide = false);
Instruction iadd(Reg dst, Reg a, Reg b, bool wide = false);
Instruction iadd(Reg dst, Reg a, std::int64_t imm, bool wide = false);
Instruction imul(Reg dst, Reg a, Reg b, bool wide = false);
Instruction imul(Reg dst, Reg a, std::int64_t imm, bool wide = false);
Instruction shl(Reg dst, Reg a, std::int64_t imm, bool wide = false);
Instruction shr(Reg dst, Reg a, std::int64_t imm, bool wide = false);
Instruction isetp(Compare cmp, Pred dst, Reg a, Reg b);
Instruction isetp(Compare cmp, Pred dst, Reg a, std::int64_t imm);
Instruction bra(CodeOffset target, std::optional<Guard> guard = std::nullopt);
Instruction brx(Reg index, std::int64_t imm);
Instruction pret(CodeOffset target);
Instruction ret();
Instruction jcal(std::uint32_t routine);
Instruction nop();
Instruction exit();
}  // namespace ops

// Throws IsaError when operand arity or kinds do not match the opcode, or
// when a `.64` form names an odd register.
void validate(const Instruction& inst);

// Listing text for one instruction, without the offset prefix or trailing `;`.
std::string disassemble(const Instruction& inst);

struct CodeImage {
  std::map<CodeOffset, Instruction> instructions;
  std::map<std::string, CodeOffset> symbols;
  std::map<std::uint64_t, std::string> strings;
  // Initialized 64-bit GLOBAL data words keyed by GLOBAL byte offset.
  std::map<std::uint64_t, std::uint64_t> data;

  bool empty() const { return instructions.empty(); }
  // One past the highest mapped code offset.
  CodeOffset extent() const;
  bool contains(CodeOffset offset) const { return instructions.contains(offset); }
  std::optional<CodeOffset> symbol(std::string_view name) const;
  // Name of the symbol at `offset`, if any (first in name order).
  std::optional<std::string> symbol_at(CodeOffset offset) const;

  friend bool operator==(const CodeImage&, const CodeImage&) = default;
};

class IsaError : public std::runtime_error {
 public:
  enum class Kind { kSyntax, kDuplicateOffset, kMisalignedOffset, kUnknownOpcode, kUnmappedOffset, kBadOperands };

  IsaError(Kind kind, std::size_t line, const std::string& message);

  Kind kind() const { return kind_; }
  // 1-based source line, 0 when not parsing.
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

// Listing grammar, one record per line:
//   /*03e8*/  BRX R0 -0x3f0;      instruction (trailing `;` optional)
//   .func dummy9:                 symbol for the next instruction record
//   .string 0 "HELLO ADMIN!\n"    print-service literal
//   .data 0x1000 0x408            64-bit GLOBAL data word
//   // comment, # comment, blank lines and `.....` elision lines are ignored
CodeImage parse_listing(std::string_view text);
std::string emit_listing(const CodeImage& image);

// Throws IsaError(kUnmappedOffset) for offsets with no instruction.
const Instruction& instruction_at(const CodeImage& image, CodeOffset offset);

std::string hex(std::uint64_t value);
std::string format_offset(CodeOffset offset);  // "03e8"

}  // namespace simtvm

#endif  // SIMTVM_ISA_HPP_
