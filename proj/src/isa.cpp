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

#include "simtvm/isa.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <sstream>
#include <utility>

namespace simtvm {

namespace {

struct OpcodeInfo {
  Opcode op;
  std::string_view name;
  bool allows_wide;
};

constexpr std::array<OpcodeInfo, 18> kOpcodes = {{
    {Opcode::kMov32i, "MOV32I", false},
    {Opcode::kMov, "MOV", true},
    {Opcode::kLdl, "LDL", true},
    {Opcode::kStl, "STL", true},
    {Opcode::kLdg, "LDG", true},
    {Opcode::kStg, "STG", true},
    {Opcode::kIadd, "IADD", true},
    {Opcode::kImul, "IMUL", true},
    {Opcode::kShl, "SHL", true},
    {Opcode::kShr, "SHR", true},
    {Opcode::kIsetp, "ISETP", false},
    {Opcode::kBra, "BRA", false},
    {Opcode::kBrx, "BRX", false},
    {Opcode::kPret, "PRET", false},
    {Opcode::kRet, "RET", false},
    {Opcode::kJcal, "JCAL", false},
    {Opcode::kNop, "NOP", false},
    {Opcode::kExit, "EXIT", false},
}};

constexpr std::array<std::pair<Compare, std::string_view>, 6> kCompares = {{
    {Compare::kLt, "LT"},
    {Compare::kLe, "LE"},
    {Compare::kGt, "GT"},
    {Compare::kGe, "GE"},
    {Compare::kEq, "EQ"},
    {Compare::kNe, "NE"},
}};

const OpcodeInfo& info(Opcode op) {
  for (const auto& entry : kOpcodes) {
    if (entry.op == op) return entry;
  }
  throw std::logic_error("opcode without table entry");
}

[[noreturn]] void bad_operands(const Instruction& inst, const std::string& why) {
  throw IsaError(IsaError::Kind::kBadOperands, 0, std::string(opcode_name(inst.opcode)) + ": " + why);
}

// Immediate classes. Canonical form is what the parser and the factories
// store, so equality of instructions is equality of meaning.
enum class ImmClass { kU32, kS32, kShift, kTarget };

std::int64_t canonical_imm(ImmClass cls, std::int64_t v) {
  constexpr std::int64_t kTwo32 = std::int64_t{1} << 32;
  constexpr std::int64_t kMinS32 = -(std::int64_t{1} << 31);
  switch (cls) {
    case ImmClass::kU32:
      if (v < kMinS32 || v >= kTwo32) throw IsaError(IsaError::Kind::kBadOperands, 0, "immediate out of 32-bit range");
      return v & 0xffffffff;
    case ImmClass::kS32:
      if (v < kMinS32 || v >= kTwo32) throw IsaError(IsaError::Kind::kBadOperands, 0, "immediate out of 32-bit range");
      return v >= (kTwo32 >> 1) ? v - kTwo32 : v;
    case ImmClass::kShift:
      if (v < 0 || v > 63) throw IsaError(IsaError::Kind::kBadOperands, 0, "shift amount out of range");
      return v;
    case ImmClass::kTarget:
      if (v < 0 || v >= kTwo32) throw IsaError(IsaError::Kind::kBadOperands, 0, "code target out of range");
      return v;
  }
  return v;
}

std::optional<ImmClass> imm_class(Opcode op) {
  switch (op) {
    case Opcode::kMov32i:
      return ImmClass::kU32;
    case Opcode::kIadd:
    case Opcode::kImul:
    case Opcode::kIsetp:
    case Opcode::kBrx:
      return ImmClass::kS32;
    case Opcode::kShl:
    case Opcode::kShr:
      return ImmClass::kShift;
    case Opcode::kBra:
    case Opcode::kPret:
    case Opcode::kJcal:
      return ImmClass::kTarget;
    default:
      return std::nullopt;
  }
}

void canonicalize(Instruction& inst) {
  auto cls = imm_class(inst.opcode);
  for (auto& operand : inst.operands) {
    if (auto* imm = std::get_if<Imm>(&operand); imm != nullptr && cls) {
      imm->value = canonical_imm(*cls, imm->value);
    }
  }
}

Instruction make(Opcode op, std::vector<Operand> operands, bool wide = false) {
  Instruction inst;
  inst.opcode = op;
  inst.wide = wide;
  inst.operands = std::move(operands);
  canonicalize(inst);
  validate(inst);
  return inst;
}

std::string reg_name(Reg r) {
  if (r.is_zero()) return "RZ";
  return "R" + std::to_string(r.index);
}

std::string pred_name(Pred p) {
  if (p.index == Pred::kTrue) return "PT";
  return "P" + std::to_string(p.index);
}

std::string signed_hex(std::int64_t v) {
  if (v < 0) return "-" + hex(static_cast<std::uint64_t>(-v));
  return hex(static_cast<std::uint64_t>(v));
}

std::string operand_text(const Operand& operand) {
  return std::visit(
      [](const auto& o) -> std::string {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, Reg>) {
          return reg_name(o);
        } else if constexpr (std::is_same_v<T, Pred>) {
          return pred_name(o);
        } else if constexpr (std::is_same_v<T, Imm>) {
          return signed_hex(o.value);
        } else {
          std::string s = "[" + reg_name(o.base);
          if (o.disp > 0) s += "+" + hex(static_cast<std::uint64_t>(o.disp));
          if (o.disp < 0) s += "-" + hex(static_cast<std::uint64_t>(-static_cast<std::int64_t>(o.disp)));
          return s + "]";
        }
      },
      operand);
}

// ---------------------------------------------------------------- parsing

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool parse_number(std::string_view s, std::int64_t& out) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  if (s.empty()) return false;
  std::uint64_t magnitude = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), magnitude, base);
  if (ec != std::errc() || ptr != s.data() + s.size()) return false;
  if (magnitude > (std::uint64_t{1} << 62)) return false;
  out = negative ? -static_cast<std::int64_t>(magnitude) : static_cast<std::int64_t>(magnitude);
  return true;
}

class LineParser {
 public:
  LineParser(std::size_t line) : line_(line) {}

  [[noreturn]] void fail(const std::string& message) const {
    throw IsaError(IsaError::Kind::kSyntax, line_, "line " + std::to_string(line_) + ": " + message);
  }

  std::optional<Reg> reg(std::string_view tok) const {
    if (tok == "RZ") return Reg{Reg::kZero};
    if (tok.size() < 2 || tok[0] != 'R') return std::nullopt;
    std::int64_t n = 0;
    if (!parse_number(tok.substr(1), n) || n < 0 || n >= Reg::kCount) return std::nullopt;
    return Reg{static_cast<std::uint8_t>(n)};
  }

  std::optional<Pred> pred(std::string_view tok) const {
    if (tok == "PT") return Pred{Pred::kTrue};
    if (tok.size() != 2 || tok[0] != 'P' || tok[1] < '0' || tok[1] > '6') return std::nullopt;
    return Pred{static_cast<std::uint8_t>(tok[1] - '0')};
  }

  Operand operand(std::string_view tok) const {
    if (tok.front() == '[') {
      if (tok.back() != ']') fail("unterminated memory operand '" + std::string(tok) + "'");
      std::string inner;
      for (char c : tok.substr(1, tok.size() - 2)) {
        if (!std::isspace(static_cast<unsigned char>(c))) inner += c;
      }
      auto split = inner.find_first_of("+-");
      auto base = reg(std::string_view(inner).substr(0, split));
      if (!base) fail("bad memory base in '" + std::string(tok) + "'");
      std::int64_t disp = 0;
      if (split != std::string::npos) {
        if (!parse_number(std::string_view(inner).substr(split), disp) || disp < INT32_MIN || disp > INT32_MAX) {
          fail("bad displacement in '" + std::string(tok) + "'");
        }
      }
      return Mem{*base, static_cast<std::int32_t>(disp)};
    }
    if (auto r = reg(tok)) return *r;
    if (auto p = pred(tok)) return *p;
    std::int64_t v = 0;
    if (parse_number(tok, v)) return Imm{v};
    fail("bad operand '" + std::string(tok) + "'");
  }

  std::vector<std::string_view> tokenize(std::string_view s) const {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
      char c = s[i];
      if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
        ++i;
        continue;
      }
      std::size_t start = i;
      if (c == '[') {
        auto close = s.find(']', i);
        if (close == std::string_view::npos) fail("unterminated memory operand");
        i = close + 1;
      } else {
        while (i < s.size() && s[i] != ',' && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      }
      out.push_back(s.substr(start, i - start));
    }
    return out;
  }

  Instruction instruction(std::string_view body) const {
    Instruction inst;
    if (!body.empty() && body.front() == '@') {
      auto space = body.find_first_of(" \t");
      if (space == std::string_view::npos) fail("guard without instruction");
      std::string_view g = body.substr(1, space - 1);
      bool negated = !g.empty() && g.front() == '!';
      if (negated) g.remove_prefix(1);
      auto p = pred(g);
      if (!p) fail("bad guard predicate");
      inst.guard = Guard{*p, negated};
      body = trim(body.substr(space));
    }
    auto space = body.find_first_of(" \t");
    std::string_view mnemonic = body.substr(0, space);
    std::string_view rest = space == std::string_view::npos ? std::string_view{} : body.substr(space);

    auto dot = mnemonic.find('.');
    auto op = opcode_from_name(mnemonic.substr(0, dot));
    if (!op) {
      throw IsaError(IsaError::Kind::kUnknownOpcode, line_,
                     "line " + std::to_string(line_) + ": unknown opcode '" + std::string(mnemonic) + "'");
    }
    inst.opcode = *op;
    while (dot != std::string_view::npos) {
      auto next = mnemonic.find('.', dot + 1);
      std::string_view mod = mnemonic.substr(dot + 1, next == std::string_view::npos ? next : next - dot - 1);
      dot = next;
      if (mod == "64") {
        inst.wide = true;
        continue;
      }
      auto it = std::find_if(kCompares.begin(), kCompares.end(), [&](const auto& e) { return e.second == mod; });
      if (it == kCompares.end() || inst.compare != Compare::kNone) fail("bad modifier '." + std::string(mod) + "'");
      inst.compare = it->first;
    }
    for (auto tok : tokenize(rest)) inst.operands.push_back(operand(tok));
    try {
      canonicalize(inst);
      validate(inst);
    } catch (const IsaError& e) {
      throw IsaError(IsaError::Kind::kBadOperands, line_, "line " + std::to_string(line_) + ": " + e.what());
    }
    return inst;
  }

 private:
  std::size_t line_;
};

std::string unescape(std::string_view quoted, const LineParser& lp) {
  if (quoted.size() < 2 || quoted.front() != '"' || quoted.back() != '"') lp.fail("expected quoted string");
  std::string out;
  for (std::size_t i = 1; i + 1 < quoted.size(); ++i) {
    char c = quoted[i];
    if (c != '\\') {
      out += c;
      continue;
    }
    if (++i + 1 >= quoted.size()) lp.fail("dangling escape");
    switch (quoted[i]) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case '\\': out += '\\'; break;
      case '"': out += '"'; break;
      default: lp.fail("unknown escape");
    }
  }
  return out;
}

std::string escape(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      default: out += c;
    }
  }
  return out + "\"";
}

bool is_elision(std::string_view line) {
  return !line.empty() && std::all_of(line.begin(), line.end(), [](char c) { return c == '.'; });
}

bool valid_symbol(std::string_view name) {
  if (name.empty() || std::isdigit(static_cast<unsigned char>(name.front()))) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':' || c == '$';
  });
}

}  // namespace

IsaError::IsaError(Kind kind, std::size_t line, const std::string& message)
    : std::runtime_error(message), kind_(kind), line_(line) {}

std::string hex(std::uint64_t value) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%" PRIx64, value);
  return buf;
}

std::string format_offset(CodeOffset offset) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%04" PRIx64, offset);
  return buf;
}

std::string_view opcode_name(Opcode op) { return info(op).name; }

std::optional<Opcode> opcode_from_name(std::string_view name) {
  for (const auto& entry : kOpcodes) {
    if (entry.name == name) return entry.op;
  }
  return std::nullopt;
}

namespace ops {

Reg r(unsigned index) {
  if (index >= Reg::kCount) throw IsaError(IsaError::Kind::kBadOperands, 0, "register index out of range");
  return Reg{static_cast<std::uint8_t>(index)};
}

Pred p(unsigned index) {
  if (index >= Pred::kTrue) throw IsaError(IsaError::Kind::kBadOperands, 0, "predicate index out of range");
  return Pred{static_cast<std::uint8_t>(index)};
}

Instruction mov32i(Reg dst, std::int64_t imm) { return make(Opcode::kMov32i, {dst, Imm{imm}}); }
Instruction mov(Reg dst, Reg src, bool wide) { return make(Opcode::kMov, {dst, src}, wide); }
Instruction ldl(Reg dst, Reg base, std::int32_t disp, bool wide) {
  return make(Opcode::kLdl, {dst, Mem{base, disp}}, wide);
}
Instruction stl(Reg base, std::int32_t disp, Reg src, bool wide) {
  return make(Opcode::kStl, {Mem{base, disp}, src}, wide);
}
Instruction ldg(Reg dst, Reg base, std::int32_t disp, bool wide) {
  return make(Opcode::kLdg, {dst, Mem{base, disp}}, wide);
}
Instruction stg(Reg base, std::int32_t disp, Reg src, bool wide) {
  return make(Opcode::kStg, {Mem{base, disp}, src}, wide);
}
Instruction iadd(Reg dst, Reg a, Reg b, bool wide) { return make(Opcode::kIadd, {dst, a, b}, wide); }
Instruction iadd(Reg dst, Reg a, std::int64_t imm, bool wide) { return make(Opcode::kIadd, {dst, a, Imm{imm}}, wide); }
Instruction imul(Reg dst, Reg a, Reg b, bool wide) { return make(Opcode::kImul, {dst, a, b}, wide); }
Instruction imul(Reg dst, Reg a, std::int64_t imm, bool wide) { return make(Opcode::kImul, {dst, a, Imm{imm}}, wide); }
Instruction shl(Reg dst, Reg a, std::int64_t imm, bool wide) { return make(Opcode::kShl, {dst, a, Imm{imm}}, wide); }
Instruction shr(Reg dst, Reg a, std::int64_t imm, bool wide) { return make(Opcode::kShr, {dst, a, Imm{imm}}, wide); }

Instruction isetp(Compare cmp, Pred dst, Reg a, Reg b) {
  Instruction inst;
  inst.opcode = Opcode::kIsetp;
  inst.compare = cmp;
  inst.operands = {dst, a, b};
  validate(inst);
  return inst;
}

Instruction isetp(Compare cmp, Pred dst, Reg a, std::int64_t imm) {
  Instruction inst;
  inst.opcode = Opcode::kIsetp;
  inst.compare = cmp;
  inst.operands = {dst, a, Imm{imm}};
  canonicalize(inst);
  validate(inst);
  return inst;
}

Instruction bra(CodeOffset target, std::optional<Guard> guard) {
  Instruction inst = make(Opcode::kBra, {Imm{static_cast<std::int64_t>(target)}});
  inst.guard = guard;
  return inst;
}

Instruction brx(Reg index, std::int64_t imm) { return make(Opcode::kBrx, {index, Imm{imm}}); }
Instruction pret(CodeOffset target) { return make(Opcode::kPret, {Imm{static_cast<std::int64_t>(target)}}); }
Instruction ret() { return make(Opcode::kRet, {}); }
Instruction jcal(std::uint32_t routine) { return make(Opcode::kJcal, {Imm{routine}}); }
Instruction nop() { return make(Opcode::kNop, {}); }
Instruction exit() { return make(Opcode::kExit, {}); }

}  // namespace ops

void validate(const Instruction& inst) {
  enum K { R, P, I, M, RI };
  auto expect = [&](std::initializer_list<K> kinds) {
    if (inst.operands.size() != kinds.size()) {
      bad_operands(inst, "expected " + std::to_string(kinds.size()) + " operands, got " +
                             std::to_string(inst.operands.size()));
    }
    std::size_t i = 0;
    for (K k : kinds) {
      const Operand& o = inst.operands[i++];
      bool ok = false;
      switch (k) {
        case R: ok = std::holds_alternative<Reg>(o); break;
        case P: ok = std::holds_alternative<Pred>(o); break;
        case I: ok = std::holds_alternative<Imm>(o); break;
        case M: ok = std::holds_alternative<Mem>(o); break;
        case RI: ok = std::holds_alternative<Reg>(o) || std::holds_alternative<Imm>(o); break;
      }
      if (!ok) bad_operands(inst, "operand " + std::to_string(i) + " has the wrong kind");
    }
  };

  switch (inst.opcode) {
    case Opcode::kMov32i: expect({R, I}); break;
    case Opcode::kMov: expect({R, R}); break;
    case Opcode::kLdl:
    case Opcode::kLdg: expect({R, M}); break;
    case Opcode::kStl:
    case Opcode::kStg: expect({M, R}); break;
    case Opcode::kIadd:
    case Opcode::kImul: expect({R, R, RI}); break;
    case Opcode::kShl:
    case Opcode::kShr: expect({R, R, I}); break;
    case Opcode::kIsetp: expect({P, R, RI}); break;
    case Opcode::kBra:
    case Opcode::kPret:
    case Opcode::kJcal: expect({I}); break;
    case Opcode::kBrx: expect({R, I}); break;
    case Opcode::kRet:
    case Opcode::kNop:
    case Opcode::kExit: expect({}); break;
  }

  if (inst.wide && !info(inst.opcode).allows_wide) bad_operands(inst, "no .64 form");
  if ((inst.compare != Compare::kNone) != (inst.opcode == Opcode::kIsetp)) {
    bad_operands(inst, "compare modifier is required on ISETP and only there");
  }
  if (inst.guard && inst.opcode != Opcode::kBra) bad_operands(inst, "only BRA may be predicated");

  auto even = [&](Reg r) {
    if (!r.is_zero() && r.index % 2 != 0) bad_operands(inst, "register pair must start at an even register");
  };
  // 64-bit addresses come from a pair.
  if (inst.opcode == Opcode::kLdg || inst.opcode == Opcode::kStg) {
    for (const auto& o : inst.operands) {
      if (auto* m = std::get_if<Mem>(&o)) even(m->base);
    }
  }
  if (inst.wide) {
    for (const auto& o : inst.operands) {
      if (auto* r = std::get_if<Reg>(&o)) even(*r);
    }
  }
}

std::string disassemble(const Instruction& inst) {
  std::string out;
  if (inst.guard) out += std::string("@") + (inst.guard->negated ? "!" : "") + pred_name(inst.guard->pred) + " ";
  out += opcode_name(inst.opcode);
  if (inst.compare != Compare::kNone) {
    for (const auto& [cmp, name] : kCompares) {
      if (cmp == inst.compare) out += "." + std::string(name);
    }
  }
  if (inst.wide) out += ".64";
  // BRX keeps the listing's space-separated spelling: `BRX R0 -0x3f0`.
  const char* sep = inst.opcode == Opcode::kBrx ? " " : ", ";
  for (std::size_t i = 0; i < inst.operands.size(); ++i) {
    out += i == 0 ? " " : sep;
    out += operand_text(inst.operands[i]);
  }
  return out;
}

CodeOffset CodeImage::extent() const {
  if (instructions.empty()) return 0;
  return instructions.rbegin()->first + kInstructionBytes;
}

std::optional<CodeOffset> CodeImage::symbol(std::string_view name) const {
  auto it = symbols.find(std::string(name));
  if (it == symbols.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> CodeImage::symbol_at(CodeOffset offset) const {
  for (const auto& [name, off] : symbols) {
    if (off == offset) return name;
  }
  return std::nullopt;
}

CodeImage parse_listing(std::string_view text) {
  CodeImage image;
  std::vector<std::string> pending_symbols;
  std::size_t pending_line = 0;
  std::size_t line_no = 0;

  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    LineParser lp(line_no);

    std::string_view line = trim(raw);
    if (line.empty() || line.starts_with("//") || line.starts_with("#") || is_elision(line)) continue;

    if (line.starts_with(".func")) {
      std::string_view name = trim(line.substr(5));
      if (name.empty() || name.back() != ':') lp.fail("expected '.func NAME:'");
      name = trim(name.substr(0, name.size() - 1));
      if (!valid_symbol(name)) lp.fail("bad symbol name '" + std::string(name) + "'");
      if (image.symbols.contains(std::string(name)) ||
          std::find(pending_symbols.begin(), pending_symbols.end(), name) != pending_symbols.end()) {
        lp.fail("duplicate symbol '" + std::string(name) + "'");
      }
      pending_symbols.emplace_back(name);
      pending_line = line_no;
      continue;
    }
    if (line.starts_with(".string")) {
      std::string_view rest = trim(line.substr(7));
      auto space = rest.find_first_of(" \t");
      std::int64_t id = 0;
      if (space == std::string_view::npos || !parse_number(rest.substr(0, space), id) || id < 0) {
        lp.fail("expected '.string ID \"text\"'");
      }
      if (image.strings.contains(static_cast<std::uint64_t>(id))) lp.fail("duplicate string id");
      image.strings[static_cast<std::uint64_t>(id)] = unescape(trim(rest.substr(space)), lp);
      continue;
    }
    if (line.starts_with(".data")) {
      auto toks = lp.tokenize(line.substr(5));
      std::int64_t off = 0;
      if (toks.size() != 2 || !parse_number(toks[0], off) || off < 0 || off % 8 != 0) {
        lp.fail("expected '.data OFFSET VALUE' with an 8-byte aligned offset");
      }
      // Values are full 64-bit words; parse the magnitude unsigned.
      std::string_view v = toks[1];
      std::uint64_t word = 0;
      int base = 10;
      if (v.starts_with("0x")) {
        base = 16;
        v.remove_prefix(2);
      }
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), word, base);
      if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) lp.fail("bad data word");
      if (image.data.contains(static_cast<std::uint64_t>(off))) lp.fail("duplicate data offset");
      image.data[static_cast<std::uint64_t>(off)] = word;
      continue;
    }

    if (!line.starts_with("/*")) lp.fail("expected '/*OFFSET*/' record");
    auto close = line.find("*/");
    if (close == std::string_view::npos) lp.fail("unterminated offset comment");
    std::string_view off_text = line.substr(2, close - 2);
    std::uint64_t offset = 0;
    {
      auto [ptr, ec] = std::from_chars(off_text.data(), off_text.data() + off_text.size(), offset, 16);
      if (off_text.empty() || ec != std::errc() || ptr != off_text.data() + off_text.size()) {
        lp.fail("bad offset '" + std::string(off_text) + "'");
      }
    }
    if (offset % kInstructionBytes != 0) {
      throw IsaError(IsaError::Kind::kMisalignedOffset, line_no,
                     "line " + std::to_string(line_no) + ": offset " + hex(offset) + " is not a multiple of 8");
    }
    if (image.instructions.contains(offset)) {
      throw IsaError(IsaError::Kind::kDuplicateOffset, line_no,
                     "line " + std::to_string(line_no) + ": duplicate offset " + hex(offset));
    }
    std::string_view body = trim(line.substr(close + 2));
    if (body.ends_with(';')) body = trim(body.substr(0, body.size() - 1));
    if (body.empty()) lp.fail("missing instruction");
    image.instructions.emplace(offset, lp.instruction(body));
    for (auto& name : pending_symbols) image.symbols.emplace(std::move(name), offset);
    pending_symbols.clear();
  }
  if (!pending_symbols.empty()) {
    LineParser(pending_line).fail("symbol '" + pending_symbols.front() + "' has no following instruction");
  }
  return image;
}

std::string emit_listing(const CodeImage& image) {
  std::ostringstream out;
  for (const auto& [id, text] : image.strings) out << ".string " << id << ' ' << escape(text) << '\n';
  for (const auto& [off, word] : image.data) out << ".data " << hex(off) << ' ' << hex(word) << '\n';

  std::multimap<CodeOffset, std::string> labels;
  for (const auto& [name, off] : image.symbols) labels.emplace(off, name);
  for (const auto& [off, inst] : image.instructions) {
    auto [first, last] = labels.equal_range(off);
    for (auto it = first; it != last; ++it) out << ".func " << it->second << ":\n";
    out << "/*" << format_offset(off) << "*/  " << disassemble(inst) << ";\n";
  }
  return out.str();
}

const Instruction& instruction_at(const CodeImage& image, CodeOffset offset) {
  auto it = image.instructions.find(offset);
  if (it == image.instructions.end()) {
    throw IsaError(IsaError::Kind::kUnmappedOffset, 0, "no instruction at code offset " + hex(offset));
  }
  return it->second;
}

}  // namespace simtvm
