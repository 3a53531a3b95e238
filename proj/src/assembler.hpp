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

// Label-resolving assembler used to hand-build the bundled guests.

#ifndef SIMTVM_SRC_ASSEMBLER_HPP_
#define SIMTVM_SRC_ASSEMBLER_HPP_

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "simtvm/isa.hpp"

namespace simtvm::detail {

class Assembler {
 public:
  CodeOffset here() const { return here_; }

  void emit(Instruction inst) {
    image_.instructions.emplace(here_, std::move(inst));
    here_ += kInstructionBytes;
  }

  void label(const std::string& name) {
    if (!labels_.emplace(name, here_).second) throw std::logic_error("duplicate label " + name);
  }

  void func(const std::string& name) {
    label(name);
    image_.symbols[name] = here_;
  }

  // Pads with NOP up to `offset`.
  void org(CodeOffset offset) {
    if (offset < here_) throw std::logic_error("org " + hex(offset) + " is behind " + hex(here_));
    while (here_ < offset) emit(ops::nop());
  }

  void bra(const std::string& target, std::optional<Guard> guard = std::nullopt) {
    fixups_.push_back({here_, target, Fixup::kBra});
    emit(ops::bra(0, guard));
  }
  void pret(const std::string& target) {
    fixups_.push_back({here_, target, Fixup::kPret});
    emit(ops::pret(0));
  }
  // `BRX index -target`: lands on value(index) when `target` is the next slot.
  void brx_back(Reg index, const std::string& target) {
    fixups_.push_back({here_, target, Fixup::kBrxNeg});
    emit(ops::brx(index, 0));
  }

  CodeOffset at(const std::string& name) const {
    auto it = labels_.find(name);
    if (it == labels_.end()) throw std::logic_error("undefined label " + name);
    return it->second;
  }

  CodeImage& image() { return image_; }

  CodeImage finish() {
    for (const auto& f : fixups_) {
      auto target = static_cast<std::int64_t>(at(f.label));
      Instruction& inst = image_.instructions.at(f.at);
      auto& imm = std::get<Imm>(inst.operands[f.kind == Fixup::kBrxNeg ? 1 : 0]);
      imm.value = f.kind == Fixup::kBrxNeg ? -target : target;
      validate(inst);
    }
    fixups_.clear();
    return image_;
  }

 private:
  struct Fixup {
    CodeOffset at;
    std::string label;
    enum Kind { kBra, kPret, kBrxNeg } kind;
  };

  CodeImage image_;
  CodeOffset here_ = 0;
  std::map<std::string, CodeOffset> labels_;
  std::vector<Fixup> fixups_;
};

}  // namespace simtvm::detail

#endif  // SIMTVM_SRC_ASSEMBLER_HPP_
