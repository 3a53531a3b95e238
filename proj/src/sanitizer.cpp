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

#include "simtvm/sanitizer.hpp"

#include <memory>
#include <utility>

namespace simtvm {

namespace {

class BoundsChecker final : public Monitor {
 public:
  explicit BoundsChecker(ExtentMap extents) : extents_(std::move(extents)) {}

  std::optional<ViolationReport> on_access(const ThreadContext& t, CodeOffset pc, Address a, unsigned width,
                                           bool write, const Memory& memory) override {
    const std::uint64_t addr = encode(a);
    auto site = extents_.find(pc);
    if (site != extents_.end()) {
      const ObjectExtent& obj = site->second;
      std::uint64_t lo = 0;
      std::uint64_t size = 0;
      if (obj.kind == ObjectExtent::Kind::kFrame) {
        lo = encode({Space::kLocal, static_cast<std::uint32_t>(t.reg(obj.base) + static_cast<std::uint32_t>(obj.displacement))});
        size = obj.size;
      } else {
        std::uint64_t base = t.pair(obj.base);
        const HeapState::Block* block = nullptr;
        if ((base >> kSpaceShift) == static_cast<std::uint64_t>(Space::kGlobal)) {
          block = memory.heap().find(base & kOffsetMask);
        }
        if (block == nullptr || block->state != HeapState::BlockState::kAllocated) {
          return report(t, pc, addr, write, width, obj.name + " is not a live heap block");
        }
        lo = base;
        size = block->user_size;
      }
      if (addr < lo || addr + width > lo + size) {
        auto delta = static_cast<std::int64_t>(addr - lo);
        return report(t, pc, addr, write, width,
                      obj.name + " word index " + std::to_string(delta / static_cast<std::int64_t>(obj.element_width)) +
                          " (byte offset " + std::to_string(delta) + ") outside its " + std::to_string(size) +
                          "-byte extent");
      }
      return std::nullopt;
    }

    const HeapState& heap = memory.heap();
    if (a.space == Space::kGlobal && a.offset >= heap.base() && a.offset < heap.base() + heap.capacity()) {
      const HeapState::Block* block = heap.containing(a.offset);
      if (block == nullptr || block->state != HeapState::BlockState::kAllocated ||
          a.offset + width > block->user_base + block->user_size) {
        return report(t, pc, addr, write, width, "heap access outside any live block");
      }
    }
    return std::nullopt;
  }

 private:
  static ViolationReport report(const ThreadContext& t, CodeOffset pc, std::uint64_t addr, bool write,
                                unsigned width, const std::string& what) {
    return ViolationReport{write ? ViolationKind::kOobWrite : ViolationKind::kOobRead, t.id, pc, addr,
                           std::string(write ? "write" : "read") + " of " + std::to_string(width) + " bytes at " +
                               hex(addr) + ": " + what};
  }

  ExtentMap extents_;
};

class CfiEnforcer final : public Monitor {
 public:
  CfiEnforcer(const CodeImage& image, CfiPolicy policy) : policy_(std::move(policy)) {
    for (const auto& [name, off] : image.symbols) entries_.insert(off);
    for (const auto& [name, off] : image.symbols) names_.emplace(off, name);
  }

  std::optional<ViolationReport> on_indirect_branch(const ThreadContext& t, CodeOffset pc,
                                                    CodeOffset target) override {
    bool allowed = true;
    switch (policy_.mode) {
      case CfiMode::kOff:
        break;
      case CfiMode::kEntrySet:
        allowed = entries_.contains(target);
        break;
      case CfiMode::kCallsiteSet: {
        auto site = policy_.callsite_sets.find(pc);
        allowed = site != policy_.callsite_sets.end() && site->second.contains(target);
        break;
      }
    }
    if (allowed) return std::nullopt;
    std::string name;
    if (auto it = names_.find(target); it != names_.end()) name = " (" + it->second + ")";
    return ViolationReport{ViolationKind::kCfiViolation, t.id, pc, target,
                           "BRX at " + hex(pc) + " to " + hex(target) + name + " is outside the allowed target set"};
  }

 private:
  CfiPolicy policy_;
  std::set<CodeOffset> entries_;
  std::multimap<CodeOffset, std::string> names_;
};

}  // namespace

void attach_bounds_checker(Machine& machine, ExtentMap extents) {
  machine.attach(std::make_shared<BoundsChecker>(std::move(extents)));
}

void attach_cfi(Machine& machine, CfiPolicy policy) {
  if (policy.mode == CfiMode::kCallsiteSet) {
    for (const auto& [off, inst] : machine.image().instructions) {
      if (inst.opcode == Opcode::kBrx && !policy.callsite_sets.contains(off)) {
        throw CfiPolicyError("callsite policy has no target set for the BRX at " + hex(off));
      }
    }
  }
  machine.attach(std::make_shared<CfiEnforcer>(machine.image(), std::move(policy)));
}

std::vector<ViolationReport> reports(const Machine& machine) { return machine.reports(); }

}  // namespace simtvm
