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

#ifndef SIMTVM_EXPLOIT_HPP_
#define SIMTVM_EXPLOIT_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "simtvm/isa.hpp"
#include "simtvm/kernels.hpp"
#include "simtvm/memory.hpp"
#include "simtvm/payload.hpp"
#include "simtvm/vm.hpp"

namespace simtvm {

// Index into fp[] that the stack guest dispatches through for this buf.
// Throws PayloadError unless exactly 16 words are given.
unsigned selected_slot_index(std::span<const std::uint32_t> buf_words);

// `total_words` copies of `target` as 4-byte words. Throws PayloadError if
// the copy would not reach the low half of the slot the resulting hash
// selects, or would run past the top of LOCAL.
Payload craft_stack_payload(CodeOffset target, std::uint32_t total_words);

// Forged-table payload: every word up to and including the object's
// vtable-address field holds the address of word `forged_table_index`,
// followed by one `secret_entry` per virtual method.
Payload craft_heap_payload(CodeOffset secret_entry, std::uint64_t buf_base,
                           const HeapProgramLayout& layout = build_heap_program().layout);

// Guest address the allocator hands to `thread` for its `ordinal`-th
// allocation (0 = buf, 1 = object) in a fresh launch. Throws MemoryError
// (kOutOfHeap) if the schedule does not fit, std::out_of_range for a bad
// thread or ordinal.
std::uint64_t predict_heap_address(const HeapProgramLayout& layout, GridConfig grid, ThreadId thread,
                                   unsigned ordinal, std::uint64_t heap_size = MemoryConfig{}.heap_size);

struct Gadget {
  CodeOffset start = 0;
  std::vector<Instruction> instructions;  // last one is RET or BRX
  std::size_t length = 0;

  CodeOffset end() const { return start + (length - 1) * kInstructionBytes; }
  friend bool operator==(const Gadget&, const Gadget&) = default;
};

inline constexpr std::size_t kDefaultGadgetLength = 16;

// Straight-line runs of consecutive instructions ending in the first RET or
// BRX, at most one per start offset, ordered by start. Runs crossing a
// BRA, EXIT or a hole in the image are dropped.
std::vector<Gadget> scan_gadgets(const CodeImage& image, std::size_t max_len = kDefaultGadgetLength);

}  // namespace simtvm

#endif  // SIMTVM_EXPLOIT_HPP_
