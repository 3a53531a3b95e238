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

#ifndef SIMTVM_KERNELS_HPP_
#define SIMTVM_KERNELS_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "simtvm/isa.hpp"
#include "simtvm/payload.hpp"
#include "simtvm/sanitizer.hpp"
#include "simtvm/vm.hpp"

namespace simtvm {

// Both bundled guests share the kernel ABI
//   test_kernel(u64* hashes, word* input, u32 len, int* admin)
// and return each thread's hash in R4/R5 as well as in hashes[idx].
inline constexpr const char* kKernelEntry = "test_kernel";

// Everything the harness and the sanitizer need to know about a guest.
struct Program {
  std::string name;
  CodeImage image;
  unsigned input_width = 4;   // bytes per input word
  std::uint32_t buf_len = 0;  // BUF_LEN of the vulnerable copy
  ExtentMap extents;          // bounds-checker object annotations
  CfiPolicy callsite_policy;  // per-site allowed BRX targets
};

// Local-memory overflow guest: buf[16] of u32 followed by eight 64-bit
// function-address slots, dispatched through `PRET; BRX` at 0x3e0.
struct StackProgramLayout {
  static constexpr std::uint32_t kBufWords = 16;
  static constexpr std::uint32_t kSlots = 8;
  static constexpr std::uint64_t kFrameBytes = 0x80;

  std::uint64_t buf_offset = 0;  // LOCAL offset
  std::uint64_t fp_offset = 0;   // buf_offset + 64
  std::array<CodeOffset, 9> dummy_entries{};
  CodeOffset kernel_entry = 0;
  CodeOffset unsafe_entry = 0;
  CodeOffset dispatch_site = 0;  // the BRX
};

struct StackProgram {
  Program program;
  StackProgramLayout layout;
};

// Heap overflow guest: buf = malloc(8 * 8), then `new D` whose single word
// is the virtual-table address, then four chained virtual calls.
struct HeapProgramLayout {
  std::uint32_t buf_words = 8;
  std::uint32_t object_vtable_slot_index = 0;  // from buf's user base, in words
  std::uint32_t forged_table_index = 0;
  std::uint64_t class_vtable_offset = 0;  // GLOBAL offset
  std::array<CodeOffset, 4> method_entries{};
  CodeOffset secret_entry = 0;
  CodeOffset kernel_entry = 0;
  CodeOffset unsafe_entry = 0;
  std::array<CodeOffset, 4> call_sites{};
  // Per-thread allocation schedule of `unsafe`, in order: buf, object.
  std::vector<std::uint64_t> allocation_sizes;
};

struct HeapProgram {
  Program program;
  HeapProgramLayout layout;
};

// `local_size` must match the machine's LOCAL size; the frame sits at the top.
StackProgram build_stack_program(std::uint64_t local_size = 4096);
HeapProgram build_heap_program();

std::uint32_t djb2_32(std::span<const std::uint32_t> words);
std::uint64_t djb2_64(std::span<const std::uint64_t> words);

// 0x1111111111111111 * k for the dispatchable dummies, k in 1..8.
std::uint64_t dummy_constant(unsigned k);

std::string layout_json(const StackProgramLayout& layout);
std::string layout_json(const HeapProgramLayout& layout);

enum class Sanitize { kOff, kBounds, kCfiEntry, kCfiCallsite };

// Attaches the instrumentation `mode` selects, using the program's annotations.
void instrument(Machine& machine, const Program& program, Sanitize mode);

struct ProgramRun {
  LaunchResult launch;
  std::vector<std::uint64_t> hashes;  // read back from the output array
  std::uint64_t input_address = 0;
  std::uint64_t hashes_address = 0;
};

// Host side of a launch: copies one payload per thread (or a single payload
// replicated to every thread) into GLOBAL, runs test_kernel and reads the
// output array back. All payloads must share width and declared length.
ProgramRun run_program(Machine& machine, const Program& program, GridConfig grid,
                       std::span<const Payload> payloads, bool admin = false);

}  // namespace simtvm

#endif  // SIMTVM_KERNELS_HPP_
