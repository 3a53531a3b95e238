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

#ifndef SIMTVM_SANITIZER_HPP_
#define SIMTVM_SANITIZER_HPP_

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "simtvm/vm.hpp"

namespace simtvm {

// The object a memory-access site is meant to touch. Frame objects live at
// a fixed displacement from a LOCAL frame register; heap objects are the
// allocator block whose user base is held in a register pair.
struct ObjectExtent {
  enum class Kind { kFrame, kHeapBlock };

  std::string name;
  Kind kind = Kind::kFrame;
  Reg base;
  std::int32_t displacement = 0;  // kFrame only
  std::uint64_t size = 0;         // kFrame only; heap blocks use allocator metadata
  unsigned element_width = 4;     // for word indices in reports

  friend bool operator==(const ObjectExtent&, const ObjectExtent&) = default;
};

// Access-site pc -> the object that site addresses.
using ExtentMap = std::map<CodeOffset, ObjectExtent>;

// Annotated sites are checked against their object. Unannotated accesses
// into the device heap must fall inside some live block's user extent.
// The first out-of-extent access aborts the thread with OOB_WRITE/OOB_READ.
void attach_bounds_checker(Machine& machine, ExtentMap extents = {});

enum class CfiMode { kOff, kEntrySet, kCallsiteSet };

struct CfiPolicy {
  CfiMode mode = CfiMode::kOff;
  // BRX site pc -> allowed landing offsets (kCallsiteSet).
  std::map<CodeOffset, std::set<CodeOffset>> callsite_sets;
};

class CfiPolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// kEntrySet: BRX may only land on a symbol entry. kCallsiteSet: BRX may only
// land in its site's allowed set; throws CfiPolicyError if any BRX site of
// the image lacks a set.
void attach_cfi(Machine& machine, CfiPolicy policy);

std::vector<ViolationReport> reports(const Machine& machine);

}  // namespace simtvm

#endif  // SIMTVM_SANITIZER_HPP_
