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

#ifndef SIMTVM_VM_HPP_
#define SIMTVM_VM_HPP_

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "simtvm/isa.hpp"
#include "simtvm/memory.hpp"

namespace simtvm {

struct ThreadId {
  std::uint32_t block = 0;
  std::uint32_t thread = 0;
  friend auto operator<=>(const ThreadId&, const ThreadId&) = default;
};

struct GridConfig {
  std::uint32_t grid_dim = 1;   // blocks per grid
  std::uint32_t block_dim = 1;  // threads per block

  std::uint64_t threads() const { return std::uint64_t{grid_dim} * block_dim; }
  std::uint64_t flat_index(ThreadId id) const { return std::uint64_t{id.block} * block_dim + id.thread; }
  bool contains(ThreadId id) const { return id.block < grid_dim && id.thread < block_dim; }
  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

enum class ViolationKind : std::uint8_t {
  kOobWrite,
  kOobRead,
  kCodeWrite,
  kCfiViolation,
  kWildJump,
  kInvalidFree,
  kDoubleFree,
  kPermissionFault,
  kUnmappedAccess,
  kOutOfHeap,
  kReturnStackOverflow,
  kBadSyscall,
  kStepLimit,
};

std::string_view violation_name(ViolationKind kind);  // "OOB_WRITE", ...

struct ViolationReport {
  ViolationKind kind = ViolationKind::kWildJump;
  ThreadId thread;
  CodeOffset pc = 0;
  std::optional<std::uint64_t> address;  // guest address or code target
  std::string detail;
  friend bool operator==(const ViolationReport&, const ViolationReport&) = default;
};

// Returned in R4/R5 by a thread that was aborted.
inline constexpr std::uint64_t kFaultSentinel = 0xDEADDEADDEADDEADULL;

// Reserved PARAM slots, then kernel arguments at kParamArgs + 8*i.
inline constexpr std::uint64_t kParamBlockDim = 0x00;
inline constexpr std::uint64_t kParamBlockIdx = 0x08;
inline constexpr std::uint64_t kParamThreadIdx = 0x10;
inline constexpr std::uint64_t kParamGridDim = 0x18;
inline constexpr std::uint64_t kParamArgs = 0x20;

// JCAL routine table.
inline constexpr std::uint32_t kSysPrint = 0;   // string id in R6/R7
inline constexpr std::uint32_t kSysMalloc = 1;  // size in R4, pointer back in R4/R5
inline constexpr std::uint32_t kSysFree = 2;    // pointer in R4/R5

struct ThreadContext {
  ThreadId id;
  GridConfig grid;
  std::array<std::uint32_t, Reg::kCount> regs{};
  std::array<bool, Pred::kTrue> preds{};
  CodeOffset pc = 0;
  CodeOffset last_pc = 0;
  // Hidden: no data instruction can address it.
  std::vector<CodeOffset> return_stack;
  std::vector<std::uint8_t> local;
  bool halted = false;
  bool faulted = false;
  bool trapped = false;
  std::uint64_t steps = 0;

  std::uint32_t reg(Reg r) const { return r.is_zero() ? 0 : regs[r.index]; }
  void set_reg(Reg r, std::uint32_t v) {
    if (!r.is_zero()) regs[r.index] = v;
  }
  // 64-bit value in the even/odd pair starting at r (low word in r).
  std::uint64_t pair(Reg r) const;
  void set_pair(Reg r, std::uint64_t v);
  std::uint64_t return_value() const { return pair(Reg{4}); }
};

enum class StackOp : std::uint8_t { kNone, kPush, kPop };

struct HeapEvent {
  ThreadId thread;
  bool is_free = false;
  std::uint64_t address = 0;  // guest address
  std::uint64_t size = 0;
  friend bool operator==(const HeapEvent&, const HeapEvent&) = default;
};

struct StepEvent {
  ThreadId thread;
  CodeOffset pc = 0;
  Instruction instruction;
  StackOp stack_op = StackOp::kNone;
  CodeOffset stack_value = 0;
  std::optional<CodeOffset> indirect_target;  // BRX landing offset
  std::optional<std::uint64_t> store_address;
  std::optional<std::string> printed;
  std::optional<HeapEvent> heap_event;
  std::optional<ViolationReport> fault;
  bool halted = false;
  friend bool operator==(const StepEvent&, const StepEvent&) = default;
};

struct PrintRecord {
  ThreadId thread;
  std::string text;
  friend bool operator==(const PrintRecord&, const PrintRecord&) = default;
};

struct LaunchResult {
  GridConfig grid;
  // Indexed by GridConfig::flat_index.
  std::vector<std::uint64_t> per_thread_return;
  std::vector<PrintRecord> output_log;
  std::vector<ViolationReport> violations;
  std::vector<HeapEvent> heap_events;
  std::vector<std::string> notes;
  std::vector<StepEvent> trace;  // empty unless tracing
  std::optional<std::vector<std::uint8_t>> local_snapshot;

  std::uint64_t value(ThreadId id) const { return per_thread_return.at(grid.flat_index(id)); }
  friend bool operator==(const LaunchResult&, const LaunchResult&) = default;
};

class Machine;

// Hook interface for runtime instrumentation. A returned report aborts the
// thread before the access or transfer happens.
class Monitor {
 public:
  virtual ~Monitor() = default;
  virtual void on_launch(const Machine&) {}
  virtual std::optional<ViolationReport> on_access(const ThreadContext&, CodeOffset /*pc*/, Address /*address*/,
                                                   unsigned /*width*/, bool /*write*/, const Memory&) {
    return std::nullopt;
  }
  virtual std::optional<ViolationReport> on_indirect_branch(const ThreadContext&, CodeOffset /*pc*/,
                                                            CodeOffset /*target*/) {
    return std::nullopt;
  }
};

struct MachineConfig {
  MemoryConfig memory;
  std::uint64_t max_threads = 1'048'576;
  std::size_t return_stack_limit = 64;
  std::uint64_t step_limit = 1'000'000;
  bool trace = false;
  std::optional<ThreadId> snapshot_thread;  // keep this thread's LOCAL bytes
};

class MachineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Machine {
 public:
  Machine(CodeImage image, MachineConfig config = {});

  const CodeImage& image() const { return image_; }
  const MachineConfig& config() const { return config_; }
  Memory& memory() { return memory_; }
  const Memory& memory() const { return memory_; }

  // Host-side GLOBAL buffer, returned as a guest address.
  std::uint64_t host_alloc(const std::string& name, std::uint64_t size);

  void attach(std::shared_ptr<Monitor> monitor);
  bool launched() const { return launched_; }

  LaunchResult launch(std::string_view entry, GridConfig grid, std::span<const std::uint64_t> params);

  // Single-stepping: writes the thread's PARAM block and returns a fresh
  // context positioned at `entry`.
  ThreadContext prepare_thread(std::string_view entry, GridConfig grid, ThreadId id,
                               std::span<const std::uint64_t> params);
  StepEvent step(ThreadContext& thread);

  // Violations from the most recent launch.
  const std::vector<ViolationReport>& reports() const { return last_reports_; }

  // FNV-1a over the emitted listing; changes iff the code image changes.
  std::uint64_t code_fingerprint() const;

 private:
  void check_grid(GridConfig grid) const;
  void write_params(GridConfig grid, ThreadId id, std::span<const std::uint64_t> params);

  CodeImage image_;
  MachineConfig config_;
  Memory memory_;
  std::vector<std::shared_ptr<Monitor>> monitors_;
  std::vector<ViolationReport> last_reports_;
  bool launched_ = false;
};

// `tid=0,0 pc=0x03e8 BRX R0 -0x3f0`, one line per step.
std::string trace_text(std::span<const StepEvent> trace);
std::string launch_json(const LaunchResult& result);
std::string reports_json(std::span<const ViolationReport> reports);

}  // namespace simtvm

#endif  // SIMTVM_VM_HPP_
