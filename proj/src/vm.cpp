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

#include "simtvm/vm.hpp"

#include <utility>

namespace simtvm {

namespace {

std::uint64_t sext32(std::int64_t v) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int32_t>(v))); }

ViolationKind kind_of(const MemoryError& e) {
  switch (e.kind()) {
    case MemoryError::Kind::kPermission:
      return e.address().space == Space::kCode && e.is_write() ? ViolationKind::kCodeWrite
                                                               : ViolationKind::kPermissionFault;
    case MemoryError::Kind::kUnmapped: return ViolationKind::kUnmappedAccess;
    case MemoryError::Kind::kOutOfHeap: return ViolationKind::kOutOfHeap;
    case MemoryError::Kind::kInvalidFree: return ViolationKind::kInvalidFree;
    case MemoryError::Kind::kDoubleFree: return ViolationKind::kDoubleFree;
    case MemoryError::Kind::kBadArgument: return ViolationKind::kBadSyscall;
  }
  return ViolationKind::kBadSyscall;
}

struct ThreadAbort {
  ViolationReport report;
};

}  // namespace

std::string_view violation_name(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kOobWrite: return "OOB_WRITE";
    case ViolationKind::kOobRead: return "OOB_READ";
    case ViolationKind::kCodeWrite: return "CODE_WRITE";
    case ViolationKind::kCfiViolation: return "CFI_VIOLATION";
    case ViolationKind::kWildJump: return "WILD_JUMP";
    case ViolationKind::kInvalidFree: return "INVALID_FREE";
    case ViolationKind::kDoubleFree: return "DOUBLE_FREE";
    case ViolationKind::kPermissionFault: return "PERMISSION_FAULT";
    case ViolationKind::kUnmappedAccess: return "UNMAPPED_ACCESS";
    case ViolationKind::kOutOfHeap: return "OUT_OF_HEAP";
    case ViolationKind::kReturnStackOverflow: return "RETURN_STACK_OVERFLOW";
    case ViolationKind::kBadSyscall: return "BAD_SYSCALL";
    case ViolationKind::kStepLimit: return "STEP_LIMIT";
  }
  return "?";
}

std::uint64_t ThreadContext::pair(Reg r) const {
  if (r.is_zero()) return 0;
  return std::uint64_t{regs[r.index]} | (std::uint64_t{regs[r.index + 1]} << 32);
}

void ThreadContext::set_pair(Reg r, std::uint64_t v) {
  if (r.is_zero()) return;
  regs[r.index] = static_cast<std::uint32_t>(v);
  regs[r.index + 1] = static_cast<std::uint32_t>(v >> 32);
}

Machine::Machine(CodeImage image, MachineConfig config)
    : image_(std::move(image)), config_(config), memory_(config.memory, image_.extent()) {
  if (config_.max_threads == 0) throw MachineError("max_threads must be >= 1");
  if (config_.return_stack_limit == 0) throw MachineError("return stack limit must be >= 1");
  if (config_.step_limit == 0) throw MachineError("step limit must be >= 1");
  for (const auto& [name, off] : image_.symbols) {
    if (!image_.contains(off)) throw MachineError("symbol " + name + " points at an unmapped offset");
  }
  if (!image_.data.empty()) {
    std::uint64_t lo = image_.data.begin()->first;
    std::uint64_t hi = image_.data.rbegin()->first + 8;
    memory_.map_static_data(lo, hi - lo);
    for (const auto& [off, word] : image_.data) memory_.host_write_word({Space::kGlobal, off}, 8, word);
  }
}

std::uint64_t Machine::host_alloc(const std::string& name, std::uint64_t size) {
  return encode(memory_.map_host_buffer(name, size));
}

void Machine::attach(std::shared_ptr<Monitor> monitor) {
  if (launched_) throw MachineError("instrumentation must be attached before the first launch");
  monitors_.push_back(std::move(monitor));
}

void Machine::check_grid(GridConfig grid) const {
  if (grid.grid_dim == 0 || grid.block_dim == 0) throw MachineError("grid and block dimensions must be >= 1");
  if (grid.threads() > config_.max_threads) {
    throw MachineError("grid of " + std::to_string(grid.threads()) + " threads exceeds the limit of " +
                       std::to_string(config_.max_threads));
  }
}

void Machine::write_params(GridConfig grid, ThreadId id, std::span<const std::uint64_t> params) {
  if (kParamArgs + 8 * params.size() > config_.memory.param_size) throw MachineError("too many kernel parameters");
  memory_.host_write_word({Space::kParam, kParamBlockDim}, 8, grid.block_dim);
  memory_.host_write_word({Space::kParam, kParamBlockIdx}, 8, id.block);
  memory_.host_write_word({Space::kParam, kParamThreadIdx}, 8, id.thread);
  memory_.host_write_word({Space::kParam, kParamGridDim}, 8, grid.grid_dim);
  for (std::size_t i = 0; i < params.size(); ++i) {
    memory_.host_write_word({Space::kParam, kParamArgs + 8 * i}, 8, params[i]);
  }
}

ThreadContext Machine::prepare_thread(std::string_view entry, GridConfig grid, ThreadId id,
                                      std::span<const std::uint64_t> params) {
  check_grid(grid);
  if (!grid.contains(id)) throw MachineError("thread outside the grid");
  auto pc = image_.symbol(entry);
  if (!pc) throw MachineError("unknown entry symbol '" + std::string(entry) + "'");
  write_params(grid, id, params);

  ThreadContext ctx;
  ctx.id = id;
  ctx.grid = grid;
  ctx.pc = *pc;
  ctx.last_pc = *pc;
  ctx.local.assign(config_.memory.local_size, 0);
  // R1 is the local stack pointer; frames grow down from the top.
  ctx.regs[1] = static_cast<std::uint32_t>(config_.memory.local_size);
  return ctx;
}

StepEvent Machine::step(ThreadContext& t) {
  if (t.halted) throw MachineError("step on a halted thread");

  StepEvent ev;
  ev.thread = t.id;
  ev.pc = t.pc;

  auto abort = [&](ViolationKind kind, std::optional<std::uint64_t> address, std::string detail) {
    throw ThreadAbort{ViolationReport{kind, t.id, ev.pc, address, std::move(detail)}};
  };

  try {
    auto it = image_.instructions.find(t.pc);
    if (it == image_.instructions.end()) {
      // Only reachable by falling off the end of the image.
      ev.pc = t.last_pc;
      ev.instruction = instruction_at(image_, t.last_pc);
      abort(ViolationKind::kWildJump, t.pc, "execution ran off mapped code at " + hex(t.pc));
    }
    const Instruction& inst = it->second;
    ev.instruction = inst;
    t.last_pc = t.pc;
    if (++t.steps > config_.step_limit) abort(ViolationKind::kStepLimit, std::nullopt, "step limit exceeded");

    const auto& ops = inst.operands;
    auto R = [&](std::size_t i) { return std::get<Reg>(ops[i]); };
    auto imm = [&](std::size_t i) { return std::get<Imm>(ops[i]).value; };
    // Third operand of IADD/IMUL/ISETP: register or immediate.
    auto src32 = [&](std::size_t i) -> std::uint32_t {
      if (auto* r = std::get_if<Reg>(&ops[i])) return t.reg(*r);
      return static_cast<std::uint32_t>(imm(i));
    };
    auto src64 = [&](std::size_t i) -> std::uint64_t {
      if (auto* r = std::get_if<Reg>(&ops[i])) return t.pair(*r);
      return sext32(imm(i));
    };
    auto jump_to = [&](std::int64_t target, const char* what) {
      if (target < 0 || !image_.contains(static_cast<CodeOffset>(target))) {
        abort(ViolationKind::kWildJump, static_cast<std::uint64_t>(target),
              std::string(what) + " to unmapped code offset " + hex(static_cast<std::uint64_t>(target)));
      }
      t.pc = static_cast<CodeOffset>(target);
    };
    auto check_access = [&](Address a, unsigned width, bool write) {
      for (auto& m : monitors_) {
        if (auto v = m->on_access(t, ev.pc, a, width, write, memory_)) throw ThreadAbort{*v};
      }
    };
    auto local_address = [&](const Mem& m) {
      return Address{Space::kLocal, static_cast<std::uint32_t>(t.reg(m.base) + static_cast<std::uint32_t>(m.disp))};
    };
    auto global_address = [&](const Mem& m) { return decode(t.pair(m.base) + sext32(m.disp)); };

    CodeOffset next = t.pc + kInstructionBytes;
    const unsigned width = inst.wide ? 8 : 4;

    switch (inst.opcode) {
      case Opcode::kMov32i:
        t.set_reg(R(0), static_cast<std::uint32_t>(imm(1)));
        break;
      case Opcode::kMov:
        if (inst.wide) {
          t.set_pair(R(0), t.pair(R(1)));
        } else {
          t.set_reg(R(0), t.reg(R(1)));
        }
        break;
      case Opcode::kIadd:
      case Opcode::kImul: {
        bool add = inst.opcode == Opcode::kIadd;
        if (inst.wide) {
          std::uint64_t a = t.pair(R(1));
          std::uint64_t b = src64(2);
          t.set_pair(R(0), add ? a + b : a * b);
        } else {
          std::uint32_t a = t.reg(R(1));
          std::uint32_t b = src32(2);
          t.set_reg(R(0), add ? a + b : a * b);
        }
        break;
      }
      case Opcode::kShl:
      case Opcode::kShr: {
        auto amount = static_cast<unsigned>(imm(2));
        bool left = inst.opcode == Opcode::kShl;
        if (inst.wide) {
          std::uint64_t a = t.pair(R(1));
          t.set_pair(R(0), amount >= 64 ? 0 : (left ? a << amount : a >> amount));
        } else {
          std::uint32_t a = t.reg(R(1));
          t.set_reg(R(0), amount >= 32 ? 0 : (left ? a << amount : a >> amount));
        }
        break;
      }
      case Opcode::kIsetp: {
        auto a = static_cast<std::int32_t>(t.reg(R(1)));
        auto b = static_cast<std::int32_t>(src32(2));
        bool v = false;
        switch (inst.compare) {
          case Compare::kLt: v = a < b; break;
          case Compare::kLe: v = a <= b; break;
          case Compare::kGt: v = a > b; break;
          case Compare::kGe: v = a >= b; break;
          case Compare::kEq: v = a == b; break;
          case Compare::kNe: v = a != b; break;
          case Compare::kNone: break;
        }
        Pred p = std::get<Pred>(ops[0]);
        if (p.index != Pred::kTrue) t.preds[p.index] = v;
        break;
      }
      case Opcode::kLdl:
      case Opcode::kLdg: {
        const Mem& m = std::get<Mem>(ops[1]);
        Address a = inst.opcode == Opcode::kLdl ? local_address(m) : global_address(m);
        check_access(a, width, false);
        std::uint64_t v = memory_.load(a, width, t.local);
        if (inst.wide) {
          t.set_pair(R(0), v);
        } else {
          t.set_reg(R(0), static_cast<std::uint32_t>(v));
        }
        break;
      }
      case Opcode::kStl:
      case Opcode::kStg: {
        const Mem& m = std::get<Mem>(ops[0]);
        Address a = inst.opcode == Opcode::kStl ? local_address(m) : global_address(m);
        check_access(a, width, true);
        std::uint64_t v = inst.wide ? t.pair(R(1)) : t.reg(R(1));
        memory_.store(a, width, v, t.local);
        ev.store_address = encode(a);
        break;
      }
      case Opcode::kBra: {
        bool taken = true;
        if (inst.guard) {
          bool p = inst.guard->pred.index == Pred::kTrue || t.preds[inst.guard->pred.index];
          taken = inst.guard->negated ? !p : p;
        }
        if (!taken) break;
        auto target = static_cast<CodeOffset>(imm(0));
        if (target == t.pc) {
          // Self-branch: trap pad, halt the thread.
          t.trapped = true;
          t.halted = true;
          ev.halted = true;
          return ev;
        }
        jump_to(static_cast<std::int64_t>(target), "BRA");
        return ev;
      }
      case Opcode::kBrx: {
        std::int64_t target = static_cast<std::int64_t>(next) + t.reg(R(0)) + imm(1);
        ev.indirect_target = static_cast<CodeOffset>(target);
        if (target >= 0) {
          for (auto& m : monitors_) {
            if (auto v = m->on_indirect_branch(t, ev.pc, static_cast<CodeOffset>(target))) throw ThreadAbort{*v};
          }
        }
        jump_to(target, "BRX");
        return ev;
      }
      case Opcode::kPret:
        if (t.return_stack.size() >= config_.return_stack_limit) {
          abort(ViolationKind::kReturnStackOverflow, std::nullopt,
                "return stack depth " + std::to_string(config_.return_stack_limit) + " exceeded");
        }
        t.return_stack.push_back(static_cast<CodeOffset>(imm(0)));
        ev.stack_op = StackOp::kPush;
        ev.stack_value = t.return_stack.back();
        break;
      case Opcode::kRet: {
        if (t.return_stack.empty()) {
          t.halted = true;
          ev.halted = true;
          return ev;
        }
        CodeOffset target = t.return_stack.back();
        t.return_stack.pop_back();
        ev.stack_op = StackOp::kPop;
        ev.stack_value = target;
        jump_to(static_cast<std::int64_t>(target), "RET");
        return ev;
      }
      case Opcode::kJcal: {
        auto routine = static_cast<std::uint32_t>(imm(0));
        if (routine == kSysPrint) {
          std::uint64_t id = t.pair(Reg{6});
          auto s = image_.strings.find(id);
          if (s == image_.strings.end()) abort(ViolationKind::kBadSyscall, std::nullopt, "print of unknown string id");
          ev.printed = s->second;
        } else if (routine == kSysMalloc) {
          std::uint64_t size = t.reg(Reg{4});
          Address a = memory_.device_malloc(size);
          t.set_pair(Reg{4}, encode(a));
          ev.heap_event = HeapEvent{t.id, false, encode(a), size};
        } else if (routine == kSysFree) {
          std::uint64_t guest = t.pair(Reg{4});
          memory_.device_free(decode(guest));
          ev.heap_event = HeapEvent{t.id, true, guest, 0};
        } else {
          abort(ViolationKind::kBadSyscall, routine, "unknown system routine " + hex(routine));
        }
        break;
      }
      case Opcode::kNop:
        break;
      case Opcode::kExit:
        t.halted = true;
        ev.halted = true;
        return ev;
    }
    t.pc = next;
  } catch (const MemoryError& e) {
    ev.fault = ViolationReport{kind_of(e), t.id, ev.pc, encode(e.address()), e.what()};
  } catch (ThreadAbort& a) {
    ev.fault = std::move(a.report);
  }
  if (ev.fault) {
    t.halted = true;
    t.faulted = true;
    ev.halted = true;
  }
  return ev;
}

LaunchResult Machine::launch(std::string_view entry, GridConfig grid, std::span<const std::uint64_t> params) {
  check_grid(grid);
  if (!image_.symbol(entry)) throw MachineError("unknown entry symbol '" + std::string(entry) + "'");
  if (kParamArgs + 8 * params.size() > config_.memory.param_size) throw MachineError("too many kernel parameters");

  if (!launched_) {
    for (auto& m : monitors_) m->on_launch(*this);
  }
  launched_ = true;
  memory_.reset_heap();

  LaunchResult result;
  result.grid = grid;
  result.per_thread_return.reserve(grid.threads());
  for (std::uint32_t b = 0; b < grid.grid_dim; ++b) {
    for (std::uint32_t th = 0; th < grid.block_dim; ++th) {
      ThreadId id{b, th};
      ThreadContext t = prepare_thread(entry, grid, id, params);
      while (!t.halted) {
        StepEvent ev = step(t);
        if (ev.printed) result.output_log.push_back({id, *ev.printed});
        if (ev.heap_event) result.heap_events.push_back(*ev.heap_event);
        if (ev.fault) result.violations.push_back(*ev.fault);
        if (config_.trace) result.trace.push_back(std::move(ev));
      }
      if (t.trapped) {
        result.notes.push_back("trap: thread " + std::to_string(b) + "," + std::to_string(th) + " halted at self-branch " +
                               hex(t.pc));
      }
      result.per_thread_return.push_back(t.faulted ? kFaultSentinel : t.return_value());
      if (config_.snapshot_thread && *config_.snapshot_thread == id) result.local_snapshot = std::move(t.local);
    }
  }
  last_reports_ = result.violations;
  return result;
}

std::uint64_t Machine::code_fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : emit_listing(image_)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace simtvm
