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

#include "simtvm/kernels.hpp"

#include <algorithm>
#include <stdexcept>

#include "assembler.hpp"
#include "json.hpp"

namespace simtvm {

namespace {

using detail::Assembler;
using namespace ops;

constexpr std::uint64_t kDjb2Seed = 5381;

// Code-relative entries of dummy1..dummy9 in the stack guest.
constexpr std::array<CodeOffset, 9> kDummyEntries = {0x408, 0x420, 0x438, 0x458, 0x470,
                                                     0x490, 0x4a8, 0x4c8, 0x4e0};
constexpr CodeOffset kDispatchLoad = 0x3d8;

constexpr std::uint64_t kVtableOffset = kStaticDataBase;

const Guard kIfP0{Pred{0}, false};

// Kernel ABI registers: R24/R25 = PARAM base, R26 = flat thread index.
// Callees may use R0 and R4..R23 freely.
void emit_kernel(Assembler& a, unsigned input_shift, const std::string& privileged) {
  a.func(kKernelEntry);
  a.emit(mov32i(r(24), 0x0));
  a.emit(mov32i(r(25), static_cast<std::int64_t>(Space::kParam)));
  a.emit(ldg(r(26), r(24), kParamBlockDim));
  a.emit(ldg(r(27), r(24), kParamBlockIdx));
  a.emit(imul(r(26), r(26), r(27)));
  a.emit(ldg(r(27), r(24), kParamThreadIdx));
  a.emit(iadd(r(26), r(26), r(27)));           // idx = blockDim.x*blockIdx.x+threadIdx.x
  a.emit(ldg(r(28), r(24), kParamArgs + 0x18, true));  // admin
  a.emit(ldg(r(27), r(28)));
  a.emit(isetp(Compare::kNe, p(0), r(27), RZ));
  a.bra("k_admin", kIfP0);
  a.emit(ldg(r(6), r(24), kParamArgs + 0x10));  // len
  a.emit(imul(r(28), r(6), r(26)));
  a.emit(shl(r(28), r(28), input_shift));
  a.emit(mov(r(29), RZ));
  a.emit(ldg(r(4), r(24), kParamArgs + 0x8, true));  // input
  a.emit(iadd(r(4), r(4), r(28), true));             // input + len*idx
  a.pret("k_store");
  a.bra("unsafe");
  a.label("k_admin");
  a.pret("k_store");
  a.bra(privileged);
  a.label("k_store");
  a.emit(ldg(r(28), r(24), kParamArgs + 0x0, true));  // hashes
  a.emit(shl(r(30), r(26), 3));
  a.emit(mov(r(31), RZ));
  a.emit(iadd(r(28), r(28), r(30), true));
  a.emit(stg(r(28), 0, r(4), true));  // hashes[idx] = my_hash
  a.emit(exit());
}

// `unsafe` of the stack guest up to (not including) the dispatch load at
// 0x3d8. On exit R0 holds the LOCAL address of fp[hash % 8].
void emit_stack_unsafe_head(Assembler& a) {
  a.func("unsafe");
  a.emit(iadd(r(1), r(1), -0x80));  // buf at [R1], fp at [R1+0x40]
  a.emit(mov(r(9), RZ));
  for (unsigned k = 0; k < StackProgramLayout::kSlots; ++k) {
    a.emit(mov32i(r(8), static_cast<std::int64_t>(kDummyEntries[k])));
    a.label("s_fp_init" + std::to_string(k));
    a.emit(stl(r(1), static_cast<std::int32_t>(0x40 + 8 * k), r(8), true));
  }
  a.emit(mov32i(r(10), kDjb2Seed));
  a.emit(mov(r(11), RZ));
  // for (i = 0; i < len; i++) buf[i] = input[i];
  a.label("s_copy");
  a.emit(isetp(Compare::kGe, p(0), r(11), r(6)));
  a.bra("s_copy_done", kIfP0);
  a.emit(shl(r(12), r(11), 2));
  a.emit(mov(r(13), RZ));
  a.emit(iadd(r(14), r(4), r(12), true));
  a.emit(ldg(r(16), r(14)));
  a.emit(iadd(r(17), r(1), r(12)));
  a.label("s_copy_store");
  a.emit(stl(r(17), 0, r(16)));
  a.emit(iadd(r(11), r(11), 1));
  a.bra("s_copy");
  a.label("s_copy_done");
  // djb2 over all BUF_LEN words
  a.emit(mov(r(11), RZ));
  a.label("s_hash");
  a.emit(isetp(Compare::kGe, p(0), r(11), StackProgramLayout::kBufWords));
  a.bra("s_hash_done", kIfP0);
  a.emit(shl(r(12), r(11), 2));
  a.emit(iadd(r(17), r(1), r(12)));
  a.label("s_hash_load");
  a.emit(ldl(r(16), r(17)));
  a.emit(shl(r(18), r(10), 5));
  a.emit(iadd(r(10), r(18), r(10)));
  a.emit(iadd(r(10), r(10), r(16)));
  a.emit(iadd(r(11), r(11), 1));
  a.bra("s_hash");
  a.label("s_hash_done");
  a.emit(shl(r(12), r(10), 29));
  a.emit(shr(r(12), r(12), 26));  // (hash % 8) * 8
  a.emit(iadd(r(12), r(12), 0x40));
  a.emit(iadd(r(0), r(1), r(12)));
}

void emit_dummy(Assembler& a, unsigned k, std::int64_t half, bool gap_after_first) {
  a.org(kDummyEntries[k - 1]);
  a.func("dummy" + std::to_string(k));
  a.emit(mov32i(r(4), half));
  if (gap_after_first) a.emit(nop());
  a.emit(mov32i(r(5), half));
}

}  // namespace

StackProgram build_stack_program(std::uint64_t local_size) {
  if (local_size < StackProgramLayout::kFrameBytes || local_size > 0xffff'ffffULL) {
    throw std::invalid_argument("local size cannot hold the unsafe frame");
  }
  Assembler a;
  emit_kernel(a, 2, "dummy9");

  Assembler scratch;
  emit_stack_unsafe_head(scratch);
  a.org(kDispatchLoad - scratch.here());
  emit_stack_unsafe_head(a);

  // Dispatch and dummy bodies at their listing offsets; slots the listing
  // leaves out hold NOP.
  a.emit(ldl(r(0), r(0)));       // 0x3d8
  a.emit(pret(0x3f0));           // 0x3e0
  a.label("s_dispatch");
  a.emit(brx(r(0), -0x3f0));     // 0x3e8
  a.emit(iadd(r(1), r(1), 0x80));  // 0x3f0
  a.emit(ret());                 // 0x3f8

  const std::int64_t halves[] = {0x11111111, 0x22222222, 0x33333333, 0x44444444,
                                 0x55555555, 0x66666666, 0x77777777, 0x88888888};
  for (unsigned k = 1; k <= 8; ++k) {
    emit_dummy(a, k, halves[k - 1], k == 3);
    if (k == 5) a.emit(nop());
    a.emit(ret());
  }
  a.org(kDummyEntries[8]);
  a.func("dummy9");
  a.emit(mov32i(r(4), 0x0));
  a.emit(mov32i(r(5), 0x0));
  a.emit(mov(r(7), RZ));
  a.emit(mov(r(6), RZ));
  a.emit(nop());
  a.emit(jcal(kSysPrint));
  a.emit(mov32i(r(4), 0x99999999));
  a.emit(mov32i(r(5), 0x99999999));
  a.emit(ret());
  a.emit(bra(0x528));  // trap pad
  a.emit(nop());
  a.emit(nop());

  StackProgram out;
  out.program.name = "stack";
  out.program.input_width = 4;
  out.program.buf_len = StackProgramLayout::kBufWords;
  out.program.image = a.finish();
  out.program.image.strings[0] = "HELLO ADMIN!\n";

  auto& L = out.layout;
  L.buf_offset = local_size - StackProgramLayout::kFrameBytes;
  L.fp_offset = L.buf_offset + 4 * StackProgramLayout::kBufWords;
  L.dummy_entries = kDummyEntries;
  L.kernel_entry = a.at(kKernelEntry);
  L.unsafe_entry = a.at("unsafe");
  L.dispatch_site = a.at("s_dispatch");

  ObjectExtent buf{"buf", ObjectExtent::Kind::kFrame, r(1), 0, 4 * StackProgramLayout::kBufWords, 4};
  ObjectExtent fp{"fp", ObjectExtent::Kind::kFrame, r(1), 0x40, 8 * StackProgramLayout::kSlots, 8};
  for (unsigned k = 0; k < StackProgramLayout::kSlots; ++k) out.program.extents[a.at("s_fp_init" + std::to_string(k))] = fp;
  out.program.extents[a.at("s_copy_store")] = buf;
  out.program.extents[a.at("s_hash_load")] = buf;
  out.program.extents[kDispatchLoad] = fp;

  out.program.callsite_policy.mode = CfiMode::kCallsiteSet;
  out.program.callsite_policy.callsite_sets[L.dispatch_site] = {kDummyEntries.begin(), kDummyEntries.begin() + 8};
  return out;
}

HeapProgram build_heap_program() {
  constexpr std::uint32_t kBufWords = 8;
  constexpr std::uint64_t kBufBytes = 8 * kBufWords;
  constexpr std::uint64_t kObjectBytes = 8;  // just the vtable-address field

  Assembler a;
  emit_kernel(a, 3, "secret");

  // unsafe(u64* input = R4:R5, u32 len = R6)
  a.func("unsafe");
  a.emit(mov(r(8), r(4), true));
  a.emit(mov(r(10), r(6)));
  a.emit(mov32i(r(4), kBufBytes));
  a.emit(mov(r(5), RZ));
  a.emit(jcal(kSysMalloc));  // buf = malloc(sizeof(unsigned long)*BUF_LEN)
  a.emit(mov(r(12), r(4), true));
  a.emit(mov32i(r(4), kObjectBytes));
  a.emit(mov(r(5), RZ));
  a.emit(jcal(kSysMalloc));  // objD = new D
  a.emit(mov(r(14), r(4), true));
  const std::uint64_t vtable = encode({Space::kGlobal, kVtableOffset});
  a.emit(mov32i(r(16), static_cast<std::int64_t>(vtable & 0xffffffff)));
  a.emit(mov32i(r(17), static_cast<std::int64_t>(vtable >> 32)));
  a.label("h_ctor_store");
  a.emit(stg(r(14), 0, r(16), true));
  a.emit(mov(r(11), RZ));
  a.label("h_copy");
  a.emit(isetp(Compare::kGe, p(0), r(11), r(10)));
  a.bra("h_copy_done", kIfP0);
  a.emit(shl(r(16), r(11), 3));
  a.emit(mov(r(17), RZ));
  a.emit(iadd(r(18), r(8), r(16), true));
  a.emit(ldg(r(20), r(18), 0, true));
  a.emit(iadd(r(18), r(12), r(16), true));
  a.label("h_copy_store");
  a.emit(stg(r(18), 0, r(20), true));
  a.emit(iadd(r(11), r(11), 1));
  a.bra("h_copy");
  a.label("h_copy_done");
  a.emit(mov32i(r(16), kDjb2Seed));
  a.emit(mov(r(17), RZ));
  a.emit(mov(r(11), RZ));
  a.label("h_hash");
  a.emit(isetp(Compare::kGe, p(0), r(11), kBufWords));
  a.bra("h_hash_done", kIfP0);
  a.emit(shl(r(18), r(11), 3));
  a.emit(mov(r(19), RZ));
  a.emit(iadd(r(18), r(12), r(18), true));
  a.label("h_hash_load");
  a.emit(ldg(r(20), r(18), 0, true));
  a.emit(shl(r(18), r(16), 5, true));
  a.emit(iadd(r(16), r(18), r(16), true));
  a.emit(iadd(r(16), r(16), r(20), true));
  a.emit(iadd(r(11), r(11), 1));
  a.bra("h_hash");
  a.label("h_hash_done");
  a.emit(mov(r(4), r(16), true));
  // res = objD->f1(hash); res = objD->f2(res); ...
  for (unsigned k = 0; k < 4; ++k) {
    const std::string back = "h_ret" + std::to_string(k);
    a.label("h_vptr" + std::to_string(k));
    a.emit(ldg(r(18), r(14), 0, true));
    a.emit(ldg(r(0), r(18), static_cast<std::int32_t>(8 * k)));
    a.pret(back);
    a.label("h_call" + std::to_string(k));
    a.brx_back(r(0), back);
    a.label(back);
  }
  a.emit(mov(r(16), r(4), true));
  a.emit(mov(r(4), r(12), true));
  a.emit(jcal(kSysFree));  // free(buf)
  a.emit(mov(r(4), r(14), true));
  a.emit(jcal(kSysFree));  // delete objD
  a.emit(mov(r(4), r(16), true));
  a.emit(ret());

  // D's methods take `unsigned int hash`: 32-bit arithmetic, zero-extended result.
  a.func("D::f1");
  a.emit(mov(r(5), RZ));
  a.emit(ret());
  a.func("D::f2");
  a.emit(shl(r(4), r(4), 1));
  a.emit(mov(r(5), RZ));
  a.emit(ret());
  a.func("D::f3");
  a.emit(imul(r(4), r(4), 3));
  a.emit(mov(r(5), RZ));
  a.emit(ret());
  a.func("D::f4");
  a.emit(shl(r(4), r(4), 2));
  a.emit(mov(r(5), RZ));
  a.emit(ret());

  a.func("secret");
  a.emit(mov32i(r(4), 0x0));
  a.emit(mov32i(r(5), 0x0));
  a.emit(mov(r(7), RZ));
  a.emit(mov(r(6), RZ));
  a.emit(jcal(kSysPrint));
  a.emit(mov32i(r(4), 0x99999999));
  a.emit(mov32i(r(5), 0x99999999));
  a.emit(ret());
  a.label("h_trap");
  a.emit(bra(a.here()));

  HeapProgram out;
  out.program.name = "heap";
  out.program.input_width = 8;
  out.program.buf_len = kBufWords;
  out.program.image = a.finish();
  out.program.image.strings[0] = "HELLO ADMIN! ";

  auto& L = out.layout;
  L.buf_words = kBufWords;
  L.object_vtable_slot_index =
      static_cast<std::uint32_t>((HeapState::round_up(kBufBytes) + HeapState::kHeaderBytes) / 8);
  L.forged_table_index = L.object_vtable_slot_index + static_cast<std::uint32_t>(kObjectBytes / 8);
  L.class_vtable_offset = kVtableOffset;
  for (unsigned k = 0; k < 4; ++k) {
    L.method_entries[k] = a.at("D::f" + std::to_string(k + 1));
    L.call_sites[k] = a.at("h_call" + std::to_string(k));
    out.program.image.data[kVtableOffset + 8 * k] = L.method_entries[k];
  }
  L.secret_entry = a.at("secret");
  L.kernel_entry = a.at(kKernelEntry);
  L.unsafe_entry = a.at("unsafe");
  L.allocation_sizes = {kBufBytes, kObjectBytes};

  ObjectExtent buf{"buf", ObjectExtent::Kind::kHeapBlock, r(12), 0, 0, 8};
  ObjectExtent obj{"objD", ObjectExtent::Kind::kHeapBlock, r(14), 0, 0, 8};
  out.program.extents[a.at("h_ctor_store")] = obj;
  out.program.extents[a.at("h_copy_store")] = buf;
  out.program.extents[a.at("h_hash_load")] = buf;
  for (unsigned k = 0; k < 4; ++k) out.program.extents[a.at("h_vptr" + std::to_string(k))] = obj;

  out.program.callsite_policy.mode = CfiMode::kCallsiteSet;
  for (unsigned k = 0; k < 4; ++k) out.program.callsite_policy.callsite_sets[L.call_sites[k]] = {L.method_entries[k]};
  return out;
}

std::uint32_t djb2_32(std::span<const std::uint32_t> words) {
  std::uint32_t hash = kDjb2Seed;
  for (auto w : words) hash = ((hash << 5) + hash) + w;
  return hash;
}

std::uint64_t djb2_64(std::span<const std::uint64_t> words) {
  std::uint64_t hash = kDjb2Seed;
  for (auto w : words) hash = ((hash << 5) + hash) + w;
  return hash;
}

std::uint64_t dummy_constant(unsigned k) {
  if (k < 1 || k > 8) throw std::out_of_range("dummy index must be in 1..8");
  return 0x1111111111111111ULL * k;
}

std::string layout_json(const StackProgramLayout& layout) {
  nlohmann::json j;
  j["program"] = "stack";
  j["buf_offset"] = hex(layout.buf_offset);
  j["buf_words"] = StackProgramLayout::kBufWords;
  j["fp_offset"] = hex(layout.fp_offset);
  j["fp_slots"] = StackProgramLayout::kSlots;
  auto dummies = nlohmann::json::array();
  for (auto e : layout.dummy_entries) dummies.push_back(hex(e));
  j["dummy_entries"] = std::move(dummies);
  j["kernel_entry"] = hex(layout.kernel_entry);
  j["unsafe_entry"] = hex(layout.unsafe_entry);
  j["dispatch_site"] = hex(layout.dispatch_site);
  return j.dump(2);
}

std::string layout_json(const HeapProgramLayout& layout) {
  nlohmann::json j;
  j["program"] = "heap";
  j["buf_words"] = layout.buf_words;
  j["object_vtable_slot_index"] = layout.object_vtable_slot_index;
  j["forged_table_index"] = layout.forged_table_index;
  j["class_vtable_offset"] = hex(layout.class_vtable_offset);
  auto methods = nlohmann::json::array();
  for (auto e : layout.method_entries) methods.push_back(hex(e));
  j["method_entries"] = std::move(methods);
  j["secret_entry"] = hex(layout.secret_entry);
  j["kernel_entry"] = hex(layout.kernel_entry);
  j["unsafe_entry"] = hex(layout.unsafe_entry);
  auto sites = nlohmann::json::array();
  for (auto e : layout.call_sites) sites.push_back(hex(e));
  j["call_sites"] = std::move(sites);
  j["allocation_sizes"] = layout.allocation_sizes;
  return j.dump(2);
}

void instrument(Machine& machine, const Program& program, Sanitize mode) {
  switch (mode) {
    case Sanitize::kOff:
      break;
    case Sanitize::kBounds:
      attach_bounds_checker(machine, program.extents);
      break;
    case Sanitize::kCfiEntry:
      attach_cfi(machine, CfiPolicy{CfiMode::kEntrySet, {}});
      break;
    case Sanitize::kCfiCallsite: {
      CfiPolicy policy = program.callsite_policy;
      policy.mode = CfiMode::kCallsiteSet;
      attach_cfi(machine, std::move(policy));
      break;
    }
  }
}

ProgramRun run_program(Machine& machine, const Program& program, GridConfig grid,
                       std::span<const Payload> payloads, bool admin) {
  if (payloads.empty()) throw PayloadError("no payload");
  if (payloads.size() != 1 && payloads.size() != grid.threads()) {
    throw PayloadError("need one payload or one per thread");
  }
  const Payload& first = payloads.front();
  for (const auto& p : payloads) {
    p.validate();
    if (p.word_width != program.input_width) {
      throw PayloadError("program '" + program.name + "' takes " + std::to_string(program.input_width) +
                         "-byte input words");
    }
    if (p.declared_len != first.declared_len) throw PayloadError("per-thread payloads must share one length");
  }

  const std::uint64_t slice = std::uint64_t{first.declared_len} * first.word_width;
  ProgramRun run;
  run.hashes_address = machine.host_alloc("hashes", 8 * grid.threads());
  run.input_address = machine.host_alloc("input", std::max<std::uint64_t>(slice * grid.threads(), 8));
  const std::uint64_t admin_address = machine.host_alloc("admin", 8);

  Memory& mem = machine.memory();
  for (std::uint64_t i = 0; i < grid.threads(); ++i) {
    const Payload& p = payloads.size() == 1 ? first : payloads[i];
    mem.host_write(decode(run.input_address) + i * slice, p.bytes());
  }
  mem.host_write_word(decode(admin_address), 4, admin ? 1 : 0);

  const std::uint64_t params[] = {run.hashes_address, run.input_address, first.declared_len, admin_address};
  run.launch = machine.launch(kKernelEntry, grid, params);

  run.hashes.reserve(grid.threads());
  for (std::uint64_t i = 0; i < grid.threads(); ++i) {
    auto bytes = mem.host_read(decode(run.hashes_address) + 8 * i, 8);
    std::uint64_t v = 0;
    for (unsigned b = 0; b < 8; ++b) v |= std::uint64_t{bytes[b]} << (8 * b);
    run.hashes.push_back(v);
  }
  return run;
}

}  // namespace simtvm
