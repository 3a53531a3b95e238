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

#include <random>

#include "doctest.h"
#include "simtvm/sanitizer.hpp"
#include "test_util.hpp"

using namespace simtvm;
using namespace simtvm::ops;

TEST_CASE("bounds checker: stack overflow is caught at buf index 16") {
  auto sp = build_stack_program();
  auto run = testutil::launch(sp.program, {1, 1}, craft_stack_payload(0x4e0, 27), Sanitize::kBounds);
  REQUIRE(run.launch.violations.size() == 1);
  const auto& v = run.launch.violations[0];
  CHECK(v.kind == ViolationKind::kOobWrite);
  CHECK(v.thread == ThreadId{0, 0});
  CHECK(v.detail.find("buf word index 16 ") != std::string::npos);
  CHECK(v.address == encode({Space::kLocal, sp.layout.buf_offset + 64}));
  CHECK_FALSE(testutil::printed_admin(run.launch));
  CHECK(run.launch.per_thread_return[0] == kFaultSentinel);
}

TEST_CASE("bounds checker: in-bounds stack input is silent") {
  auto sp = build_stack_program();
  auto run = testutil::launch(sp.program, {1, 1}, Payload::replicate(0x4e0, 16, 4), Sanitize::kBounds);
  CHECK(run.launch.violations.empty());
}

TEST_CASE("bounds checker: heap overflow is caught at buf index 8") {
  auto hp = build_heap_program();
  auto run = testutil::launch_heap_exploit(hp, {1, 1}, 0, Sanitize::kBounds);
  REQUIRE(run.launch.violations.size() == 1);
  CHECK(run.launch.violations[0].kind == ViolationKind::kOobWrite);
  CHECK(run.launch.violations[0].detail.find("buf word index 8 ") != std::string::npos);
  CHECK(run.launch.output_log.empty());
}

TEST_CASE("bounds checker: one report per overflowing thread") {
  auto sp = build_stack_program();
  Machine m(sp.program.image);
  attach_bounds_checker(m, sp.program.extents);
  Payload p = craft_stack_payload(0x4e0, 27);
  run_program(m, sp.program, {1, 2}, std::span(&p, 1));
  auto r = reports(m);
  REQUIRE(r.size() == 2);
  CHECK(r[0].thread == ThreadId{0, 0});
  CHECK(r[1].thread == ThreadId{0, 1});
}

TEST_CASE("no instrumentation: the attack is silent") {
  auto sp = build_stack_program();
  Machine m(sp.program.image);
  Payload p = craft_stack_payload(0x4e0, 27);
  auto run = run_program(m, sp.program, {1, 1}, std::span(&p, 1));
  CHECK(reports(m).empty());
  CHECK(run.launch.per_thread_return[0] == 0x9999999999999999ULL);
}

TEST_CASE("bounds checker: unannotated heap accesses must hit a live block") {
  CodeImage image;
  const std::vector<Instruction> code = {
      mov32i(r(4), 0x10), mov(r(5), RZ), jcal(kSysMalloc),
      stg(r(4), 0x10, r(0)),  // one past the 16-byte block
      ret(),
  };
  for (std::size_t i = 0; i < code.size(); ++i) image.instructions.emplace(8 * i, code[i]);
  image.symbols["main"] = 0;
  Machine m(image);
  attach_bounds_checker(m);
  auto r = m.launch("main", {1, 1}, {});
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0].kind == ViolationKind::kOobWrite);
  CHECK(r.violations[0].pc == 0x18);
}

TEST_CASE("bounds checker: in-bounds fuzz produces no reports") {
  auto sp = build_stack_program();
  auto hp = build_heap_program();
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    Payload s;
    s.declared_len = 1 + rng() % 16;
    for (std::uint32_t i = 0; i < s.declared_len; ++i) s.words.push_back(rng() & 0xffffffffULL);
    CHECK(testutil::launch(sp.program, {1, 2}, s, Sanitize::kBounds).launch.violations.empty());
    Payload h;
    h.word_width = 8;
    h.declared_len = 1 + rng() % 8;
    for (std::uint32_t i = 0; i < h.declared_len; ++i) h.words.push_back(rng());
    CHECK(testutil::launch(hp.program, {1, 2}, h, Sanitize::kBounds).launch.violations.empty());
  }
}

TEST_CASE("CFI entry set does not stop the stack exploit") {
  auto sp = build_stack_program();
  auto run = testutil::launch(sp.program, {1, 1}, craft_stack_payload(0x4e0, 27), Sanitize::kCfiEntry);
  CHECK(run.launch.violations.empty());
  CHECK(testutil::printed_admin(run.launch));
  CHECK(run.launch.per_thread_return[0] == 0x9999999999999999ULL);
}

TEST_CASE("CFI entry set blocks a mid-function landing") {
  auto sp = build_stack_program();
  auto run = testutil::launch(sp.program, {1, 1}, craft_stack_payload(0x508, 32), Sanitize::kCfiEntry);
  REQUIRE(run.launch.violations.size() == 1);
  CHECK(run.launch.violations[0].kind == ViolationKind::kCfiViolation);
  CHECK(run.launch.violations[0].address == std::uint64_t{0x508});
}

TEST_CASE("CFI callsite set blocks the stack exploit at the BRX") {
  auto sp = build_stack_program();
  auto run = testutil::launch(sp.program, {1, 1}, craft_stack_payload(0x4e0, 27), Sanitize::kCfiCallsite);
  REQUIRE(run.launch.violations.size() == 1);
  CHECK(run.launch.violations[0].kind == ViolationKind::kCfiViolation);
  CHECK(run.launch.violations[0].pc == 0x3e8);
  CHECK(run.launch.violations[0].address == std::uint64_t{0x4e0});
  CHECK_FALSE(testutil::printed_admin(run.launch));

  auto benign = testutil::launch(sp.program, {1, 1}, Payload::replicate(0x4e0, 26, 4), Sanitize::kCfiCallsite);
  CHECK(benign.launch.violations.empty());
  CHECK(benign.launch.per_thread_return[0] == 0x6666666666666666ULL);
}

TEST_CASE("CFI on the heap exploit") {
  auto hp = build_heap_program();
  auto callsite = testutil::launch_heap_exploit(hp, {1, 2}, 0, Sanitize::kCfiCallsite);
  REQUIRE(callsite.launch.violations.size() == 2);
  CHECK(callsite.launch.violations[0].pc == hp.layout.call_sites[0]);
  CHECK(callsite.launch.output_log.empty());
  // `secret` is a symbol entry, so the entry-set policy lets it through.
  auto entry = testutil::launch_heap_exploit(hp, {1, 1}, 0, Sanitize::kCfiEntry);
  CHECK(entry.launch.violations.empty());
  CHECK(entry.launch.output_log.size() == 4);
}

TEST_CASE("callsite policy must cover every BRX") {
  auto sp = build_stack_program();
  Machine m(sp.program.image);
  CHECK_THROWS_AS(attach_cfi(m, CfiPolicy{CfiMode::kCallsiteSet, {}}), CfiPolicyError);
}
