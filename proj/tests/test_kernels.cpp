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
#include "json.hpp"
#include "oracles.hpp"
#include "simtvm/kernels.hpp"
#include "test_util.hpp"

using namespace simtvm;
using namespace simtvm::ops;

TEST_CASE("stack program pins the dispatch region") {
  auto sp = build_stack_program();
  const CodeImage& image = sp.program.image;
  CHECK(image.symbol("dummy9") == CodeOffset{0x4e0});
  CHECK(instruction_at(image, 0x3e8) == brx(r(0), -0x3f0));
  CHECK(sp.layout.dispatch_site == 0x3e8);
  const std::array<CodeOffset, 9> entries = {0x408, 0x420, 0x438, 0x458, 0x470, 0x490, 0x4a8, 0x4c8, 0x4e0};
  CHECK(sp.layout.dummy_entries == entries);
  for (unsigned k = 1; k <= 9; ++k) CHECK(image.symbol("dummy" + std::to_string(k)) == entries[k - 1]);
  CHECK(sp.layout.fp_offset == sp.layout.buf_offset + 64);
  CHECK(sp.layout.buf_offset == 4096 - 0x80);
  CHECK(image.strings.at(0) == "HELLO ADMIN!\n");
}

TEST_CASE("stack program agrees with the dispatch fragment on every listed offset") {
  auto sp = build_stack_program();
  auto fragment = parse_listing(testutil::read_text(testutil::fragment_path()));
  for (const auto& [off, inst] : fragment.instructions) {
    CAPTURE(off);
    CHECK(instruction_at(sp.program.image, off) == inst);
  }
  for (const auto& [name, off] : fragment.symbols) CHECK(sp.program.image.symbol(name) == off);
}

TEST_CASE("stack program follows a smaller LOCAL size") {
  auto sp = build_stack_program(1024);
  CHECK(sp.layout.buf_offset == 1024 - 0x80);
  MachineConfig config;
  config.memory.local_size = 1024;
  auto run = testutil::launch(sp.program, {1, 1}, Payload::replicate(0x4e0, 27, 4), Sanitize::kOff, false, config);
  CHECK(run.launch.per_thread_return[0] == 0x9999999999999999ULL);
  CHECK_THROWS(build_stack_program(0x40));
}

TEST_CASE("heap program layout") {
  auto hp = build_heap_program();
  const auto& L = hp.layout;
  CHECK(L.object_vtable_slot_index == 10);
  CHECK(L.forged_table_index == 11);
  CHECK(L.allocation_sizes == std::vector<std::uint64_t>{64, 8});
  for (unsigned k = 0; k < 4; ++k) {
    CHECK(hp.program.image.symbol("D::f" + std::to_string(k + 1)) == L.method_entries[k]);
    CHECK(hp.program.image.data.at(L.class_vtable_offset + 8 * k) == L.method_entries[k]);
    CHECK(instruction_at(hp.program.image, L.call_sites[k]).opcode == Opcode::kBrx);
  }
  CHECK(hp.program.image.symbol("secret") == L.secret_entry);
  CHECK(hp.program.image.strings.at(0) == "HELLO ADMIN! ");
}

TEST_CASE("heap program benign run returns 24*h in 32-bit arithmetic") {
  auto hp = build_heap_program();
  const std::uint64_t h = oracle::djb2_64(std::vector<std::uint64_t>(8, 0));
  CHECK(h == 7567884774754821ULL);
  auto run = testutil::launch(hp.program, {1, 1}, Payload::replicate(0, 8, 8));
  const std::uint64_t expected = (24 * (h & 0xffffffffULL)) & 0xffffffffULL;
  CHECK(expected == 2563698808ULL);
  CHECK(run.launch.per_thread_return[0] == expected);
  CHECK(run.launch.violations.empty());
  CHECK(run.launch.heap_events.size() == 4);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::uint32_t len = 1 + rng() % 8;
    Payload p;
    p.word_width = 8;
    p.declared_len = len;
    for (std::uint32_t i = 0; i < len; ++i) p.words.push_back(rng());
    std::vector<std::uint64_t> buf(8, 0);
    std::copy(p.words.begin(), p.words.end(), buf.begin());
    auto r = testutil::launch(hp.program, {1, 1}, p);
    CHECK(r.launch.per_thread_return[0] == ((24 * (oracle::djb2_64(buf) & 0xffffffffULL)) & 0xffffffffULL));
  }
}

TEST_CASE("stack program benign runs dispatch to the hash-selected dummy") {
  auto sp = build_stack_program();
  std::mt19937 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint32_t len = 1 + rng() % 16;
    Payload p;
    p.declared_len = len;
    for (std::uint32_t i = 0; i < len; ++i) p.words.push_back(rng());
    std::vector<std::uint32_t> buf(16, 0);
    std::copy(p.words.begin(), p.words.end(), buf.begin());
    const unsigned slot = oracle::djb2_32(buf) % 8;
    auto r = testutil::launch(sp.program, {1, 1}, p);
    CHECK(r.launch.per_thread_return[0] == dummy_constant(slot + 1));
  }
}

TEST_CASE("admin flag bypasses unsafe") {
  auto sp = build_stack_program();
  MachineConfig config;
  config.trace = true;
  auto run = testutil::launch(sp.program, {1, 2}, Payload::replicate(1, 4, 4), Sanitize::kOff, true, config);
  for (auto v : run.launch.per_thread_return) CHECK(v == 0x9999999999999999ULL);
  for (const auto& ev : run.launch.trace) CHECK(ev.pc != sp.layout.unsafe_entry);
}

TEST_CASE("djb2 values") {
  CHECK(djb2_32({}) == 5381);
  const std::uint32_t zero = 0;
  CHECK(djb2_32(std::span(&zero, 1)) == 177573);
  std::vector<std::uint32_t> w(16, 0x4e0);
  CHECK(djb2_32(w) % 8 == 5);
  CHECK(djb2_64({}) == 5381);
  const std::uint64_t one = 1;
  CHECK(djb2_64(std::span(&one, 1)) == 177574);
  std::vector<std::uint64_t> v(8, 0x1238);
  CHECK(djb2_64(v) % 8 == 5);
}

TEST_CASE("dummy constants") {
  CHECK(dummy_constant(1) == 0x1111111111111111ULL);
  CHECK(dummy_constant(6) == 0x6666666666666666ULL);
  CHECK_THROWS_AS(dummy_constant(9), std::out_of_range);
  CHECK_THROWS_AS(dummy_constant(0), std::out_of_range);
}

TEST_CASE("layout JSON") {
  auto s = nlohmann::json::parse(layout_json(build_stack_program().layout));
  CHECK(s["dispatch_site"] == "0x3e8");
  CHECK(s["dummy_entries"][8] == "0x4e0");
  auto h = nlohmann::json::parse(layout_json(build_heap_program().layout));
  CHECK(h["object_vtable_slot_index"] == 10);
}

TEST_CASE("run_program argument checks") {
  auto sp = build_stack_program();
  Machine m(sp.program.image);
  Payload wide = Payload::replicate(0, 4, 8);
  CHECK_THROWS_AS(run_program(m, sp.program, {1, 1}, std::span(&wide, 1)), PayloadError);
  std::vector<Payload> two = {Payload::replicate(0, 4, 4), Payload::replicate(0, 4, 4)};
  CHECK_THROWS_AS(run_program(m, sp.program, {1, 3}, two), PayloadError);
  std::vector<Payload> mixed = {Payload::replicate(0, 4, 4), Payload::replicate(0, 5, 4)};
  CHECK_THROWS_AS(run_program(m, sp.program, {1, 2}, mixed), PayloadError);
}
