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

#include <vector>

#include "doctest.h"
#include "simtvm/memory.hpp"

using namespace simtvm;

namespace {

MemoryError::Kind error_kind(auto&& fn) {
  try {
    fn();
  } catch (const MemoryError& e) {
    return e.kind();
  }
  FAIL("no MemoryError thrown");
  return MemoryError::Kind::kBadArgument;
}

}  // namespace

TEST_CASE("address encoding") {
  CHECK(encode({Space::kGlobal, kHeapBase + 16}) == 0xb0513f920ULL);
  CHECK(decode(0xc00000f80ULL) == Address{Space::kLocal, 0xf80});
  CHECK(error_kind([] { decode(0x0e00000000ULL); }) == MemoryError::Kind::kUnmapped);
  CHECK(error_kind([] { decode(0x1b00000000ULL); }) == MemoryError::Kind::kUnmapped);
  CHECK_FALSE(permissions(Space::kCode).write);
  CHECK_FALSE(permissions(Space::kCode).read);
  CHECK_FALSE(permissions(Space::kParam).write);
}

TEST_CASE("global store/load identity") {
  Memory mem({}, 0x540);
  Address buf = mem.map_host_buffer("out", 64);
  mem.store(buf + 8, 8, 0x9999999999999999ULL);
  CHECK(mem.load(buf + 8, 8) == 0x9999999999999999ULL);
  CHECK(mem.load(buf + 8, 4) == 0x99999999ULL);
}

TEST_CASE("local store/load identity") {
  Memory mem({}, 0x540);
  std::vector<std::uint8_t> local(4096);
  mem.store({Space::kLocal, 0}, 4, 0x4e0, local);
  CHECK(mem.load({Space::kLocal, 0}, 4, local) == 0x4e0);
  CHECK(error_kind([&] { mem.load({Space::kLocal, 4096}, 4, local); }) == MemoryError::Kind::kUnmapped);
  CHECK(error_kind([&] { mem.load({Space::kLocal, 4094}, 4, local); }) == MemoryError::Kind::kUnmapped);
}

TEST_CASE("CODE and PARAM are protected") {
  Memory mem({}, 0x540);
  CHECK(error_kind([&] { mem.load({Space::kCode, 0x4e0}, 4); }) == MemoryError::Kind::kPermission);
  CHECK(error_kind([&] { mem.store({Space::kCode, 0x4e0}, 4, 0); }) == MemoryError::Kind::kPermission);
  CHECK(error_kind([&] { mem.store({Space::kCode, 0x10'0000}, 8, 0); }) == MemoryError::Kind::kPermission);
  CHECK(error_kind([&] { mem.store({Space::kParam, 0}, 8, 0); }) == MemoryError::Kind::kPermission);
  mem.host_write_word({Space::kParam, 0x20}, 8, 42);
  CHECK(mem.load({Space::kParam, 0x20}, 8) == 42);
}

TEST_CASE("unmapped GLOBAL access past a region") {
  Memory mem({}, 0x540);
  Address buf = mem.map_host_buffer("a", 16);
  CHECK(error_kind([&] { mem.load(buf + 16, 4); }) == MemoryError::Kind::kUnmapped);
  CHECK(error_kind([&] { mem.load(buf + 12, 8); }) == MemoryError::Kind::kUnmapped);
  Address next = mem.map_host_buffer("b", 16);
  CHECK(next.offset > buf.offset + 16);  // guard gap
}

TEST_CASE("static data is read-only to the guest") {
  Memory mem({}, 0x540);
  mem.map_static_data(kStaticDataBase, 32);
  mem.host_write_word({Space::kGlobal, kStaticDataBase}, 8, 0x408);
  CHECK(mem.load({Space::kGlobal, kStaticDataBase}, 8) == 0x408);
  CHECK(error_kind([&] { mem.store({Space::kGlobal, kStaticDataBase}, 8, 0x4e0); }) ==
        MemoryError::Kind::kPermission);
}

TEST_CASE("bump allocation follows the header rule") {
  Memory mem({}, 0x540);
  const std::uint64_t B = kHeapBase;
  Address first = mem.device_malloc(64);
  Address second = mem.device_malloc(8);
  CHECK(first == Address{Space::kGlobal, B + 16});
  CHECK(second == Address{Space::kGlobal, B + 16 + 64 + 16});
  CHECK(encode(first) == 0xb0513f920ULL);
  // Header words: size then state.
  CHECK(mem.load(first + (-16ULL), 8) == 64);
  CHECK(mem.load(first + (-8ULL), 8) == 1);
  Address odd = mem.device_malloc(5);
  CHECK(odd.offset % 8 == 0);
  CHECK(mem.device_malloc(1).offset == odd.offset + 8 + 16);
  CHECK(error_kind([&] { mem.device_malloc(0); }) == MemoryError::Kind::kBadArgument);
}

TEST_CASE("free rules") {
  Memory mem({}, 0x540);
  Address a = mem.device_malloc(64);
  mem.store(a, 8, 0x1234);
  mem.device_free(a);
  CHECK(mem.load(a, 8) == 0x1234);  // no poisoning
  CHECK(mem.load(a + (-8ULL), 8) == 0);
  CHECK(error_kind([&] { mem.device_free(a); }) == MemoryError::Kind::kDoubleFree);
  Address b = mem.device_malloc(64);
  CHECK(b.offset > a.offset);  // no reuse
  CHECK(error_kind([&] { mem.device_free(b + 8); }) == MemoryError::Kind::kInvalidFree);
}

TEST_CASE("heap exhaustion and reset") {
  Memory mem({4096, 256, 0x200}, 0x540);
  mem.device_malloc(200);
  CHECK(error_kind([&] { mem.device_malloc(64); }) == MemoryError::Kind::kOutOfHeap);
  mem.reset_heap();
  CHECK(mem.device_malloc(64).offset == kHeapBase + 16);
  CHECK(mem.heap().blocks().size() == 1);
}

TEST_CASE("HeapState lookups") {
  HeapState heap(kHeapBase, 1024);
  auto a = heap.allocate(64);
  auto b = heap.allocate(8);
  CHECK(heap.find(a) != nullptr);
  CHECK(heap.find(a + 8) == nullptr);
  CHECK(heap.containing(a + 63) == heap.find(a));
  CHECK(heap.containing(a + 64) == nullptr);  // header of the next block
  CHECK(heap.containing(b) == heap.find(b));
  heap.release(a);
  CHECK(heap.find(a)->state == HeapState::BlockState::kFreed);
}

TEST_CASE("hexdump format") {
  Memory mem({}, 0x540);
  Address a = mem.device_malloc(16);
  mem.store(a, 8, 0xb0513f978ULL);
  const std::string dump = mem.hexdump(a, 16);
  CHECK(dump.rfind("0xb0513f920: 78 f9 13 05 0b 00 00 00", 0) == 0);
}
