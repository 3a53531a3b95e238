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

#include "simtvm/memory.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <sstream>

namespace simtvm {

namespace {

std::string describe(Address a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s+0x%" PRIx64, std::string(space_name(a.space)).c_str(), a.offset);
  return buf;
}

constexpr std::uint64_t kHostGuardBytes = 0x1000;

}  // namespace

Permissions permissions(Space space) {
  switch (space) {
    case Space::kCode: return {false, false, true};
    case Space::kGlobal: return {true, true, false};
    case Space::kLocal: return {true, true, false};
    case Space::kParam: return {true, false, false};
  }
  return {};
}

std::string_view space_name(Space space) {
  switch (space) {
    case Space::kCode: return "CODE";
    case Space::kGlobal: return "GLOBAL";
    case Space::kLocal: return "LOCAL";
    case Space::kParam: return "PARAM";
  }
  return "?";
}

MemoryError::MemoryError(Kind kind, Address address, bool write, const std::string& message)
    : std::runtime_error(message), kind_(kind), address_(address), write_(write) {}

std::uint64_t encode(Address address) {
  if (address.offset > kOffsetMask) {
    throw MemoryError(MemoryError::Kind::kBadArgument, address, false, "offset does not fit the guest encoding");
  }
  return (static_cast<std::uint64_t>(address.space) << kSpaceShift) | address.offset;
}

Address decode(std::uint64_t guest) {
  std::uint64_t tag = guest >> kSpaceShift;
  Address a{Space::kGlobal, guest & kOffsetMask};
  switch (tag) {
    case static_cast<std::uint64_t>(Space::kCode):
    case static_cast<std::uint64_t>(Space::kGlobal):
    case static_cast<std::uint64_t>(Space::kLocal):
    case static_cast<std::uint64_t>(Space::kParam):
      a.space = static_cast<Space>(tag);
      return a;
    default:
      throw MemoryError(MemoryError::Kind::kUnmapped, a, false,
                        "guest address 0x" + [&] {
                          char buf[24];
                          std::snprintf(buf, sizeof buf, "%" PRIx64, guest);
                          return std::string(buf);
                        }() + " has no address space");
  }
}

// ---------------------------------------------------------------- HeapState

HeapState::HeapState(std::uint64_t base, std::uint64_t capacity) : base_(base), capacity_(capacity), cursor_(base) {
  if (capacity == 0) {
    throw MemoryError(MemoryError::Kind::kBadArgument, {Space::kGlobal, base}, false, "heap capacity must be > 0");
  }
}

std::uint64_t HeapState::allocate(std::uint64_t size) {
  if (size == 0) {
    throw MemoryError(MemoryError::Kind::kBadArgument, {Space::kGlobal, cursor_}, false, "malloc of 0 bytes");
  }
  std::uint64_t need = kHeaderBytes + round_up(size);
  if (size > capacity_ || need > base_ + capacity_ - cursor_) {
    throw MemoryError(MemoryError::Kind::kOutOfHeap, {Space::kGlobal, cursor_}, false,
                      "device heap exhausted allocating " + std::to_string(size) + " bytes");
  }
  Block block{cursor_ + kHeaderBytes, size, BlockState::kAllocated};
  cursor_ += need;
  blocks_.push_back(block);
  return block.user_base;
}

void HeapState::release(std::uint64_t user_base) {
  auto it = std::find_if(blocks_.begin(), blocks_.end(), [&](const Block& b) { return b.user_base == user_base; });
  Address a{Space::kGlobal, user_base};
  if (it == blocks_.end()) {
    throw MemoryError(MemoryError::Kind::kInvalidFree, a, true, "free of " + describe(a) + ": not a block base");
  }
  if (it->state == BlockState::kFreed) {
    throw MemoryError(MemoryError::Kind::kDoubleFree, a, true, "double free of " + describe(a));
  }
  it->state = BlockState::kFreed;
}

void HeapState::reset() {
  cursor_ = base_;
  blocks_.clear();
}

const HeapState::Block* HeapState::find(std::uint64_t user_base) const {
  // Blocks are sorted by user_base.
  auto it = std::lower_bound(blocks_.begin(), blocks_.end(), user_base,
                             [](const Block& b, std::uint64_t v) { return b.user_base < v; });
  return it != blocks_.end() && it->user_base == user_base ? &*it : nullptr;
}

const HeapState::Block* HeapState::containing(std::uint64_t offset) const {
  auto it = std::upper_bound(blocks_.begin(), blocks_.end(), offset,
                             [](std::uint64_t v, const Block& b) { return v < b.user_base; });
  if (it == blocks_.begin()) return nullptr;
  --it;
  return offset - it->user_base < it->user_size ? &*it : nullptr;
}

// ---------------------------------------------------------------- Memory

Memory::Memory(const MemoryConfig& config, std::uint64_t code_extent)
    : config_(config), code_extent_(code_extent), heap_(kHeapBase, config.heap_size) {
  if (config.local_size == 0 || config.local_size > kOffsetMask) {
    throw MemoryError(MemoryError::Kind::kBadArgument, {Space::kLocal, 0}, false, "local size out of range");
  }
  if (config.heap_size == 0 || config.heap_size > kHostBase - kHeapBase) {
    throw MemoryError(MemoryError::Kind::kBadArgument, {Space::kGlobal, kHeapBase}, false, "heap size out of range");
  }
  if (config.param_size < 0x20 || config.param_size > 0x10000) {
    throw MemoryError(MemoryError::Kind::kBadArgument, {Space::kParam, 0}, false, "param size out of range");
  }
  global_.push_back(Region{"heap", kHeapBase, std::vector<std::uint8_t>(config.heap_size), true});
  heap_region_ = 0;
  param_ = Region{"param", 0, std::vector<std::uint8_t>(config.param_size), false};
}

const Memory::Region* Memory::find_global(std::uint64_t offset, std::uint64_t size) const {
  for (const auto& r : global_) {
    if (r.contains(offset, size)) return &r;
  }
  return nullptr;
}

const std::uint8_t* Memory::locate(Address address, std::uint64_t size, bool /*host*/,
                                   std::span<const std::uint8_t> local) const {
  auto unmapped = [&]() -> const std::uint8_t* {
    throw MemoryError(MemoryError::Kind::kUnmapped, address, false, "read of unmapped " + describe(address));
  };
  switch (address.space) {
    case Space::kCode:
      throw MemoryError(MemoryError::Kind::kPermission, address, false,
                        "data read of " + describe(address) + ": code space is execute-only");
    case Space::kLocal:
      if (address.offset > local.size() || size > local.size() - address.offset) return unmapped();
      return local.data() + address.offset;
    case Space::kParam:
      if (!param_.contains(address.offset, size)) return unmapped();
      return param_.bytes.data() + address.offset;
    case Space::kGlobal:
      if (const Region* r = find_global(address.offset, size)) return r->bytes.data() + (address.offset - r->base);
      return unmapped();
  }
  return unmapped();
}

std::uint8_t* Memory::locate(Address address, std::uint64_t size, bool write, bool host,
                             std::span<std::uint8_t> local) {
  auto unmapped = [&]() -> std::uint8_t* {
    throw MemoryError(MemoryError::Kind::kUnmapped, address, write,
                      std::string(write ? "write to" : "read of") + " unmapped " + describe(address));
  };
  auto denied = [&](const char* why) -> std::uint8_t* {
    throw MemoryError(MemoryError::Kind::kPermission, address, write,
                      std::string(write ? "write to " : "read of ") + describe(address) + ": " + why);
  };
  switch (address.space) {
    case Space::kCode:
      return denied("code space is execute-only");
    case Space::kLocal:
      if (address.offset > local.size() || size > local.size() - address.offset) return unmapped();
      return local.data() + address.offset;
    case Space::kParam:
      if (write && !host) return denied("parameter space is read-only");
      if (!param_.contains(address.offset, size)) return unmapped();
      return param_.bytes.data() + address.offset;
    case Space::kGlobal:
      for (auto& r : global_) {
        if (r.contains(address.offset, size)) {
          if (write && !host && !r.writable) return denied("region is read-only");
          return r.bytes.data() + (address.offset - r.base);
        }
      }
      return unmapped();
  }
  return unmapped();
}

std::uint64_t Memory::load(Address address, unsigned width, std::span<const std::uint8_t> local) const {
  if (width != 4 && width != 8) throw MemoryError(MemoryError::Kind::kBadArgument, address, false, "bad width");
  const std::uint8_t* p = locate(address, width, false, local);
  std::uint64_t v = 0;
  for (unsigned i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void Memory::store(Address address, unsigned width, std::uint64_t value, std::span<std::uint8_t> local) {
  if (width != 4 && width != 8) throw MemoryError(MemoryError::Kind::kBadArgument, address, true, "bad width");
  std::uint8_t* p = locate(address, width, true, false, local);
  for (unsigned i = 0; i < width; ++i) p[i] = static_cast<std::uint8_t>(value >> (8 * i));
}

void Memory::host_write(Address address, std::span<const std::uint8_t> bytes, std::span<std::uint8_t> local) {
  if (bytes.empty()) return;
  std::uint8_t* p = locate(address, bytes.size(), true, true, local);
  std::copy(bytes.begin(), bytes.end(), p);
}

void Memory::host_write_word(Address address, unsigned width, std::uint64_t value) {
  std::uint8_t buf[8];
  for (unsigned i = 0; i < 8; ++i) buf[i] = static_cast<std::uint8_t>(value >> (8 * i));
  host_write(address, std::span<const std::uint8_t>(buf, width));
}

std::vector<std::uint8_t> Memory::host_read(Address address, std::uint64_t size,
                                            std::span<const std::uint8_t> local) const {
  if (size == 0) return {};
  const std::uint8_t* p = locate(address, size, true, local);
  return {p, p + size};
}

Address Memory::map_host_buffer(const std::string& name, std::uint64_t size) {
  std::uint64_t rounded = std::max<std::uint64_t>(HeapState::round_up(size), 8);
  if (rounded > kOffsetMask - host_cursor_) {
    throw MemoryError(MemoryError::Kind::kOutOfHeap, {Space::kGlobal, host_cursor_}, false,
                      "GLOBAL space exhausted mapping " + name);
  }
  Address a{Space::kGlobal, host_cursor_};
  global_.push_back(Region{name, host_cursor_, std::vector<std::uint8_t>(rounded), true});
  host_cursor_ += (rounded + kHostGuardBytes + 0xfff) & ~std::uint64_t{0xfff};
  return a;
}

void Memory::map_static_data(std::uint64_t offset, std::uint64_t size) {
  if (size == 0) return;
  if (offset < kStaticDataBase || offset + size > kHeapBase) {
    throw MemoryError(MemoryError::Kind::kBadArgument, {Space::kGlobal, offset}, false,
                      "static data must lie in [0x1000, heap base)");
  }
  global_.push_back(Region{"static", offset, std::vector<std::uint8_t>(size), false});
}

Address Memory::device_malloc(std::uint64_t size) {
  std::uint64_t user = heap_.allocate(size);
  Region& r = global_[heap_region_];
  auto put = [&](std::uint64_t off, std::uint64_t v) {
    for (unsigned i = 0; i < 8; ++i) r.bytes[off - r.base + i] = static_cast<std::uint8_t>(v >> (8 * i));
  };
  put(user - HeapState::kHeaderBytes, size);
  put(user - HeapState::kHeaderBytes + 8, 1);
  return {Space::kGlobal, user};
}

void Memory::device_free(Address address) {
  if (address.space != Space::kGlobal) {
    throw MemoryError(MemoryError::Kind::kInvalidFree, address, true,
                      "free of " + describe(address) + ": not a heap address");
  }
  heap_.release(address.offset);
  Region& r = global_[heap_region_];
  std::uint64_t flag = address.offset - 8 - r.base;
  std::fill_n(r.bytes.begin() + static_cast<std::ptrdiff_t>(flag), 8, 0);
}

void Memory::reset_heap() {
  // Only the bump-allocated prefix can be dirty.
  auto& bytes = global_[heap_region_].bytes;
  std::fill_n(bytes.begin(), heap_.cursor() - heap_.base(), std::uint8_t{0});
  heap_.reset();
}

std::string Memory::hexdump(Address address, std::uint64_t size, std::span<const std::uint8_t> local) const {
  auto bytes = host_read(address, size, local);
  std::ostringstream out;
  for (std::uint64_t line = 0; line < bytes.size(); line += 16) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%" PRIx64 ":", encode(address + line));
    out << buf;
    for (std::uint64_t i = line; i < std::min<std::uint64_t>(line + 16, bytes.size()); ++i) {
      std::snprintf(buf, sizeof buf, " %02x", bytes[i]);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace simtvm
