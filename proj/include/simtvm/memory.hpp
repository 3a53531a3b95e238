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

#ifndef SIMTVM_MEMORY_HPP_
#define SIMTVM_MEMORY_HPP_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace simtvm {

// Guest-visible data addresses are 40-bit values: the space tag sits in bits
// 32..39 and the byte offset in the low 32 bits, so the first heap block of
// a launch reads 0xb0513f920.
enum class Space : std::uint8_t {
  kCode = 0x0A,
  kGlobal = 0x0B,
  kLocal = 0x0C,
  kParam = 0x0D,
};

inline constexpr unsigned kSpaceShift = 32;
inline constexpr std::uint64_t kOffsetMask = 0xffff'ffffULL;

struct Address {
  Space space = Space::kGlobal;
  std::uint64_t offset = 0;

  Address operator+(std::uint64_t delta) const { return {space, offset + delta}; }
  friend bool operator==(const Address&, const Address&) = default;
};

struct Permissions {
  bool read = false;
  bool write = false;
  bool execute = false;
};

// CODE is execute-only and PARAM is read-only to guest data instructions.
Permissions permissions(Space space);
std::string_view space_name(Space space);

class MemoryError : public std::runtime_error {
 public:
  enum class Kind { kUnmapped, kPermission, kOutOfHeap, kInvalidFree, kDoubleFree, kBadArgument };

  MemoryError(Kind kind, Address address, bool write, const std::string& message);

  Kind kind() const { return kind_; }
  Address address() const { return address_; }
  bool is_write() const { return write_; }

 private:
  Kind kind_;
  Address address_;
  bool write_;
};

std::uint64_t encode(Address address);
// Throws MemoryError(kUnmapped) for unknown tags or bits above the tag byte.
Address decode(std::uint64_t guest);

// Deterministic bump allocator over a fixed GLOBAL range. Each block is
// preceded by a two-word header (user size, state); freed blocks are never
// reused within a launch.
class HeapState {
 public:
  static constexpr std::uint64_t kHeaderWords = 2;
  static constexpr std::uint64_t kHeaderBytes = kHeaderWords * 8;

  enum class BlockState { kAllocated, kFreed };
  struct Block {
    std::uint64_t user_base = 0;  // GLOBAL offset
    std::uint64_t user_size = 0;
    BlockState state = BlockState::kAllocated;
  };

  HeapState(std::uint64_t base, std::uint64_t capacity);

  // GLOBAL offset of the new block's user base.
  std::uint64_t allocate(std::uint64_t size);
  void release(std::uint64_t user_base);
  void reset();

  const Block* find(std::uint64_t user_base) const;
  // Block whose user extent [user_base, user_base + user_size) holds offset.
  const Block* containing(std::uint64_t offset) const;

  std::uint64_t base() const { return base_; }
  std::uint64_t capacity() const { return capacity_; }
  std::uint64_t cursor() const { return cursor_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  static std::uint64_t round_up(std::uint64_t size) { return (size + 7) & ~std::uint64_t{7}; }

 private:
  std::uint64_t base_;
  std::uint64_t capacity_;
  std::uint64_t cursor_;
  std::vector<Block> blocks_;
};

struct MemoryConfig {
  std::uint64_t local_size = 4096;
  std::uint64_t heap_size = 8ULL << 20;
  std::uint64_t param_size = 0x200;
};

// Fixed GLOBAL layout.
inline constexpr std::uint64_t kStaticDataBase = 0x1000;
inline constexpr std::uint64_t kHeapBase = 0x0513'f910;
inline constexpr std::uint64_t kHostBase = 0x1000'0000;

class Memory {
 public:
  struct Region {
    std::string name;
    std::uint64_t base = 0;  // GLOBAL offset
    std::vector<std::uint8_t> bytes;
    bool writable = true;

    bool contains(std::uint64_t offset, std::uint64_t size) const {
      return offset >= base && size <= bytes.size() && offset - base <= bytes.size() - size;
    }
  };

  Memory(const MemoryConfig& config, std::uint64_t code_extent);

  // Guest data access. `local` is the executing thread's LOCAL region.
  std::uint64_t load(Address address, unsigned width, std::span<const std::uint8_t> local = {}) const;
  void store(Address address, unsigned width, std::uint64_t value, std::span<std::uint8_t> local = {});

  // Host-side access: bypasses the guest write protection of PARAM and
  // static data, but CODE stays unreadable and unwritable.
  void host_write(Address address, std::span<const std::uint8_t> bytes, std::span<std::uint8_t> local = {});
  void host_write_word(Address address, unsigned width, std::uint64_t value);
  std::vector<std::uint8_t> host_read(Address address, std::uint64_t size,
                                      std::span<const std::uint8_t> local = {}) const;

  // Maps a fresh zeroed GLOBAL region for host buffers. Consecutive host
  // regions are separated by an unmapped guard gap.
  Address map_host_buffer(const std::string& name, std::uint64_t size);
  void map_static_data(std::uint64_t offset, std::uint64_t size);

  Address device_malloc(std::uint64_t size);
  void device_free(Address address);
  // Clears heap contents and allocator state; called at the start of each launch.
  void reset_heap();

  const HeapState& heap() const { return heap_; }
  const std::vector<Region>& global_regions() const { return global_; }
  std::uint64_t code_extent() const { return code_extent_; }
  const MemoryConfig& config() const { return config_; }

  // 16 bytes per line: "0xb0513f920: 20 f9 ...".
  std::string hexdump(Address address, std::uint64_t size, std::span<const std::uint8_t> local = {}) const;

 private:
  std::uint8_t* locate(Address address, std::uint64_t size, bool write, bool host, std::span<std::uint8_t> local);
  const std::uint8_t* locate(Address address, std::uint64_t size, bool host,
                             std::span<const std::uint8_t> local) const;
  const Region* find_global(std::uint64_t offset, std::uint64_t size) const;

  MemoryConfig config_;
  std::uint64_t code_extent_;
  std::vector<Region> global_;
  std::size_t heap_region_;
  Region param_;
  HeapState heap_;
  std::uint64_t host_cursor_ = kHostBase;
};

}  // namespace simtvm

#endif  // SIMTVM_MEMORY_HPP_
