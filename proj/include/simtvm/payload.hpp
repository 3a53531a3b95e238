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

#ifndef SIMTVM_PAYLOAD_HPP_
#define SIMTVM_PAYLOAD_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace simtvm {

class PayloadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Guest input: fixed-width words plus the element count handed to the
// kernel as `len`. The attacker controls both, so they always agree.
struct Payload {
  std::vector<std::uint64_t> words;
  unsigned word_width = 4;
  std::uint32_t declared_len = 0;

  // `count` copies of `word`.
  static Payload replicate(std::uint64_t word, std::uint32_t count, unsigned width);

  // Throws PayloadError on a bad width, a length mismatch, or a word that
  // does not fit the width.
  void validate() const;

  // Little-endian byte image as copied into guest memory.
  std::vector<std::uint8_t> bytes() const;

  friend bool operator==(const Payload&, const Payload&) = default;
};

// File format: header line `width=<4|8> len=<n>`, then one hex word per line.
std::string payload_to_text(const Payload& payload);
Payload payload_from_text(std::string_view text);

}  // namespace simtvm

#endif  // SIMTVM_PAYLOAD_HPP_
