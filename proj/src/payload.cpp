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

#include "simtvm/payload.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

#include "simtvm/isa.hpp"

namespace simtvm {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_unsigned(std::string_view s, T& out, int base) {
  if (base == 16 && (s.starts_with("0x") || s.starts_with("0X"))) s.remove_prefix(2);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out, base);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

Payload Payload::replicate(std::uint64_t word, std::uint32_t count, unsigned width) {
  Payload p{std::vector<std::uint64_t>(count, word), width, count};
  p.validate();
  return p;
}

void Payload::validate() const {
  if (word_width != 4 && word_width != 8) throw PayloadError("payload word width must be 4 or 8");
  if (words.size() != declared_len) {
    throw PayloadError("payload declares len=" + std::to_string(declared_len) + " but holds " +
                       std::to_string(words.size()) + " words");
  }
  if (word_width == 4) {
    for (auto w : words) {
      if (w > 0xffffffffULL) throw PayloadError("word " + hex(w) + " does not fit 4 bytes");
    }
  }
}

std::vector<std::uint8_t> Payload::bytes() const {
  std::vector<std::uint8_t> out;
  out.reserve(words.size() * word_width);
  for (auto w : words) {
    for (unsigned i = 0; i < word_width; ++i) out.push_back(static_cast<std::uint8_t>(w >> (8 * i)));
  }
  return out;
}

std::string payload_to_text(const Payload& payload) {
  payload.validate();
  std::ostringstream out;
  out << "width=" << payload.word_width << " len=" << payload.declared_len << '\n';
  for (auto w : payload.words) out << hex(w) << '\n';
  return out.str();
}

Payload payload_from_text(std::string_view text) {
  Payload p;
  bool have_header = false;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    if (!have_header) {
      auto space = line.find(' ');
      std::string_view w = line.substr(0, space);
      std::string_view l = space == std::string_view::npos ? std::string_view{} : trim(line.substr(space));
      if (!w.starts_with("width=") || !l.starts_with("len=") || !parse_unsigned(w.substr(6), p.word_width, 10) ||
          !parse_unsigned(l.substr(4), p.declared_len, 10)) {
        throw PayloadError("line 1: expected header 'width=<4|8> len=<n>'");
      }
      have_header = true;
      continue;
    }
    std::uint64_t word = 0;
    if (!parse_unsigned(line, word, 16)) {
      throw PayloadError("line " + std::to_string(line_no) + ": bad hex word '" + std::string(line) + "'");
    }
    p.words.push_back(word);
  }
  if (!have_header) throw PayloadError("empty payload file");
  p.validate();
  return p;
}

}  // namespace simtvm
