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

#ifndef SIMTVM_TESTS_TEST_UTIL_HPP_
#define SIMTVM_TESTS_TEST_UTIL_HPP_

#include <fstream>
#include <sstream>
#include <string>

#include "simtvm/exploit.hpp"
#include "simtvm/kernels.hpp"

namespace testutil {

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string fragment_path() { return std::string(SIMTVM_TEST_DATA) + "/dispatch_fragment.sass.txt"; }

inline std::size_t count_prints(const simtvm::LaunchResult& r, const std::string& text) {
  std::size_t n = 0;
  for (const auto& p : r.output_log) n += p.text == text;
  return n;
}

inline bool printed_admin(const simtvm::LaunchResult& r) {
  for (const auto& p : r.output_log) {
    if (p.text.find("HELLO ADMIN!") != std::string::npos) return true;
  }
  return false;
}

// Launches `program` on a fresh machine with one payload for every thread.
inline simtvm::ProgramRun launch(const simtvm::Program& program, simtvm::GridConfig grid, const simtvm::Payload& p,
                                 simtvm::Sanitize mode = simtvm::Sanitize::kOff, bool admin = false,
                                 simtvm::MachineConfig config = {}) {
  simtvm::Machine m(program.image, config);
  simtvm::instrument(m, program, mode);
  return simtvm::run_program(m, program, grid, std::span(&p, 1), admin);
}

inline simtvm::ProgramRun launch_heap_exploit(const simtvm::HeapProgram& hp, simtvm::GridConfig grid,
                                              std::int64_t base_delta = 0,
                                              simtvm::Sanitize mode = simtvm::Sanitize::kOff) {
  std::vector<simtvm::Payload> payloads;
  for (std::uint32_t b = 0; b < grid.grid_dim; ++b) {
    for (std::uint32_t t = 0; t < grid.block_dim; ++t) {
      const std::uint64_t base = simtvm::predict_heap_address(hp.layout, grid, {b, t}, 0) + base_delta;
      payloads.push_back(simtvm::craft_heap_payload(hp.layout.secret_entry, base, hp.layout));
    }
  }
  simtvm::Machine m(hp.program.image);
  simtvm::instrument(m, hp.program, mode);
  return simtvm::run_program(m, hp.program, grid, payloads);
}

}  // namespace testutil

#endif  // SIMTVM_TESTS_TEST_UTIL_HPP_
