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

#ifndef SIMTVM_CLI_HPP_
#define SIMTVM_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace simtvm {

inline constexpr int kExitClean = 0;
inline constexpr int kExitViolation = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the `simtvm` tool; `args` excludes the program name.
// Subcommands: run, disasm, gadgets, layout, craft.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace simtvm

#endif  // SIMTVM_CLI_HPP_
