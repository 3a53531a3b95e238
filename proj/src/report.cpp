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

// Text and JSON exports of launch results.

#include <sstream>

#include "json.hpp"
#include "simtvm/vm.hpp"

namespace simtvm {

namespace {

nlohmann::json report_to_json(const ViolationReport& r) {
  return {
      {"kind", violation_name(r.kind)},
      {"block", r.thread.block},
      {"thread", r.thread.thread},
      {"pc", hex(r.pc)},
      {"address", r.address ? nlohmann::json(hex(*r.address)) : nlohmann::json(nullptr)},
      {"detail", r.detail},
  };
}

}  // namespace

std::string trace_text(std::span<const StepEvent> trace) {
  std::ostringstream out;
  for (const auto& ev : trace) {
    out << "tid=" << ev.thread.block << ',' << ev.thread.thread << " pc=0x" << format_offset(ev.pc) << ' '
        << disassemble(ev.instruction) << '\n';
  }
  return out.str();
}

std::string reports_json(std::span<const ViolationReport> reports) {
  auto arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(report_to_json(r));
  return arr.dump(2);
}

std::string launch_json(const LaunchResult& result) {
  nlohmann::json doc;
  doc["grid"] = {{"blocks", result.grid.grid_dim}, {"threads", result.grid.block_dim}};
  auto returns = nlohmann::json::array();
  for (std::uint32_t b = 0; b < result.grid.grid_dim; ++b) {
    for (std::uint32_t t = 0; t < result.grid.block_dim; ++t) {
      if (result.grid.flat_index({b, t}) >= result.per_thread_return.size()) break;
      returns.push_back({{"block", b},
                         {"thread", t},
                         {"index", result.grid.flat_index({b, t})},
                         {"value", hex(result.value({b, t}))}});
    }
  }
  doc["returns"] = std::move(returns);
  auto log = nlohmann::json::array();
  for (const auto& p : result.output_log) {
    log.push_back({{"block", p.thread.block}, {"thread", p.thread.thread}, {"text", p.text}});
  }
  doc["log"] = std::move(log);
  auto violations = nlohmann::json::array();
  for (const auto& r : result.violations) violations.push_back(report_to_json(r));
  doc["violations"] = std::move(violations);
  doc["notes"] = result.notes;
  return doc.dump(2);
}

}  // namespace simtvm
