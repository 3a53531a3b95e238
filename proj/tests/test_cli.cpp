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

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "simtvm/cli.hpp"
#include "test_util.hpp"

using namespace simtvm;

namespace {

struct Outcome {
  int status;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int status = run_cli(args, out, err);
  return {status, out.str(), err.str()};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("simtvm_cli_test_" + name)).string();
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("run benign-26") {
  auto r = cli({"run", "--program", "stack", "--payload", "benign-26", "--grid", "1x1"});
  CHECK(r.status == kExitClean);
  CHECK(r.out == "Hash[0]: 6666666666666666\n");
}

TEST_CASE("run exploit-27") {
  auto r = cli({"run", "--program", "stack", "--payload", "exploit-27", "--grid", "1x1"});
  CHECK(r.status == kExitClean);
  CHECK(r.out == "HELLO ADMIN!\nHash[0]: 9999999999999999\n");
}

TEST_CASE("run heap-fig2") {
  auto plain = cli({"run", "--program", "heap", "--payload", "heap-fig2", "--grid", "1x2"});
  CHECK(plain.status == kExitClean);
  CHECK(contains(plain.out, "HELLO ADMIN! HELLO ADMIN! HELLO ADMIN! HELLO ADMIN! HELLO ADMIN! "));
  CHECK(contains(plain.out, "Hash[1]: 9999999999999999"));
  auto checked = cli({"run", "--program", "heap", "--payload", "heap-fig2", "--sanitize", "bounds"});
  CHECK(checked.status == kExitViolation);
  CHECK(contains(checked.out, "violation: OOB_WRITE"));
}

TEST_CASE("run sanitizer modes and JSON") {
  auto blocked = cli({"run", "--payload", "exploit-27", "--sanitize", "cfi-callsite", "--output", "json"});
  CHECK(blocked.status == kExitViolation);
  auto doc = nlohmann::json::parse(blocked.out);
  CHECK(doc["violations"][0]["kind"] == "CFI_VIOLATION");
  CHECK(doc["violations"][0]["pc"] == "0x3e8");
  CHECK(doc["log"].empty());
  CHECK(doc["program"] == "stack");

  auto entry = cli({"run", "--payload", "exploit-27", "--sanitize", "cfi-entry"});
  CHECK(entry.status == kExitClean);
  CHECK(contains(entry.out, "HELLO ADMIN!"));
}

TEST_CASE("text and JSON carry the same returns") {
  auto text = cli({"run", "--payload", "benign-26", "--grid", "2x2"});
  auto json = cli({"run", "--payload", "benign-26", "--grid", "2x2", "--output", "json"});
  auto doc = nlohmann::json::parse(json.out);
  REQUIRE(doc["returns"].size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    char line[64];
    std::snprintf(line, sizeof line, "Hash[%zu]: %016llx", i,
                  static_cast<unsigned long long>(std::stoull(doc["returns"][i]["value"].get<std::string>(), nullptr, 16)));
    CHECK(contains(text.out, line));
  }
}

TEST_CASE("run --admin, --trace and --report") {
  auto admin = cli({"run", "--payload", "benign-26", "--admin"});
  CHECK(admin.out == "HELLO ADMIN!\nHash[0]: 9999999999999999\n");
  auto traced = cli({"run", "--payload", "exploit-27", "--trace"});
  CHECK(contains(traced.out, "pc=0x03e8 BRX R0 -0x3f0\ntid=0,0 pc=0x04e0 MOV32I R4, 0x0"));
  const std::string report = temp_path("report.json");
  auto reported = cli({"run", "--payload", "exploit-27", "--sanitize", "bounds", "--report", report});
  CHECK(reported.status == kExitViolation);
  auto doc = nlohmann::json::parse(testutil::read_text(report));
  REQUIRE(doc.size() == 1);
  CHECK(doc[0]["kind"] == "OOB_WRITE");
  std::filesystem::remove(report);
}

TEST_CASE("run usage errors exit 2") {
  CHECK(cli({}).status == kExitUsage);
  CHECK(cli({"run"}).status == kExitUsage);  // --payload is required
  CHECK(cli({"run", "--payload", "heap-fig2"}).status == kExitUsage);
  CHECK(cli({"run", "--program", "heap", "--payload", "exploit-27"}).status == kExitUsage);
  CHECK(cli({"run", "--payload", "benign-26", "--grid", "0x4"}).status == kExitUsage);
  CHECK(cli({"run", "--payload", "benign-26", "--grid", "banana"}).status == kExitUsage);
  CHECK(cli({"run", "--payload", "benign-26", "--sanitize", "magic"}).status == kExitUsage);
  CHECK(cli({"run", "--payload", "/nonexistent/payload.txt"}).status == kExitUsage);
  CHECK(cli({"run", "--program", "/nonexistent.sass", "--payload", "benign-26"}).status == kExitUsage);
  CHECK(cli({"frobnicate"}).status == kExitUsage);
  auto help = cli({"--help"});
  CHECK(help.status == kExitClean);
  CHECK(contains(help.out, "run"));
}

TEST_CASE("run with payload and listing files") {
  const std::string payload = temp_path("payload.txt");
  auto crafted = cli({"craft", "--program", "stack", "--target", "dummy9", "--words", "27", "--out", payload});
  REQUIRE(crafted.status == kExitClean);
  auto r = cli({"run", "--program", "stack", "--payload", payload});
  CHECK(r.out == "HELLO ADMIN!\nHash[0]: 9999999999999999\n");

  const std::string listing = temp_path("stack.sass");
  {
    std::ofstream(listing) << cli({"disasm", "--program", "stack"}).out;
  }
  auto from_file = cli({"run", "--program", listing, "--payload", payload});
  CHECK(from_file.out == r.out);
  auto callsite = cli({"run", "--program", listing, "--payload", payload, "--sanitize", "cfi-callsite"});
  CHECK(callsite.status == kExitUsage);  // a listing file carries no callsite policy
  std::filesystem::remove(payload);
  std::filesystem::remove(listing);
}

TEST_CASE("craft heap payloads") {
  auto r = cli({"craft", "--program", "heap", "--grid", "1x1", "--thread", "0,0"});
  CHECK(r.status == kExitClean);
  auto p = payload_from_text(r.out);
  CHECK(p.declared_len == 15);
  CHECK(p.words[0] == 0xb0513f920ULL + 88);
  CHECK(cli({"craft", "--program", "stack", "--words", "26"}).status == kExitUsage);
  CHECK(cli({"craft", "--program", "stack", "--target", "nowhere"}).status == kExitUsage);
}

TEST_CASE("disasm") {
  auto stack = cli({"disasm", "--program", "stack"});
  CHECK(stack.status == kExitClean);
  CHECK(contains(stack.out, "/*04e0*/  MOV32I R4, 0x0;\n"));
  CHECK(contains(stack.out, "/*03e8*/  BRX R0 -0x3f0;\n"));
  auto heap = cli({"disasm", "--program", "heap"});
  CHECK(parse_listing(heap.out) == build_heap_program().program.image);
  CHECK(cli({"disasm", "--program", "/no/such/file"}).status == kExitUsage);
}

TEST_CASE("gadgets") {
  auto one = cli({"gadgets", "--program", "stack", "--max-len", "1"});
  CHECK(one.status == kExitClean);
  std::istringstream lines(one.out);
  std::size_t n = 0;
  for (std::string line; std::getline(lines, line); ++n) {
    CHECK((line.ends_with("RET") || contains(line, "BRX")));
  }
  std::size_t sites = 0;
  for (const auto& [off, inst] : build_stack_program().program.image.instructions) {
    sites += inst.opcode == Opcode::kRet || inst.opcode == Opcode::kBrx;
  }
  CHECK(n == sites);
  auto all = cli({"gadgets", "--program", "stack"});
  CHECK(contains(all.out, "0x04e0  0x0520  9  MOV32I R4, 0x0;"));
  auto json = nlohmann::json::parse(cli({"gadgets", "--program", "stack", "--output", "json"}).out);
  CHECK_FALSE(json.empty());

  const std::string empty = temp_path("empty.sass");
  std::ofstream(empty) << "";
  auto none = cli({"gadgets", "--program", empty});
  CHECK(none.status == kExitClean);
  CHECK(none.out.empty());
  std::filesystem::remove(empty);
}

TEST_CASE("layout") {
  auto heap = cli({"layout", "--program", "heap", "--thread", "0,0"});
  CHECK(heap.status == kExitClean);
  CHECK(contains(heap.out, "object vtable field @ buf+80"));
  CHECK(contains(heap.out, "0xb0513f970"));
  auto stack = cli({"layout", "--program", "stack"});
  CHECK(contains(stack.out, "fp[0] @ buf+64"));
  CHECK(contains(stack.out, "fp[5] @ buf+104 -> dummy6 0x490"));
  CHECK(cli({"layout", "--program", "heap", "--grid", "1x2", "--thread", "0,2"}).status == kExitUsage);
  auto json = nlohmann::json::parse(cli({"layout", "--program", "heap", "--grid", "2x2", "--thread", "1,1",
                                         "--output", "json"}).out);
  CHECK(json["block"] == 1);
  CHECK_FALSE(json["rows"].empty());
}
