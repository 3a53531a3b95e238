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

#include "simtvm/cli.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "simtvm/exploit.hpp"
#include "simtvm/kernels.hpp"
#include "simtvm/sanitizer.hpp"
#include "simtvm/vm.hpp"

namespace simtvm {

namespace {

// Usage and IO problems that are not CLI11 parse errors.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Resolved {
  Program program;
  std::optional<StackProgramLayout> stack;
  std::optional<HeapProgramLayout> heap;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw UsageError("cannot write " + path);
}

Resolved resolve_program(const std::string& name) {
  Resolved r;
  if (name == "stack") {
    auto sp = build_stack_program();
    r.program = std::move(sp.program);
    r.stack = sp.layout;
  } else if (name == "heap") {
    auto hp = build_heap_program();
    r.program = std::move(hp.program);
    r.heap = hp.layout;
  } else {
    r.program.name = name;
    r.program.image = parse_listing(read_file(name));
  }
  return r;
}

GridConfig parse_grid(const std::string& text) {
  unsigned blocks = 0, threads = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%ux%u%c", &blocks, &threads, &tail) != 2 || blocks == 0 || threads == 0) {
    throw UsageError("grid must look like <blocks>x<threads>, got '" + text + "'");
  }
  return {blocks, threads};
}

ThreadId parse_thread(const std::string& text) {
  unsigned block = 0, thread = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%u,%u%c", &block, &thread, &tail) != 2) {
    throw UsageError("thread must look like <block>,<thread>, got '" + text + "'");
  }
  return {block, thread};
}

std::string hash_line(std::uint64_t index, std::uint64_t value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "Hash[%" PRIu64 "]: %016" PRIx64, index, value);
  return buf;
}

std::vector<Payload> resolve_payloads(const std::string& choice, const Resolved& r, GridConfig grid) {
  auto require = [&](bool ok, const char* program) {
    if (!ok) throw UsageError("payload " + choice + " needs --program " + program);
  };
  if (choice == "benign-26") {
    require(r.stack.has_value(), "stack");
    return {Payload::replicate(r.stack->dummy_entries[8], 26, 4)};
  }
  if (choice == "exploit-27") {
    require(r.stack.has_value(), "stack");
    return {craft_stack_payload(r.stack->dummy_entries[8], 27)};
  }
  if (choice == "heap-fig2") {
    require(r.heap.has_value(), "heap");
    std::vector<Payload> out;
    for (std::uint32_t b = 0; b < grid.grid_dim; ++b) {
      for (std::uint32_t t = 0; t < grid.block_dim; ++t) {
        out.push_back(
            craft_heap_payload(r.heap->secret_entry, predict_heap_address(*r.heap, grid, {b, t}, 0), *r.heap));
      }
    }
    return out;
  }
  return {payload_from_text(read_file(choice))};
}

Sanitize parse_sanitize(const std::string& s) {
  if (s == "bounds") return Sanitize::kBounds;
  if (s == "cfi-entry") return Sanitize::kCfiEntry;
  if (s == "cfi-callsite") return Sanitize::kCfiCallsite;
  return Sanitize::kOff;
}

std::string violation_line(const ViolationReport& v) {
  std::ostringstream line;
  line << "violation: " << violation_name(v.kind) << " tid=" << v.thread.block << ',' << v.thread.thread
       << " pc=0x" << format_offset(v.pc);
  if (v.address) line << " addr=" << hex(*v.address);
  if (!v.detail.empty()) line << " " << v.detail;
  return line.str();
}

struct RunOptions {
  std::string program = "stack";
  std::string grid = "1x1";
  std::string payload;
  bool admin = false;
  std::string sanitize = "off";
  std::string output = "text";
  bool trace = false;
  std::string report;
};

int cmd_run(const RunOptions& o, std::ostream& out) {
  Resolved r = resolve_program(o.program);
  const GridConfig grid = parse_grid(o.grid);
  std::vector<Payload> payloads = resolve_payloads(o.payload, r, grid);
  if (!r.stack && !r.heap) r.program.input_width = payloads.front().word_width;

  MachineConfig config;
  config.trace = o.trace;
  Machine machine(r.program.image, config);
  instrument(machine, r.program, parse_sanitize(o.sanitize));
  ProgramRun run = run_program(machine, r.program, grid, payloads, o.admin);
  const LaunchResult& res = run.launch;

  if (!o.report.empty()) write_file(o.report, reports_json(res.violations) + "\n");

  if (o.output == "json") {
    auto doc = nlohmann::json::parse(launch_json(res));
    doc["program"] = r.program.name;
    if (o.trace) {
      auto lines = nlohmann::json::array();
      std::istringstream in(trace_text(res.trace));
      for (std::string line; std::getline(in, line);) lines.push_back(line);
      doc["trace"] = std::move(lines);
    }
    out << doc.dump(2) << '\n';
  } else {
    if (o.trace) out << trace_text(res.trace);
    for (const auto& p : res.output_log) out << p.text;
    if (!res.output_log.empty() && !res.output_log.back().text.ends_with('\n')) out << '\n';
    for (std::uint64_t i = 0; i < res.per_thread_return.size(); ++i) {
      out << hash_line(i, res.per_thread_return[i]) << '\n';
    }
    for (const auto& v : res.violations) out << violation_line(v) << '\n';
    for (const auto& n : res.notes) out << "note: " << n << '\n';
  }
  return res.violations.empty() ? kExitClean : kExitViolation;
}

int cmd_disasm(const std::string& program, std::ostream& out) {
  out << emit_listing(resolve_program(program).program.image);
  return kExitClean;
}

int cmd_gadgets(const std::string& program, std::size_t max_len, const std::string& output, std::ostream& out) {
  const auto gadgets = scan_gadgets(resolve_program(program).program.image, max_len);
  if (output == "json") {
    auto arr = nlohmann::json::array();
    for (const auto& g : gadgets) {
      auto insts = nlohmann::json::array();
      for (const auto& i : g.instructions) insts.push_back(disassemble(i));
      arr.push_back({{"start", hex(g.start)}, {"end", hex(g.end())}, {"length", g.length}, {"instructions", insts}});
    }
    out << arr.dump(2) << '\n';
    return kExitClean;
  }
  for (const auto& g : gadgets) {
    out << "0x" << format_offset(g.start) << "  0x" << format_offset(g.end()) << "  " << g.length << "  ";
    for (std::size_t i = 0; i < g.instructions.size(); ++i) {
      out << (i ? "; " : "") << disassemble(g.instructions[i]);
    }
    out << '\n';
  }
  return kExitClean;
}

struct LayoutRow {
  std::string region;
  std::int64_t index;
  std::uint64_t address;
  std::string role;
};

std::string buf_rel(std::int64_t bytes) {
  return bytes < 0 ? "buf-" + std::to_string(-bytes) : "buf+" + std::to_string(bytes);
}

std::vector<LayoutRow> stack_rows(const StackProgramLayout& L, const CodeImage& image) {
  std::vector<LayoutRow> rows;
  for (std::uint32_t i = 0; i < StackProgramLayout::kBufWords; ++i) {
    rows.push_back({"LOCAL", std::int64_t{i}, encode({Space::kLocal, L.buf_offset + 4 * i}),
                    "buf[" + std::to_string(i) + "] @ " + buf_rel(4 * i)});
  }
  for (std::uint32_t k = 0; k < StackProgramLayout::kSlots; ++k) {
    const std::int64_t rel = 4 * StackProgramLayout::kBufWords + 8 * k;
    const CodeOffset target = L.dummy_entries[k];
    const auto sym = image.symbol_at(target);
    rows.push_back({"LOCAL", std::int64_t{StackProgramLayout::kBufWords + 2 * k}, encode({Space::kLocal, L.buf_offset + rel}),
                    "fp[" + std::to_string(k) + "] @ " + buf_rel(rel) + " -> " + (sym ? *sym : hex(target)) + " " +
                        hex(target)});
  }
  return rows;
}

std::vector<LayoutRow> heap_rows(const HeapProgramLayout& L, const CodeImage& image, GridConfig grid,
                                 ThreadId thread) {
  const std::uint64_t buf = predict_heap_address(L, grid, thread, 0);
  const std::uint64_t obj = predict_heap_address(L, grid, thread, 1);
  auto row = [&](std::int64_t index, const std::string& role) {
    return LayoutRow{"GLOBAL heap", index, buf + 8 * index, role + " @ " + buf_rel(8 * index)};
  };
  std::vector<LayoutRow> rows;
  rows.push_back(row(-2, "buf header size"));
  rows.push_back(row(-1, "buf header state"));
  for (std::uint32_t i = 0; i < L.buf_words; ++i) rows.push_back(row(i, "buf[" + std::to_string(i) + "]"));
  const auto field = static_cast<std::int64_t>((obj - buf) / 8);
  rows.push_back(row(field - 2, "object header size"));
  rows.push_back(row(field - 1, "object header state"));
  rows.push_back(row(field, "object vtable field"));
  for (std::size_t k = 0; k < L.method_entries.size(); ++k) {
    const CodeOffset target = L.method_entries[k];
    const auto sym = image.symbol_at(target);
    rows.push_back({"GLOBAL static", static_cast<std::int64_t>(k),
                    encode({Space::kGlobal, L.class_vtable_offset + 8 * k}),
                    "vtable[" + std::to_string(k) + "] -> " + (sym ? *sym : hex(target)) + " " + hex(target)});
  }
  return rows;
}

int cmd_layout(const std::string& program, const std::string& grid_text, const std::string& thread_text,
               const std::string& output, std::ostream& out) {
  Resolved r = resolve_program(program);
  const GridConfig grid = parse_grid(grid_text);
  const ThreadId thread = parse_thread(thread_text);
  if (!grid.contains(thread)) throw UsageError("thread " + thread_text + " is outside grid " + grid_text);
  std::vector<LayoutRow> rows;
  if (r.stack) {
    rows = stack_rows(*r.stack, r.program.image);
  } else if (r.heap) {
    rows = heap_rows(*r.heap, r.program.image, grid, thread);
  } else {
    throw UsageError("layout needs --program stack or heap");
  }
  if (output == "json") {
    auto arr = nlohmann::json::array();
    for (const auto& row : rows) {
      arr.push_back({{"region", row.region}, {"index", row.index}, {"address", hex(row.address)}, {"role", row.role}});
    }
    nlohmann::json doc{{"program", r.program.name},
                       {"block", thread.block},
                       {"thread", thread.thread},
                       {"rows", std::move(arr)}};
    out << doc.dump(2) << '\n';
    return kExitClean;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-14s %5s  %-13s  %s\n", "region", "word", "address", "role");
  out << buf;
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%-14s %5" PRId64 "  %-13s  ", row.region.c_str(), row.index,
                  hex(row.address).c_str());
    out << buf << row.role << '\n';
  }
  return kExitClean;
}

struct CraftOptions {
  std::string program = "stack";
  std::string target;
  std::uint32_t words = 27;
  std::string grid = "1x1";
  std::string thread = "0,0";
  std::int64_t base_delta = 0;
  std::string out_path;
};

int cmd_craft(const CraftOptions& o, std::ostream& out) {
  Resolved r = resolve_program(o.program);
  Payload p;
  if (r.stack) {
    CodeOffset target = r.stack->dummy_entries[8];
    if (!o.target.empty()) {
      if (auto sym = r.program.image.symbol(o.target)) {
        target = *sym;
      } else {
        try {
          target = std::stoull(o.target, nullptr, 0);
        } catch (const std::exception&) {
          throw UsageError("unknown target '" + o.target + "'");
        }
      }
    }
    p = craft_stack_payload(target, o.words);
  } else if (r.heap) {
    const GridConfig grid = parse_grid(o.grid);
    const ThreadId thread = parse_thread(o.thread);
    if (!grid.contains(thread)) throw UsageError("thread " + o.thread + " is outside grid " + o.grid);
    const std::uint64_t base = predict_heap_address(*r.heap, grid, thread, 0) + o.base_delta;
    p = craft_heap_payload(r.heap->secret_entry, base, *r.heap);
  } else {
    throw UsageError("craft needs --program stack or heap");
  }
  if (o.out_path.empty()) {
    out << payload_to_text(p);
  } else {
    write_file(o.out_path, payload_to_text(p));
  }
  return kExitClean;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deterministic SIMT sandbox: run, attack and inspect the bundled guests", "simtvm"};
  app.require_subcommand(1);

  const std::vector<std::string> sanitize_modes = {"off", "bounds", "cfi-entry", "cfi-callsite"};
  const std::vector<std::string> outputs = {"text", "json"};

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Launch test_kernel over a grid");
  run_cmd->add_option("--program", run.program, "stack, heap, or a listing file")->capture_default_str();
  run_cmd->add_option("--grid", run.grid, "<blocks>x<threads>")->capture_default_str();
  run_cmd->add_option("--payload", run.payload, "benign-26, exploit-27, heap-fig2, or a payload file")->required();
  run_cmd->add_flag("--admin", run.admin, "Set *admin to 1");
  run_cmd->add_option("--sanitize", run.sanitize)->check(CLI::IsMember(sanitize_modes))->capture_default_str();
  run_cmd->add_option("--output", run.output)->check(CLI::IsMember(outputs))->capture_default_str();
  run_cmd->add_flag("--trace", run.trace, "Print every executed instruction");
  run_cmd->add_option("--report", run.report, "Write the violation reports as JSON to this file");

  std::string program = "stack";
  auto* disasm_cmd = app.add_subcommand("disasm", "Print a program as a listing");
  disasm_cmd->add_option("--program", program)->capture_default_str();

  std::size_t max_len = kDefaultGadgetLength;
  std::string output = "text";
  auto* gadgets_cmd = app.add_subcommand("gadgets", "List RET/BRX-terminated straight-line runs");
  gadgets_cmd->add_option("--program", program)->capture_default_str();
  gadgets_cmd->add_option("--max-len", max_len)->check(CLI::PositiveNumber)->capture_default_str();
  gadgets_cmd->add_option("--output", output)->check(CLI::IsMember(outputs))->capture_default_str();

  std::string grid = "1x1";
  std::string thread = "0,0";
  auto* layout_cmd = app.add_subcommand("layout", "Show the memory layout of unsafe's buffers");
  layout_cmd->add_option("--program", program)->capture_default_str();
  layout_cmd->add_option("--grid", grid)->capture_default_str();
  layout_cmd->add_option("--thread", thread, "<block>,<thread>")->capture_default_str();
  layout_cmd->add_option("--output", output)->check(CLI::IsMember(outputs))->capture_default_str();

  CraftOptions craft;
  auto* craft_cmd = app.add_subcommand("craft", "Write an attack payload file");
  craft_cmd->add_option("--program", craft.program)->capture_default_str();
  craft_cmd->add_option("--target", craft.target, "Stack: code offset or symbol (default dummy9)");
  craft_cmd->add_option("--words", craft.words, "Stack: payload length")->capture_default_str();
  craft_cmd->add_option("--grid", craft.grid)->capture_default_str();
  craft_cmd->add_option("--thread", craft.thread)->capture_default_str();
  craft_cmd->add_option("--base-delta", craft.base_delta, "Heap: bytes added to the predicted buf base");
  craft_cmd->add_option("--out", craft.out_path, "Output file (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitClean : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run, out);
    if (*disasm_cmd) return cmd_disasm(program, out);
    if (*gadgets_cmd) return cmd_gadgets(program, max_len, output, out);
    if (*layout_cmd) return cmd_layout(program, grid, thread, output, out);
    if (*craft_cmd) return cmd_craft(craft, out);
  } catch (const std::exception& e) {
    err << "simtvm: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace simtvm
