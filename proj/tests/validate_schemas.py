# Copyright 2026 The simtvm Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Runs the simtvm binary and validates its JSON outputs and exit codes."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema
import referencing

CLI = sys.argv[1]
SCHEMAS = pathlib.Path(sys.argv[2])

resources = {}
for path in SCHEMAS.glob("*.schema.json"):
    resources[path.name] = referencing.Resource.from_contents(json.loads(path.read_text()))
registry = referencing.Registry().with_resources(resources.items())


def validator(name):
    schema = resources[name].contents
    return jsonschema.Draft202012Validator(schema, registry=registry)


def run(*args, status):
    proc = subprocess.run([CLI, *args], capture_output=True, text=True)
    if proc.returncode != status:
        sys.exit(f"{' '.join(args)}: exit {proc.returncode}, wanted {status}\n{proc.stderr}")
    return proc.stdout


failures = 0


def check(name, doc, label):
    global failures
    errors = list(validator(name).iter_errors(doc))
    for e in errors:
        print(f"FAIL {label}: {e.message}")
    failures += bool(errors)
    if not errors:
        print(f"ok   {label}")


runs = [
    (["--program", "stack", "--payload", "benign-26"], 0),
    (["--program", "stack", "--payload", "exploit-27", "--grid", "2x3", "--trace"], 0),
    (["--program", "stack", "--payload", "exploit-27", "--sanitize", "cfi-callsite"], 1),
    (["--program", "heap", "--payload", "heap-fig2", "--grid", "1x4"], 0),
    (["--program", "heap", "--payload", "heap-fig2", "--sanitize", "bounds"], 1),
]
with tempfile.TemporaryDirectory() as tmp:
    for i, (args, status) in enumerate(runs):
        report = pathlib.Path(tmp) / f"report{i}.json"
        out = run("run", *args, "--output", "json", "--report", str(report), status=status)
        doc = json.loads(out)
        label = "run " + " ".join(args)
        check("launch.schema.json", doc, label)
        reports = json.loads(report.read_text())
        check("reports.schema.json", reports, label + " --report")
        if reports != doc["violations"]:
            print(f"FAIL {label}: --report differs from the embedded violations")
            failures += 1

for program in ("stack", "heap"):
    check("gadgets.schema.json", json.loads(run("gadgets", "--program", program, "--output", "json", status=0)),
          f"gadgets {program}")
    check("layout.schema.json", json.loads(run("layout", "--program", program, "--grid", "2x2", "--thread", "1,0",
                                               "--output", "json", status=0)), f"layout {program}")

run("layout", "--program", "stack", "--thread", "0,1", status=2)
run("disasm", "--program", "/nonexistent/listing.sass", status=2)

sys.exit(1 if failures else 0)
