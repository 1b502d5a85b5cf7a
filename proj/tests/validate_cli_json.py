#!/usr/bin/env python3
"""Runs each omnivat command and validates every JSON line against docs/schemas."""
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

tool, schemas, table_script = sys.argv[1], pathlib.Path(sys.argv[2]), sys.argv[3]


def load(name):
    schema = json.loads((schemas / f"{name}.schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    return jsonschema.Draft202012Validator(schema)


def run(*args):
    proc = subprocess.run([tool, *args], capture_output=True, text=True)
    if proc.returncode != 0:
        sys.exit(f"{' '.join(args)} exited {proc.returncode}: {proc.stderr}")
    return proc.stdout


def lines(text):
    return [json.loads(l) for l in text.splitlines() if l.strip()]


failures = 0


def check(name, docs, validator):
    global failures
    for doc in docs:
        errors = list(validator.iter_errors(doc))
        for e in errors:
            print(f"FAIL {name}: {e.message} at {list(e.path)}")
        failures += bool(errors)
    print(f"{name}: {len(docs)} document(s) checked")


with tempfile.TemporaryDirectory() as tmp:
    d = pathlib.Path(tmp)
    small = ["--per-class", "8", "--targets", "2"]
    check("synth", lines(run("synth", "--out", str(d / "s"), *small)), load("synth"))
    check("train", lines(run("train", "--data", str(d / "s/source.ovem"), "--out",
                             str(d / "m.ovat"), "--epochs", "2")), load("train"))
    check("eval", lines(run("eval", "--checkpoint", str(d / "m.ovat"), str(d / "s/target_1.ovem"),
                            str(d / "s/target_2.ovem"), "--holdout", str(d / "s/source.ovem"))),
          load("eval"))
    ablate_out = run("ablate", "--epochs", "1", "--seeds", "2", "--generators", "dtg,parallel",
                     "--per-class", "8", "--targets", "1")
    ablate = load("ablate")
    check("ablate", lines(ablate_out), ablate)
    check("dump-config", [json.loads(run("dump-config"))], load("dump-config"))

    # The schemas must reject malformed output.
    bad = lines(ablate_out)[-1]
    bad["rows"][0]["variant"] = "full"
    if ablate.is_valid(bad):
        print("FAIL ablate schema accepted an unknown variant")
        failures += 1

    table = subprocess.run([sys.executable, table_script], input=ablate_out, capture_output=True,
                           text=True)
    if table.returncode != 0 or "+mffa+dtg" not in table.stdout:
        print(f"FAIL table post-processor: {table.stderr}")
        failures += 1

sys.exit(1 if failures else 0)
