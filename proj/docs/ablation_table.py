#!/usr/bin/env python3
"""Turns `omnivat ablate` output (stdin) into a markdown table.

    omnivat ablate --seeds 5 | python3 docs/ablation_table.py
"""
import json
import sys

summary = None
for line in sys.stdin:
    if line.strip():
        doc = json.loads(line)
        if doc.get("event") == "summary":
            summary = doc
if summary is None:
    sys.exit("no summary line on stdin")

print(f"| variant | generator | target acc | target macro-F1 | holdout acc | target margin |")
print("|---|---|---|---|---|---|")
for r in summary["rows"]:
    print(f"| {r['variant']} | {r['generator'] or '-'} | {100 * r['target_accuracy']:.1f} "
          f"| {100 * r['target_macro_f1']:.1f} | {100 * r['holdout_accuracy']:.1f} "
          f"| {r['target_cosine_margin']:.3f} |")
print(f"\nmean over {summary['seeds']} seed(s)")
