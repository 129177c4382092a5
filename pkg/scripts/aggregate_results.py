#!/usr/bin/env python3
"""
Recompute success-rate report cells from results.jsonl and compare them with
an existing report.csv.
"""

import argparse
import math
import sys
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from models.experiment import aggregate_results  # noqa: E402
from storage.service import storage_service  # noqa: E402

KEY_COLUMNS = ["epsilon", "optimizer", "termination", "part"]
VALUE_COLUMNS = ["attacked", "successes", "rate", "mean_conf", "mean_iters"]


def _same(a, b, tol: float = 1e-9) -> bool:
    a, b = float(a), float(b)
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    return abs(a - b) <= tol


def compare(results_path: str, report_path: str) -> int:
    """Return the number of report cells that disagree with the recomputation."""
    recomputed = aggregate_results(storage_service.load_results(results_path))
    recomputed_rows = {
        (c.epsilon, c.optimizer, c.termination, c.part): c.to_row() for c in recomputed.cells
    }
    report = storage_service.read_report(report_path)

    mismatches = 0
    for _, row in report.iterrows():
        key = (float(row["epsilon"]), row["optimizer"], row["termination"], row["part"])
        other = recomputed_rows.get(key)
        if other is None:
            if int(row["attacked"]) != 0:
                print(f"❌ {key}: in report with {row['attacked']} attacked, no results")
                mismatches += 1
            continue
        bad = [c for c in VALUE_COLUMNS if not _same(row[c], other[c])]
        if bad:
            print(f"❌ {key}: {', '.join(f'{c} {row[c]} != {other[c]}' for c in bad)}")
            mismatches += 1
    return mismatches


def main():
    parser = argparse.ArgumentParser(description="Re-aggregate attack results")
    parser.add_argument("results", help="results.jsonl")
    parser.add_argument("--report", help="report.csv to compare against")
    parser.add_argument("--out", help="Write the recomputed report CSV here")
    args = parser.parse_args()

    report = aggregate_results(storage_service.load_results(args.results))
    frame = report.to_frame()
    print(frame.to_string(index=False, na_rep="NA"))
    if args.out:
        storage_service.write_report(frame, args.out, "report")

    if args.report:
        mismatches = compare(args.results, args.report)
        if mismatches:
            print(f"❌ {mismatches} cells differ")
            return 1
        print("✅ report.csv matches results.jsonl")
    return 0


if __name__ == "__main__":
    sys.exit(main())
