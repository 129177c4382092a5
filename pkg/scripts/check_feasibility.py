#!/usr/bin/env python3
"""
Check the bone-scale box and mask invariants of every result in results.jsonl.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from storage.service import storage_service  # noqa: E402

TOLERANCE = 1e-12


def check(results_path: str) -> int:
    """Return the number of violating results."""
    violations = 0
    results = storage_service.load_results(results_path)
    for result in results:
        beta = result.final_beta
        deviation = float(np.max(np.abs(beta - 1.0))) if beta.size else 0.0
        if deviation > result.epsilon + TOLERANCE:
            print(f"❌ {result.sample_id} eps={result.epsilon}: |beta-1| = {deviation}")
            violations += 1
        if result.bone_mask is not None:
            outside = [b for b in range(beta.size) if b not in result.bone_mask]
            if np.any(beta[outside] != 1.0):
                print(f"❌ {result.sample_id} part={result.part}: masked bone moved")
                violations += 1
    print(f"Checked {len(results)} results, {violations} violations")
    return violations


def main():
    parser = argparse.ArgumentParser(description="Verify beta feasibility in results.jsonl")
    parser.add_argument("results", help="results.jsonl")
    args = parser.parse_args()
    return 1 if check(args.results) else 0


if __name__ == "__main__":
    sys.exit(main())
