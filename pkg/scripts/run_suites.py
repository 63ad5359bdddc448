#!/usr/bin/env python3
"""Run every verification suite and write CSV/JSON reports under --out."""
import argparse
import os
import time

from semot import theory


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="reports")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    suites = [
        ("invariance", lambda: theory.run_invariance_suite(args.seed, 1000, args.threads)),
        ("stability", lambda: theory.run_stability_suite(args.seed, 500, args.threads)),
        ("recovery", lambda: theory.run_recovery_suite(args.seed, 500, args.threads)),
        ("constants", lambda: theory.run_constants_suite(args.seed, 200, args.threads)),
    ]
    failed = 0
    for name, run in suites:
        start = time.perf_counter()
        rep = run()
        rep.write(os.path.join(args.out, name))
        failed += not rep.passed
        print(f"{'PASS' if rep.passed else 'FAIL'} {name}: {rep.violations}/{rep.trials} violations "
              f"({time.perf_counter() - start:.1f}s)")
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
