"""Run every registered verification suite and write one JSON summary."""
import argparse
import json
import os
import time

from torsionlab.suites import SUITES


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/suites.json")
    ap.add_argument("--only", nargs="*", default=None, help="subset of suite names")
    args = ap.parse_args()
    names = args.only or list(SUITES)
    report = []
    for name in names:
        t0 = time.perf_counter()
        v = SUITES[name]()
        dt = time.perf_counter() - t0
        entry = v.to_json_dict() | {"seconds": round(dt, 2)}
        report.append(entry)
        print(f"{name:16s} pass={v.passed!s:5s} max_deviation={v.max_deviation:.3e} ({dt:.1f} s)")
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w") as fh:
        json.dump(report, fh, indent=2)


if __name__ == "__main__":
    main()
