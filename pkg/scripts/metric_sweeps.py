"""Metric sweeps: odd-dimensional invariance and even-dimensional relative invariance.

Writes one CSV per (spec, path) to --out and prints the spread of log tau
and of the relative torsion on each path.
"""
import argparse
import os

import numpy as np

from torsionlab import corpus as C
from torsionlab.geometry import MetricPath
from torsionlab.suites import REL_CHARS, odd_metric_paths, stated_even_specs
from torsionlab.torsion import metric_sweep, relative_metric_sweep, sweep_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/sweeps")
    ap.add_argument("--samples", type=int, default=9)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    s = np.linspace(-0.4, 0.4, args.samples)

    spec = C.t3_flux(1.0)
    for name, path in odd_metric_paths().items():
        v = metric_sweep(spec, path, s, threads=args.threads)
        open(os.path.join(args.out, f"t3-{name}.csv"), "w").write(sweep_csv(v.rows))
        print(f"T3 flux    {name:17s} spread log tau {v.max_deviation:.2e}")

    for spec in stated_even_specs() + [C.t2_mass()]:
        for kind in ("conformal", "shear"):
            try:
                path = MetricPath(spec.geometry, kind)
            except ValueError:
                continue
            v = relative_metric_sweep(spec, path, *REL_CHARS, s, threads=args.threads)
            open(os.path.join(args.out, f"{spec.name}-{kind}.csv"), "w").write(sweep_csv(v.rows))
            print(f"{spec.name:10s} {kind:17s} spread log ratio {v.max_deviation:.2e}, "
                  f"individual {v.details['individual_deviation']:.2e}")


if __name__ == "__main__":
    main()
