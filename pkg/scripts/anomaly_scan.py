"""Finite-difference slope of log tau against the fitted Str(alpha a_1) on T2."""
import argparse

from torsionlab import corpus as C
from torsionlab.geometry import MetricPath
from torsionlab.torsion import anomaly_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=0.02)
    args = ap.parse_args()
    paths = {"conformal": {}, "diagonal-stretch": {"rates": [1.0, -0.3]}}
    print("path,flux,s0,finite_difference,predicted,relative_error")
    for flux in (1.0, 2.0):
        spec = C.t2_mass(flux=flux)
        for kind, params in paths.items():
            path = MetricPath(spec.geometry, kind, params)
            for s0 in (-0.3, 0.0, 0.3):
                r = anomaly_check(spec, path, s0, args.h, "heat-trace")
                print(f"{kind},{flux},{s0},{r.finite_difference:.10g},{r.predicted:.10g},{r.relative_error:.2e}")


if __name__ == "__main__":
    main()
