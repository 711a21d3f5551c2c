"""Named verification suites shared by the CLI and the acceptance tests."""
from __future__ import annotations

import math
import time
from fractions import Fraction
from typing import Callable

import numpy as np

from . import corpus as C
from .geometry import ComplexTorus, FlatTorus, MetricPath
from .special import kronecker_torsion, theta1_product, theta1_series
from .spectral import betti_numbers, heat_trace
from .torsion import (
    Verdict,
    analytic_torsion,
    anomaly_check,
    conjugation_family,
    covering_check,
    direct_sum_check,
    flux_continuity,
    gauge_sweep,
    metric_sweep,
    partition_from_specs,
    product_check,
    product_exponents,
    relative_metric_sweep,
    sweep_csv,
)
from .zeta import logdet_partial

SWEEP_SAMPLES = tuple(np.linspace(-0.4, 0.4, 9))
KRONECKER_POINTS = ((0.5, 0.0, 1j), (0.25, 0.25, 1j), (0.5, 0.0, 0.5 + 1j))
REL_CHARS = ((0.25, 0.0), (0.0, 0.25))


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def circle_suite(expected: float = 0.5 * math.log(2.0)) -> Verdict:
    spec = C.circle(0.25)
    heat, dt = _timed(lambda: analytic_torsion(spec, "heat-trace"))
    exact = analytic_torsion(spec, "exact")
    rel_heat = abs(math.exp(heat.log_tau) / math.exp(expected) - 1)
    rel_exact = abs(math.exp(exact.log_tau) / math.exp(expected) - 1)
    ok = rel_heat < 1e-4 and rel_exact < 1e-10 and dt < 5.0
    return Verdict("circle", spec.name, 2, max(rel_heat, rel_exact), 1e-4, ok,
                   details={"heat_rel": rel_heat, "exact_rel": rel_exact, "seconds": dt})


def kronecker_suite(points=KRONECKER_POINTS, tol: float = 1e-4) -> Verdict:
    rows, worst, slow = [], 0.0, 0.0
    for u, v, tau in points:
        tv, dt = _timed(lambda: analytic_torsion(C.dolbeault(u, v, tau), "heat-trace"))
        target = kronecker_torsion(u, v, tau)
        rel = abs(tv.tau / target - 1)
        rows.append((u, v, tau, tv.tau, target, rel, dt))
        worst, slow = max(worst, rel), max(slow, dt)
    return Verdict("kronecker", "dolbeault", len(rows), worst, tol, worst < tol and slow < 60, rows)


def theta_suite(tol: float = 1e-10) -> Verdict:
    ws = [0.1, 0.3 + 0.05j, 0.5, 0.7 - 0.1j, 1.2 + 0.2j]
    taus = [1j, 0.5 + 1j, -0.3 + 0.8j, 0.1 + 1.5j, 0.25 + 0.6j]
    dev = max(abs(theta1_product(w, t) - theta1_series(w, t)) for w in ws for t in taus)
    return Verdict("theta", "grid-5x5", 25, dev, tol, dev < tol)


def mckean_singer_suite(tol: float = 1e-8, ts=tuple(np.geomspace(0.05, 5.0, 6))) -> Verdict:
    worst, rows = 0.0, []
    for spec in C.corpus():
        chi = betti_numbers(spec).chi
        for t in ts:
            d = abs(heat_trace(spec, t).str - chi)
            worst = max(worst, d)
        rows.append((spec.name, chi))
    return Verdict("mckean-singer", "corpus", len(rows) * len(ts), worst, tol, worst < tol, rows)


def regularity_suite(tol: float = 1e-3) -> Verdict:
    worst, rows = 0.0, []
    for spec in C.corpus():
        for g in (0, 1):
            r = logdet_partial(spec, g, "heat-trace")
            worst = max(worst, abs(r.residue0))
            rows.append((spec.name, g, r.residue0))
    return Verdict("regularity", "corpus", len(rows), worst, tol, worst < tol, rows)


def odd_metric_paths():
    base = FlatTorus(C.GRAM_T3)
    return {
        "diagonal-stretch": MetricPath(base, "diagonal-stretch", {"rates": [1.0, -0.5, 0.25]}),
        "shear": MetricPath(base, "shear", {"indices": (0, 2)}),
    }


def odd_metric_suite(tol: float = 1e-4, threads: int | None = None,
                     paths=("diagonal-stretch", "shear")) -> Verdict:
    spec = C.t3_flux(1.0)
    all_paths = odd_metric_paths()
    worst, csvs = 0.0, {}
    for name in paths:
        v = metric_sweep(spec, all_paths[name], SWEEP_SAMPLES, tol, threads=threads)
        worst = max(worst, v.max_deviation)
        csvs[name] = sweep_csv(v.rows)
    return Verdict("odd-metric", spec.name, 9 * len(paths), worst, tol, worst < tol,
                   details={"csv": csvs})


def _even_paths(spec):
    g = spec.geometry
    if isinstance(g, ComplexTorus):
        # shear changes the complex structure, not just the metric
        return {"conformal": MetricPath(g, "conformal")}
    return {"conformal": MetricPath(g, "conformal"), "shear": MetricPath(g, "shear")}


def relative_suite(specs, tol: float = 1e-4, threads: int | None = None) -> Verdict:
    """Relative invariance; details record the individual conformal spread."""
    worst, indiv, rows = 0.0, 0.0, []
    for spec in specs:
        for name, path in _even_paths(spec).items():
            v = relative_metric_sweep(spec, path, *REL_CHARS, SWEEP_SAMPLES, tol, threads=threads)
            worst = max(worst, v.max_deviation)
            if name == "conformal":
                indiv = max(indiv, v.details["individual_deviation"])
            rows.append((spec.name, name, v.max_deviation, v.details["individual_deviation"]))
    return Verdict("relative-metric", "+".join(s.name for s in specs), len(rows) * 9,
                   worst, tol, worst < tol, rows, {"individual_conformal": indiv})


def stated_even_specs():
    return [C.t2_de_rham(), C.dolbeault(0.25, 0.0, 0.2 + 1.1j)]


def anomaly_suite(tol: float = 1e-3) -> Verdict:
    spec = C.t2_mass()
    rep = anomaly_check(spec, MetricPath(spec.geometry, "conformal"), 0.0, 0.02, "heat-trace")
    return Verdict("anomaly", spec.name, 4, rep.relative_error, tol, rep.relative_error < tol,
                   details={"finite_difference": rep.finite_difference, "predicted": rep.predicted,
                            "fitted": rep.fitted})


def functoriality_suite(tol: float = 1e-8) -> Verdict:
    checks = [direct_sum_check(C.circle(0.25), C.circle(0.5), "exact", tol),
              direct_sum_check(C.t2_de_rham(), C.t2_de_rham(char=(0.1, 0.45)), "exact", tol)]
    checks += [covering_check(0.3, n, tol=tol) for n in (2, 3, 5)]
    prod = product_check(C.circle(0.3), C.circle(0.15), method="heat-trace")
    k3 = product_exponents(0, 2) == (Fraction(2), Fraction(0))
    worst = max(c.max_deviation for c in checks)
    ok = all(c.passed for c in checks) and prod.passed and k3
    rows = [(c.suite, c.max_deviation) for c in checks] + [("product", prod.max_deviation), ("k3", k3)]
    return Verdict("functoriality", "", len(rows), worst, tol, ok, rows)


def gauge_suite(tol: float = 1e-4, threads: int | None = None) -> Verdict:
    spec = C.t3_superconnection()
    v = gauge_sweep(conjugation_family(spec, C.GAUGE_GENERATOR), np.linspace(0.0, 2.0, 9),
                    tol, threads=threads, name=spec.name)
    return v


def flux_suite(min_slope: float = 1.5) -> Verdict:
    rep = flux_continuity(lambda e: C.t2_mass(flux=e))
    return Verdict("flux", "t2-mass", len(rep.eps), rep.deviations[0], min_slope,
                   rep.passed(min_slope), details={"slope": rep.slope, "deviations": rep.deviations})


def partition_suite() -> Verdict:
    rows = []
    ok = True
    for conv in ("none", "hodge"):
        led = partition_from_specs(C.t3_flux(1.0), C.t3_flux(0.0), conv)
        ok &= all(isinstance(v, Fraction) for v in led.ghost_exponents_lhs.values())
        ok &= math.isfinite(led.log_Z)
        rows.append(led.to_json_dict())
    return Verdict("partition", "t3", 2, 0.0, 0.0, ok, rows)


SUITES: dict[str, Callable[..., Verdict]] = {
    "circle": circle_suite,
    "kronecker": kronecker_suite,
    "theta": theta_suite,
    "mckean-singer": mckean_singer_suite,
    "regularity": regularity_suite,
    "odd-metric": odd_metric_suite,
    "relative-metric": lambda **kw: relative_suite(stated_even_specs() + [C.t2_mass()], **kw),
    "anomaly": anomaly_suite,
    "functoriality": functoriality_suite,
    "gauge": gauge_suite,
    "flux": flux_suite,
    "partition": partition_suite,
}
