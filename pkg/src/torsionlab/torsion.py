"""Analytic torsion and the theorem suites built on it."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .complexes import (
    ComplexSpec,
    ModeFamily,
    alpha_operator_fibre,
    box_product,
    build_family,
    direct_sum,
    grade_swap,
)
from .geometry import ComplexTorus, FlatTorus, MetricPath
from .reduce import ordered_map
from .spectral import betti_numbers, fit_window, radius_for, small_time_fit, weighted_table
from .zeta import HeatSettings, ZetaResult, logdet_partial

BASIS_NOTE = ("coefficient of the orthonormal harmonic volume element eta0 ⊗ eta1^{-1}")


class SuiteError(ValueError):
    pass


# --------------------------------------------------------------------------
# torsion values

@dataclass(frozen=True)
class TorsionValue:
    log_tau: float
    acyclic: bool
    err: float
    grades: tuple[ZetaResult, ZetaResult]
    basis_note: str = BASIS_NOTE

    @property
    def tau(self) -> float:
        return math.exp(self.log_tau)

    def to_json_dict(self) -> dict:
        return {
            "log_tau": format(self.log_tau, ".17g"),
            "acyclic": self.acyclic,
            "err": format(self.err, ".17g"),
            "basis_note": self.basis_note,
            "grades": [g.to_json_dict() for g in self.grades],
        }


def _family(x) -> ModeFamily:
    return x if isinstance(x, ModeFamily) else build_family(x)


def analytic_torsion(spec_or_family, method: str = "auto",
                     settings: HeatSettings | None = None) -> TorsionValue:
    """log tau = (log Det' D0^†D0 - log Det' D1^†D1) / 2."""
    fam = _family(spec_or_family)
    cache: dict = {}
    z0 = logdet_partial(fam, 0, method, settings, cache=cache)
    z1 = logdet_partial(fam, 1, method, settings, cache=cache)
    b = betti_numbers(fam)
    log_tau = 0.5 * (z0.log_det_prime - z1.log_det_prime)
    return TorsionValue(float(log_tau), b.b0 == 0 and b.b1 == 0,
                        0.5 * (z0.err + z1.err), (z0, z1))


@dataclass(frozen=True)
class RelativeTorsion:
    log_ratio: float
    chars: tuple[tuple[float, ...], tuple[float, ...]]
    err: float


def relative_torsion(spec: ComplexSpec, u1: Sequence[float], u2: Sequence[float],
                     method: str = "auto", settings: HeatSettings | None = None) -> RelativeTorsion:
    if len(u1) != len(u2):
        raise SuiteError("characters must have equal dimension")
    if tuple(u1) == tuple(u2):
        return RelativeTorsion(0.0, (tuple(u1), tuple(u2)), 0.0)
    a = analytic_torsion(spec.with_char(u1), method, settings)
    b = analytic_torsion(spec.with_char(u2), method, settings)
    return RelativeTorsion(a.log_tau - b.log_tau, (tuple(u1), tuple(u2)), a.err + b.err)


# --------------------------------------------------------------------------
# verdicts

@dataclass
class Verdict:
    suite: str
    spec_id: str
    samples: int
    max_deviation: float
    tolerance: float
    passed: bool
    rows: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {"suite": self.suite, "spec_id": self.spec_id, "samples": self.samples,
                "max_deviation": format(self.max_deviation, ".17g"),
                "tolerance": format(self.tolerance, ".17g"), "pass": self.passed}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


SWEEP_COLUMNS = ("index", "s", "log_tau", "err")


def sweep_csv(rows: Sequence[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for i, row in enumerate(rows):
        w.writerow([i] + [format(float(x), ".17g") for x in row])
    return buf.getvalue()


def _spread(values: Sequence[float]) -> float:
    return float(max(values) - min(values)) if len(values) else 0.0


# --------------------------------------------------------------------------
# functoriality

def direct_sum_check(spec1, spec2, method: str = "exact", tol: float = 1e-8) -> Verdict:
    f1, f2 = _family(spec1), _family(spec2)
    lhs = analytic_torsion(direct_sum(f1, f2), method).log_tau
    rhs = analytic_torsion(f1, method).log_tau + analytic_torsion(f2, method).log_tau
    dev = abs(lhs - rhs)
    return Verdict("direct-sum", "", 2, dev, tol, dev < tol, details={"lhs": lhs, "rhs": rhs})


def circle_spec(u: float, length: float = 1.0) -> ComplexSpec:
    from .complexes import ConstantForm, TwistedDeRham
    from .geometry import Character
    return ComplexSpec(TwistedDeRham(ConstantForm.zero(1)), FlatTorus([[length ** 2]]),
                       Character((u,)), name=f"circle(u={u}, L={length})")


def covering_check(u: float, fold: int, length: float = 1.0, method: str = "exact",
                   tol: float = 1e-8) -> Verdict:
    """n-fold cover S^1(n L) -> S^1(L): tau(cover, u) = prod_k tau(base, (u + k) / n)."""
    if fold < 1:
        raise SuiteError("fold must be a positive integer")
    lhs = analytic_torsion(circle_spec(u, fold * length), method).log_tau
    rhs = math.fsum(analytic_torsion(circle_spec((u + k) / fold, length), method).log_tau
                    for k in range(fold))
    dev = abs(lhs - rhs)
    return Verdict("covering", f"circle(u={u})", fold, dev, tol, dev < tol,
                   details={"lhs": lhs, "rhs": rhs})


def product_exponents(chi1, chi2) -> tuple[Fraction, Fraction]:
    """Exponents (a, b) in log tau(X1 x X2) = a log tau(X1) + b log tau(X2)."""
    return Fraction(chi2), Fraction(chi1)


def product_check(spec1, spec2, chi1: int | None = None, chi2: int | None = None,
                  method: str = "auto", settings: HeatSettings | None = None) -> Verdict:
    f1, f2 = _family(spec1), _family(spec2)
    if chi1 is None:
        chi1 = betti_numbers(f1).chi
    if chi2 is None:
        chi2 = betti_numbers(f2).chi
    a, b = product_exponents(chi1, chi2)
    prod = analytic_torsion(box_product(f1, f2), method, settings)
    t1 = analytic_torsion(f1, method, settings).log_tau if a else 0.0
    t2 = analytic_torsion(f2, method, settings).log_tau if b else 0.0
    pred = float(a) * t1 + float(b) * t2
    dev = abs(prod.log_tau - pred)
    tol = max(2 * prod.err, 1e-12)
    return Verdict("product", "", 1, dev, tol, dev < tol,
                   details={"log_tau": prod.log_tau, "predicted": pred, "err": prod.err})


# --------------------------------------------------------------------------
# metric dependence

def _spec_on(spec: ComplexSpec, path: MetricPath, s: float) -> ComplexSpec:
    return spec.with_geometry(path.at(s))


def metric_sweep(spec: ComplexSpec, path: MetricPath, samples: Sequence[float],
                 tol: float = 1e-4, method: str = "auto", threads: int | None = None,
                 settings: HeatSettings | None = None) -> Verdict:
    """log tau along a metric path; invariance is asserted for odd n only."""
    if spec.n % 2 == 0:
        raise SuiteError("even-dimensional torsion depends on the metric (anomaly); "
                         "use relative_metric_sweep with two characters")

    def run(s):
        tv = analytic_torsion(_spec_on(spec, path, s), method, settings)
        if not tv.acyclic:
            raise SuiteError("metric sweeps need an acyclic complex")
        return (s, tv.log_tau, tv.err)

    rows = ordered_map(run, list(samples), threads)
    dev = _spread([r[1] for r in rows])
    return Verdict("metric", spec.name, len(rows), dev, tol, dev < tol, rows)


def relative_metric_sweep(spec: ComplexSpec, path: MetricPath, u1, u2,
                          samples: Sequence[float], tol: float = 1e-4, method: str = "auto",
                          threads: int | None = None,
                          settings: HeatSettings | None = None) -> Verdict:
    """Relative torsion along a path; also records the individual log tau spread."""

    def run(s):
        sp = _spec_on(spec, path, s)
        a = analytic_torsion(sp.with_char(u1), method, settings)
        b = analytic_torsion(sp.with_char(u2), method, settings)
        return (s, a.log_tau - b.log_tau, a.err + b.err, a.log_tau, b.log_tau)

    rows = ordered_map(run, list(samples), threads)
    dev = _spread([r[1] for r in rows])
    indiv = max(_spread([r[3] for r in rows]), _spread([r[4] for r in rows]))
    return Verdict("relative-metric", spec.name, len(rows), dev, tol, dev < tol,
                   [r[:3] for r in rows], {"individual_deviation": indiv})


def weighted_t0_coefficient(fam: ModeFamily, alpha: np.ndarray,
                            settings: HeatSettings | None = None) -> tuple[float, float]:
    """t^0 coefficient of the small-time expansion of Str(alpha e^{-tL}), and a spread estimate."""
    settings = settings or HeatSettings()
    n = fam.n
    t_lo, t_hi = fit_window(fam, settings.margin, settings.ratio)
    scale = max(1.0, float(np.max(np.abs(alpha))))
    radius = radius_for(fam, t_lo, settings.tol / scale)
    mu, w = weighted_table(fam, alpha, radius)
    order = int(math.ceil(n / 2)) + settings.extra_order

    def coeff(ts, k):
        vals = [float(np.sum(w * np.exp(-t * mu))) for t in ts]
        return small_time_fit(ts, vals, n, k).coefficient_at_power(0.0)

    c1 = coeff(np.geomspace(t_lo, t_hi, settings.samples), order)
    c2 = coeff(np.geomspace(t_lo * 1.5, t_hi * 1.2, settings.samples + 4), order + 1)
    return c1, abs(c1 - c2)


# d/ds log tau = ANOMALY_FACTOR * Str(alpha a_{n/2}) with tau = Det'(D0^†D0)^{1/2}
# Det'(D1^†D1)^{-1/2} and alpha = S^{-1} dS/ds on the fibre.
ANOMALY_FACTOR = -0.5


@dataclass(frozen=True)
class AnomalyReport:
    s0: float
    finite_difference: float
    fitted: float
    fd_err: float
    fit_err: float

    @property
    def predicted(self) -> float:
        return ANOMALY_FACTOR * self.fitted

    @property
    def relative_error(self) -> float:
        denom = max(abs(self.predicted), abs(self.finite_difference))
        return abs(self.finite_difference - self.predicted) / denom if denom > 0 else 0.0


def anomaly_check(spec: ComplexSpec, path: MetricPath, s0: float = 0.0, h: float = 1e-2,
                  method: str = "auto", settings: HeatSettings | None = None) -> AnomalyReport:
    """d/ds log tau (five-point stencil) against the fitted Str(alpha a_{n/2}).

    ``fitted`` is the raw t^0 coefficient; ``predicted`` applies ANOMALY_FACTOR.

    Acyclic specs only, so the harmonic correction Str(alpha Q) vanishes.
    """
    vals = {}
    errs = []
    for k in (-2, -1, 1, 2):
        tv = analytic_torsion(_spec_on(spec, path, s0 + k * h), method, settings)
        if not tv.acyclic:
            raise SuiteError("anomaly_check needs an acyclic complex")
        vals[k] = tv.log_tau
        errs.append(tv.err)
    fd = (vals[-2] - 8 * vals[-1] + 8 * vals[1] - vals[2]) / (12 * h)
    fd_err = 3 * max(errs) / h
    fam = build_family(_spec_on(spec, path, s0))
    alpha = alpha_operator_fibre(spec, path, s0)
    fitted, fit_err = weighted_t0_coefficient(fam, alpha, settings)
    return AnomalyReport(s0, fd, fitted, fd_err, fit_err)


# --------------------------------------------------------------------------
# gauge equivalence

def conjugation_family(spec: ComplexSpec, generator: np.ndarray) -> Callable[[float], ModeFamily]:
    """v -> family of G_v^{-1} D G_v with G_v = exp(v X) acting on the bundle factor."""
    fam = build_family(spec)
    x = np.asarray(generator, dtype=complex)
    r = x.shape[0]
    if fam.dim % r:
        raise SuiteError("generator size does not divide the fibre dimension")
    reps = fam.dim // r
    bundle = fam.grading[:r] if r > 1 else np.array([1])
    if r > 1:
        same = np.equal.outer(bundle, bundle)
        if np.max(np.abs(np.where(same, 0, x)), initial=0.0) > 0:
            raise SuiteError("gauge generator must be even")

    def at(v: float) -> ModeFamily:
        g = np.kron(np.eye(reps), scipy.linalg.expm(v * x))
        return fam.conjugated(g)

    return at


def form_conjugation_family(spec: ComplexSpec, beta) -> Callable[[float], ModeFamily]:
    """v -> family of e^{-v beta} D e^{v beta} for an even constant scalar form beta."""
    from .complexes import wedge_matrix
    fam = build_family(spec)
    r = fam.dim // (2 ** fam.n)
    e = np.kron(wedge_matrix(beta), np.eye(r))

    def at(v: float) -> ModeFamily:
        return fam.conjugated(scipy.linalg.expm(v * e))

    return at


def gauge_sweep(family_at: Callable[[float], ModeFamily], samples: Sequence[float],
                tol: float = 1e-4, method: str = "auto", threads: int | None = None,
                name: str = "", settings: HeatSettings | None = None) -> Verdict:
    def run(v):
        tv = analytic_torsion(family_at(v), method, settings)
        return (v, tv.log_tau, tv.err)

    rows = ordered_map(run, list(samples), threads)
    dev = _spread([r[1] for r in rows])
    return Verdict("gauge", name, len(rows), dev, tol, dev < tol, rows)


# --------------------------------------------------------------------------
# flux continuity

@dataclass(frozen=True)
class ContinuityReport:
    eps: tuple[float, ...]
    deviations: tuple[float, ...]
    slope: float
    monotone: bool

    def passed(self, min_slope: float = 1.5) -> bool:
        return self.monotone and self.slope >= min_slope


def flux_continuity(spec_at: Callable[[float], ComplexSpec],
                    eps: Sequence[float] = (0.1, 0.05, 0.025),
                    settings: HeatSettings | None = None) -> ContinuityReport:
    """|log tau(eps H0) - log tau(0)| with a log-log regression slope in eps."""
    base = analytic_torsion(spec_at(0.0), "auto", settings).log_tau
    devs = [abs(analytic_torsion(spec_at(e), "heat-trace", settings).log_tau - base) for e in eps]
    order = np.argsort(eps)
    d_sorted = [devs[i] for i in order]
    monotone = all(a < b for a, b in zip(d_sorted, d_sorted[1:]))
    slope = float(np.polyfit(np.log(eps), np.log(np.maximum(devs, 1e-300)), 1)[0])
    return ContinuityReport(tuple(eps), tuple(devs), slope, monotone)


# --------------------------------------------------------------------------
# partition function and ghost ledger

@dataclass(frozen=True)
class PartitionLedger:
    l: int
    log_Z: float
    ghost_exponents_lhs: dict
    ghost_exponents_rhs: dict
    duality_convention: str

    @property
    def discrepancy(self) -> dict:
        keys = sorted(set(self.ghost_exponents_lhs) | set(self.ghost_exponents_rhs))
        return {k: self.ghost_exponents_lhs.get(k, Fraction(0)) - self.ghost_exponents_rhs.get(k, Fraction(0))
                for k in keys}

    def to_json_dict(self) -> dict:
        fmt = lambda d: {str(k): str(v) for k, v in sorted(d.items())}
        return {"l": self.l, "log_Z": format(self.log_Z, ".17g"),
                "ghost_exponents_lhs": fmt(self.ghost_exponents_lhs),
                "ghost_exponents_rhs": fmt(self.ghost_exponents_rhs),
                "discrepancy": fmt(self.discrepancy),
                "duality_convention": self.duality_convention}


CONVENTIONS = ("none", "hodge")


def ghost_exponents(l: int, convention: str = "none") -> tuple[dict, dict]:
    """Exponents of Det'(d_k^† d_k) in the ghost tower (lhs) and collapsed form (rhs)."""
    if convention not in CONVENTIONS:
        raise SuiteError(f"unknown convention {convention!r}; known: {CONVENTIONS}")
    lhs: dict = {}
    for i in range(2 * l + 1):
        for d in range(2 * l - i, -1, -2):
            lhs[d] = lhs.get(d, Fraction(0)) + Fraction((-1) ** (i + 1))
    rhs: dict = {}
    for d in range(0, 2 * l + 1, 2):
        rhs[d] = Fraction(-l, 2)
    for d in range(1, 2 * l, 2):
        rhs[d] = Fraction(l + 1, 2)
    if convention == "hodge":
        # Det'(d_k^† d_k) = Det'(d_{2l-k}^† d_{2l-k}) on a (2l+1)-manifold
        fold = lambda ex: _fold(ex, l)
        lhs, rhs = fold(lhs), fold(rhs)
    return lhs, rhs


def _fold(ex: dict, l: int) -> dict:
    out: dict = {}
    for d, v in ex.items():
        k = min(d, 2 * l - d)
        out[k] = out.get(k, Fraction(0)) + v
    return out


def partition_function(log_tau_h: float, log_tau_0: float, l: int,
                       convention: str = "none") -> PartitionLedger:
    """log Z = -log tau(X, H) - l log tau(X)."""
    lhs, rhs = ghost_exponents(l, convention)
    return PartitionLedger(l, -log_tau_h - l * log_tau_0, lhs, rhs, convention)


def partition_from_specs(spec_h: ComplexSpec, spec_0: ComplexSpec, convention: str = "none",
                         settings: HeatSettings | None = None) -> PartitionLedger:
    n = spec_h.n
    if n % 2 == 0:
        raise SuiteError("the partition function is defined on odd-dimensional tori")
    a = analytic_torsion(spec_h, "auto", settings).log_tau
    b = analytic_torsion(spec_0, "auto", settings).log_tau
    return partition_function(a, b, (n - 1) // 2, convention)


def grade_swap_torsion(spec_or_family, method: str = "auto") -> float:
    return analytic_torsion(grade_swap(_family(spec_or_family)), method).log_tau
