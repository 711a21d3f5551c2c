"""Zeta-regularized determinants of the partial Laplacians.

Two paths: an exact Epstein/Hurwitz continuation for spectra of the form
4 pi^2 |m + u|_Q^2, and a heat-trace continuation for everything else.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import mpmath
import numpy as np
from scipy import special

from .complexes import ComplexSpec, ModeFamily, build_family
from .geometry import enumerate_lattice
from .reduce import stable_sum
from .spectral import (
    FitWarning,
    SpectrumTable,
    fit_window,
    poisson_bound,
    radius_for,
    small_time_fit,
    spectrum_table,
    tail_bound,
)

EULER_GAMMA = float(np.euler_gamma)
LOG_2PI = math.log(2 * math.pi)


class ConsistencyError(RuntimeError):
    """Exact and heat-trace continuations disagree beyond their error bars."""


@dataclass(frozen=True)
class ZetaResult:
    grade: int
    zeta0: float
    zeta_prime0: float
    log_det_prime: float
    residue0: float
    err: float

    def to_json_dict(self) -> dict:
        return {k: (v if isinstance(v, int) else format(v, ".17g")) for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, d: dict) -> "ZetaResult":
        return cls(int(d["grade"]), *(float(d[k]) for k in
                   ("zeta0", "zeta_prime0", "log_det_prime", "residue0", "err")))


# --------------------------------------------------------------------------
# exact path

def hurwitz_logdet(a: float, length: float = 1.0) -> float:
    """log Det' of {(2 pi / length)^2 (m + a)^2 : m in Z}, via Lerch's formula."""
    if not 0 < a <= 1:
        raise ValueError("a must lie in (0, 1]")
    if a == 1.0:
        # zeta(0) = -1, zeta'(0) = -2 log(length)
        return 2.0 * math.log(length)
    return -2.0 * (math.lgamma(a) + math.lgamma(1 - a) - LOG_2PI)


def _epstein_pieces(a_form: np.ndarray, u: np.ndarray, cutoff: float = 60.0):
    n = len(u)
    ainv = np.linalg.inv(a_form)
    modes = enumerate_lattice(a_form, u, cutoff)
    xi = modes + u
    lam = np.einsum("mi,ij,mj->m", xi, a_form, xi)
    zero = lam < 1e-14 * max(1.0, float(np.max(np.diag(a_form))))
    gam = enumerate_lattice(math.pi ** 2 * ainv, np.zeros(n), cutoff)
    b = math.pi ** 2 * np.einsum("mi,ij,mj->m", gam, ainv, gam)
    nz = b > 0
    cosines = np.cos(2 * math.pi * gam[nz] @ u)
    pref = math.pi ** (n / 2) / math.sqrt(np.linalg.det(a_form))
    return lam[~zero], bool(np.any(zero)), b[nz], cosines, pref


def _balance_scale(a_form: np.ndarray) -> float:
    n = a_form.shape[0]
    return float(np.linalg.det(a_form)) ** (1.0 / n) / math.pi


def epstein_zeta(a_form, u: Sequence[float], s: float) -> float:
    """Z(s) = sum'_m ((m+u)^T A (m+u))^{-s}, continued to all s != n/2.

    Incomplete-gamma splitting of the theta integral at t = 1 after
    rescaling A so both halves converge at the same rate.
    """
    a_form = np.atleast_2d(np.asarray(a_form, dtype=float))
    u = np.asarray(u, dtype=float).ravel()
    n = len(u)
    c = _balance_scale(a_form)
    lam, has_zero, b, cosines, pref = _epstein_pieces(a_form / c, u)
    mp = mpmath.mpf
    s = mp(s)
    direct = mpmath.fsum(mpmath.gammainc(s, mp(x)) * mp(x) ** (-s) for x in lam)
    dual = mpmath.fsum(mp(cs) * mp(x) ** (s - mp(n) / 2) * mpmath.gammainc(mp(n) / 2 - s, mp(x))
                       for x, cs in zip(b, cosines))
    total = direct + pref * (1 / (s - mp(n) / 2) + dual)
    if has_zero:
        total -= 1 / s
    return float(mp(c) ** (-s) * total / mpmath.gamma(s))


def epstein_derivative_at_zero(a_form, u: Sequence[float]) -> tuple[float, float]:
    """(Z(0), Z'(0)) for the Epstein zeta of A twisted by u."""
    a_form = np.atleast_2d(np.asarray(a_form, dtype=float))
    u = np.asarray(u, dtype=float).ravel()
    n = len(u)
    c = _balance_scale(a_form)
    lam, has_zero, b, cosines, pref = _epstein_pieces(a_form / c, u)
    delta = 1.0 if has_zero else 0.0
    direct = stable_sum(special.exp1(lam))
    upper = special.gammaincc(n / 2, b) * special.gamma(n / 2) * b ** (-n / 2)
    dual = stable_sum(cosines * upper)
    reg = direct + pref * (-2.0 / n + dual)
    z0 = -delta
    zp = reg - EULER_GAMMA * delta
    # Z_A(s) = c^{-s} Z_{A/c}(s)
    return z0, zp - math.log(c) * z0


def epstein_logdet(gram_or_q, u: Sequence[float], multiplicities: Sequence[int] = (1,),
                   dual: bool = True) -> float:
    """Exact log Det' of {4 pi^2 |m+u|^2} with the given multiplicity profile.

    With ``dual`` the first argument is a Gram matrix G and |xi|^2 uses G^{-1};
    otherwise it is the symbol metric Q itself.
    """
    g = np.atleast_2d(np.asarray(gram_or_q, dtype=float))
    q = np.linalg.inv(g) if dual else g
    _, zp = epstein_derivative_at_zero(4 * math.pi ** 2 * q, u)
    return -float(sum(multiplicities)) * zp


def _exact_result(fam: ModeFamily, grade: int) -> ZetaResult:
    total_zeta0 = total_zp = 0.0
    for q, u, m0, m1 in fam.exact_parts:
        mult = m0 if grade == 0 else m1
        if mult == 0:
            continue
        z0, zp = epstein_derivative_at_zero(4 * math.pi ** 2 * np.asarray(q), u)
        total_zeta0 += mult * z0
        total_zp += mult * zp
    return ZetaResult(grade, float(total_zeta0), float(total_zp), float(0.0 - total_zp), 0.0, 1e-12)


# --------------------------------------------------------------------------
# heat-trace path

@dataclass(frozen=True)
class HeatSettings:
    margin: float = 32.0
    ratio: float = 4.0
    samples: int = 24
    extra_order: int = 3
    tol: float = 1e-13


def _grade_values(table: SpectrumTable, grade: int) -> tuple[np.ndarray, np.ndarray, int]:
    sq = table.sq0 if grade == 0 else table.sq1
    finite = np.isfinite(sq)
    counts = finite.sum(axis=1)
    generic = int(counts.max()) if counts.size else 0
    return sq[finite], counts, generic


def _heat_coefficients(fam, table, grade, ts, order, with_log):
    vals, counts, generic = _grade_values(table, grade)
    missing = int(np.sum(generic - counts))
    theta = np.array([stable_sum(np.exp(-t * vals)) for t in ts])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FitWarning)
        fit = small_time_fit(ts, theta, fam.n, order, with_log=with_log, offset=missing)
    return fit, missing, generic, vals


def _assemble(fit, missing, vals, n, t_s):
    cn = fit.coefficient_at_power(0.0)
    zeta0 = cn - missing
    reg = 0.0
    for j, c in enumerate(fit.coefficients):
        p = j - n / 2
        if p != 0:
            reg += c * t_s ** p / p
    reg += zeta0 * math.log(t_s)
    reg += stable_sum(special.exp1(t_s * vals[t_s * vals < 700]))
    zp = reg + EULER_GAMMA * zeta0
    return zeta0, zp


def _cached_table(fam, radius, cache):
    if cache is None:
        return spectrum_table(fam, radius)
    for r, tab in cache.items():
        if r >= radius:
            return tab if r == radius else tab.restricted(radius)
    tab = spectrum_table(fam, radius)
    cache[radius] = tab
    return tab


def _heat_result(fam: ModeFamily, grade: int, settings: HeatSettings, cache=None) -> ZetaResult:
    n = fam.n
    t_lo, t_hi = fit_window(fam, settings.margin, settings.ratio)
    radius = radius_for(fam, t_lo, settings.tol)
    table = _cached_table(fam, radius, cache)
    _, _, generic = _grade_values(table, grade)
    if generic == 0:
        return ZetaResult(grade, 0.0, 0.0, 0.0, 0.0, 0.0)
    order = int(math.ceil(n / 2)) + settings.extra_order
    ts = np.geomspace(t_lo, t_hi, settings.samples)
    fit, missing, _, vals = _heat_coefficients(fam, table, grade, ts, order, False)
    # large-t piece: E1 tail beyond the table radius
    zeta0, zp = _assemble(fit, missing, vals, n, t_hi)

    # second fit: one more order on a shifted window
    ts2 = np.geomspace(t_lo * 1.5, t_hi * 1.2, settings.samples + 4)
    radius2 = radius_for(fam, ts2[0], settings.tol)
    table2 = table if radius2 <= table.radius else _cached_table(fam, radius2, cache)
    fit2, missing2, _, vals2 = _heat_coefficients(fam, table2, grade, ts2, order + 1, False)
    _, zp2 = _assemble(fit2, missing2, vals2, n, ts2[-1])

    logfit, *_ = _heat_coefficients(fam, table, grade, ts, order, True)
    residue0 = -logfit.log_coefficient

    t_e1 = tail_bound(fam, t_hi, radius, generic, weight="e1")
    err = (abs(zp - zp2) + poisson_bound(fam, t_hi, generic) * 10
           + t_e1 + fit.residual * t_hi ** (-n / 2))
    return ZetaResult(grade, float(zeta0), float(zp), float(-zp), float(residue0), float(err))


def _family_of(x) -> ModeFamily:
    return x if isinstance(x, ModeFamily) else build_family(x)


def logdet_partial(spec_or_family, grade: int, method: str = "auto",
                   settings: HeatSettings | None = None, cross_check: bool = True,
                   cache: dict | None = None) -> ZetaResult:
    """ZetaResult for D_k^† D_k.

    method: "exact" (Epstein; needs an unperturbed spectrum), "heat-trace",
    or "auto" (exact when available).  When both paths apply and
    ``cross_check`` is set, they must agree to max(1e-5, 10 err).
    """
    if grade not in (0, 1):
        raise ValueError("grade must be 0 or 1")
    fam = _family_of(spec_or_family)
    settings = settings or HeatSettings()
    exact_ok = fam.exact_parts is not None
    if method == "exact":
        if not exact_ok:
            raise ValueError("exact path needs an unperturbed spectrum (B = 0)")
        return _exact_result(fam, grade)
    if method == "auto":
        return _exact_result(fam, grade) if exact_ok else _heat_result(fam, grade, settings, cache)
    if method != "heat-trace":
        raise ValueError(f"unknown method {method!r}")
    res = _heat_result(fam, grade, settings, cache)
    if exact_ok and cross_check:
        ex = _exact_result(fam, grade)
        tol = max(1e-5, 10 * res.err)
        if abs(ex.log_det_prime - res.log_det_prime) > tol:
            raise ConsistencyError(
                f"grade {grade}: exact {ex.log_det_prime:.12g} vs heat-trace "
                f"{res.log_det_prime:.12g} (tolerance {tol:.2g})")
    return res


@dataclass(frozen=True)
class RegularityVerdict:
    grade: int
    residue0: float
    passed: bool


def zeta_regularity_check(spec_or_family, grade: int, threshold: float = 1e-3,
                          settings: HeatSettings | None = None) -> RegularityVerdict:
    res = logdet_partial(spec_or_family, grade, "heat-trace", settings, cross_check=False)
    return RegularityVerdict(grade, res.residue0, abs(res.residue0) < threshold)
