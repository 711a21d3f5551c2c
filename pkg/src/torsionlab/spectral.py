"""Per-mode spectra, Betti numbers, heat traces and small-time fits."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .complexes import (
    ComplexSpec,
    ModeFamily,
    build_family,
    kernel_bound_radius,
    laplacian_lower_bound,
)
from .geometry import MAX_MODES, enumerate_lattice
from .reduce import stable_sum

log = logging.getLogger(__name__)

FOUR_PI2 = 4.0 * math.pi ** 2
KERNEL_RTOL = 1e-10
CHUNK = 8192


class SpectralError(RuntimeError):
    pass


class FitWarning(UserWarning):
    pass


def _family(x) -> ModeFamily:
    return x if isinstance(x, ModeFamily) else build_family(x)


def kernel_threshold(xi2: np.ndarray) -> np.ndarray:
    return KERNEL_RTOL * (1.0 + FOUR_PI2 * xi2)


def _sq_singular_values(blocks: np.ndarray) -> np.ndarray:
    if blocks.shape[1] == 0 or blocks.shape[2] == 0:
        return np.zeros((blocks.shape[0], 0))
    try:
        sv = np.linalg.svd(blocks, compute_uv=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise SpectralError(f"SVD did not converge: {exc}") from exc
    return sv ** 2


# --------------------------------------------------------------------------
# single-mode spectrum

@dataclass(frozen=True, eq=False)
class ModeSpectrum:
    m: tuple[int, ...]
    spec0: np.ndarray
    spec1: np.ndarray
    ker0: int
    ker1: int
    lap0: np.ndarray
    lap1: np.ndarray


def mode_spectrum(spec_or_family, m: Sequence[int]) -> ModeSpectrum:
    """Nonzero spectra of D0^†D0, D1^†D1 and full L0, L1 eigenvalues at mode m.

    Computed in the orthonormalized fibre (symmetric square root of the
    fibre Gram matrix), where adjoints are conjugate transposes.
    """
    fam = _family(spec_or_family)
    mm = np.array([m])
    d = fam.operators(mm)[0]
    e, o = fam.even, fam.odd
    d0, d1 = d[np.ix_(o, e)], d[np.ix_(e, o)]
    thr = float(kernel_threshold(fam.symbol_norm_sq(mm))[0])
    s0 = _sq_singular_values(d0[None])[0]
    s1 = _sq_singular_values(d1[None])[0]
    l0 = np.linalg.eigvalsh(d0.conj().T @ d0 + d1 @ d1.conj().T)
    l1 = np.linalg.eigvalsh(d1.conj().T @ d1 + d0 @ d0.conj().T)
    return ModeSpectrum(
        tuple(int(x) for x in m),
        np.sort(s0[s0 > thr]), np.sort(s1[s1 > thr]),
        int(np.sum(l0 <= thr)), int(np.sum(l1 <= thr)), l0, l1,
    )


# --------------------------------------------------------------------------
# batched tables

@dataclass(eq=False)
class SpectrumTable:
    """Spectral data for every mode with symbol norm |xi|_Q <= radius.

    sq0/sq1 hold squared singular values of D0/D1 with zeros (below the
    kernel threshold) replaced by +inf so that exp(-t * inf) = 0.
    """

    family: ModeFamily
    radius: float
    modes: np.ndarray
    xi2: np.ndarray
    sq0: np.ndarray
    sq1: np.ndarray
    lap0: np.ndarray | None = None
    lap1: np.ndarray | None = None
    ker0: np.ndarray | None = None
    ker1: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def rank0(self) -> np.ndarray:
        return np.sum(np.isfinite(self.sq0), axis=1)

    @property
    def rank1(self) -> np.ndarray:
        return np.sum(np.isfinite(self.sq1), axis=1)

    def restricted(self, radius: float) -> "SpectrumTable":
        keep = self.xi2 <= radius ** 2 * (1 + 1e-13)
        sub = lambda a: None if a is None else a[keep]
        return SpectrumTable(self.family, radius, self.modes[keep], self.xi2[keep],
                             self.sq0[keep], self.sq1[keep], sub(self.lap0), sub(self.lap1),
                             sub(self.ker0), sub(self.ker1))


def spectrum_table(spec_or_family, radius: float, laplacians: bool = False,
                   max_modes: int = MAX_MODES) -> SpectrumTable:
    fam = _family(spec_or_family)
    modes = enumerate_lattice(fam.symbol_metric, fam.u, radius ** 2, max_modes)
    xi2 = fam.symbol_norm_sq(modes) if len(modes) else np.zeros(0)
    e, o = fam.even, fam.odd
    sq0, sq1, l0s, l1s = [], [], [], []
    for start in range(0, len(modes), CHUNK):
        chunk = modes[start:start + CHUNK]
        d = fam.operators(chunk)
        thr = kernel_threshold(xi2[start:start + CHUNK])[:, None]
        d0 = d[:, o][:, :, e]
        d1 = d[:, e][:, :, o]
        a = _sq_singular_values(d0)
        b = _sq_singular_values(d1)
        sq0.append(np.where(a > thr, a, np.inf))
        sq1.append(np.where(b > thr, b, np.inf))
        if laplacians:
            d0h = d0.conj().transpose(0, 2, 1)
            d1h = d1.conj().transpose(0, 2, 1)
            l0s.append(np.linalg.eigvalsh(d0h @ d0 + d1 @ d1h))
            l1s.append(np.linalg.eigvalsh(d1h @ d1 + d0 @ d0h))
    if not len(modes):
        raise SpectralError("no modes inside the requested radius")
    table = SpectrumTable(fam, radius, modes, xi2, np.concatenate(sq0), np.concatenate(sq1))
    if laplacians:
        table.lap0, table.lap1 = np.concatenate(l0s), np.concatenate(l1s)
        thr = kernel_threshold(xi2)[:, None]
        table.ker0 = np.sum(table.lap0 <= thr, axis=1)
        table.ker1 = np.sum(table.lap1 <= thr, axis=1)
    return table


# --------------------------------------------------------------------------
# cutoffs and tail bounds

def _cell_radius(q: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.sqrt(np.diag(q))))


def tail_bound(fam: ModeFamily, t: float, radius: float, per_mode: int,
               weight: str = "exp") -> float:
    """Bound on sum over modes with |xi|_Q > radius of per_mode * f(lambda_min).

    f is exp(-t lam) ("exp") or E1(t lam) ("e1").  Lattice sums are
    dominated by integrals over the cells, each of which lies within the
    Q-radius ``delta`` of its lattice point.
    """
    q = fam.symbol_metric
    n = fam.n
    delta = _cell_radius(q)
    bnorm = float(np.linalg.norm(fam.orthonormal_B, 2))
    r0 = math.sqrt(2.0) * bnorm / (2 * math.pi)
    a = radius - 2 * delta
    if a <= r0 * 1.05 + 1e-12:
        return math.inf
    sphere = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    jac = 1.0 / math.sqrt(np.linalg.det(q))

    def f(x):
        lam = float(laplacian_lower_bound(2 * math.pi * x, bnorm))
        if weight == "e1":
            return float(special.exp1(t * lam)) if lam > 0 else math.inf
        return math.exp(-t * lam)

    val, _ = integrate.quad(lambda x: (x + delta) ** (n - 1) * f(x), a, math.inf, limit=200)
    return per_mode * sphere * jac * val


def radius_for(fam: ModeFamily, t: float, tol: float, per_mode: int | None = None,
               weight: str = "exp") -> float:
    per_mode = fam.dim if per_mode is None else per_mode
    delta = _cell_radius(fam.symbol_metric)
    r0 = kernel_bound_radius(fam)
    radius = 2 * delta + 1.05 * r0 + math.sqrt(max(20.0, -math.log(tol) + 5) / t) / (2 * math.pi)
    for _ in range(200):
        if tail_bound(fam, t, radius, per_mode, weight) <= tol:
            return radius
        radius *= 1.05
    raise SpectralError(f"could not certify the tail at t={t}")


# --------------------------------------------------------------------------
# Betti numbers

@dataclass(frozen=True)
class BettiData:
    b0: int
    b1: int
    certificate: float

    @property
    def chi(self) -> int:
        return self.b0 - self.b1


def betti_numbers(spec_or_family, scale: float = 1.0) -> BettiData:
    """Harmonic dimensions summed over modes inside the kernel certificate.

    ``scale`` > 1 enlarges the searched radius (used to check stability).
    """
    fam = _family(spec_or_family)
    r0 = kernel_bound_radius(fam)
    radius = max(scale * (r0 + 1e-9), 1e-9)
    modes = enumerate_lattice(fam.symbol_metric, fam.u, radius ** 2) if radius > 0 else np.zeros((0, fam.n))
    # the mode closest to -u is always checked as well
    near = np.round(-fam.u).astype(np.int64)[None]
    modes = np.unique(np.concatenate([modes, near]), axis=0)
    b0 = b1 = 0
    for m in modes:
        ms = mode_spectrum(fam, m)
        b0 += ms.ker0
        b1 += ms.ker1
    return BettiData(b0, b1, r0)


# --------------------------------------------------------------------------
# heat traces

@dataclass(frozen=True)
class HeatTraceSample:
    t: float
    tr0: float
    tr1: float
    trD0: float
    trD1: float
    str: float
    tail_bound: float

    CSV_COLUMNS = ("t", "tr0", "tr1", "trD0", "trD1", "str", "tail_bound")

    def row(self) -> list[str]:
        return [format(getattr(self, c), ".17g") for c in self.CSV_COLUMNS]


def _expsum(sq: np.ndarray, t: float) -> float:
    return stable_sum(np.exp(-t * sq[np.isfinite(sq)]))


def heat_trace(spec_or_family, t: float, tol: float = 1e-12,
               table: SpectrumTable | None = None) -> HeatTraceSample:
    """Mode-summed Tr e^{-tL_k} and Tr' e^{-t D_k^† D_k} with a certified tail."""
    if not t > 0:
        raise ValueError("t must be positive")
    fam = _family(spec_or_family) if table is None else table.family
    try:
        radius = radius_for(fam, t, tol)
    except SpectralError:
        raise
    if table is None or table.lap0 is None or table.radius < radius:
        try:
            table = spectrum_table(fam, radius, laplacians=True)
        except Exception as exc:
            from .geometry import ResourceError
            if isinstance(exc, ResourceError):
                raise ResourceError(f"{exc}; t={t} is too small for the mode limit") from exc
            raise
    tab = table.restricted(radius) if table.radius > radius else table
    tr0 = stable_sum(np.exp(-t * tab.lap0))
    tr1 = stable_sum(np.exp(-t * tab.lap1))
    bound = tail_bound(fam, t, radius, fam.dim)
    return HeatTraceSample(t, tr0, tr1, _expsum(tab.sq0, t), _expsum(tab.sq1, t), tr0 - tr1, bound)


def weighted_table(fam: ModeFamily, alpha: np.ndarray, radius: float):
    """Eigenvalues of L(m) and weights <v, Gamma alpha~ v> per eigenvector.

    alpha is given in the original fibre basis; in the orthonormal frame it
    becomes S^{1/2} alpha S^{-1/2}.
    """
    modes = enumerate_lattice(fam.symbol_metric, fam.u, radius ** 2)
    at = fam._root @ alpha @ fam._iroot
    ga = np.diag(fam.grading).astype(complex) @ at
    mus, ws = [], []
    for start in range(0, len(modes), CHUNK):
        d = fam.operators(modes[start:start + CHUNK])
        dh = d.conj().transpose(0, 2, 1)
        lap = dh @ d + d @ dh
        mu, v = np.linalg.eigh(lap)
        w = np.einsum("mai,ab,mbi->mi", v.conj(), ga, v)
        mus.append(mu)
        ws.append(w.real)
    return np.concatenate(mus), np.concatenate(ws)


def weighted_supertrace(spec_or_family, alpha: np.ndarray, t: float, tol: float = 1e-12,
                        table=None) -> float:
    """Str(alpha e^{-tL}) summed over modes."""
    fam = _family(spec_or_family)
    radius = radius_for(fam, t, tol / max(1.0, float(np.max(np.abs(alpha)))))
    mu, w = table if table is not None else weighted_table(fam, alpha, radius)
    return stable_sum(w * np.exp(-t * mu))


# --------------------------------------------------------------------------
# small-time fits

@dataclass(frozen=True)
class SmallTimeFit:
    """Coefficients c_j of sum_j c_j t^(j - n/2) (optionally + b log t)."""

    n: int
    coefficients: np.ndarray
    residual: float
    condition: float
    window: tuple[float, float]
    log_coefficient: float = 0.0

    def coefficient_at_power(self, power: float) -> float:
        j = power + self.n / 2
        if abs(j - round(j)) > 1e-12 or not 0 <= round(j) < len(self.coefficients):
            return 0.0
        return float(self.coefficients[int(round(j))])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        pw = np.arange(len(self.coefficients))
        val = np.sum(self.coefficients * t[..., None] ** (pw - self.n / 2), axis=-1)
        return val + self.log_coefficient * np.log(t)


COND_LIMIT = 1e12


def small_time_fit(ts: Sequence[float], values: Sequence[float], n: int, order: int,
                   with_log: bool = False, offset: float = 0.0) -> SmallTimeFit:
    """Least-squares fit of values(t) + offset = sum_{j<=order} c_j t^{j-n/2} [+ b log t].

    The fit is done on t^{n/2} (values + offset) in the scaled variable
    t / max(t), which keeps the Vandermonde system well conditioned.
    """
    ts = np.asarray(ts, dtype=float)
    y = (np.asarray(values, dtype=float) + offset) * ts ** (n / 2)
    scale = float(np.max(ts))
    x = ts / scale
    cols = [x ** j for j in range(order + 1)]
    if with_log:
        cols.append(x ** (n / 2) * np.log(ts))
    A = np.stack(cols, axis=1)
    colnorm = np.linalg.norm(A, axis=0)
    coef, *_ = np.linalg.lstsq(A / colnorm, y, rcond=None)
    coef = coef / colnorm
    resid = float(np.max(np.abs(A @ coef - y))) if len(y) else 0.0
    cond = float(np.linalg.cond(A / colnorm))
    if cond > COND_LIMIT:
        warnings.warn(f"ill-conditioned small-time fit (cond={cond:.2e}); widen the t-window",
                      FitWarning, stacklevel=2)
    c = coef[:order + 1] / scale ** np.arange(order + 1)
    b = float(coef[order + 1] / scale ** (n / 2)) if with_log else 0.0
    return SmallTimeFit(n, c, resid, cond, (float(ts.min()), float(ts.max())), b)


def fit_window(fam: ModeFamily, margin: float = 32.0, ratio: float = 4.0) -> tuple[float, float]:
    """Small-t window where Poisson corrections are below exp(-margin).

    The dual lattice terms decay like exp(-|gamma|^2_{Q^{-1}} / (4t)).
    """
    from .geometry import shortest_vector_sq
    lam = shortest_vector_sq(np.linalg.inv(fam.symbol_metric))
    t_hi = lam / (4.0 * margin)
    return t_hi / ratio, t_hi


def poisson_bound(fam: ModeFamily, t: float, per_mode: int) -> float:
    """Rough size of the neglected dual-lattice terms at time t."""
    from .geometry import shortest_vector_sq
    lam = shortest_vector_sq(np.linalg.inv(fam.symbol_metric))
    vol = 1.0 / math.sqrt(np.linalg.det(fam.symbol_metric))
    n = fam.n
    return per_mode * vol * (4 * math.pi * t) ** (-n / 2) * 2 * (3 ** n) * math.exp(-lam / (4 * t))
