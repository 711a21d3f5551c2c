"""Flat tori, unitary characters, complex tori and metric deformations.

Every torus is R^n / Z^n; a general lattice is absorbed into the Gram
matrix ``G`` so that Fourier modes are always indexed by integer vectors.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

MAX_MODES = 5_000_000


class GeometryError(ValueError):
    """Invalid geometric data (non-SPD metric, bad degree, ...)."""


class ResourceError(RuntimeError):
    """A requested cutoff would enumerate too many modes."""


def _wrap(u: Sequence[float]) -> tuple[float, ...]:
    out = []
    for x in u:
        y = float(x) % 1.0
        if y >= 1.0:  # -1e-17 % 1.0 == 1.0
            y = 0.0
        out.append(y)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class FlatTorus:
    """R^n / Z^n with the constant metric ``G_ij dx^i dx^j``."""

    gram: np.ndarray

    def __post_init__(self):
        g = np.array(self.gram, dtype=float)
        if g.ndim == 1 and g.size == 1:
            g = g.reshape(1, 1)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] == 0:
            raise GeometryError(f"Gram matrix must be square, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise GeometryError("Gram matrix has non-finite entries")
        if np.max(np.abs(g - g.T)) > 1e-14 * max(1.0, np.max(np.abs(g))):
            raise GeometryError("Gram matrix is not symmetric")
        g = 0.5 * (g + g.T)
        if np.min(np.linalg.eigvalsh(g)) <= 0:
            raise GeometryError("Gram matrix is not positive definite")
        g.setflags(write=False)
        object.__setattr__(self, "gram", g)

    @property
    def n(self) -> int:
        return self.gram.shape[0]

    @property
    def volume(self) -> float:
        return math.sqrt(np.linalg.det(self.gram))

    @property
    def inverse_gram(self) -> np.ndarray:
        return np.linalg.inv(self.gram)

    @classmethod
    def identity(cls, n: int, scale: float = 1.0) -> "FlatTorus":
        return cls(scale * np.eye(n))


@dataclass(frozen=True)
class Character:
    """Unitary character m -> exp(2 pi i m.u) of Z^n, with u in [0,1)^n."""

    u: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "u", _wrap(np.atleast_1d(self.u)))

    @property
    def n(self) -> int:
        return len(self.u)

    @property
    def trivial(self) -> bool:
        return all(x == 0.0 for x in self.u)

    @classmethod
    def trivial_of(cls, n: int) -> "Character":
        return cls((0.0,) * n)


@dataclass(frozen=True)
class ComplexTorus:
    """C / (Z + tau Z) with Hermitian metric ``area_scale * |dz|^2``.

    Real coordinates: z = x1 + tau x2 with (x1, x2) in [0,1)^2.  The
    character (u, v) follows the Kronecker double-series convention:
    Fourier modes on x1 are shifted by v and those on x2 by u.
    """

    modulus: complex
    area_scale: float = 1.0
    char: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        tau = complex(self.modulus)
        if not tau.imag > 0:
            raise GeometryError(f"modulus must have Im tau > 0, got {tau}")
        if not self.area_scale > 0:
            raise GeometryError("area_scale must be positive")
        object.__setattr__(self, "modulus", tau)
        object.__setattr__(self, "area_scale", float(self.area_scale))
        object.__setattr__(self, "char", _wrap(self.char))
        if len(self.char) != 2:
            raise GeometryError("complex torus character needs (u, v)")

    n = 2

    @property
    def volume(self) -> float:
        return self.area_scale * self.modulus.imag

    def dbar_coefficients(self) -> np.ndarray:
        """c_j with d/dzbar exp(2 pi i xi.x) = 2 pi i (c . xi) exp(2 pi i xi.x)."""
        tau = self.modulus
        return np.array([tau, -1.0]) / (2j * tau.imag)

    def with_scale(self, scale: float) -> "ComplexTorus":
        return ComplexTorus(self.modulus, scale, self.char)


def dual_norm_sq(torus: FlatTorus, xi: Sequence[float]) -> float:
    """|xi|^2 = xi^T G^{-1} xi for the constant one-form sum xi_j dx^j."""
    xi = np.asarray(xi, dtype=float)
    return float(xi @ np.linalg.solve(torus.gram, xi))


def subsets(n: int, k: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(n), k))


def compound(m: np.ndarray, k: int) -> np.ndarray:
    """k-th compound matrix: minors det(m[I, J]) over sorted index sets."""
    n = m.shape[0]
    idx = subsets(n, k)
    if k == 0:
        return np.ones((1, 1))
    out = np.empty((len(idx), len(idx)))
    for a, i in enumerate(idx):
        for b, j in enumerate(idx):
            out[a, b] = np.linalg.det(m[np.ix_(i, j)])
    return out


def compound_derivative(m: np.ndarray, dm: np.ndarray, k: int) -> np.ndarray:
    """Directional derivative of ``compound(m, k)`` along ``dm``.

    Uses d det(B) = sum_c det(B with column c replaced by dB's column c).
    """
    n = m.shape[0]
    idx = subsets(n, k)
    if k == 0:
        return np.zeros((1, 1))
    out = np.zeros((len(idx), len(idx)))
    for a, i in enumerate(idx):
        for b, j in enumerate(idx):
            blk = m[np.ix_(i, j)]
            dblk = dm[np.ix_(i, j)]
            for c in range(k):
                tmp = blk.copy()
                tmp[:, c] = dblk[:, c]
                out[a, b] += np.linalg.det(tmp)
    return out


def lambda_inner_product(torus: FlatTorus, k: int) -> np.ndarray:
    """L^2 Gram matrix of the basis {dx^I : |I| = k}, volume factor included."""
    if not 0 <= k <= torus.n:
        raise GeometryError(f"degree {k} out of range for n={torus.n}")
    return torus.volume * compound(torus.inverse_gram, k)


def lambda_inner_product_derivative(gram: np.ndarray, dgram: np.ndarray, k: int) -> np.ndarray:
    ginv = np.linalg.inv(gram)
    dginv = -ginv @ dgram @ ginv
    vol = math.sqrt(np.linalg.det(gram))
    dvol = 0.5 * vol * np.trace(ginv @ dgram)
    return dvol * compound(ginv, k) + vol * compound_derivative(ginv, dginv, k)


def symbol_ellipsoid_box(q: np.ndarray, u: Sequence[float], cutoff: float):
    """Integer ranges covering {m : (m+u)^T q (m+u) <= cutoff}."""
    qinv = np.linalg.inv(q)
    half = np.sqrt(cutoff * np.diag(qinv))
    u = np.asarray(u, dtype=float)
    lo = np.ceil(-half - u - 1e-12).astype(int)
    hi = np.floor(half - u + 1e-12).astype(int)
    return lo, hi


def enumerate_lattice(q: np.ndarray, u: Sequence[float], cutoff: float,
                      max_modes: int = MAX_MODES) -> np.ndarray:
    """Integer vectors m with (m+u)^T q (m+u) <= cutoff, lexicographic order."""
    if not cutoff > 0:
        raise GeometryError("cutoff must be positive")
    lo, hi = symbol_ellipsoid_box(q, u, cutoff)
    sizes = np.maximum(hi - lo + 1, 0)
    box = int(np.prod(sizes.astype(float)))
    if box > max_modes:
        raise ResourceError(f"cutoff {cutoff:g} needs a box of {box} modes (limit {max_modes})")
    if box == 0:
        return np.zeros((0, len(lo)), dtype=np.int64)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    xi = grid + np.asarray(u, dtype=float)
    norms = np.einsum("mi,ij,mj->m", xi, q, xi)
    return grid[norms <= cutoff * (1 + 1e-13)].astype(np.int64)


def enumerate_modes(torus: FlatTorus, char: Character, cutoff: float,
                    max_modes: int = MAX_MODES) -> list[tuple[int, ...]]:
    modes = enumerate_lattice(torus.inverse_gram, char.u, cutoff, max_modes)
    return [tuple(int(x) for x in m) for m in modes]


def shortest_vector_sq(gram: np.ndarray) -> float:
    """min over nonzero integer gamma of gamma^T G gamma."""
    n = gram.shape[0]
    # the unit vectors bound the minimum by min_i G_ii
    guess = min(float(gram[i, i]) for i in range(n))
    pts = enumerate_lattice(gram, np.zeros(n), guess)
    return min(float(p @ gram @ p) for p in pts if np.any(p))


# --------------------------------------------------------------------------
# metric paths

def _conformal(base: np.ndarray, rate: float = 1.0):
    def g(s):
        return math.exp(2 * rate * s) * base

    def dg(s):
        return 2 * rate * math.exp(2 * rate * s) * base
    return g, dg


def _diagonal_stretch(base: np.ndarray, rates: Sequence[float]):
    rates = np.asarray(rates, dtype=float)

    def g(s):
        e = np.diag(np.exp(s * rates))
        return e @ base @ e

    def dg(s):
        e = np.diag(np.exp(s * rates))
        r = np.diag(rates)
        return r @ e @ base @ e + e @ base @ e @ r
    return g, dg


def _shear(base: np.ndarray, i: int = 0, j: int = 1):
    n = base.shape[0]
    nil = np.zeros((n, n))
    nil[i, j] = 1.0

    def g(s):
        a = np.eye(n) + s * nil
        return a.T @ base @ a

    def dg(s):
        a = np.eye(n) + s * nil
        return nil.T @ base @ a + a.T @ base @ nil
    return g, dg


PATH_KINDS = ("constant", "conformal", "diagonal-stretch", "shear")


@dataclass(frozen=True, eq=False)
class MetricPath:
    """One-parameter family s -> G(s) with closed-form derivative.

    ``base`` may be a FlatTorus (any kind) or a ComplexTorus, for which
    only the conformal and constant kinds make sense: the Hermitian
    metric of a fixed complex curve with constant coefficients is a
    multiple of |dz|^2.
    """

    base: FlatTorus | ComplexTorus
    kind: str = "conformal"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PATH_KINDS:
            raise GeometryError(f"unknown path kind {self.kind!r}; known: {PATH_KINDS}")
        if isinstance(self.base, ComplexTorus) and self.kind not in ("constant", "conformal"):
            raise GeometryError("complex tori only admit conformal or constant metric paths")

    def _maps(self) -> tuple[Callable, Callable]:
        if isinstance(self.base, ComplexTorus):
            base = np.eye(2) * self.base.area_scale
        else:
            base = self.base.gram
        if self.kind == "constant":
            return (lambda s: base.copy()), (lambda s: np.zeros_like(base))
        if self.kind == "conformal":
            return _conformal(base, self.params.get("rate", 1.0))
        if self.kind == "diagonal-stretch":
            rates = self.params.get("rates", [1.0] + [0.0] * (base.shape[0] - 1))
            return _diagonal_stretch(base, rates)
        return _shear(base, *self.params.get("indices", (0, 1)))

    def gram(self, s: float) -> np.ndarray:
        g = self._maps()[0](s)
        if np.min(np.linalg.eigvalsh(0.5 * (g + g.T))) <= 0:
            raise GeometryError(f"metric path leaves the SPD cone at s={s}")
        return g

    def dgram(self, s: float) -> np.ndarray:
        return self._maps()[1](s)

    def at(self, s: float) -> FlatTorus | ComplexTorus:
        g = self.gram(s)
        if isinstance(self.base, ComplexTorus):
            return self.base.with_scale(float(g[0, 0]))
        return FlatTorus(g)

    def scale_rate(self, s: float) -> float:
        """d/ds log(area_scale) for complex-torus paths."""
        g, dg = self.gram(s), self.dgram(s)
        return float(dg[0, 0] / g[0, 0])
