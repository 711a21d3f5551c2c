"""Constant-coefficient Z2-graded elliptic complexes on flat tori.

Each complex is reduced to a family of finite matrices indexed by the
Fourier mode m in Z^n::

    D(m) = 2 pi i sum_j (m_j + u_j) W_j + B

acting on a fibre of dimension d (exterior algebra tensor the auxiliary
bundle), together with the fibre Gram matrix S of the L^2 inner product
and the Z2 grading.  Constant coefficients mean modes never mix.

Dolbeault convention: on C/(Z + tau Z) with z = x1 + tau x2 the
anti-holomorphic derivative of exp(2 pi i xi.x) is
pi (xi_1 tau - xi_2) / Im(tau) times the function; the character
parameter u sits on x1 and v on x2.  This choice reproduces the
theta-function closed form for the torsion (checked in the tests).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .geometry import (
    Character,
    ComplexTorus,
    FlatTorus,
    GeometryError,
    MetricPath,
    compound,
    lambda_inner_product,
    lambda_inner_product_derivative,
    subsets,
)

TWO_PI = 2.0 * math.pi


class FlatnessError(ValueError):
    """The operator does not square to zero."""


# --------------------------------------------------------------------------
# exterior algebra

def form_basis(n: int) -> list[tuple[int, ...]]:
    """Basis index sets ordered by degree, then lexicographically."""
    out = []
    for k in range(n + 1):
        out.extend(subsets(n, k))
    return out


def _merge_sign(i: tuple[int, ...], j: tuple[int, ...]) -> int:
    # parity of the permutation sorting the concatenation i + j
    inv = sum(1 for a in i for b in j if a > b)
    return -1 if inv % 2 else 1


def elementary_wedge(n: int, index: tuple[int, ...]) -> np.ndarray:
    """Matrix of left multiplication by dx^I on the full exterior algebra."""
    basis = form_basis(n)
    pos = {b: k for k, b in enumerate(basis)}
    mat = np.zeros((len(basis), len(basis)))
    iset = set(index)
    for col, j in enumerate(basis):
        if iset & set(j):
            continue
        target = tuple(sorted(index + j))
        mat[pos[target], col] = _merge_sign(index, j)
    return mat


def degree_parity(n: int) -> np.ndarray:
    return np.array([(-1) ** len(b) for b in form_basis(n)], dtype=float)


@dataclass(frozen=True, eq=False)
class ConstantForm:
    """Constant differential form sum_I c_I dx^I.

    Coefficients are complex scalars, or r x r complex matrices for an
    endomorphism-valued form.  ``parity`` is the form-degree parity for
    scalar forms; matrix-valued forms are checked against the bundle
    grading by :class:`SuperconnectionData`.
    """

    n: int
    components: Mapping[tuple[int, ...], object] = field(default_factory=dict)
    parity: str = "odd"

    def __post_init__(self):
        if self.parity not in ("odd", "even"):
            raise ValueError("parity must be 'odd' or 'even'")
        comps = {}
        for key, val in dict(self.components).items():
            idx = tuple(sorted(int(i) for i in key))
            if len(set(idx)) != len(idx) or any(not 0 <= i < self.n for i in idx):
                raise ValueError(f"bad index set {key} for n={self.n}")
            arr = np.asarray(val, dtype=complex)
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite form coefficient")
            comps[idx] = arr
        object.__setattr__(self, "components", comps)
        if not self.matrix_valued:
            want = 1 if self.parity == "odd" else 0
            for idx, val in comps.items():
                if abs(complex(val)) > 0 and len(idx) % 2 != want:
                    raise ValueError(f"component {idx} has the wrong parity for a {self.parity} form")

    @property
    def matrix_valued(self) -> bool:
        return any(np.ndim(v) == 2 for v in self.components.values())

    @property
    def rank(self) -> int:
        for v in self.components.values():
            if np.ndim(v) == 2:
                return v.shape[0]
        return 1

    @classmethod
    def zero(cls, n: int) -> "ConstantForm":
        return cls(n, {})

    @classmethod
    def volume(cls, n: int, coeff: complex = 1.0) -> "ConstantForm":
        return cls(n, {tuple(range(n)): coeff}, "odd" if n % 2 else "even")

    def scaled(self, c: complex) -> "ConstantForm":
        return ConstantForm(self.n, {k: c * v for k, v in self.components.items()}, self.parity)

    def is_zero(self) -> bool:
        return all(np.max(np.abs(v)) == 0 for v in self.components.values())


def wedge_matrix(form: ConstantForm, bundle_grading: Sequence[int] | None = None) -> np.ndarray:
    """Left exterior multiplication by ``form`` on Lambda ⊗ F.

    For an endomorphism-valued form the Koszul sign rule is applied:
    (w ⊗ phi)(b ⊗ f) = (-1)^{|phi||b|} (w ∧ b) ⊗ phi f.
    """
    n = form.n
    dim = 2 ** n
    if not form.matrix_valued:
        mat = np.zeros((dim, dim), dtype=complex)
        for idx, c in form.components.items():
            mat += complex(c) * elementary_wedge(n, idx)
        return mat
    r = form.rank
    grading = np.ones(r) if bundle_grading is None else np.asarray(bundle_grading, dtype=float)
    same = np.equal.outer(grading, grading)
    sign = np.diag(degree_parity(n))
    mat = np.zeros((dim * r, dim * r), dtype=complex)
    for idx, c in form.components.items():
        c = np.asarray(c, dtype=complex)
        if c.ndim == 0:
            c = c * np.eye(r)
        even, odd = np.where(same, c, 0), np.where(same, 0, c)
        e = elementary_wedge(n, idx)
        mat += np.kron(e, even) + np.kron(e @ sign, odd)
    return mat


# --------------------------------------------------------------------------
# complex specifications

@dataclass(frozen=True, eq=False)
class TwistedDeRham:
    flux: ConstantForm


@dataclass(frozen=True, eq=False)
class TwistedDolbeault:
    """Omega^{p, even} <-> Omega^{p, odd} under dbar + H on a complex curve.

    ``flux`` is a one-variable ConstantForm in dzbar (only (0,1) exists).
    """

    p: int = 0
    flux: ConstantForm | None = None

    def __post_init__(self):
        if self.p not in (0, 1):
            raise ValueError("holomorphic degree p must be 0 or 1 on a complex curve")
        flux = self.flux if self.flux is not None else ConstantForm.zero(1)
        if flux.n != 1 or flux.matrix_valued:
            raise ValueError("Dolbeault flux must be a scalar (0,1)-form h dzbar")
        object.__setattr__(self, "flux", flux)


@dataclass(frozen=True, eq=False)
class SuperconnectionData:
    """Constant flat superconnection d + A on F = F^0 ⊕ F^1."""

    r0: int
    r1: int
    form: ConstantForm

    def __post_init__(self):
        r = self.r0 + self.r1
        if r == 0:
            raise ValueError("bundle rank must be positive")
        g = self.bundle_grading
        for idx, c in self.form.components.items():
            c = np.asarray(c, dtype=complex)
            if c.ndim == 0:
                c = c * np.eye(r)
            if c.shape != (r, r):
                raise ValueError(f"coefficient on {idx} must be {r}x{r}")
            same = np.equal.outer(g, g)
            # total degree odd: even endomorphisms ride on odd forms and vice versa
            bad = np.where(same, c, 0) if len(idx) % 2 == 0 else np.where(same, 0, c)
            if np.max(np.abs(bad), initial=0.0) > 0:
                raise ValueError(f"component {idx} is not odd in the total grading")

    @property
    def bundle_grading(self) -> np.ndarray:
        return np.array([1] * self.r0 + [-1] * self.r1)


@dataclass(frozen=True, eq=False)
class ComplexSpec:
    kind: TwistedDeRham | TwistedDolbeault | SuperconnectionData
    geometry: FlatTorus | ComplexTorus
    char: Character | None = None
    name: str = ""

    def __post_init__(self):
        if isinstance(self.kind, TwistedDolbeault):
            if not isinstance(self.geometry, ComplexTorus):
                raise GeometryError("Dolbeault complexes live on a ComplexTorus")
            object.__setattr__(self, "char", Character(self.geometry.char))
        else:
            if not isinstance(self.geometry, FlatTorus):
                raise GeometryError("de Rham/superconnection complexes live on a FlatTorus")
            n = self.geometry.n
            char = self.char if self.char is not None else Character.trivial_of(n)
            if char.n != n:
                raise GeometryError("character dimension does not match the torus")
            object.__setattr__(self, "char", char)
            form = self.kind.flux if isinstance(self.kind, TwistedDeRham) else self.kind.form
            if form.n != n:
                raise GeometryError("form dimension does not match the torus")
            if isinstance(self.kind, TwistedDeRham):
                if form.matrix_valued:
                    raise ValueError("twisted de Rham flux must be scalar")
                if form.parity != "odd":
                    raise ValueError("flux must be of odd degree")

    @property
    def n(self) -> int:
        return self.geometry.n

    def with_geometry(self, geometry) -> "ComplexSpec":
        if isinstance(geometry, ComplexTorus):
            geometry = ComplexTorus(geometry.modulus, geometry.area_scale, self.geometry.char)
        return ComplexSpec(self.kind, geometry, self.char, self.name)

    def with_char(self, u: Sequence[float]) -> "ComplexSpec":
        if isinstance(self.geometry, ComplexTorus):
            g = self.geometry
            return ComplexSpec(self.kind, ComplexTorus(g.modulus, g.area_scale, tuple(u)), None, self.name)
        return ComplexSpec(self.kind, self.geometry, Character(tuple(u)), self.name)


# --------------------------------------------------------------------------
# mode families

def _sqrtm_psd(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(s)
    if np.min(w) <= 0:
        raise GeometryError("fibre inner product is not positive definite")
    root = (v * np.sqrt(w)) @ v.conj().T
    iroot = (v / np.sqrt(w)) @ v.conj().T
    return root, iroot


@dataclass(frozen=True, eq=False)
class ModeFamily:
    """D(m) = 2 pi i sum_j (m_j + u_j) W_j + B on a graded fibre with Gram S.

    ``exact_parts`` lists (Q, u, mult0, mult1) when the nonzero spectrum
    of D_k^† D_k is exactly mult_k copies of {4 pi^2 (m+u)^T Q (m+u)}.
    """

    W: np.ndarray
    B: np.ndarray
    S: np.ndarray
    grading: np.ndarray
    u: np.ndarray
    exact_parts: tuple | None = None

    def __post_init__(self):
        W = np.asarray(self.W, dtype=complex)
        d = W.shape[1]
        S = np.asarray(self.S, dtype=complex)
        root, iroot = _sqrtm_psd(0.5 * (S + S.conj().T))
        Wt = np.einsum("ab,jbc,cd->jad", root, W, iroot)
        Bt = root @ np.asarray(self.B, dtype=complex) @ iroot
        # {W_j, W_k^†} = W_j W_k^† + W_k^† W_j
        anti = (np.einsum("jab,kcb->jkac", Wt, Wt.conj())
                + np.einsum("kba,jbc->jkac", Wt.conj(), Wt))
        sym = 0.5 * (anti + anti.transpose(1, 0, 2, 3))
        q = np.real(np.einsum("jkaa->jk", sym)) / d
        resid = np.max(np.abs(sym - q[:, :, None, None] * np.eye(d)))
        if resid > 1e-10 * max(1.0, np.max(np.abs(q))):
            raise ValueError(f"symbol is not of Clifford type (residual {resid:.2e})")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "B", np.asarray(self.B, dtype=complex))
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "grading", np.asarray(self.grading, dtype=int))
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "_Wt", Wt)
        object.__setattr__(self, "_Bt", Bt)
        object.__setattr__(self, "_Q", 0.5 * (q + q.T))
        object.__setattr__(self, "_root", root)
        object.__setattr__(self, "_iroot", iroot)

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    @property
    def even(self) -> np.ndarray:
        return np.flatnonzero(self.grading > 0)

    @property
    def odd(self) -> np.ndarray:
        return np.flatnonzero(self.grading < 0)

    @property
    def symbol_metric(self) -> np.ndarray:
        """Q with {X(xi), X(xi)^†} = (xi^T Q xi) Id for X = sum xi_j W~_j."""
        return self._Q

    @property
    def orthonormal_B(self) -> np.ndarray:
        return self._Bt

    def xi(self, modes: np.ndarray) -> np.ndarray:
        return np.asarray(modes, dtype=float) + self.u

    def symbol_norm_sq(self, modes: np.ndarray) -> np.ndarray:
        xi = self.xi(np.atleast_2d(modes))
        return np.einsum("mi,ij,mj->m", xi, self._Q, xi)

    def operators(self, modes: np.ndarray, orthonormal: bool = True) -> np.ndarray:
        """Batched D(m), shape (M, d, d)."""
        xi = self.xi(np.atleast_2d(modes))
        W = self._Wt if orthonormal else self.W
        B = self._Bt if orthonormal else self.B
        return (2j * math.pi) * np.einsum("mj,jab->mab", xi, W) + B

    def conjugated(self, g: np.ndarray) -> "ModeFamily":
        """Gauge transform D -> g^{-1} D g by a constant even invertible g."""
        gi = np.linalg.inv(g)
        W = np.einsum("ab,jbc,cd->jad", gi, self.W, g)
        return ModeFamily(W, gi @ self.B @ g, self.S, self.grading, self.u, None)

    def absorbed(self) -> "ModeFamily":
        """Same operators with the character moved into the constant part."""
        B = self.B + (2j * math.pi) * np.einsum("j,jab->ab", self.u, self.W)
        return ModeFamily(self.W, B, self.S, self.grading, np.zeros(self.n), None)


def _exact_parts_if_free(fam: ModeFamily) -> tuple | None:
    if np.max(np.abs(fam.B)) > 0:
        return None
    rng = np.random.default_rng(12345)
    q = fam.symbol_metric
    mults = []
    for _ in range(2):
        m = rng.normal(size=(1, fam.n)) * 3.1 + 0.37
        d = fam.operators(m - fam.u)[0]
        lam = 4 * math.pi ** 2 * float((m @ q @ m.T)[0, 0])
        cur = []
        for rows, cols in ((fam.odd, fam.even), (fam.even, fam.odd)):
            sv = np.linalg.svd(d[np.ix_(rows, cols)], compute_uv=False) ** 2 if len(rows) and len(cols) else np.zeros(0)
            nz = sv[sv > 1e-9 * lam]
            if np.max(np.abs(nz - lam), initial=0.0) > 1e-9 * lam:
                return None
            cur.append(len(nz))
        mults.append(tuple(cur))
    if mults[0] != mults[1]:
        return None
    return ((q, tuple(fam.u), mults[0][0], mults[0][1]),)


def de_rham_inner_product(torus: FlatTorus) -> np.ndarray:
    blocks = [lambda_inner_product(torus, k) for k in range(torus.n + 1)]
    return _block_diag(blocks)


def _block_diag(blocks) -> np.ndarray:
    d = sum(b.shape[0] for b in blocks)
    out = np.zeros((d, d), dtype=complex)
    k = 0
    for b in blocks:
        s = b.shape[0]
        out[k:k + s, k:k + s] = b
        k += s
    return out


def _dolbeault_inner_product(geom: ComplexTorus, p: int) -> np.ndarray:
    dzbar = 2.0 / geom.area_scale  # |dzbar|^2 for the metric scale |dz|^2
    return np.diag([geom.volume, geom.volume * dzbar]) * dzbar ** p


def build_family(spec: ComplexSpec) -> ModeFamily:
    kind, geom = spec.kind, spec.geometry
    if isinstance(kind, TwistedDolbeault):
        eps = np.array([[0, 0], [1, 0]], dtype=complex)
        c = geom.dbar_coefficients()
        W = np.stack([c[0] * eps, c[1] * eps])
        h = complex(kind.flux.components.get((0,), 0.0))
        B = h * eps
        S = _dolbeault_inner_product(geom, kind.p)
        # (u, v) is the Kronecker parametrization: v shifts x1-modes, u shifts x2-modes
        fam = ModeFamily(W, B, S, np.array([1, -1]), np.array(spec.char.u)[::-1])
    else:
        n = geom.n
        if isinstance(kind, TwistedDeRham):
            r, fgrad = 1, np.array([1])
            A = kind.flux
        else:
            r, fgrad = kind.r0 + kind.r1, kind.bundle_grading
            A = kind.form
        W = np.stack([np.kron(elementary_wedge(n, (j,)), np.eye(r)) for j in range(n)]).astype(complex)
        B = wedge_matrix(A, fgrad)
        if not A.matrix_valued:
            B = np.kron(B, np.eye(r))
        S = np.kron(de_rham_inner_product(geom), np.eye(r))
        grading = np.kron(degree_parity(n), fgrad).astype(int)
        fam = ModeFamily(W, B, S, grading, np.array(spec.char.u))
    exact = _exact_parts_if_free(fam)
    if exact is not None:
        fam = ModeFamily(fam.W, fam.B, fam.S, fam.grading, fam.u, exact)
    return fam


def alpha_operator_fibre(spec: ComplexSpec, path: MetricPath, s: float) -> np.ndarray:
    """alpha = S(s)^{-1} dS/ds on the fibre of ``spec`` along ``path``."""
    geom = path.at(s)
    if isinstance(spec.kind, TwistedDolbeault):
        rate = path.scale_rate(s)
        # vol ~ scale, |dzbar|^2 ~ 1/scale
        return np.diag([rate * (1 - spec.kind.p), -rate * spec.kind.p]).astype(complex)
    n = geom.n
    g, dg = path.gram(s), path.dgram(s)
    S = _block_diag([lambda_inner_product(geom, k) for k in range(n + 1)])
    dS = _block_diag([lambda_inner_product_derivative(g, dg, k) for k in range(n + 1)])
    r = 1 if isinstance(spec.kind, TwistedDeRham) else spec.kind.r0 + spec.kind.r1
    return np.kron(np.linalg.solve(S, dS), np.eye(r))


# --------------------------------------------------------------------------
# operations on families

def direct_sum(f1: ModeFamily, f2: ModeFamily) -> ModeFamily:
    """Block direct sum; characters are absorbed so the sum shares u = 0."""
    if f1.n != f2.n:
        raise ValueError("direct sum needs the same torus")
    a, b = f1.absorbed(), f2.absorbed()
    W = np.stack([_block_diag([a.W[j], b.W[j]]) for j in range(f1.n)])
    exact = None
    if f1.exact_parts is not None and f2.exact_parts is not None:
        exact = f1.exact_parts + f2.exact_parts
    return ModeFamily(
        W, _block_diag([a.B, b.B]), _block_diag([a.S, b.S]),
        np.concatenate([a.grading, b.grading]), np.zeros(f1.n), exact,
    )


def box_product(f1: ModeFamily, f2: ModeFamily) -> ModeFamily:
    """Family of D1 ⊠ D2 = D1 ⊗ 1 + (-1)^{|s1|} ⊗ D2 on the product torus."""
    d1, d2 = f1.dim, f2.dim
    g1 = np.diag(f1.grading).astype(complex)
    W = np.concatenate([
        np.stack([np.kron(w, np.eye(d2)) for w in f1.W]),
        np.stack([np.kron(g1, w) for w in f2.W]),
    ])
    B = np.kron(f1.B, np.eye(d2)) + np.kron(g1, f2.B)
    return ModeFamily(
        W, B, np.kron(f1.S, f2.S), np.kron(f1.grading, f2.grading),
        np.concatenate([f1.u, f2.u]),
    )


def grade_swap(f: ModeFamily) -> ModeFamily:
    return ModeFamily(f.W, f.B, f.S, -f.grading, f.u, None if f.exact_parts is None else tuple(
        (q, u, m1, m0) for q, u, m0, m1 in f.exact_parts))


# --------------------------------------------------------------------------
# spec-level operations

@dataclass(frozen=True, eq=False)
class ModeOperator:
    m: tuple[int, ...]
    D0: np.ndarray
    D1: np.ndarray
    dims: tuple[int, int]


def check_flatness(spec_or_family) -> tuple[bool, float]:
    """(passed, residual) with residual = max(|B^2|, |{W_j, B}|)."""
    fam = spec_or_family if isinstance(spec_or_family, ModeFamily) else build_family(spec_or_family)
    B = fam.B
    res = np.max(np.abs(B @ B), initial=0.0)
    for w in fam.W:
        res = max(res, float(np.max(np.abs(w @ B + B @ w))))
    scale = max(1.0, float(np.max(np.abs(B), initial=0.0)) ** 2)
    return bool(res <= 1e-12 * scale), float(res)


def build_mode_operator(spec: ComplexSpec, m: Sequence[int], family: ModeFamily | None = None) -> ModeOperator:
    fam = family if family is not None else build_family(spec)
    ok, res = check_flatness(fam)
    if not ok:
        raise FlatnessError(f"D^2 != 0 (residual {res:.3e}); refusing to build the complex")
    d = fam.operators(np.array([m]), orthonormal=False)[0]
    return ModeOperator(tuple(int(x) for x in m), d[np.ix_(fam.odd, fam.even)],
                        d[np.ix_(fam.even, fam.odd)], (len(fam.even), len(fam.odd)))


def kernel_bound_radius(spec_or_family) -> float:
    """R0 in symbol-norm units: modes with |xi|_Q > R0 carry no harmonic forms.

    For D~ = 2 pi i X(xi) + B~ with {X, X^†} = |xi|^2, the Laplacian obeys
    <Lv, v> >= (max(0, a - b))^2 + (max(0, c - b))^2 with a^2 + c^2 =
    (2 pi |xi|)^2 and b = ||B~||, which is positive once 2 pi |xi| > sqrt(2) b.
    """
    fam = spec_or_family if isinstance(spec_or_family, ModeFamily) else build_family(spec_or_family)
    b = float(np.linalg.norm(fam.orthonormal_B, 2))
    return math.sqrt(2.0) * b / TWO_PI


def laplacian_lower_bound(radius: np.ndarray | float, bnorm: float) -> np.ndarray:
    """Lower bound on spec L(m) for modes with 2 pi |xi| = radius."""
    r = np.asarray(radius, dtype=float)
    b = bnorm
    out = np.zeros_like(r)
    ok = r > math.sqrt(2.0) * b
    rr = r[ok]
    sym = 2.0 * (rr / math.sqrt(2.0) - b) ** 2
    edge = (np.sqrt(np.maximum(rr ** 2 - b ** 2, 0.0)) - b) ** 2
    out[ok] = np.minimum(sym, edge)
    return out
