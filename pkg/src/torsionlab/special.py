"""Dedekind eta, Jacobi theta_1 and the holomorphic torsion of a complex torus."""
from __future__ import annotations

import cmath
import math

QTOL = 1e-18
MAX_FACTORS = 500


class DomainError(ValueError):
    pass


def _nome(tau: complex) -> complex:
    tau = complex(tau)
    if tau.imag <= 0:
        raise DomainError("Im tau must be positive")
    return cmath.exp(2j * math.pi * tau)


def _cutoff(q: complex) -> int:
    aq = abs(q)
    if aq == 0:
        return 1
    k = math.ceil(math.log(QTOL) / math.log(aq))
    return max(1, min(MAX_FACTORS, k))


def dedekind_eta(tau: complex) -> complex:
    """q^{1/24} prod_{k>=1} (1 - q^k) with q^{1/24} = exp(pi i tau / 12)."""
    q = _nome(tau)
    prod = 1.0 + 0j
    qk = 1.0 + 0j
    for _ in range(_cutoff(q)):
        qk *= q
        prod *= 1 - qk
    return cmath.exp(1j * math.pi * complex(tau) / 12) * prod


def theta1_product(w: complex, tau: complex) -> complex:
    """-eta(tau) e^{pi i (w + tau/6)} prod_{|k|<=K} (1 - e^{2 pi i (|k| tau - eps_k w)}).

    eps_k = sign(k + 1/2).  Equals -i times the classical sine-series theta_1.
    """
    q = _nome(tau)
    w = complex(w)
    tau = complex(tau)
    x = cmath.exp(2j * math.pi * w)
    prod = 1 - 1 / x  # k = 0
    qk = 1.0 + 0j
    for _ in range(_cutoff(q)):
        qk *= q
        prod *= (1 - qk / x) * (1 - qk * x)
    return -dedekind_eta(tau) * cmath.exp(1j * math.pi * (w + tau / 6)) * prod


def theta1_series(w: complex, tau: complex, terms: int | None = None) -> complex:
    """Series oracle: -i * 2 sum_{n>=0} (-1)^n q^{(n+1/2)^2/2} sin((2n+1) pi w)."""
    _nome(tau)
    w = complex(w)
    tau = complex(tau)
    if terms is None:
        terms = int(math.sqrt(40.0 / tau.imag)) + 3
    total = 0j
    for n in range(terms):
        total += (-1) ** n * cmath.exp(1j * math.pi * tau * (n + 0.5) ** 2) * cmath.sin((2 * n + 1) * math.pi * w)
    return -2j * total


def kronecker_torsion(u: float, v: float, tau: complex) -> float:
    """|e^{pi i v^2 tau} theta_1(u - tau v, tau) / eta(tau)| for a nontrivial character."""
    if abs(u - round(u)) < 1e-14 and abs(v - round(v)) < 1e-14:
        raise DomainError("trivial character: cohomology does not vanish")
    tau = complex(tau)
    val = cmath.exp(1j * math.pi * v * v * tau) * theta1_product(u - tau * v, tau) / dedekind_eta(tau)
    return abs(val)
