import math

import numpy as np
from hypothesis import given, settings, strategies as st

from torsionlab import corpus as C
from torsionlab.complexes import build_family
from torsionlab.geometry import Character, FlatTorus, dual_norm_sq
from torsionlab.reduce import stable_sum
from torsionlab.special import kronecker_torsion, theta1_product, theta1_series
from torsionlab.spectral import heat_trace
from torsionlab.torsion import covering_check
from torsionlab.zeta import hurwitz_logdet

unit = st.floats(0.01, 0.99)
taus = st.builds(complex, st.floats(-0.5, 0.5), st.floats(0.6, 2.0))
FAST = settings(max_examples=25, deadline=None)


@st.composite
def grams(draw, n):
    a = np.array(draw(st.lists(st.floats(-1, 1), min_size=n * n, max_size=n * n))).reshape(n, n)
    return a @ a.T + 0.5 * np.eye(n)


@FAST
@given(grams(3), st.lists(st.integers(-4, 4), min_size=3, max_size=3), st.floats(0.2, 5.0))
def test_dual_norm_scaling(g, m, c):
    t = FlatTorus(g)
    base = dual_norm_sq(t, m)
    assert base >= 0 and (base > 0 or not any(m))
    assert math.isclose(dual_norm_sq(FlatTorus(c * g), m), base / c, rel_tol=1e-12, abs_tol=1e-15)


@FAST
@given(st.floats(-3, 3), unit, unit, unit, st.lists(st.integers(-3, 3), min_size=3, max_size=3))
def test_flux_family_squares_to_zero(theta, a, b, c, m):
    fam = build_family(C.t3_flux(theta, char=(a, b, c)))
    d = fam.operators(np.array([m]))[0]
    assert np.max(np.abs(d @ d)) < 1e-10 * (1 + np.max(np.abs(d)) ** 2)


@FAST
@given(unit, st.floats(0.02, 3.0))
def test_mckean_singer_circle(u, t):
    assert abs(heat_trace(C.circle(u), t).str) < 1e-10


@FAST
@given(unit)
def test_hurwitz_reflection(a):
    assert math.isclose(hurwitz_logdet(a), hurwitz_logdet(1 - a), abs_tol=1e-12)


@FAST
@given(st.floats(0.05, 0.95), taus)
def test_theta_odd_and_matches_series(w, tau):
    p = theta1_product(w, tau)
    assert abs(theta1_product(-w, tau) + p) < 1e-12 * max(1, abs(p))
    assert abs(p - theta1_series(w, tau)) < 1e-10 * max(1, abs(p))


@FAST
@given(unit, unit, taus)
def test_kronecker_periodic(u, v, tau):
    k = kronecker_torsion(u, v, tau)
    assert k > 0
    assert math.isclose(kronecker_torsion(u + 1, v, tau), k, rel_tol=1e-9)
    assert math.isclose(kronecker_torsion(u, v + 1, tau), k, rel_tol=1e-9)


@FAST
@given(unit, st.integers(1, 6))
def test_covering_identity(u, fold):
    assert covering_check(u, fold, tol=1e-9).passed


@FAST
@given(st.lists(st.floats(-1e6, 1e6), min_size=0, max_size=20000))
def test_stable_sum_accuracy(xs):
    x = np.array(xs, dtype=float)
    exact = math.fsum(xs)
    scale = float(np.sum(np.abs(x))) if len(x) else 0.0
    assert abs(stable_sum(x) - exact) <= 1e-13 * max(scale, 1.0)


@FAST
@given(st.lists(unit, min_size=2, max_size=2))
def test_character_is_periodic_in_family(u):
    a = build_family(C.t2_de_rham(char=tuple(u)))
    b = build_family(C.t2_de_rham(char=tuple(x + 1 for x in u)))
    assert np.allclose(a.u, b.u)
    assert np.allclose(Character(tuple(u)).u, Character(tuple(x - 2 for x in u)).u)
