import json
import math

import numpy as np
import pytest

from torsionlab import corpus as C
from torsionlab import zeta as Z
from torsionlab.complexes import build_family
from torsionlab.zeta import (
    ConsistencyError,
    HeatSettings,
    ZetaResult,
    epstein_derivative_at_zero,
    epstein_logdet,
    epstein_zeta,
    hurwitz_logdet,
    logdet_partial,
    zeta_regularity_check,
)


def test_hurwitz_examples():
    assert hurwitz_logdet(0.5) == pytest.approx(math.log(4), abs=1e-14)
    assert hurwitz_logdet(0.25) == pytest.approx(math.log(2), abs=1e-14)
    assert hurwitz_logdet(1.0) == 0.0
    for a in (0.1, 0.37, 0.8):
        assert hurwitz_logdet(a) == pytest.approx(math.log(4 * math.sin(math.pi * a) ** 2), abs=1e-13)
    with pytest.raises(ValueError):
        hurwitz_logdet(0.0)


def test_hurwitz_against_mpmath_derivative():
    import mpmath
    a = 0.3
    # log Det = -d/ds [ (2π)^{-2s} (ζ_H(2s, a) + ζ_H(2s, 1-a)) ] at s = 0
    f = lambda s: (2 * mpmath.pi) ** (-2 * s) * (mpmath.zeta(2 * s, a) + mpmath.zeta(2 * s, 1 - a))
    assert hurwitz_logdet(a) == pytest.approx(float(-mpmath.diff(f, 0)), abs=1e-12)


def test_epstein_reduces_to_hurwitz():
    assert epstein_logdet([[1.0]], [0.25]) == pytest.approx(math.log(2), abs=1e-12)
    assert epstein_logdet([[1.0]], [0.0]) == pytest.approx(0.0, abs=1e-12)
    assert epstein_logdet([[2.5]], [0.0]) == pytest.approx(hurwitz_logdet(1.0, math.sqrt(2.5)), abs=1e-12)


def test_epstein_spot_value():
    assert epstein_zeta(np.eye(2), [0, 0], 2.0) == pytest.approx(6.026812039691939, rel=1e-12)


def test_epstein_zeta_at_zero_matches_derivative_routine():
    a = np.array([[1.3, 0.2], [0.2, 0.7]])
    z0, zp = epstein_derivative_at_zero(a, [0.2, 0.6])
    h = 1e-4
    fd = (epstein_zeta(a, [0.2, 0.6], h) - epstein_zeta(a, [0.2, 0.6], -h)) / (2 * h)
    assert z0 == 0.0
    assert zp == pytest.approx(fd, abs=1e-7)
    z0, _ = epstein_derivative_at_zero(a, [0, 0])
    assert z0 == -1.0


def test_epstein_homogeneity():
    g = np.array([[1.0, 0.3], [0.3, 2.0]])
    for u in ([0, 0], [0.3, 0.1]):
        z0, zp = epstein_derivative_at_zero(g, u)
        for c in (0.5, 3.0):
            _, zpc = epstein_derivative_at_zero(c * g, u)
            assert zpc == pytest.approx(zp - math.log(c) * z0, abs=1e-11)


def test_logdet_partial_circle():
    spec = C.circle(0.25)
    ex = logdet_partial(spec, 0, "exact")
    assert ex.log_det_prime == pytest.approx(math.log(2), abs=1e-12)
    ht = logdet_partial(spec, 0, "heat-trace")
    assert abs(ht.log_det_prime - math.log(2)) < 1e-5
    assert ht.log_det_prime == -ht.zeta_prime0
    g1 = logdet_partial(spec, 1, "heat-trace")
    assert g1.log_det_prime == 0.0 and g1.zeta0 == 0.0


def test_logdet_partial_t3_flux():
    r = logdet_partial(C.t3_flux(1.0), 0)
    assert math.isfinite(r.log_det_prime) and abs(r.residue0) < 1e-3
    assert 0 < r.err < 1e-4


def test_exact_and_heat_paths_agree_on_t2():
    spec = C.t2_de_rham()
    for g in (0, 1):
        ex = logdet_partial(spec, g, "exact")
        ht = logdet_partial(spec, g, "heat-trace", cross_check=False)
        assert abs(ex.log_det_prime - ht.log_det_prime) < max(1e-5, 10 * ht.err)
        assert ex.zeta0 == pytest.approx(ht.zeta0, abs=1e-8)


def test_zeta0_homogeneity_on_heat_path():
    # scaling the metric by c^2 scales eigenvalues by c^{-2} when there is no flux
    base = C.t2_de_rham()
    r0 = logdet_partial(base, 0, "heat-trace")
    c = 1.5
    scaled = base.with_geometry(type(base.geometry)(c ** 2 * base.geometry.gram))
    r1 = logdet_partial(scaled, 0, "heat-trace")
    assert r1.zeta_prime0 == pytest.approx(r0.zeta_prime0 + 2 * math.log(c) * r0.zeta0, abs=1e-7)


def test_error_estimate_is_honest():
    spec = C.t3_flux(1.0)
    a = logdet_partial(spec, 0, "heat-trace")
    b = logdet_partial(spec, 0, "heat-trace", HeatSettings(margin=40, samples=32, extra_order=4, tol=1e-14))
    assert abs(a.log_det_prime - b.log_det_prime) < a.err


def test_consistency_error(monkeypatch):
    spec = C.circle(0.25)
    real = Z._exact_result

    def shifted(fam, grade):
        r = real(fam, grade)
        return ZetaResult(r.grade, r.zeta0, r.zeta_prime0 - 1e-3, r.log_det_prime + 1e-3, 0.0, r.err)

    monkeypatch.setattr(Z, "_exact_result", shifted)
    with pytest.raises(ConsistencyError):
        logdet_partial(spec, 0, "heat-trace")


def test_method_validation():
    with pytest.raises(ValueError):
        logdet_partial(C.t3_flux(1.0), 0, "exact")
    with pytest.raises(ValueError):
        logdet_partial(C.circle(0.25), 2)
    with pytest.raises(ValueError):
        logdet_partial(C.circle(0.25), 0, "quadrature")


def test_json_round_trip_17_digits():
    r = logdet_partial(C.circle(0.3), 0, "heat-trace")
    d = json.loads(r.to_json())
    assert all(isinstance(d[k], str) for k in ("zeta0", "zeta_prime0", "log_det_prime", "residue0", "err"))
    assert ZetaResult.from_json_dict(d) == r


def test_regularity_examples():
    for spec in (C.circle(0.25), C.t2_de_rham(), C.t3_flux(1.0)):
        for g in (0, 1):
            v = zeta_regularity_check(spec, g)
            assert v.passed, (spec.name, g, v.residue0)
