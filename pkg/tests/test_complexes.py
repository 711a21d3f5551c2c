import math

import numpy as np
import pytest

from torsionlab.complexes import (
    ComplexSpec,
    ConstantForm,
    FlatnessError,
    SuperconnectionData,
    TwistedDeRham,
    TwistedDolbeault,
    box_product,
    build_family,
    build_mode_operator,
    check_flatness,
    direct_sum,
    elementary_wedge,
    form_basis,
    grade_swap,
    kernel_bound_radius,
    wedge_matrix,
)
from torsionlab.geometry import Character, ComplexTorus, FlatTorus, MetricPath
from torsionlab.spectral import mode_spectrum


def t3(theta=1.0, u=(0.3, 0.0, 0.0), gram=None):
    gram = np.eye(3) if gram is None else gram
    return ComplexSpec(TwistedDeRham(ConstantForm.volume(3, theta)), FlatTorus(gram), Character(u))


def test_wedge_examples():
    w = wedge_matrix(ConstantForm(1, {(0,): 1.0}))
    # basis {1, dx1}
    np.testing.assert_array_equal(w, [[0, 0], [1, 0]])
    basis = form_basis(2)
    e1 = elementary_wedge(2, (0,))
    e2 = elementary_wedge(2, (1,))
    top = basis.index((0, 1))
    assert e1[top, basis.index((1,))] == 1
    assert e2[top, basis.index((0,))] == -1


def test_wedge_anticommutes():
    for n in (2, 3, 4):
        for i in range(n):
            for j in range(n):
                a, b = elementary_wedge(n, (i,)), elementary_wedge(n, (j,))
                np.testing.assert_array_equal(a @ b + b @ a, 0)


def test_flatness_examples():
    assert check_flatness(t3(1.0)) == (True, 0.0)
    sc = ComplexSpec(SuperconnectionData(2, 0, ConstantForm(3, {(0, 1, 2): np.eye(2) * 0.7})),
                     FlatTorus(np.eye(3)))
    assert check_flatness(sc)[0]


def test_flatness_counterexample():
    # bundle C(even) + C(odd): a diagonal on dx1, b off-diagonal on dx2^dx3
    a = np.diag([1.0, 2.0]).astype(complex)
    b = np.array([[0, 1], [0, 0]], dtype=complex)
    form = ConstantForm(3, {(0,): a, (1, 2): b})
    spec = ComplexSpec(SuperconnectionData(1, 1, form), FlatTorus(np.eye(3)))
    ok, res = check_flatness(spec)
    assert not ok and res > 0
    # the dx1^dx2^dx3 coefficient is a graded commutator of a and b; both signs are nonzero
    cands = [np.max(np.abs(a @ b + b @ a)), np.max(np.abs(a @ b - b @ a))]
    assert min(abs(res - c) for c in cands) < 1e-12
    with pytest.raises(FlatnessError):
        build_mode_operator(spec, (0, 0, 0))


def test_superconnection_parity_enforced():
    with pytest.raises(ValueError):
        SuperconnectionData(1, 1, ConstantForm(2, {(0,): np.array([[0, 0], [1, 0]])}))


def test_circle_mode_operator():
    spec = ComplexSpec(TwistedDeRham(ConstantForm.zero(1)), FlatTorus([[1.0]]), Character((0.3,)))
    op = build_mode_operator(spec, (2,))
    assert op.D0.shape == (1, 1)
    assert op.D0[0, 0] == pytest.approx(2j * math.pi * 2.3)
    np.testing.assert_array_equal(op.D1, 0)
    ms = mode_spectrum(spec, (2,))
    np.testing.assert_allclose(ms.spec0, [4 * math.pi ** 2 * 2.3 ** 2])
    assert len(ms.spec1) == 0 and ms.ker0 == ms.ker1 == 0


def test_t3_zero_mode_flux_action():
    spec = t3(1.3, u=(0, 0, 0))
    op = build_mode_operator(spec, (0, 0, 0))
    basis = form_basis(3)
    even = [b for b in basis if len(b) % 2 == 0]
    odd = [b for b in basis if len(b) % 2 == 1]
    # 1 -> theta vol, 2-forms -> 0
    col = op.D0[:, even.index(())]
    assert col[odd.index((0, 1, 2))] == pytest.approx(1.3)
    assert np.count_nonzero(np.abs(col) > 1e-14) == 1
    for b in even[1:]:
        np.testing.assert_allclose(op.D0[:, even.index(b)], 0)
    np.testing.assert_allclose(op.D1, 0)


def test_t3_mode_blocks_square_to_zero_and_match_dense_eigensolver():
    spec = t3(1.0, u=(0.3, 0, 0))
    op = build_mode_operator(spec, (0, 0, 0))
    assert op.dims == (4, 4)
    np.testing.assert_allclose(op.D1 @ op.D0, 0, atol=1e-12)
    np.testing.assert_allclose(op.D0 @ op.D1, 0, atol=1e-12)
    ms = mode_spectrum(spec, (0, 0, 0))
    # dense 8x8 Laplacian (G = I so the fibre is already orthonormal)
    fam = build_family(spec)
    d = fam.operators(np.array([[0, 0, 0]]))[0]
    lap = d.conj().T @ d + d @ d.conj().T
    full = np.sort(np.linalg.eigvalsh(lap))
    l0 = full  # L = L0 ⊕ L1; D0^†D0 spectrum sits inside
    for lam in ms.spec0:
        assert np.min(np.abs(l0 - lam)) < 1e-10
    assert len(ms.spec0) + ms.ker0 <= 4


def test_kernel_bound_examples():
    free = ComplexSpec(TwistedDeRham(ConstantForm.zero(2)), FlatTorus(np.eye(2)), Character((0, 0)))
    assert kernel_bound_radius(free) == 0.0
    # only m = 0 carries kernel
    assert mode_spectrum(free, (0, 0)).ker0 == 2
    assert mode_spectrum(free, (1, 0)).ker0 == 0
    theta = 1.7
    spec = t3(theta, u=(0.0, 0.0, 0.0))
    r0 = kernel_bound_radius(spec)
    assert 2 * math.pi * r0 == pytest.approx(math.sqrt(2) * theta)
    # no kernel just inside or outside the bound
    fam = build_family(spec)
    for m in [(1, 0, 0), (0, 1, 1)]:
        ms = mode_spectrum(fam, m)
        assert ms.ker0 == ms.ker1 == 0


def test_free_de_rham_koszul_multiplicities():
    rng = np.random.default_rng(5)
    for n in (1, 2, 3, 4):
        a = rng.normal(size=(n, n))
        gram = a @ a.T + n * np.eye(n)
        u = tuple(rng.uniform(0, 1, n))
        spec = ComplexSpec(TwistedDeRham(ConstantForm.zero(n)), FlatTorus(gram), Character(u))
        fam = build_family(spec)
        m = tuple(int(x) for x in rng.integers(-2, 3, n))
        xi = np.array(m) + np.array(u)
        lam = 4 * math.pi ** 2 * xi @ np.linalg.solve(gram, xi)
        d = fam.operators(np.array([m]))[0]
        sv = np.linalg.svd(d, compute_uv=False) ** 2
        nz = sv[sv > 1e-9 * lam]
        np.testing.assert_allclose(nz, lam, rtol=1e-10)
        assert len(nz) == 2 ** (n - 1)  # sum_k C(n-1, k)


def test_dolbeault_family_shape():
    spec = ComplexSpec(TwistedDolbeault(0), ComplexTorus(0.3 + 1.2j, 2.0, (0.25, 0.1)))
    fam = build_family(spec)
    assert fam.dim == 2 and fam.exact_parts is not None
    q = fam.symbol_metric
    assert np.all(np.linalg.eigvalsh(q) > 0)


def test_dolbeault_flux_parity():
    with pytest.raises(ValueError):
        TwistedDolbeault(0, ConstantForm(2, {(0,): 1.0}))
    with pytest.raises(ValueError):
        TwistedDolbeault(2)


def test_grade_swap_and_products_are_flat():
    a = build_family(t3(1.0))
    b = build_family(ComplexSpec(TwistedDeRham(ConstantForm.zero(1)), FlatTorus([[1.0]]), Character((0.2,))))
    for fam in (grade_swap(a), direct_sum(a, a), box_product(a, b)):
        assert check_flatness(fam)[0]
        d = fam.operators(np.array([[1] * fam.n]))[0]
        np.testing.assert_allclose(d @ d, 0, atol=1e-10)


def test_mode_dependence_only_through_xi():
    spec = t3(0.8, u=(0.1, 0.2, 0.3))
    o1 = build_mode_operator(spec, (1, 0, 2))
    o2 = build_mode_operator(spec, (0, 0, 0))
    free = ComplexSpec(TwistedDeRham(ConstantForm.zero(3)), FlatTorus(np.eye(3)), Character((0.1, 0.2, 0.3)))
    f1 = build_mode_operator(free, (1, 0, 2))
    f2 = build_mode_operator(free, (0, 0, 0))
    np.testing.assert_allclose(o1.D0 - o2.D0, f1.D0 - f2.D0, atol=1e-12)


def test_alpha_operator_conformal_and_fd():
    from torsionlab.complexes import alpha_operator_fibre
    spec = t3(1.0, gram=np.diag([1.0, 1.2, 0.9]))
    path = MetricPath(spec.geometry, "conformal")
    alpha = alpha_operator_fibre(spec, path, 0.0)
    degs = [len(b) for b in form_basis(3)]
    np.testing.assert_allclose(np.diag(alpha).real, [3 - 2 * k for k in degs], atol=1e-12)
    const = alpha_operator_fibre(spec, MetricPath(spec.geometry, "constant"), 0.0)
    np.testing.assert_allclose(const, 0)
    # finite differences of the Gram matrix, O(h^2)
    from torsionlab.complexes import de_rham_inner_product
    p2 = MetricPath(spec.geometry, "shear")
    a = alpha_operator_fibre(spec, p2, 0.2)
    s = de_rham_inner_product(p2.at(0.2))
    errs = []
    for h in (1e-3, 1e-4):
        ds = (de_rham_inner_product(p2.at(0.2 + h)) - de_rham_inner_product(p2.at(0.2 - h))) / (2 * h)
        errs.append(np.max(np.abs(np.linalg.solve(s, ds) - a)))
    assert errs[1] < errs[0] * 0.05 or errs[1] < 1e-10
    # middle degree block vanishes for even n on a conformal path
    s2 = ComplexSpec(TwistedDeRham(ConstantForm.zero(2)), FlatTorus(np.eye(2)), Character((0.1, 0.2)))
    a2 = alpha_operator_fibre(s2, MetricPath(s2.geometry, "conformal"), 0.0)
    np.testing.assert_allclose(np.diag(a2).real, [2, 0, 0, -2], atol=1e-12)
