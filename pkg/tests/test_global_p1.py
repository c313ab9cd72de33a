import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sk2d import fields as fc
from sk2d import global_p1 as gp
from sk2d import sk_core as sk
from sk2d.errors import DomainError
from sk2d.families import build_family

from conftest import CUBE_ROOTS


# --- cone budget -------------------------------------------------------------------

def test_budget_infinity_with_three_small_cones():
    cones = [gp.ConeDatum(gp.INFINITY, -3.0)] + [gp.ConeDatum(z, 0.25) for z in (0, 1, -1)]
    b = gp.cone_budget(cones)
    assert b.total == -4.5 and not b.satisfied and not b.hypothesis_holds and len(b.notes) == 1


def test_budget_boundary_case():
    b = gp.cone_budget([gp.ConeDatum(z, -0.5) for z in (0, 1, -1, 2)])
    assert b.total == -4.0 and b.satisfied and b.hypothesis_holds


def test_budget_order_below_minus_one():
    b = gp.cone_budget([gp.ConeDatum(0, -1.5), gp.ConeDatum(1, -1.5)])
    assert b.total == -6.0 and not b.hypothesis_holds and len(b.notes) == 2


# --- Gauss-Bonnet --------------------------------------------------------------------

def test_gauss_bonnet_euclidean_exact():
    res = gp.gauss_bonnet_bounded(lambda x, y: 1 + 0 * x, 0.1, 0.8, 65, 64)
    assert res.lhs == 0.0 and res.rhs == 0.0


@pytest.mark.parametrize("order,min_rate", [(2, 1.5), (4, 3.0)])
def test_gauss_bonnet_converges(order, min_rate):
    w = build_family("liouville-zn", {"n": 2}).w
    errs = [abs(gp.gauss_bonnet_bounded(w, 0.1, 0.8, n, n, order=order).lhs) for n in (64, 128, 256)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > min_rate), rates


def test_gauss_bonnet_components_shifted_center():
    c = 0.5 + 0.5j
    w = lambda x, y: 4 / (1 - np.abs(x + 1j * y - c) ** 2) ** 2
    res = gp.gauss_bonnet_bounded(w, 0.2, 0.7, 129, 128, center=c)
    # curvature -1: the area term is minus the hyperbolic area
    area = 4 * np.pi * (0.7 ** 2 / (1 - 0.7 ** 2) - 0.2 ** 2 / (1 - 0.2 ** 2))
    assert abs(res.curvature_integral + area) < 1e-4 and abs(res.lhs) < 1e-4


def test_gauss_bonnet_rejects_nonpositive():
    with pytest.raises(DomainError):
        gp.gauss_bonnet_bounded(lambda x, y: x, 0.1, 0.5, 17, 16)


# --- Möbius -----------------------------------------------------------------------

@given(st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3),
       st.complex_numbers(max_magnitude=3))
def test_normalizing_mobius_property(z1, z2, z3):
    d = min(abs(z1 - z2), abs(z2 - z3), abs(z1 - z3))
    if d < 0.1:
        return
    T = gp.normalizing_mobius(z1, z2, z3)
    assert np.allclose([T(z1), T(z2), T(z3)], [0, 1, -1], atol=1e-9)
    Ti = T.inverse()
    assert np.isclose(Ti(T(0.3 + 0.2j)), 0.3 + 0.2j) or abs(T(0.3 + 0.2j)) > 1e8


def test_mobius_compose_and_derivative():
    A = gp.Mobius(1, 2, 3, 5)
    B = gp.Mobius(2, -1, 1, 1)
    z = 0.3 - 0.7j
    assert np.isclose(A.compose(B)(z), A(B(z)))
    eps = 1e-6
    assert np.isclose(A.derivative(z), (A(z + eps) - A(z - eps)) / (2 * eps), rtol=1e-6)
    assert np.isclose(A.image_of_infinity(), 1 / 3)


# --- construction -------------------------------------------------------------------

def test_validation():
    with pytest.raises(DomainError):
        gp.p1_family_construct(CUBE_ROOTS, [0.25] * 3)  # sum alpha = 1.5
    with pytest.raises(DomainError):
        gp.p1_family_construct(CUBE_ROOTS, [0.6, 0.45, 0.45])  # alpha >= 1
    with pytest.raises(DomainError):
        gp.p1_family_construct(CUBE_ROOTS[:2], [0.45] * 2)
    with pytest.raises(DomainError):
        gp.p1_family_construct([0, 1, 1], [0.45] * 3)


def test_symmetric_family_report(p1_symmetric):
    f = p1_symmetric
    assert f.report.converged and f.report.residual_history[-1] <= f.report.tol
    assert f.moduli_dim == 3 and f.k == 3
    assert f.report.overlap_residual < 5e-3
    assert [c.order for c in f.punctures] == [0.45, 0.45, 0.45, -3.0]


def test_symmetric_family_rotation_and_reflection(p1_symmetric):
    z = np.array([0.5 + 0.2j, 1.7 - 0.3j, -0.3 + 0.1j, 3 + 1j, 0.9 + 0.05j])
    w = np.exp(2j * np.pi / 3) * z
    u = p1_symmetric.u(z.real, z.imag)
    assert np.max(np.abs(p1_symmetric.u(w.real, w.imag) - u)) < 1e-3
    assert np.max(np.abs(p1_symmetric.u(z.real, -z.imag) - u)) < 1e-10


def test_symmetric_family_fits(p1_symmetric):
    for j in range(3):
        fit = p1_symmetric.fit_cone(j)
        assert fit.kind == "power" and abs(fit.beta / 2 - 0.45) < 5e-2
    inf = p1_symmetric.fit_infinity()
    assert inf.kind == "power" and abs(inf.beta / 2 + 3) < 5e-2


def _sub_triple(fam, j, lo):
    p = fam.cones[j]
    g = p.grid
    i0 = int(np.searchsorted(g.rho, np.log(lo * fam.radii["d"][j])))
    sg = fc.LogPolarGrid(g.rho[i0], g.rho_max, g.n_rho - i0, g.n_theta, g.center)
    u = fc.ScalarField(sg, p.u.values[i0:])
    return sk.SKTriple(fc.ScalarField(sg, np.array(sg.X)), u, 0.0)


@pytest.mark.parametrize("j", [0, 1, 2])
def test_patch_passes_structure_checks(p1_symmetric, j):
    t = _sub_triple(p1_symmetric, j, 0.05)
    c = sk.connection_from_triple(t)
    e = c.entries()
    scale = max(np.abs(fc.wedge(e[i][k], e[k][j2]).values[1:-1]).max()
                for i in range(2) for j2 in range(2) for k in range(2))
    assert sk.flatness_residual(c, 1) / scale < 5e-2
    assert sk.kw_residual_of_triple(t, None, 1) / np.exp(2 * t.u.values).max() < 1e-2
    assert sk.trace_defect(c, fc.gradient(t.u)) < 1e-12
    K = sk.gaussian_curvature(fc.ScalarField(t.grid, np.exp(-t.u.values))).values
    assert K[1:-1].min() >= -1e-6


def test_cone_holonomy_elliptic(p1_symmetric):
    for j in range(3):
        m = p1_symmetric.cone_holonomy(j)
        assert abs(m.trace - 2 * np.cos(0.9 * np.pi)) < 5e-2


def test_zero_displacement_is_deterministic(p1_symmetric):
    again = gp.family_perturb(p1_symmetric, 0, 0.0)
    assert gp.normalized_difference(p1_symmetric, again) == 0.0


def test_normalized_punctures(p1_symmetric):
    pts = p1_symmetric.normalized_punctures()
    assert np.allclose(pts[:3], [0, 1, -1], atol=1e-12)


def test_four_punctures_distinct(p1_four):
    a, b = p1_four
    assert a.moduli_dim == 6
    diff = gp.normalized_difference(a, b)
    assert diff > 10 * max(a.report.overlap_residual, b.report.overlap_residual)
    for j in range(4):
        assert abs(a.fit_cone(j).beta - 0.6) < 5e-2
