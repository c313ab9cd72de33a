import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sk2d import fields as fc
from sk2d import sk_core as sk
from sk2d.convergence import refinement_study
from sk2d.errors import DimensionError, DomainError
from sk2d.families import build_family, twisted_log_family

SK_FAMILIES = [("log", {"A": 1, "B": -1}), ("log", {"A": 2, "B": -1}), ("liouville-zn", {"n": 2}),
               ("poincare", {}), ("flat-harmonic", {}), ("flat-harmonic", {"kind": "exp"}),
               ("twisted-log", {"a": 1.5})]


def _grid(m, n=128):
    return fc.LogPolarGrid.from_radii(*m.domain, n + 1, n)


def test_effective_form_normalisation():
    # twisted log: u solves Delta u = a^2 e^{2u}/r^2, i.e. the source |a phi|^2
    m = twisted_log_family(2.0)
    g = fc.LogPolarGrid.from_radii(0.1, 0.8, 129, 128)
    t = m.triple
    good_flat = sk.flatness_residual(sk.connection_from_triple(t, g), 2)
    good_kw = sk.kw_residual_of_triple(t, g, 2)
    # reading E as dh + a phi / 2 breaks both by O(1)
    half = sk.SKTriple(t.h, t.u, 0.5 * t.a)
    assert sk.flatness_residual(sk.connection_from_triple(half, g), 2) > 1.0 > 10 * good_flat
    assert sk.kw_residual_of_triple(half, g, 2) > 1.0 > 10 * good_kw


@pytest.mark.parametrize("name,params", SK_FAMILIES)
def test_connection_flat_and_trace_condition(name, params):
    m = build_family(name, params)
    g0 = fc.LogPolarGrid.from_radii(*m.domain, 65, 64)
    gf = g0.refine(2).refine(2)
    c = sk.connection_from_triple(m.triple, gf)
    assert sk.trace_defect(c, m.triple.u.sample_gradient(gf)) < 1e-12
    study = refinement_study(lambda g, k: sk.flatness_residual(sk.connection_from_triple(m.triple, g), k),
                             g0, 3, 2)
    assert study.passes(1.9), study.orders


@pytest.mark.parametrize("name,params", [p for p in SK_FAMILIES if p[0] in ("log", "flat-harmonic")])
def test_explicit_connection_matches_derived(name, params):
    m = build_family(name, params)
    z = np.array([0.3 + 0.1j, -0.5j, -0.2 + 0.4j])
    wx, wy = m.connection_evaluator()(z.real, z.imag)
    ex, ey = m.explicit_connection(z.real, z.imag)
    assert np.allclose(wx, ex, atol=1e-12) and np.allclose(wy, ey, atol=1e-12)


def test_log_cubic_form_is_simple_pole():
    A = 2.0
    m = build_family("log", {"A": A, "B": -1})
    z = np.array([0.2, 0.3j, -0.5 + 0.1j])
    assert np.allclose(m.xi0()(z), -1j * A / (4 * z), atol=1e-14)


def test_liouville_cubic_form_constant():
    m = build_family("liouville-zn", {"n": 3, "K": -4.0})
    z = np.array([0.1, 0.2j, -0.3 - 0.1j])
    assert np.allclose(m.xi0()(z), m.meta["xi0_constant"]) and np.isclose(m.meta["xi0_constant"], -0.5j)


def test_liouville_constant_curvature_factor():
    m = build_family("liouville-zn", {"n": 2, "K": -1.0})
    g = fc.LogPolarGrid.from_radii(0.1, 0.8, 257, 256)
    wc = fc.ScalarField(g, m.meta["constant_curvature_w"](g.X, g.Y))
    K = sk.gaussian_curvature(wc).values
    assert fc.interior_max(K + 1.0, 2) < 1e-3


@pytest.mark.parametrize("name,params", SK_FAMILIES)
def test_sk_curvature_nonnegative(name, params):
    m = build_family(name, params)
    g = _grid(m, 256)
    K = sk.gaussian_curvature(fc.ScalarField(g, m.w(g.X, g.Y))).values
    assert K[1:-1].min() >= -1e-6


def test_holomorphy_residual_converges():
    m = build_family("flat-harmonic", {"kind": "exp"})
    g0 = fc.LogPolarGrid.from_radii(*m.domain, 65, 64)
    study = refinement_study(lambda g, k: sk.holomorphy_residual(sk.cubic_form(m.triple, g), k), g0, 3, 2)
    assert study.passes(1.9), study.orders


def test_prepotential_plus_convention():
    A, B = 1.0, -1.0
    h = build_family("log", {"A": A, "B": B}).triple.h
    F = lambda z: 1j * (A * (z * z * np.log(z) - 1.5 * z * z) + B * z * z)
    F2 = lambda z: 1j * (2 * A * np.log(z) + 2 * B)
    exact = sk.prepotential_consistency(h, F, F2)
    assert exact.convention == "+2h" and exact.residual < 1e-12
    cauchy = sk.prepotential_consistency(h, F)
    assert cauchy.convention == "+2h" and cauchy.residual < 1e-8


def test_prepotential_negative_control():
    A, B, eps = 1.0, -1.0, 0.1
    h = build_family("log", {"A": A, "B": B}).triple.h
    # F + i eps z^3 shifts Im F'' by 6 eps Re z
    F2 = lambda z: 1j * (2 * A * np.log(z) + 2 * B) + 6j * eps * z
    z = np.array([0.5, 0.3 + 0.4j, -0.2 + 0.6j])
    chk = sk.prepotential_consistency(h, None, F2, samples=z)
    assert np.isclose(chk.residual_plus, 6 * eps * 0.5)


def test_perturbed_connection_not_flat():
    m = build_family("log", {"A": 1, "B": -1})
    residuals = []
    for n in (64, 128, 256):
        g = fc.LogPolarGrid.from_radii(0.1, 0.8, n + 1, n)
        c = sk.connection_from_triple(m.triple, g)
        bumped = sk.ConnectionForm(c.omega11 + fc.OneFormField(g, np.full(g.shape, 0.1), np.zeros(g.shape)),
                                   c.omega22)
        residuals.append(sk.flatness_residual(bumped, 2))
    assert min(residuals) > 0.01 and residuals[-1] > 0.5 * residuals[0]


def test_sampled_triple_grid_mismatch():
    m = build_family("log", {"A": 1, "B": -1})
    g1, g2 = _grid(m, 32), _grid(m, 64)
    t = m.triple.sample(g1)
    with pytest.raises(DimensionError):
        sk.connection_from_triple(t, g2)


def test_curvature_rejects_nonpositive_density():
    g = fc.LogPolarGrid.from_radii(0.1, 0.9, 8, 8)
    with pytest.raises(DomainError):
        sk.gaussian_curvature(fc.ScalarField(g, np.zeros(g.shape)))


@given(st.floats(0.1, 3.0), st.floats(-3.0, -0.2))
def test_log_family_trace_condition_property(A, B):
    m = build_family("log", {"A": A, "B": B})
    g = fc.LogPolarGrid.from_radii(1e-3, 0.5 * min(0.9, np.exp(-B / A)), 17, 16)
    c = sk.connection_from_triple(m.triple, g)
    assert sk.trace_defect(c, m.triple.u.sample_gradient(g)) < 1e-10
