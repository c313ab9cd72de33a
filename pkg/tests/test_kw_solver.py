import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from sk2d import kw_solver as kw
from sk2d.errors import DimensionError, DomainError
from sk2d.fields import LogPolarGrid, ScalarField

x, y = sp.symbols("x y", positive=True)


@pytest.mark.parametrize("expr", [sp.log(2 / (1 - x ** 2 - y ** 2)),
                                  -sp.log(sp.sqrt(x ** 2 + y ** 2)
                                          * -sp.log(sp.sqrt(x ** 2 + y ** 2)))])
def test_oracles_solve_liouville_symbolically(expr):
    d = sp.diff(expr, x, 2) + sp.diff(expr, y, 2) - sp.exp(2 * expr)
    f = sp.lambdify((x, y), d, "numpy")
    for px, py in [(0.1, 0.2), (0.4, 0.3), (0.05, 0.6)]:
        assert abs(f(px, py)) < 1e-10


def test_oracle_callables_match_symbolic():
    pts = np.array([0.2, 0.5]), np.array([0.1, 0.3])
    r = np.hypot(*pts)
    assert np.allclose(kw.hyperbolic_disc_potential(*pts), np.log(2 / (1 - r ** 2)))
    assert np.allclose(kw.punctured_disc_potential(*pts), -np.log(-r * np.log(r)))


def _oracle_errors(u_exact, r_in, r_out, sizes=(32, 64, 128)):
    errs, reports = [], []
    for n in sizes:
        g = LogPolarGrid.from_radii(r_in, r_out, n + 1, n)
        u, rep = kw.solve_kw(kw.KWProblem.from_exact(g, 1.0, u_exact))
        errs.append(np.max(np.abs(u.values - u_exact(g.X, g.Y))))
        reports.append(rep)
    return np.array(errs), reports


def test_hyperbolic_disc_second_order():
    errs, reps = _oracle_errors(kw.hyperbolic_disc_potential, 0.05, 0.9)
    assert all(r.converged for r in reps)
    orders = np.log2(errs[:-1] / errs[1:])
    assert orders[-1] > 1.9 and np.all(orders > 1.5)


def test_newton_residual_history_monotone():
    g = LogPolarGrid.from_radii(1e-3, 0.5, 65, 64)
    _, rep = kw.solve_kw(kw.KWProblem.from_exact(g, 1.0, kw.punctured_disc_potential))
    h = np.array(rep.residual_history)
    assert rep.converged and np.all(np.diff(h) <= 0) and rep.final_residual <= 1e-10
    assert len(rep.damping) == rep.iterations and all(0 < lam <= 1 for lam in rep.damping)


def test_comparison_principle():
    g = LogPolarGrid.from_radii(0.1, 0.9, 33, 32)
    lo = kw.KWProblem.from_exact(g, 1.0, kw.hyperbolic_disc_potential)
    inner, outer = lo.boundary_u
    hi = kw.KWProblem(g, lo.source_q, (inner + 0.3, outer + 0.1))
    u_lo, _ = kw.solve_kw(lo)
    u_hi, _ = kw.solve_kw(hi)
    assert np.all(u_hi.values >= u_lo.values - 1e-12)


def test_zero_source_reduces_to_harmonic():
    g = LogPolarGrid.from_radii(0.2, 0.8, 33, 32)
    inner = 1.0 + 0.5 * np.cos(g.theta) * g.r_min
    outer = 1.0 + 0.5 * np.cos(g.theta) * g.r_max + 2 * np.log(g.r_max / g.r_min)
    inner = inner.copy()
    h = kw.solve_harmonic(g, inner, outer, log_coefficient=2.0)
    p = kw.KWProblem(g, ScalarField(g, np.zeros(g.shape)), (inner, outer))
    u, rep = kw.solve_kw(p)
    assert rep.converged and np.allclose(u.values, h.values, atol=1e-10)


def test_cone_flux_closure_exponent():
    alpha = 0.6
    g = LogPolarGrid.from_radii(1e-10, 0.5, 241, 32)
    outer = np.full(g.n_theta, 0.0)
    u, rep = kw.solve_kw(kw.KWProblem(g, ScalarField(g, np.ones(g.shape)), (None, outer), cone_alpha=alpha))
    assert rep.converged
    slope = (u.values[10, 0] - u.values[0, 0]) / (g.rho[10] - g.rho[0])
    assert abs(slope + alpha) < 1e-3


def test_problem_validation():
    g = LogPolarGrid.from_radii(0.1, 0.9, 9, 8)
    ones = ScalarField(g, np.ones(g.shape))
    bnd = (np.zeros(8), np.zeros(8))
    with pytest.raises(DomainError):
        kw.KWProblem(g, ScalarField(g, -np.ones(g.shape)), bnd)
    with pytest.raises(DimensionError):
        kw.KWProblem(g, ones, (np.zeros(7), np.zeros(8)))
    with pytest.raises(DomainError):
        kw.KWProblem(g, ones, (None, np.zeros(8)), cone_alpha=1.0)
    with pytest.raises(DomainError):
        kw.solve_kw(kw.KWProblem(g, ones, bnd), tol=0)


def test_nonconvergence_reported_not_raised():
    g = LogPolarGrid.from_radii(0.1, 0.9, 17, 16)
    p = kw.KWProblem.from_exact(g, 1.0, kw.hyperbolic_disc_potential)
    _, rep = kw.solve_kw(p, max_iter=1)
    assert not rep.converged and rep.message


@given(st.floats(-1.0, 1.0), st.floats(0.0, 2.0))
def test_solution_matches_constant_shift_property(c, q):
    # u = c + log r ... is not a solution; use the scaling symmetry of the disc oracle instead:
    # u_lam(z) = u(lam z) + log lam solves the same equation
    lam = np.exp(0.2 * c)
    g = LogPolarGrid.from_radii(0.1, 0.7, 17, 16)
    ex = lambda X, Y: kw.hyperbolic_disc_potential(lam * X, lam * Y) + np.log(lam)
    u, rep = kw.solve_kw(kw.KWProblem.from_exact(g, 1.0, ex))
    assert rep.converged and np.max(np.abs(u.values - ex(g.X, g.Y))) < 0.05
    # the residual of the discrete solution is tiny for any nonnegative source
    p = kw.KWProblem(g, ScalarField(g, np.full(g.shape, q)), (np.zeros(16), np.zeros(16)))
    u2, rep2 = kw.solve_kw(p)
    assert rep2.converged and u2.values.max() <= 1e-12
