"""Damped Newton solver for ``Delta u = q e^{2u}`` on a log-polar annulus.

The discrete equation is imposed in the form

    u_rho_rho + u_theta_theta - r^2 q e^{2u} = 0,

i.e. the flat equation multiplied by ``r^2``.  Both forms have the same
solutions; the scaled one has O(1) stencil weights, so the Newton stopping
test can be met close to machine precision even when ``r_min`` is tiny.
``kw_residual`` reports the unscaled residual.

The inner circle carries either Dirichlet data or a cone-flux closure
``u_rho = -alpha + r^2 q e^{2u} / (2 - 2 alpha)``, which is the first
correction of ``u = -alpha log r + c + b r^{2-2alpha}``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fields as fc
from .errors import DimensionError, DomainError, SolverError
from .fields import LogPolarGrid, ScalarField

log = logging.getLogger(__name__)

MIN_STEP = 2.0 ** -20


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    damping: List[float] = field(default_factory=list)
    converged: bool = False
    residual_history: List[float] = field(default_factory=list)
    message: str = ""

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "damping": list(self.damping),
            "converged": self.converged,
            "residual_history": list(self.residual_history),
            "message": self.message,
        }


@dataclass(frozen=True, eq=False)
class KWProblem:
    """Boundary value problem for ``Delta u = q e^{2u}`` on an annulus.

    Parameters
    ----------
    grid : LogPolarGrid
    source_q : ScalarField
        Nonnegative source, typically ``|dh + a phi|^2``.
    boundary_u : tuple of arrays
        ``(inner, outer)`` Dirichlet values, each of length ``n_theta``.
        ``inner`` may be ``None`` when ``cone_alpha`` is given.
    initial_u : ScalarField, optional
        Starting iterate; default is linear interpolation in ``rho``.
    cone_alpha : float, optional
        Use the cone-flux closure with exponent ``alpha < 1`` on the inner
        circle instead of Dirichlet data.
    """

    grid: LogPolarGrid
    source_q: ScalarField
    boundary_u: tuple
    initial_u: Optional[ScalarField] = None
    cone_alpha: Optional[float] = None

    def __post_init__(self):
        if self.source_q.grid != self.grid:
            raise DimensionError("source lives on a different grid")
        if np.any(self.source_q.values < 0):
            raise DomainError("source q must be nonnegative")
        inner, outer = self.boundary_u
        if outer is None or np.shape(outer) != (self.grid.n_theta,):
            raise DimensionError("outer boundary data must have length n_theta")
        if self.cone_alpha is None:
            if inner is None or np.shape(inner) != (self.grid.n_theta,):
                raise DimensionError("inner boundary data must have length n_theta")
        elif not self.cone_alpha < 1:
            raise DomainError("cone exponent alpha must be < 1")
        if self.initial_u is not None and self.initial_u.grid != self.grid:
            raise DimensionError("initial guess lives on a different grid")

    @classmethod
    def from_exact(cls, grid, q, u_exact: Callable, **kw):
        """Problem whose Dirichlet data are sampled from ``u_exact(x, y)``."""
        q_vals = q(grid.X, grid.Y) if callable(q) else np.broadcast_to(q, grid.shape)
        ue = u_exact(grid.X, grid.Y)
        return cls(grid, ScalarField(grid, np.array(q_vals, dtype=float)), (ue[0], ue[-1]), **kw)

    def default_initial(self):
        g = self.grid
        inner, outer = self.boundary_u
        s = ((g.rho - g.rho_min) / (g.rho_max - g.rho_min))[:, None]
        if self.cone_alpha is None:
            return (1 - s) * np.asarray(inner)[None, :] + s * np.asarray(outer)[None, :]
        return np.asarray(outer)[None, :] - self.cone_alpha * (g.rho - g.rho_max)[:, None]


# --- generic damped Newton --------------------------------------------------

def damped_newton(residual: Callable, jacobian: Callable, x0, tol: float, max_iter: int,
                  norm: Callable = lambda v: float(np.max(np.abs(v)))):
    """Newton iteration with step halving on the residual norm.

    ``residual(x)`` returns a vector, ``jacobian(x)`` a sparse matrix. A step
    is accepted as soon as the norm does not increase; if halving reaches
    ``2^-20`` without that, iteration stops with ``converged=False``.
    """
    x = np.array(x0, dtype=float)
    r = residual(x)
    rn = norm(r)
    report = SolveReport(0, rn, residual_history=[rn])
    while rn > tol and report.iterations < max_iter:
        J = jacobian(x).tocsc()
        try:
            dx = spla.spsolve(J, -r)
        except RuntimeError as exc:  # singular factorisation
            raise SolverError(str(exc)) from exc
        if not np.all(np.isfinite(dx)):
            raise SolverError("linearised system produced a non-finite update")
        lam = 1.0
        while True:
            with np.errstate(over="ignore", invalid="ignore"):
                x_new = x + lam * dx
                r_new = residual(x_new)
                rn_new = norm(r_new)
            if np.isfinite(rn_new) and rn_new <= rn:
                break
            lam *= 0.5
            if lam < MIN_STEP:
                report.message = "line search failed"
                report.final_residual = rn
                return x, report
        x, r, rn = x_new, r_new, rn_new
        report.iterations += 1
        report.damping.append(lam)
        report.residual_history.append(rn)
        log.debug("newton %d: residual %.3e step %.3g", report.iterations, rn, lam)
    report.final_residual = rn
    report.converged = rn <= tol
    if not report.converged and not report.message:
        report.message = "max_iter reached"
    return x, report


# --- discretisation on the annulus ------------------------------------------

def _theta_matrix(n, dt):
    e = np.ones(n)
    m = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], shape=(n, n), format="lil")
    m[0, n - 1] = 1.0
    m[n - 1, 0] = 1.0
    return m.tocsr() / dt ** 2


class _AnnulusOperator:
    """Residual and Jacobian of the scaled equation on the unknown rows."""

    def __init__(self, p: KWProblem):
        g = p.grid
        self.p, self.g = p, g
        self.flux = p.cone_alpha is not None
        self.i0 = 0 if self.flux else 1
        self.m = g.n_rho - 1 - self.i0
        nt = g.n_theta
        self.r2q = (np.exp(2 * g.rho)[:, None] * p.source_q.values)[self.i0:-1]
        e = np.ones(self.m)
        d = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], shape=(self.m, self.m), format="lil")
        if self.flux:
            d[0, 1] = 2.0
        self.L = (sp.kron(d.tocsr() / g.d_rho ** 2, sp.identity(nt))
                  + sp.kron(sp.identity(self.m), _theta_matrix(nt, g.d_theta))).tocsr()
        inner, outer = p.boundary_u
        self.outer = np.asarray(outer, dtype=float)
        self.inner = None if self.flux else np.asarray(inner, dtype=float)

    def full(self, x):
        g = self.g
        u = np.empty(g.shape)
        u[self.i0:-1] = x.reshape(self.m, g.n_theta)
        u[-1] = self.outer
        if not self.flux:
            u[0] = self.inner
        return u

    def _flux(self, u0):
        a = self.p.cone_alpha
        c = self.r2q[0] / (2 - 2 * a)
        return -a + c * np.exp(2 * u0), 2 * c * np.exp(2 * u0)

    def residual(self, x):
        g = self.g
        v = x.reshape(self.m, g.n_theta)
        lap = (self.L @ x).reshape(self.m, g.n_theta)
        lap[-1] += self.outer / g.d_rho ** 2
        if self.flux:
            gval, _ = self._flux(v[0])
            lap[0] -= 2 * gval / g.d_rho
        else:
            lap[0] += self.inner / g.d_rho ** 2
        return (lap - self.r2q * np.exp(2 * v)).ravel()

    def jacobian(self, x):
        g = self.g
        v = x.reshape(self.m, g.n_theta)
        diag = -2 * self.r2q * np.exp(2 * v)
        if self.flux:
            _, dg = self._flux(v[0])
            diag[0] -= 2 * dg / g.d_rho
        return self.L + sp.diags(diag.ravel())


def solve_kw(p: KWProblem, tol: float = 1e-10, max_iter: int = 50):
    """Solve the problem by damped Newton.

    Returns
    -------
    (ScalarField, SolveReport)
        ``report.final_residual`` is the max-norm of the scaled residual
        over the unknown nodes.  Non-convergence is reported, not raised.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    op = _AnnulusOperator(p)
    x0 = (p.initial_u.values if p.initial_u is not None else p.default_initial())[op.i0:-1]
    x, report = damped_newton(op.residual, op.jacobian, x0.ravel(), tol, max_iter)
    return ScalarField(p.grid, op.full(x)), report


def solve_harmonic(grid: LogPolarGrid, inner, outer, log_coefficient: float = 0.0) -> ScalarField:
    """Dirichlet problem for ``h = A log r + h0`` with ``h0`` discretely harmonic.

    ``inner``/``outer`` are the values of ``h`` itself on the two circles.
    """
    inner = np.asarray(inner, dtype=float)
    outer = np.asarray(outer, dtype=float)
    if not (np.all(np.isfinite(inner)) and np.all(np.isfinite(outer))):
        raise DomainError("boundary data must be finite")
    A = float(log_coefficient)
    p = KWProblem(grid, ScalarField(grid, np.zeros(grid.shape)),
                  (inner - A * grid.rho_min, outer - A * grid.rho_max))
    op = _AnnulusOperator(p)
    rhs = -op.residual(np.zeros(op.m * grid.n_theta))
    try:
        x = spla.spsolve(op.L.tocsc(), rhs)
    except RuntimeError as exc:
        raise SolverError(str(exc)) from exc
    res = np.max(np.abs(op.L @ x - rhs))
    if not np.isfinite(res) or res > 1e-10 * max(1.0, np.max(np.abs(rhs))):
        raise SolverError(f"linear solve residual {res:.3e} too large")
    return ScalarField(grid, op.full(x) + A * grid.RHO)


def kw_residual(u: ScalarField, q, margin: int = 1) -> float:
    """Max interior ``|Delta u - q e^{2u}|`` (unscaled)."""
    qv = q.values if isinstance(q, ScalarField) else np.broadcast_to(q, u.grid.shape)
    res = fc.laplacian(u).values - qv * np.exp(2 * u.values)
    return fc.interior_max(res, margin)


def hyperbolic_disc_potential(x, y):
    """``log(2/(1-r^2))``, a solution of ``Delta u = e^{2u}`` on the unit disc."""
    return np.log(2.0 / (1.0 - (x * x + y * y)))


def punctured_disc_potential(x, y):
    """``-log(r |log r|)``, a solution of ``Delta u = e^{2u}`` on ``0 < r < 1``."""
    r = np.hypot(x, y)
    return -np.log(r * np.abs(np.log(r)))
