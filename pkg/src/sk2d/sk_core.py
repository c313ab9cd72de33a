"""Special Kähler data on a planar domain described by harmonic data.

A structure is given by a triple ``(h, u, a)``: ``h`` harmonic, ``a`` the
coefficient of the angular form ``phi = (y dx - x dy)/r^2`` and ``u`` solving

    Delta u = |dh + a phi|^2 e^{2u},

with metric ``g = e^{-u}|dz|^2``. The flat connection has the matrix of
one-forms ``[[w11, -*w11], [*w22, w22]]`` in the frame ``(d_x, d_y)`` with

    2 w11 =  e^u E - du,    2 w22 = -e^u E - du,    E = dh + a phi (+ 2 psi).

Normalisation of the source term: the one-form ``E`` entering the connection
is the same one whose squared norm drives the equation for ``u``. The
alternative reading ``E = dh + a phi/2`` gives connections that are not flat;
``tests/test_sk_core.py::test_effective_form_normalisation`` checks both.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import fields as fc
from .errors import DimensionError, DomainError
from .fields import ComplexField, LogPolarGrid, OneFormField, ScalarField


@dataclass(frozen=True)
class ClosedForm:
    """A scalar function of ``(x, y)`` together with its exact gradient."""

    value: Callable
    grad: Callable

    def __call__(self, x, y):
        return self.value(x, y)

    def sample(self, grid: LogPolarGrid) -> ScalarField:
        return ScalarField.from_function(grid, self.value)

    def sample_gradient(self, grid: LogPolarGrid) -> OneFormField:
        return OneFormField.from_function(grid, self.grad)


Scalar = Union[ScalarField, ClosedForm]


@dataclass(frozen=True)
class SKTriple:
    """Harmonic data ``(h, u, a, psi)`` of a special Kähler structure.

    ``h`` and ``u`` are either sampled fields on one grid or closed forms.
    ``psi`` is an optional extra harmonic one-form (sampled); it enters the
    effective form as ``2 psi``.
    """

    h: Scalar
    u: Scalar
    a: float = 0.0
    psi: Optional[OneFormField] = None
    center: complex = 0j

    def __post_init__(self):
        kinds = {isinstance(self.h, ClosedForm), isinstance(self.u, ClosedForm)}
        if len(kinds) != 1:
            raise DimensionError("h and u must both be sampled or both closed-form")
        if not self.is_closed_form and self.h.grid != self.u.grid:
            raise DimensionError("h and u live on different grids")
        if self.psi is not None and not self.is_closed_form and self.psi.grid != self.h.grid:
            raise DimensionError("psi lives on a different grid")

    @property
    def is_closed_form(self):
        return isinstance(self.h, ClosedForm)

    @property
    def grid(self):
        return None if self.is_closed_form else self.h.grid

    def sample(self, grid: LogPolarGrid) -> "SKTriple":
        """Sampled copy of a closed-form triple."""
        if not self.is_closed_form:
            if grid != self.grid:
                raise DimensionError("cannot resample a sampled triple")
            return self
        return SKTriple(self.h.sample(grid), self.u.sample(grid), self.a, self.psi, self.center)

    # pointwise evaluation (closed form only)

    def effective_form_at(self, x, y):
        hx, hy = self.h.grad(x, y)
        px, py = fc.angular_form_components(x, y, self.center)
        return hx + self.a * px, hy + self.a * py

    def kw_source_at(self, x, y):
        ex, ey = self.effective_form_at(x, y)
        return ex ** 2 + ey ** 2


def _resolve(t: SKTriple, grid: Optional[LogPolarGrid]) -> SKTriple:
    if t.is_closed_form:
        if grid is None:
            raise DimensionError("a grid is required for a closed-form triple")
        return t
    if grid is not None and grid != t.grid:
        raise DimensionError("grid does not match the triple")
    return t


def _fields(t: SKTriple, grid: Optional[LogPolarGrid]):
    """Sampled ``(u, du, dh)``; exact gradients for closed forms, finite differences otherwise."""
    t = _resolve(t, grid)
    if t.is_closed_form:
        u = t.u.sample(grid)
        return u, t.u.sample_gradient(grid), t.h.sample_gradient(grid)
    return t.u, fc.gradient(t.u), fc.gradient(t.h)


def effective_form(t: SKTriple, grid: Optional[LogPolarGrid] = None) -> OneFormField:
    """``E = dh + a phi + 2 psi`` on the grid."""
    _, _, dh = _fields(t, grid)
    g = dh.grid
    e = dh + fc.angular_form(g).scale(t.a)
    if t.psi is not None:
        e = e + t.psi.scale(2.0)
    return e


@dataclass(frozen=True)
class ConnectionForm:
    """The two generating one-forms of the connection matrix."""

    omega11: OneFormField
    omega22: OneFormField

    def __post_init__(self):
        if self.omega11.grid != self.omega22.grid:
            raise DimensionError("omega11 and omega22 on different grids")

    @property
    def grid(self):
        return self.omega11.grid

    def entries(self):
        """The four matrix entries ``[[w11, -*w11], [*w22, w22]]`` as one-forms."""
        w11, w22 = self.omega11, self.omega22
        return [[w11, -fc.hodge_star(w11)], [fc.hodge_star(w22), w22]]

    def trace(self) -> OneFormField:
        return self.omega11 + self.omega22

    def evaluator(self):
        """Bilinearly interpolated ``(x, y) -> (W_x, W_y)`` usable for transport."""
        w11, w22 = self.omega11, self.omega22

        def conn(x, y):
            p, q = w11.at(x, y)
            s, t = w22.at(x, y)
            return connection_matrices(p, q, s, t)

        return conn


def connection_matrices(p, q, s, t):
    """``(W_x, W_y)`` for ``w11 = p dx + q dy`` and ``w22 = s dx + t dy``.

    The connection form is ``W_x dx + W_y dy``; shapes are ``(..., 2, 2)``.
    """
    wx = np.stack([np.stack([p, q], -1), np.stack([-t, s], -1)], -2)
    wy = np.stack([np.stack([q, -p], -1), np.stack([s, t], -1)], -2)
    return wx, wy


def connection_from_triple(t: SKTriple, grid: Optional[LogPolarGrid] = None) -> ConnectionForm:
    u, du, _ = _fields(t, grid)
    e = effective_form(t, u.grid)
    eu = np.exp(u.values)
    omega11 = (e.scale(eu) - du).scale(0.5)
    omega22 = (e.scale(eu) + du).scale(-0.5)
    return ConnectionForm(omega11, omega22)


def connection_evaluator(t: SKTriple):
    """Exact ``(x, y) -> (W_x, W_y)`` for a closed-form triple."""
    if not t.is_closed_form:
        raise DomainError("connection_evaluator needs a closed-form triple")

    def conn(x, y):
        ex, ey = t.effective_form_at(x, y)
        ux, uy = t.u.grad(x, y)
        eu = np.exp(t.u(x, y))
        p, q = 0.5 * (eu * ex - ux), 0.5 * (eu * ey - uy)
        s, r = -0.5 * (eu * ex + ux), -0.5 * (eu * ey + uy)
        return connection_matrices(p, q, s, r)

    return conn


def curvature_form(c: ConnectionForm):
    """``d W + W ^ W`` as a 2x2 array of ``dx ^ dy`` coefficients."""
    e = c.entries()
    out = np.empty((2, 2) + c.grid.shape)
    for i in range(2):
        for j in range(2):
            acc = fc.exterior_derivative(e[i][j]).values
            for k in range(2):
                acc = acc + fc.wedge(e[i][k], e[k][j]).values
            out[i, j] = acc
    return out


def flatness_residual(c: ConnectionForm, margin: int = 1) -> float:
    """Max over interior nodes and matrix entries of ``|dW + W ^ W|``."""
    return max(fc.interior_max(m, margin) for m in curvature_form(c).reshape(4, *c.grid.shape))


def eta_residual(t: SKTriple, grid: Optional[LogPolarGrid] = None, margin: int = 1):
    """Residuals of the two equations satisfied by ``eta = e^{-u} w11``.

    First: ``*d*eta - 2*(*eta ^ du) + 2 e^u |eta|^2``.
    Second: ``Delta u - |2 eta + e^{-u} du|^2 e^{2u}``.
    """
    u, du, _ = _fields(t, grid)
    c = connection_from_triple(t, grid)
    eta = c.omega11.scale(np.exp(-u.values))
    lhs1 = fc.divergence(eta).values
    rhs1 = 2 * fc.wedge(fc.hodge_star(eta), du).values - 2 * np.exp(u.values) * eta.norm_squared().values
    lap_u = fc.laplacian(u).values
    v = eta.scale(2.0) + du.scale(np.exp(-u.values))
    rhs2 = v.norm_squared().values * np.exp(2 * u.values)
    return fc.interior_max(lhs1 - rhs1, margin), fc.interior_max(lap_u - rhs2, margin)


def eta_closedness(t: SKTriple, grid: Optional[LogPolarGrid] = None, margin: int = 1) -> float:
    u, _, _ = _fields(t, grid)
    c = connection_from_triple(t, grid)
    eta = c.omega11.scale(np.exp(-u.values))
    return fc.interior_max(fc.exterior_derivative(eta).values, margin)


def harmonicity_residual(t: SKTriple, grid: Optional[LogPolarGrid] = None, margin: int = 1) -> float:
    t = _resolve(t, grid)
    h = t.h.sample(grid) if t.is_closed_form else t.h
    return fc.interior_max(fc.laplacian(h).values, margin)


def kw_residual_of_triple(t: SKTriple, grid: Optional[LogPolarGrid] = None, margin: int = 1) -> float:
    """``max |Delta u - |E|^2 e^{2u}|`` on interior nodes."""
    t = _resolve(t, grid)
    u = t.u.sample(grid) if t.is_closed_form else t.u
    e = effective_form(t, u.grid)
    res = fc.laplacian(u).values - e.norm_squared().values * np.exp(2 * u.values)
    return fc.interior_max(res, margin)


def trace_defect(c: ConnectionForm, du: OneFormField) -> float:
    """``max |w11 + w22 + du|``; zero up to rounding by construction."""
    tr = c.trace() + du
    return float(max(np.max(np.abs(tr.a_x)), np.max(np.abs(tr.a_y))))


@dataclass(frozen=True)
class CubicForm:
    """Coefficient ``Xi_0`` of ``Xi = Xi_0 dz^3``, sampled or as a callable of ``z``."""

    xi0: Union[ComplexField, Callable]
    order_at_origin: Optional[int] = None

    def __call__(self, z):
        if isinstance(self.xi0, ComplexField):
            z = np.asarray(z)
            return self.xi0.at(z.real, z.imag)
        return self.xi0(z)


def cubic_form(t: SKTriple, grid: Optional[LogPolarGrid] = None) -> CubicForm:
    """``Xi_0 = (a/(2z) - i dh/dz)/2`` with ``z`` measured from the triple's center."""
    a, c0 = t.a, t.center
    if t.is_closed_form and grid is None:
        def xi0(z):
            z = np.asarray(z, dtype=complex)
            hx, hy = t.h.grad(z.real, z.imag)
            return 0.5 * (a / (2 * (z - c0)) - 1j * 0.5 * (hx - 1j * hy))
        return CubicForm(xi0)
    t = _resolve(t, grid)
    h = t.h.sample(grid) if t.is_closed_form else t.h
    g = h.grid
    dhdz = fc.wirtinger_dz(ComplexField(g, h.values)).values
    return CubicForm(ComplexField(g, 0.5 * (a / (2 * (g.Z - c0)) - 1j * dhdz)))


def holomorphy_residual(cf: CubicForm, margin: int = 1) -> float:
    """``max |d Xi_0 / d zbar|`` over interior nodes of a sampled cubic form."""
    if not isinstance(cf.xi0, ComplexField):
        raise DomainError("holomorphy_residual needs a sampled cubic form")
    return fc.interior_max(fc.wirtinger_dzbar(cf.xi0).values, margin)


def metric_density(t: SKTriple, grid: Optional[LogPolarGrid] = None) -> ScalarField:
    """``w = e^{-u}``."""
    t = _resolve(t, grid)
    u = t.u.sample(grid) if t.is_closed_form else t.u
    return ScalarField(u.grid, np.exp(-u.values))


def gaussian_curvature(w: ScalarField) -> ScalarField:
    """Curvature of ``w |dz|^2``: ``K = -Delta(log w) / (2 w)``."""
    if np.any(w.values <= 0):
        raise DomainError("metric density must be positive")
    lap = fc.laplacian(ScalarField(w.grid, np.log(w.values))).values
    return ScalarField(w.grid, -lap / (2 * w.values))


# --- prepotential -------------------------------------------------------------

def complex_derivative(f: Callable, z, order: int = 1, radius: float = 1e-2, n: int = 32):
    """Derivative of a holomorphic ``f`` by the Cauchy integral on a small circle.

    The trapezoidal rule on the circle converges geometrically in ``n`` as long
    as ``f`` is holomorphic on a disc somewhat larger than ``radius``.
    """
    z = np.asarray(z, dtype=complex)
    k = np.arange(n)
    w = np.asarray(radius, dtype=float)[..., None] * np.exp(2j * np.pi * k / n)
    vals = f(z[..., None] + w)
    fact = float(np.prod(np.arange(1, order + 1)))
    return fact * np.mean(vals * w ** (-order), axis=-1)


@dataclass(frozen=True)
class PrepotentialCheck:
    residual: float
    convention: str
    residual_minus: float
    residual_plus: float
    n_samples: int


def prepotential_consistency(h: Callable, F: Callable, F2: Optional[Callable] = None,
                             samples=None, cut_margin: float = 0.05) -> PrepotentialCheck:
    """Compare ``Im F''`` against ``-2h`` and ``+2h`` on sample points.

    ``F`` is a branch holomorphic on the plane slit along the negative real
    axis; samples with ``|arg z| > pi - cut_margin`` are dropped. Without an
    explicit ``F2`` the second derivative comes from a Cauchy integral, whose
    circle must also avoid the cut.
    """
    if samples is None:
        r = np.geomspace(0.05, 0.9, 12)
        th = np.linspace(-np.pi, np.pi, 33)
        samples = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    z = np.asarray(samples, dtype=complex).ravel()
    keep = np.abs(np.angle(z)) < np.pi - cut_margin
    z = z[keep & (np.abs(z) > 0)]
    if F2 is None:
        radii = 0.25 * np.abs(z) * np.sin(min(cut_margin, 0.5))
        d2 = np.array([complex_derivative(F, zz, 2, radius=rr) for zz, rr in zip(z, radii)])
    else:
        d2 = F2(z)
    hv = h(z.real, z.imag)
    im = np.imag(d2)
    res_minus = float(np.max(np.abs(im + 2 * hv)))
    res_plus = float(np.max(np.abs(im - 2 * hv)))
    if res_minus <= res_plus:
        return PrepotentialCheck(res_minus, "-2h", res_minus, res_plus, len(z))
    return PrepotentialCheck(res_plus, "+2h", res_minus, res_plus, len(z))
