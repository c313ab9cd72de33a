"""Global checks and constructions on the projective line.

The construction solves the constant curvature equation ``Delta u = e^{2u}``
(curvature -1 for ``e^{2u}|dz|^2``) on the sphere with cone points, using
overlapping patches:

* one log-polar patch per puncture, with the cone-flux closure of exponent
  ``alpha_j`` on a tiny inner circle;
* one log-polar patch about ``zeta = 1/z = 0`` carrying ``u_zeta = u + 2 log|z|``,
  which is regular there;
* one Cartesian patch covering the rest, with the puncture discs cut out.

Patch boundary values are bilinear interpolants of the neighbouring patch, and
all patches are solved together by one damped Newton iteration whose Jacobian
contains the interpolation weights.  The special Kähler metric is
``w = e^{-u}`` with harmonic function ``h = x``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.integrate import simpson
from scipy.interpolate import RegularGridInterpolator

from . import fields as fc
from . import sk_core as sk
from .asymptotics import SingularityFit, fit_singularity
from .errors import ConstructionError, DomainError
from .fields import LogPolarGrid, Loop, ScalarField
from .holonomy import MonodromyMatrix, parallel_transport
from .kw_solver import KWProblem, _AnnulusOperator, damped_newton

log = logging.getLogger(__name__)

INFINITY = "inf"


# --- cone data and the Gauss-Bonnet budget ------------------------------------

@dataclass(frozen=True)
class ConeDatum:
    """Puncture with cone order; the metric exponent is ``beta = 2 * order``."""

    position: Union[complex, str]
    order: float

    @property
    def beta(self):
        return 2.0 * self.order

    @property
    def is_infinity(self):
        return isinstance(self.position, str)

    def to_dict(self):
        pos = self.position if self.is_infinity else [self.position.real, self.position.imag]
        return {"position": pos, "order": self.order, "beta": self.beta}


@dataclass(frozen=True)
class BudgetResult:
    total: float
    satisfied: bool
    hypothesis_holds: bool
    notes: Tuple[str, ...] = ()

    def to_dict(self):
        return {"sum": self.total, "satisfied": self.satisfied,
                "hypothesis_holds": self.hypothesis_holds, "notes": list(self.notes)}


def cone_budget(cones: Sequence[ConeDatum], tol: float = 1e-12) -> BudgetResult:
    """Sum of ``beta_j`` and whether it reaches ``-2 chi(P^1) = -4``.

    The inequality is derived for cone orders ``> -1``; other orders are
    reported in ``notes`` and clear ``hypothesis_holds``.
    """
    total = float(sum(c.beta for c in cones))
    notes = []
    for c in cones:
        if c.order <= -1:
            where = "infinity" if c.is_infinity else f"{c.position}"
            notes.append(f"order {c.order:g} at {where} is <= -1; the budget inequality does not apply")
    return BudgetResult(total, total >= -4 - tol, not notes, tuple(notes))


@dataclass(frozen=True)
class GaussBonnetResult:
    lhs: float
    rhs: float
    curvature_integral: float
    boundary_term: float

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "curvature_integral": self.curvature_integral,
                "boundary_term": self.boundary_term}


def _d2_rho4(values, h):
    """Fourth-order second derivative along axis 0 with one-sided rows at both ends."""
    f = values
    out = np.empty_like(f)
    out[2:-2] = (-f[4:] + 16 * f[3:-1] - 30 * f[2:-2] + 16 * f[1:-3] - f[:-4]) / 12
    for i, rows in ((0, f[:6]), (-1, f[::-1][:6])):
        out[i] = 45 * rows[0] - 154 * rows[1] + 214 * rows[2] - 156 * rows[3] + 61 * rows[4] - 10 * rows[5]
        out[i] /= 12
    for i, rows in ((1, f[:6]), (-2, f[::-1][:6])):
        out[i] = (10 * rows[0] - 15 * rows[1] - 4 * rows[2] + 14 * rows[3] - 6 * rows[4] + rows[5]) / 12
    return out / h ** 2


def _d_rho4_edge(values, h, side):
    """Fourth-order one-sided first derivative on the first (``side=0``) or last row."""
    f = values if side == 0 else values[::-1]
    d = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    return d if side == 0 else -d


def gauss_bonnet_bounded(w, r_in: float, r_out: float, n_rho: int = 257, n_theta: int = 256,
                         center: complex = 0j, order: int = 4) -> GaussBonnetResult:
    """``int K dA + oint k_g ds`` over the annulus ``r_in <= |z - center| <= r_out``.

    With ``sigma = log(w)/2`` one has ``K dA = -(sigma_rho_rho + sigma_theta_theta) drho dtheta``
    and the geodesic curvature of a boundary circle is ``(1 + d_n sigma)`` per
    unit ``theta``, ``n`` the outward normal.  The annulus has Euler
    characteristic 0, so the right-hand side is 0.

    Parameters
    ----------
    order : {2, 4}
        Accuracy of the finite differences in ``rho``.  ``2`` uses the shared
        field stencils and the trapezoid rule, ``4`` fourth-order stencils and
        Simpson's rule.  Periodic ``theta`` terms integrate to zero either way.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    g = LogPolarGrid.from_radii(r_in, r_out, n_rho, n_theta, center)
    if order == 4 and g.n_rho < 7:
        raise ValueError("fourth-order stencils need n_rho >= 7")
    vals = np.asarray(w(g.X, g.Y), dtype=float) * np.ones(g.shape)
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        raise DomainError("metric must be positive on the closed annulus")
    sigma = 0.5 * np.log(vals)
    if order == 2:
        K = sk.gaussian_curvature(ScalarField(g, vals)).values
        ring = np.sum(K * vals * g.R ** 2, axis=1) * g.d_theta
        curv = float(np.trapezoid(ring, dx=g.d_rho))
        sig_rho = fc.d_rho(g, sigma)
        s_in, s_out = sig_rho[0], sig_rho[-1]
    else:
        KdA = -(_d2_rho4(sigma, g.d_rho) + fc.d2_theta(g, sigma))
        curv = float(simpson(np.sum(KdA, axis=1) * g.d_theta, dx=g.d_rho))
        s_in, s_out = _d_rho4_edge(sigma, g.d_rho, 0), _d_rho4_edge(sigma, g.d_rho, -1)
    outer = np.sum(1.0 + s_out) * g.d_theta
    inner = np.sum(-1.0 - s_in) * g.d_theta
    bnd = float(outer + inner)
    return GaussBonnetResult(curv + bnd, 0.0, curv, bnd)


# --- Möbius normalisation -------------------------------------------------------

@dataclass(frozen=True)
class Mobius:
    """``z -> (a z + b) / (c z + d)``."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __call__(self, z):
        return (self.a * z + self.b) / (self.c * z + self.d)

    def derivative(self, z):
        return (self.a * self.d - self.b * self.c) / (self.c * z + self.d) ** 2

    def inverse(self) -> "Mobius":
        return Mobius(self.d, -self.b, -self.c, self.a)

    def compose(self, other: "Mobius") -> "Mobius":
        """``self o other``."""
        m = np.array([[self.a, self.b], [self.c, self.d]]) @ np.array([[other.a, other.b],
                                                                       [other.c, other.d]])
        return Mobius(*m.ravel())

    def image_of_infinity(self):
        return np.inf if self.c == 0 else self.a / self.c


def normalizing_mobius(z1: complex, z2: complex, z3: complex) -> Mobius:
    """Möbius map sending ``(z1, z2, z3)`` to ``(0, 1, -1)``."""
    to_std = Mobius(z2 - z3, -z1 * (z2 - z3), z2 - z1, -z3 * (z2 - z1))  # (0, 1, inf)
    return Mobius(1, 0, -1, 2).compose(to_std)  # w / (2 - w)


# --- construction ---------------------------------------------------------------

@dataclass
class CartesianPatch:
    x: np.ndarray
    y: np.ndarray
    active: np.ndarray
    ghost: np.ndarray
    u: np.ndarray

    @property
    def h(self):
        return float(self.x[1] - self.x[0])

    def interpolator(self):
        return RegularGridInterpolator((self.x, self.y), self.u, method="linear",
                                       bounds_error=False, fill_value=np.nan)

    def __call__(self, zx, zy):
        pts = np.stack([np.ravel(zx), np.ravel(zy)], axis=-1)
        return self.interpolator()(pts).reshape(np.shape(zx))


@dataclass
class LogPolarPatch:
    grid: LogPolarGrid
    u: ScalarField
    alpha: float

    def __call__(self, x, y):
        return self.u.at(x, y)


@dataclass
class P1Report:
    iterations: int = 0
    converged: bool = False
    residual_history: List[float] = field(default_factory=list)
    damping: List[float] = field(default_factory=list)
    overlap_residual: float = float("nan")
    tol: float = 0.0
    message: str = ""

    def to_dict(self):
        return {"iterations": self.iterations, "converged": self.converged,
                "residual_history": list(self.residual_history), "damping": list(self.damping),
                "overlap_residual": self.overlap_residual, "tol": self.tol, "message": self.message}


@dataclass
class P1Family:
    """Numerical special Kähler metric on ``P^1`` with prescribed cone points.

    ``orders`` are the special Kähler cone orders ``alpha_j / 2``; ``u`` is the
    potential of the constant curvature metric ``e^{2u}|dz|^2``, and the special
    Kähler metric is ``e^{-u}|dz|^2``.
    """

    positions: np.ndarray
    alphas: np.ndarray
    settings: dict
    cones: List[LogPolarPatch]
    infinity: LogPolarPatch
    middle: CartesianPatch
    report: P1Report
    radii: dict

    @property
    def k(self):
        return len(self.positions)

    @property
    def moduli_dim(self):
        return 3 * self.k - 6

    @property
    def punctures(self) -> List[ConeDatum]:
        out = [ConeDatum(complex(z), float(a) / 2) for z, a in zip(self.positions, self.alphas)]
        out.append(ConeDatum(INFINITY, -3.0))
        return out

    # evaluation
    def u(self, x, y):
        """Constant curvature potential at arbitrary finite points."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        z = x + 1j * y
        out = np.full(z.shape, np.nan)
        done = np.zeros(z.shape, dtype=bool)
        for zj, patch, rc in zip(self.positions, self.cones, self.radii["cone_eval"]):
            sel = ~done & (np.abs(z - zj) <= rc)
            if np.any(sel):
                out[sel] = patch(x[sel], y[sel])
                done |= sel
        sel = ~done & (np.abs(z) >= self.radii["inf_eval"])
        if np.any(sel):
            zeta = 1.0 / z[sel]
            out[sel] = self.infinity(zeta.real, zeta.imag) - 2 * np.log(np.abs(z[sel]))
            done |= sel
        if np.any(~done):
            out[~done] = self.middle(x[~done], y[~done])
        return out

    def w_sk(self, x, y):
        return np.exp(-self.u(x, y))

    def w_constant_curvature(self, x, y):
        return np.exp(2 * self.u(x, y))

    def w_sk_zeta(self, xi, eta):
        """Special Kähler metric in the chart ``zeta = 1/z``: ``e^{-u_zeta} |zeta|^{-6}``."""
        r = np.hypot(xi, eta)
        return np.exp(-self.infinity(xi, eta)) * r ** -6

    def normalized_u(self, xi, mobius: Optional[Mobius] = None):
        """Potential of the same metric after moving ``z_1, z_2, z_3`` to ``0, 1, -1``."""
        T = mobius or normalizing_mobius(*self.positions[:3])
        z = T.inverse()(np.asarray(xi, dtype=complex))
        return self.u(z.real, z.imag) - np.log(np.abs(T.derivative(z)))

    def normalized_punctures(self):
        T = normalizing_mobius(*self.positions[:3])
        pts = [T(complex(z)) for z in self.positions]
        pts.append(T.image_of_infinity())
        return pts

    # checks
    def fit_cone(self, j: int, decades: Tuple[float, float] = (1e-10, 1e-6), n: int = 12) -> SingularityFit:
        d = self.radii["d"][j]
        radii = d * np.geomspace(decades[1], decades[0], n)
        radii = radii[radii > 2 * self.cones[j].grid.r_min]
        return fit_singularity(self.w_sk, radii, center=complex(self.positions[j]))

    def fit_infinity(self, decades: Tuple[float, float] = (1e-6, 1e-3), n: int = 12) -> SingularityFit:
        radii = np.geomspace(decades[1], decades[0], n)
        return fit_singularity(self.w_sk_zeta, radii)

    def patch_triple(self, j: int) -> sk.SKTriple:
        """Sampled triple ``(x, u, 0)`` on the log-polar patch of puncture ``j``."""
        patch = self.cones[j]
        g = patch.grid
        return sk.SKTriple(ScalarField(g, np.array(g.X)), patch.u, 0.0)

    def cone_holonomy(self, j: int, radius: Optional[float] = None, rtol: float = 1e-9,
                      det_tol: float = 1e-4) -> MonodromyMatrix:
        """Transport around puncture ``j`` with the interpolated connection.

        The connection is built from finite-difference gradients, so ``det``
        is only one up to discretisation error; ``det_tol`` reflects that.
        """
        conn = sk.connection_from_triple(self.patch_triple(j))
        r = radius if radius is not None else 0.1 * self.radii["d"][j]
        return parallel_transport(conn.evaluator(), Loop(complex(self.positions[j]), r), rtol=rtol,
                                  det_tol=det_tol)

    def summary(self):
        return {
            "punctures": [c.to_dict() for c in self.punctures],
            "moduli_dim": self.moduli_dim,
            "report": self.report.to_dict(),
            "settings": dict(self.settings),
        }


def _validate(positions, alphas):
    if len(positions) < 3:
        raise DomainError("need at least three finite punctures")
    if len(positions) != len(alphas):
        raise DomainError("one order per puncture required")
    if np.any(alphas >= 1):
        raise DomainError("cone exponents alpha_j must be < 1")
    if not np.sum(alphas) > 2:
        raise DomainError(f"Picard condition sum(alpha) > 2 fails: sum = {np.sum(alphas):g}")
    diff = np.abs(positions[:, None] - positions[None, :]) + np.eye(len(positions))
    if np.min(diff) < 1e-6:
        raise DomainError("punctures must be distinct")


def _initial_guess(positions, alphas):
    excess = float(np.sum(alphas)) - 2

    def g(z):
        out = 0.5 * excess * np.log1p(np.abs(z) ** 2)
        for zj, a in zip(positions, alphas):
            out = out - a * np.log(np.abs(z - zj))
        return out

    return g


def _cartesian_weights(xs, index, pts, h):
    """Bilinear weights of ``pts`` on the Cartesian grid, as a sparse matrix over unknowns."""
    fx = (pts.real - xs[0]) / h
    fy = (pts.imag - xs[0]) / h
    i0, j0 = np.floor(fx).astype(int), np.floor(fy).astype(int)
    tx, ty = fx - i0, fy - j0
    rows, cols, vals = [], [], []
    for di, dj, wgt in ((0, 0, (1 - tx) * (1 - ty)), (1, 0, tx * (1 - ty)),
                        (0, 1, (1 - tx) * ty), (1, 1, tx * ty)):
        c = index[i0 + di, j0 + dj]
        if np.any(c < 0):
            raise ConstructionError("interpolation stencil leaves the Cartesian unknowns")
        rows.append(np.arange(pts.size)); cols.append(c); vals.append(wgt)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(pts.size, int(index.max()) + 1))


def _polar_weights(op: _AnnulusOperator, pts):
    """Bilinear weights of ``pts`` on the unknown rows of a log-polar patch."""
    g = op.g
    ii, jj, ww = fc.interpolation_weights(g, pts.real, pts.imag)
    if np.any(ii < op.i0) or np.any(ii > g.n_rho - 2):
        raise ConstructionError("interpolation stencil touches a boundary row of a patch")
    cols = (ii - op.i0) * g.n_theta + jj
    rows = np.repeat(np.arange(pts.size), 4)
    return sp.csr_matrix((ww.ravel(), (rows, cols.ravel())), shape=(pts.size, op.m * g.n_theta))


class _Composite:
    """All patches as one nonlinear system; interpolation couples them linearly.

    Unknown vector: Cartesian active nodes, then each cone patch, then the
    patch at infinity.  Patch outer circles take values interpolated from the
    Cartesian unknowns; Cartesian ghost nodes take values interpolated from
    the patch owning them.
    """

    def __init__(self, xs, h, active, ghost, owner, zg, ops, circles, offsets_outer, offsets_ghost):
        self.h, self.active, self.ghost = h, active, ghost
        n_a, n_g = int(active.sum()), int(ghost.sum())
        self.n_a = n_a
        ia = -np.ones(active.shape, dtype=int)
        ia[active] = np.arange(n_a)
        ig = -np.ones(active.shape, dtype=int)
        ig[ghost] = np.arange(n_g)
        rows_a = ia[active]
        I, J = np.nonzero(active)
        Lr, Lc, Lv, Gr, Gc = [rows_a], [rows_a], [np.full(n_a, -4.0)], [], []
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            na = ia[I + di, J + dj]
            ng = ig[I + di, J + dj]
            m = na >= 0
            if np.any(ng[~m] < 0):
                raise ConstructionError("active node without neighbour data")
            Lr.append(rows_a[m]); Lc.append(na[m]); Lv.append(np.ones(m.sum()))
            Gr.append(rows_a[~m]); Gc.append(ng[~m])
        h2 = h * h
        self.L = sp.csr_matrix((np.concatenate(Lv) / h2, (np.concatenate(Lr), np.concatenate(Lc))),
                               shape=(n_a, n_a))
        gr, gc = np.concatenate(Gr), np.concatenate(Gc)
        self.G = sp.csr_matrix((np.ones(gr.size) / h2, (gr, gc)), shape=(n_a, n_g))
        self.ops = ops
        self.sizes = [n_a] + [op.m * op.g.n_theta for op in ops]
        self.starts = np.concatenate([[0], np.cumsum(self.sizes)])
        # ghost values = sum_b Q_b x_b + c_g
        self.Q = []
        for b, op in enumerate(ops):
            sel = np.nonzero(owner == b)[0]
            W = _polar_weights(op, zg[sel])
            self.Q.append(sp.csr_matrix((W.tocoo().data, (sel[W.tocoo().row], W.tocoo().col)),
                                        shape=(n_g, W.shape[1])))
        self.c_ghost = offsets_ghost
        # patch outer values = P_b x_c + c_b
        self.P = [_cartesian_weights(xs, ia, z, h) for z in circles]
        self.c_outer = offsets_outer
        self.E = []
        for op in ops:
            nt = op.g.n_theta
            rows = (op.m - 1) * nt + np.arange(nt)
            self.E.append(sp.csr_matrix((np.full(nt, 1 / op.g.d_rho ** 2), (rows, np.arange(nt))),
                                        shape=(op.m * nt, nt)))

    def split(self, x):
        return [x[self.starts[i]:self.starts[i + 1]] for i in range(len(self.sizes))]

    def ghost_values(self, parts):
        return sum(Q @ xb for Q, xb in zip(self.Q, parts[1:])) + self.c_ghost

    def residual(self, x):
        parts = self.split(x)
        xc = parts[0]
        out = [self.L @ xc + self.G @ self.ghost_values(parts) - np.exp(2 * xc)]
        for op, P, c, xb in zip(self.ops, self.P, self.c_outer, parts[1:]):
            op.outer = P @ xc + c
            out.append(op.residual(xb))
        return np.concatenate(out)

    def jacobian(self, x):
        parts = self.split(x)
        nb = len(self.ops)
        blocks = [[None] * (nb + 1) for _ in range(nb + 1)]
        blocks[0][0] = self.L - sp.diags(2 * np.exp(2 * parts[0]))
        for b in range(nb):
            blocks[0][b + 1] = self.G @ self.Q[b]
            blocks[b + 1][0] = self.E[b] @ self.P[b]
            blocks[b + 1][b + 1] = self.ops[b].jacobian(parts[b + 1])
        return sp.bmat(blocks, format="csc")


def p1_family_construct(punctures: Sequence[complex], orders: Sequence[float], h: float = 0.03,
                        n_theta: int = 96, inner_factor: float = 1e-12, inf_inner: float = 1e-8,
                        tol: float = 1e-9, max_iter: int = 40) -> P1Family:
    """Special Kähler metric on ``P^1`` with cones of order ``orders[j]`` at ``punctures[j]``.

    Parameters
    ----------
    punctures : sequence of complex
        ``k >= 3`` distinct finite points.
    orders : sequence of float
        Special Kähler cone orders ``alpha_j / 2``; the metric behaves like
        ``|z - z_j|^{alpha_j}``.  Requires ``alpha_j < 1`` and ``sum alpha_j > 2``.
    h : float
        Mesh width of the Cartesian patch.
    n_theta : int
        Angular resolution of the log-polar patches.
    tol : float
        Newton tolerance on the max-norm of the composite residual.
    """
    positions = np.asarray(punctures, dtype=complex)
    alphas = 2 * np.asarray(orders, dtype=float)
    _validate(positions, alphas)
    k = len(positions)
    diff = np.abs(positions[:, None] - positions[None, :]) + np.diag(np.full(k, np.inf))
    d = diff.min(axis=1)
    r_hole, r_cone = 0.25 * d, 0.5 * d
    R_inf = 1.15 * float(np.max(np.abs(positions) + r_cone))
    R_box = 1.5 * R_inf
    radii = {"d": d, "hole": r_hole, "cone": r_cone, "inf": R_inf, "box": R_box,
             "cone_eval": 0.375 * d, "inf_eval": 0.5 * (R_inf + R_box)}
    guess = _initial_guess(positions, alphas)
    dtheta = 2 * np.pi / n_theta

    grids = []
    for zj, dj in zip(positions, d):
        n_rho = int(np.ceil(np.log(0.5 / inner_factor) / (1.5 * dtheta))) + 1
        grids.append(LogPolarGrid.from_radii(inner_factor * dj, 0.5 * dj, n_rho, n_theta, complex(zj)))
    n_rho = int(np.ceil(np.log(1.0 / (R_inf * inf_inner)) / (1.5 * dtheta))) + 1
    gz = LogPolarGrid.from_radii(inf_inner, 1.0 / R_inf, n_rho, n_theta)
    init = [guess(g.Z) for g in grids] + [guess(1 / gz.Z) - 2 * np.log(np.abs(gz.Z))]
    ops = []
    for g, a, u0 in zip(grids + [gz], list(alphas) + [0.0], init):
        prob = KWProblem(g, ScalarField(g, np.ones(g.shape)), (None, u0[-1]), cone_alpha=float(a))
        ops.append(_AnnulusOperator(prob))

    n = int(np.ceil((R_box + 2 * h) / h))
    xs = h * np.arange(-n, n + 1)
    Xc, Yc = np.meshgrid(xs, xs, indexing="ij")
    Zc = Xc + 1j * Yc
    active = np.abs(Zc) < R_box
    for zj, rh in zip(positions, r_hole):
        active &= np.abs(Zc - zj) > rh
    nb = np.zeros_like(active)
    nb[1:] |= active[:-1]; nb[:-1] |= active[1:]
    nb[:, 1:] |= active[:, :-1]; nb[:, :-1] |= active[:, 1:]
    ghost = nb & ~active
    zg = Zc[ghost]
    owner = np.full(zg.shape, k)
    for j, (zj, rh, rc) in enumerate(zip(positions, r_hole, r_cone)):
        owner[(owner == k) & (np.abs(zg - zj) < 0.5 * (rh + rc))] = j
    far = owner == k
    if np.any(np.abs(zg[far]) <= R_inf):
        raise ConstructionError("ghost node not covered by any patch")
    zg_patch = zg.copy()
    zg_patch[far] = 1.0 / zg[far]
    c_ghost = np.where(far, -2 * np.log(np.abs(zg)), 0.0)
    circles = [g.Z[-1] for g in grids] + [1.0 / gz.Z[-1]]
    c_outer = [np.zeros(n_theta)] * k + [np.full(n_theta, 2 * np.log(R_inf))]
    comp = _Composite(xs, h, active, ghost, owner, zg_patch, ops, circles, c_outer, c_ghost)

    x0 = np.concatenate([guess(Zc[active])] + [u0[op.i0:-1].ravel() for op, u0 in zip(ops, init)])
    x, rep = damped_newton(comp.residual, comp.jacobian, x0, tol, max_iter)
    report = P1Report(iterations=rep.iterations, converged=rep.converged,
                      residual_history=rep.residual_history, damping=rep.damping, tol=tol,
                      message=rep.message)
    comp.residual(x)  # sets the outer data of every patch
    parts = comp.split(x)
    u_c = np.full(active.shape, np.nan)
    u_c[active] = parts[0]
    u_c[ghost] = comp.ghost_values(parts)
    patches = [LogPolarPatch(op.g, ScalarField(op.g, op.full(xb)), float(a))
               for op, xb, a in zip(ops, parts[1:], list(alphas) + [0.0])]
    settings = {"h": h, "n_theta": n_theta, "inner_factor": inner_factor, "inf_inner": inf_inner,
                "tol": tol, "max_iter": max_iter}
    fam = P1Family(positions, alphas, settings, patches[:k], patches[k],
                   CartesianPatch(xs, xs, active, ghost, u_c), report, radii)
    report.overlap_residual = _overlap_residual(fam)
    if not report.converged:
        raise ConstructionError(f"composite Newton did not converge: {rep.message}", report)
    return fam


def _overlap_residual(fam: P1Family) -> float:
    """Largest disagreement between the Cartesian patch and the log-polar patches on their overlaps."""
    t = 2 * np.pi * np.arange(64) / 64
    worst = 0.0
    for zj, patch, rh, rc in zip(fam.positions, fam.cones, fam.radii["hole"], fam.radii["cone"]):
        z = zj + 0.5 * (rh + rc) * np.exp(1j * t)
        worst = max(worst, float(np.max(np.abs(patch(z.real, z.imag) - fam.middle(z.real, z.imag)))))
    z = 0.5 * (fam.radii["inf"] + fam.radii["box"]) * np.exp(1j * t)
    zeta = 1 / z
    u_inf = fam.infinity(zeta.real, zeta.imag) - 2 * np.log(np.abs(z))
    worst = max(worst, float(np.max(np.abs(u_inf - fam.middle(z.real, z.imag)))))
    return worst


def family_perturb(fam: P1Family, index: int, displacement: complex) -> P1Family:
    """Re-solve with puncture ``index`` moved by ``displacement``."""
    if not 0 <= index < fam.k:
        raise DomainError("puncture index out of range")
    pos = fam.positions.copy()
    pos[index] += displacement
    return p1_family_construct(pos, fam.alphas / 2, **fam.settings)


def default_samples(fam: P1Family, n: int = 48, min_dist: float = 0.2):
    """Points of the normalised plane away from the normalised punctures."""
    t = 2 * np.pi * np.arange(n) / n
    cand = np.concatenate([r * np.exp(1j * (t + r)) for r in (0.35, 0.7, 1.6, 3.0)])
    keep = np.ones(cand.shape, dtype=bool)
    for p in fam.normalized_punctures():
        if np.isfinite(p):
            keep &= np.abs(cand - p) > min_dist
    return cand[keep]


def normalized_difference(a: P1Family, b: P1Family, samples=None) -> float:
    """Max ``|u_a - u_b|`` after Möbius normalisation of the first three punctures."""
    s = default_samples(a) if samples is None else np.asarray(samples, dtype=complex)
    if samples is None:
        keep = np.ones(s.shape, dtype=bool)
        for p in b.normalized_punctures():
            if np.isfinite(p):
                keep &= np.abs(s - p) > 0.2
        s = s[keep]
    return float(np.max(np.abs(a.normalized_u(s) - b.normalized_u(s))))
