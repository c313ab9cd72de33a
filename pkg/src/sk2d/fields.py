"""Discrete calculus on annuli in log-polar coordinates.

Nodes sit at ``(rho_i, theta_j)`` with ``rho = log r`` uniform on
``[rho_min, rho_max]`` (endpoints included) and ``theta_j = 2*pi*j/n_theta``.
Arrays are indexed ``[i_rho, j_theta]``. All derivatives are second order:
centered in the interior, periodic in theta, one-sided (second order) on the
two boundary rows.

One-forms are always stored by their Cartesian components ``(a_x, a_y)`` with
respect to ``(dx, dy)``; the orientation is ``dx ^ dy > 0`` so ``*dx = dy``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .errors import DimensionError, DomainError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class LogPolarGrid:
    """Uniform grid in ``(log r, theta)`` on an annulus around ``center``."""

    rho_min: float
    rho_max: float
    n_rho: int
    n_theta: int
    center: complex = 0j

    def __post_init__(self):
        if not self.rho_min < self.rho_max:
            raise DimensionError("rho_min must be smaller than rho_max")
        if self.n_rho < 4:
            raise DimensionError(f"n_rho must be at least 4, got {self.n_rho}")
        if self.n_theta < 8 or self.n_theta % 2:
            raise DimensionError(f"n_theta must be even and >= 8, got {self.n_theta}")

    @classmethod
    def from_radii(cls, r_min, r_max, n_rho, n_theta, center=0j):
        if r_min <= 0:
            raise DimensionError("r_min must be positive")
        return cls(float(np.log(r_min)), float(np.log(r_max)), int(n_rho), int(n_theta),
                   complex(center))

    @property
    def shape(self):
        return (self.n_rho, self.n_theta)

    @property
    def r_min(self):
        return float(np.exp(self.rho_min))

    @property
    def r_max(self):
        return float(np.exp(self.rho_max))

    @cached_property
    def rho(self):
        return np.linspace(self.rho_min, self.rho_max, self.n_rho)

    @cached_property
    def theta(self):
        return TWO_PI * np.arange(self.n_theta) / self.n_theta

    @property
    def d_rho(self):
        return (self.rho_max - self.rho_min) / (self.n_rho - 1)

    @property
    def d_theta(self):
        return TWO_PI / self.n_theta

    @cached_property
    def RHO(self):
        return np.broadcast_to(self.rho[:, None], self.shape)

    @cached_property
    def THETA(self):
        return np.broadcast_to(self.theta[None, :], self.shape)

    @cached_property
    def R(self):
        return np.exp(self.RHO)

    @cached_property
    def Z(self):
        """Absolute complex coordinate of every node."""
        return self.center + self.R * np.exp(1j * self.THETA)

    @property
    def X(self):
        return self.Z.real

    @property
    def Y(self):
        return self.Z.imag

    def refine(self, factor=2):
        """Grid with ``factor`` times as many cells in each direction."""
        return LogPolarGrid(self.rho_min, self.rho_max, (self.n_rho - 1) * factor + 1,
                            self.n_theta * factor, self.center)

    def locate(self, x, y, tol=1e-12):
        """Fractional node indices ``(i, j)`` of points; raise if outside the annulus."""
        w = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float) - self.center
        rho = np.log(np.abs(w))
        span = self.rho_max - self.rho_min
        if np.any(rho < self.rho_min - tol * span) or np.any(rho > self.rho_max + tol * span):
            raise DomainError("point outside the annulus of the grid")
        i = np.clip((rho - self.rho_min) / self.d_rho, 0.0, self.n_rho - 1)
        j = np.mod(np.angle(w), TWO_PI) / self.d_theta
        return i, j

    def contains(self, x, y):
        w = np.asarray(x) + 1j * np.asarray(y) - self.center
        r = np.abs(w)
        return (r >= self.r_min) & (r <= self.r_max)


def _check_shape(grid, *arrays):
    for a in arrays:
        if np.shape(a) != grid.shape:
            raise DimensionError(f"array of shape {np.shape(a)} does not match grid {grid.shape}")


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DomainError("field values must be finite")


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: LogPolarGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        _check_shape(self.grid, values)
        _check_finite(values)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, np.broadcast_to(fn(grid.X, grid.Y), grid.shape).copy())

    def at(self, x, y):
        return interpolate(self.grid, self.values, x, y)

    def to_csv(self, path):
        write_field_csv(path, self.grid, {"value": self.values})


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: LogPolarGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        _check_shape(self.grid, values)
        _check_finite(values)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, np.broadcast_to(fn(grid.Z), grid.shape).copy())

    def at(self, x, y):
        return (interpolate(self.grid, self.values.real, x, y)
                + 1j * interpolate(self.grid, self.values.imag, x, y))

    def to_csv(self, path):
        write_field_csv(path, self.grid, {"value_re": self.values.real,
                                          "value_im": self.values.imag})


@dataclass(frozen=True, eq=False)
class OneFormField:
    """``a_x dx + a_y dy`` sampled on a grid."""

    grid: LogPolarGrid
    a_x: np.ndarray
    a_y: np.ndarray

    def __post_init__(self):
        a_x = np.asarray(self.a_x, dtype=float)
        a_y = np.asarray(self.a_y, dtype=float)
        _check_shape(self.grid, a_x, a_y)
        _check_finite(a_x, a_y)
        object.__setattr__(self, "a_x", a_x)
        object.__setattr__(self, "a_y", a_y)

    @classmethod
    def from_function(cls, grid, fn):
        ax, ay = fn(grid.X, grid.Y)
        return cls(grid, np.broadcast_to(ax, grid.shape).copy(),
                   np.broadcast_to(ay, grid.shape).copy())

    def __add__(self, other):
        _same_grid(self, other)
        return OneFormField(self.grid, self.a_x + other.a_x, self.a_y + other.a_y)

    def __sub__(self, other):
        _same_grid(self, other)
        return OneFormField(self.grid, self.a_x - other.a_x, self.a_y - other.a_y)

    def __neg__(self):
        return OneFormField(self.grid, -self.a_x, -self.a_y)

    def scale(self, factor):
        """Multiply by a scalar or by a pointwise array/ScalarField."""
        if isinstance(factor, ScalarField):
            _same_grid(self, factor)
            factor = factor.values
        return OneFormField(self.grid, factor * self.a_x, factor * self.a_y)

    def norm_squared(self):
        return ScalarField(self.grid, self.a_x ** 2 + self.a_y ** 2)

    def polar_components(self):
        """Components ``(a_rho, a_theta)`` with respect to ``(d rho, d theta)``."""
        g = self.grid
        c, s = np.cos(g.THETA), np.sin(g.THETA)
        a_rho = g.R * (self.a_x * c + self.a_y * s)
        a_theta = g.R * (-self.a_x * s + self.a_y * c)
        return a_rho, a_theta

    def at(self, x, y):
        return (interpolate(self.grid, self.a_x, x, y),
                interpolate(self.grid, self.a_y, x, y))

    def to_csv(self, path):
        write_field_csv(path, self.grid, {"a_x": self.a_x, "a_y": self.a_y})


Field = Union[ScalarField, ComplexField, OneFormField]


def _same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise DimensionError("fields live on different grids")


# --- finite differences -------------------------------------------------------

def d_rho(grid, values):
    return np.gradient(values, grid.d_rho, axis=0, edge_order=2)


def d_theta(grid, values):
    return (np.roll(values, -1, axis=1) - np.roll(values, 1, axis=1)) / (2 * grid.d_theta)


def d2_rho(grid, values):
    h2 = grid.d_rho ** 2
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - 2 * values[1:-1] + values[:-2]) / h2
    out[0] = (2 * values[0] - 5 * values[1] + 4 * values[2] - values[3]) / h2
    out[-1] = (2 * values[-1] - 5 * values[-2] + 4 * values[-3] - values[-4]) / h2
    return out


def d2_theta(grid, values):
    return (np.roll(values, -1, axis=1) - 2 * values + np.roll(values, 1, axis=1)) / grid.d_theta ** 2


def _cartesian_from_polar_derivs(grid, f_rho, f_theta):
    c, s = np.cos(grid.THETA), np.sin(grid.THETA)
    inv_r = np.exp(-grid.RHO)
    return inv_r * (c * f_rho - s * f_theta), inv_r * (s * f_rho + c * f_theta)


def laplacian(f: ScalarField) -> ScalarField:
    """Flat Laplacian ``e^{-2 rho} (f_rho_rho + f_theta_theta)``."""
    g = f.grid
    if g.n_rho < 4:
        raise DimensionError("laplacian needs n_rho >= 4")
    return ScalarField(g, np.exp(-2 * g.RHO) * (d2_rho(g, f.values) + d2_theta(g, f.values)))


def gradient(f: ScalarField) -> OneFormField:
    """Exterior derivative ``df`` of a scalar field."""
    g = f.grid
    ax, ay = _cartesian_from_polar_derivs(g, d_rho(g, f.values), d_theta(g, f.values))
    return OneFormField(g, ax, ay)


def wirtinger_dz(f: ComplexField) -> ComplexField:
    """``df/dz = (f_x - i f_y)/2``, written as ``e^{-i theta - rho}(f_rho - i f_theta)/2``."""
    g = f.grid
    v = f.values
    pref = 0.5 * np.exp(-g.RHO - 1j * g.THETA)
    return ComplexField(g, pref * (d_rho(g, v) - 1j * d_theta(g, v)))


def wirtinger_dzbar(f: ComplexField) -> ComplexField:
    g = f.grid
    v = f.values
    pref = 0.5 * np.exp(-g.RHO + 1j * g.THETA)
    return ComplexField(g, pref * (d_rho(g, v) + 1j * d_theta(g, v)))


def hodge_star(omega: OneFormField) -> OneFormField:
    """``a_x dx + a_y dy -> -a_y dx + a_x dy``."""
    return OneFormField(omega.grid, -omega.a_y, omega.a_x)


def exterior_derivative(omega: OneFormField) -> ScalarField:
    """Coefficient of ``dx ^ dy`` in ``d omega``.

    Computed as ``(d_rho a_theta - d_theta a_rho) / r^2`` from the polar
    components, so forms depending on ``rho`` alone are differentiated exactly
    in theta.
    """
    g = omega.grid
    a_rho, a_theta = omega.polar_components()
    return ScalarField(g, np.exp(-2 * g.RHO) * (d_rho(g, a_theta) - d_theta(g, a_rho)))


def divergence(omega: OneFormField) -> ScalarField:
    """``*d*omega``, i.e. ``d_x a_x + d_y a_y``."""
    return exterior_derivative(hodge_star(omega))


def wedge(alpha: OneFormField, beta: OneFormField) -> ScalarField:
    """Coefficient of ``dx ^ dy`` in ``alpha ^ beta``."""
    _same_grid(alpha, beta)
    return ScalarField(alpha.grid, alpha.a_x * beta.a_y - alpha.a_y * beta.a_x)


def inner(alpha: OneFormField, beta: OneFormField) -> ScalarField:
    _same_grid(alpha, beta)
    return ScalarField(alpha.grid, alpha.a_x * beta.a_x + alpha.a_y * beta.a_y)


def angular_form(grid: LogPolarGrid) -> OneFormField:
    """``phi = (y dx - x dy)/(x^2 + y^2)`` about the grid center (equals ``-d theta``)."""
    return OneFormField.from_function(grid, lambda x, y: angular_form_components(x, y, grid.center))


def angular_form_components(x, y, center=0j):
    xr = x - np.real(center)
    yr = y - np.imag(center)
    r2 = xr ** 2 + yr ** 2
    return yr / r2, -xr / r2


def interior(values, margin=1):
    """Drop ``margin`` rows at each radial boundary."""
    return values[margin:values.shape[0] - margin]


def interior_max(values, margin=1):
    return float(np.max(np.abs(interior(values, margin))))


# --- interpolation and loops --------------------------------------------------

def interpolation_weights(grid: LogPolarGrid, x, y):
    """Bilinear stencil of each point: ``(i, j, weights)`` each of shape ``(npts, 4)``."""
    fi, fj = grid.locate(x, y)
    fi, fj = np.ravel(fi), np.ravel(fj)
    i0 = np.minimum(np.floor(fi).astype(int), grid.n_rho - 2)
    ti = fi - i0
    j0 = np.floor(fj).astype(int) % grid.n_theta
    tj = fj - np.floor(fj)
    j1 = (j0 + 1) % grid.n_theta
    ii = np.stack([i0, i0, i0 + 1, i0 + 1], axis=-1)
    jj = np.stack([j0, j1, j0, j1], axis=-1)
    ww = np.stack([(1 - ti) * (1 - tj), (1 - ti) * tj, ti * (1 - tj), ti * tj], axis=-1)
    return ii, jj, ww


def interpolate(grid: LogPolarGrid, values, x, y):
    """Bilinear interpolation in ``(rho, theta)``, periodic in theta."""
    ii, jj, ww = interpolation_weights(grid, x, y)
    v = np.asarray(values)
    return np.sum(ww * v[ii, jj], axis=-1).reshape(np.shape(np.asarray(x) + np.asarray(y)))


@dataclass(frozen=True)
class Loop:
    """Circle ``center + radius * e^{i orientation t}``, ``t`` in ``[0, 2 pi]``."""

    center: complex = 0j
    radius: float = 1.0
    orientation: int = 1
    n_steps: int = 512

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("loop radius must be positive")
        if self.orientation not in (1, -1):
            raise DomainError("orientation must be +1 or -1")

    def point(self, t):
        return self.center + self.radius * np.exp(1j * self.orientation * t)

    def velocity(self, t):
        return 1j * self.orientation * self.radius * np.exp(1j * self.orientation * t)


OneFormLike = Union[OneFormField, Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]]


def contour_integral(omega: OneFormLike, loop: Loop, n: Optional[int] = None,
                     domain: Optional[Tuple[float, float]] = None) -> float:
    """Integral of a one-form over a circular loop.

    Periodic trapezoidal rule, which converges spectrally for smooth integrands.
    Sampled fields are interpolated bilinearly onto the loop. For callables an
    optional ``domain = (r_in, r_out)`` about the loop center is enforced.
    """
    n = int(n or loop.n_steps)
    t = TWO_PI * np.arange(n) / n
    z = loop.point(t)
    v = loop.velocity(t)
    if isinstance(omega, OneFormField):
        ax, ay = omega.at(z.real, z.imag)
    else:
        if domain is not None:
            r = np.abs(z)
            if np.any(r < domain[0]) or np.any(r > domain[1]):
                raise DomainError("loop leaves the domain of the form")
        ax, ay = omega(z.real, z.imag)
    integrand = ax * v.real + ay * v.imag
    return float(np.sum(integrand) * TWO_PI / n)


# --- CSV dump ------------------------------------------------------------------

def write_field_csv(path, grid: LogPolarGrid, columns: dict):
    names = list(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rho", "theta", *names])
        cols = [np.asarray(columns[k]).ravel() for k in names]
        for k, (rho, th) in enumerate(zip(grid.RHO.ravel(), grid.THETA.ravel())):
            w.writerow([repr(float(rho)), repr(float(th)), *(repr(float(c[k])) for c in cols)])


def read_field_csv(path, center=0j) -> Field:
    """Inverse of the ``to_csv`` methods; the grid is rebuilt from the node columns."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = data.dtype.names
    rho = np.unique(data["rho"])
    theta = np.unique(data["theta"])
    grid = LogPolarGrid(float(rho[0]), float(rho[-1]), len(rho), len(theta), center)
    shape = grid.shape
    if names[2:] == ("value",):
        return ScalarField(grid, data["value"].reshape(shape))
    if names[2:] == ("value_re", "value_im"):
        return ComplexField(grid, (data["value_re"] + 1j * data["value_im"]).reshape(shape))
    if names[2:] == ("a_x", "a_y"):
        return OneFormField(grid, data["a_x"].reshape(shape), data["a_y"].reshape(shape))
    raise DomainError(f"unrecognised field columns {names}")
