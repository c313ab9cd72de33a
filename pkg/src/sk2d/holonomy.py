"""Parallel transport around circles and SL(2, R) conjugacy classes.

Transport convention (frozen): for the connection form ``W = W_x dx + W_y dy``
the fundamental matrix obeys ``M'(t) = -W(gamma'(t)) M(t)``, ``M(0) = I``,
along a circle traversed counterclockwise (orientation +1) starting at
``center + radius``.  Columns of ``M`` are the parallel frames expressed in
``(d/dx, d/dy)``.  ``to_reference_frame`` rewrites a matrix in the swapped
basis ``(d/dy, d/dx)``; the log family's monodromy then reads
``[[1, -2 pi A / B], [0, 1]]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, FrozenSet, Optional, Tuple

import numpy as np

from .errors import AccuracyError, DomainError, IntegrationError
from .fields import TWO_PI, Loop

__all__ = [
    "Loop", "MonodromyMatrix", "MonodromyClass", "AllowedClasses", "dopri5",
    "parallel_transport", "to_reference_frame", "classify", "predicted_class",
    "sp2z_check", "monodromy", "SWAP",
]

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])

# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def dopri5(f: Callable, t0: float, t1: float, y0, rtol: float = 1e-10, atol: Optional[float] = None,
           h0: Optional[float] = None, max_steps: int = 200000):
    """Adaptive Dormand-Prince 5(4) integration of ``y' = f(t, y)`` from ``t0`` to ``t1``.

    Returns ``(y(t1), n_accepted, n_rejected)``.  Raises IntegrationError on
    step-size underflow or when ``max_steps`` is exhausted.
    """
    atol = rtol * 1e-3 if atol is None else atol
    y = np.array(y0, dtype=float)
    t, direction = float(t0), np.sign(t1 - t0)
    span = abs(t1 - t0)
    h = h0 if h0 is not None else 0.01 * span
    k = np.empty((7,) + y.shape)
    k[0] = f(t, y)
    accepted = rejected = 0
    while direction * (t1 - t) > 0:
        if accepted + rejected > max_steps:
            raise IntegrationError("too many steps")
        h = min(h, abs(t1 - t))
        if h < 16 * np.finfo(float).eps * max(abs(t), span):
            raise IntegrationError(f"step size underflow at t = {t:.6g}")
        hs = direction * h
        for i in range(1, 7):
            yi = y + hs * np.tensordot(_A[i], k[:i], axes=1)
            k[i] = f(t + _C[i] * hs, yi)
        y5 = y + hs * np.tensordot(_B5, k, axes=1)
        err = hs * np.tensordot(_B5 - _B4, k, axes=1)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        en = float(np.sqrt(np.mean((err / scale) ** 2)))
        if en <= 1.0:
            t += hs
            y = y5
            k[0] = k[6]
            accepted += 1
            fac = 5.0 if en == 0 else min(5.0, 0.9 * en ** -0.2)
        else:
            rejected += 1
            fac = max(0.2, 0.9 * en ** -0.2)
        h *= fac
    return y, accepted, rejected


@dataclass(frozen=True, eq=False)
class MonodromyMatrix:
    m: np.ndarray
    radius: Optional[float] = None
    frame: str = "cartesian"

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (2, 2):
            raise DomainError("monodromy must be a 2x2 matrix")
        object.__setattr__(self, "m", m)

    @property
    def det(self):
        return float(np.linalg.det(self.m))

    @property
    def trace(self):
        return float(np.trace(self.m))

    def in_reference_frame(self) -> "MonodromyMatrix":
        if self.frame == "reference":
            return self
        return MonodromyMatrix(to_reference_frame(self.m), self.radius, "reference")

    def to_dict(self):
        return {"matrix": self.m.tolist(), "det": self.det, "trace": self.trace,
                "frame": self.frame, "radius": self.radius}


@dataclass(frozen=True)
class MonodromyClass:
    """Conjugacy class of an element of SL(2, R).

    ``beta_candidates`` holds the two values of ``beta mod 2`` compatible with
    the trace of an elliptic element; it is empty otherwise.
    """

    tag: str
    trace: float
    beta_candidates: Tuple[float, ...] = ()

    @property
    def beta_mod2(self):
        return self.beta_candidates[0] if self.beta_candidates else None

    def to_dict(self):
        return {"tag": self.tag, "trace": self.trace, "beta_candidates": list(self.beta_candidates)}


@dataclass(frozen=True)
class AllowedClasses:
    """Classes permitted for a given ``beta``; ``trace`` is fixed in the elliptic case."""

    tags: FrozenSet[str]
    beta: float
    trace: Optional[float] = None

    def __contains__(self, c: MonodromyClass):
        return self.contains(c)

    def contains(self, c: MonodromyClass, trace_tol: float = 1e-6):
        if c.tag not in self.tags:
            return False
        if self.trace is not None and abs(c.trace - self.trace) > trace_tol:
            return False
        return True


def to_reference_frame(m):
    """Conjugate by the basis swap ``(d/dx, d/dy) -> (d/dy, d/dx)``."""
    return SWAP @ np.asarray(m, dtype=float) @ SWAP


def parallel_transport(conn: Callable, loop: Loop, rtol: float = 1e-10, turns: int = 1,
                       det_tol: Optional[float] = None, domain: Optional[Tuple[float, float]] = None
                       ) -> MonodromyMatrix:
    """Monodromy of ``conn`` around ``loop``.

    Parameters
    ----------
    conn : callable
        ``(x, y) -> (W_x, W_y)`` with 2x2 matrices, closed-form or interpolated.
    loop : Loop
    rtol : float
        Local error tolerance of the integrator.
    turns : int
        Number of times the loop is traversed.
    det_tol : float, optional
        Allowed ``|det M - 1|``; default ``10 * rtol`` scaled by ``|M|^2``.
    domain : (r_in, r_out), optional
        Annulus about ``loop.center`` the loop has to lie in.
    """
    if domain is not None:
        r_in, r_out = domain
        if not r_in <= loop.radius <= r_out:
            raise DomainError("loop leaves the domain of the connection")
    if turns < 1:
        raise DomainError("turns must be >= 1")

    def rhs(t, y):
        z = loop.point(t)
        v = loop.velocity(t)
        wx, wy = conn(z.real, z.imag)
        a = np.asarray(wx) * v.real + np.asarray(wy) * v.imag
        return -(a @ y.reshape(2, 2)).ravel()

    y, _, _ = dopri5(rhs, 0.0, TWO_PI * turns, np.eye(2).ravel(), rtol=rtol)
    m = y.reshape(2, 2)
    det = float(np.linalg.det(m))
    if det_tol is None:
        det_tol = 10 * rtol * max(1.0, float(np.sum(m * m)))
    if abs(det - 1) > det_tol:
        raise AccuracyError(f"det drift {abs(det - 1):.3e} exceeds {det_tol:.1e}")
    return MonodromyMatrix(m, loop.radius)


def monodromy(conn: Callable, r_in: float, r_out: float, center: complex = 0j, rtol: float = 1e-10,
              trace_tol: float = 1e-6, det_tol: Optional[float] = None):
    """Monodromy at the mid radius of an annulus, cross-checked at two other radii.

    Entries depend on the base point, the conjugacy class does not, so the
    traces at the three radii have to agree to ``trace_tol``.
    Returns ``(MonodromyMatrix, spread)``.
    """
    radii = np.geomspace(r_in, r_out, 5)[1:4]
    mats = [parallel_transport(conn, Loop(center, float(r)), rtol=rtol, det_tol=det_tol)
            for r in radii]
    traces = np.array([m.trace for m in mats])
    spread = float(np.ptp(traces))
    if spread > trace_tol:
        raise AccuracyError(f"monodromy trace varies by {spread:.3e} across radii")
    return mats[1], spread


def classify(m, tol: float = 1e-6) -> MonodromyClass:
    """Conjugacy class from the trace, with ``tol`` on trace, determinant and entries."""
    mm = m.m if isinstance(m, MonodromyMatrix) else np.asarray(m, dtype=float)
    det = float(np.linalg.det(mm))
    if abs(det - 1) > tol:
        raise DomainError(f"not in SL(2,R): det = {det:.12g}")
    t = float(np.trace(mm))
    eye = np.eye(2)
    if abs(t) < 2 - tol:
        b = float(np.arccos(t / 2) / np.pi)
        return MonodromyClass("elliptic", t, (b, 2 - b))
    if abs(t - 2) <= tol:
        tag = "trivial" if np.max(np.abs(mm - eye)) <= tol else "parabolic-plus"
        return MonodromyClass(tag, t)
    if abs(t + 2) <= tol:
        tag = "minus-identity" if np.max(np.abs(mm + eye)) <= tol else "parabolic-minus"
        return MonodromyClass(tag, t)
    return MonodromyClass("hyperbolic", t)


def _near_int(x, tol):
    return abs(x - round(x)) <= tol


def predicted_class(beta: float, is_log_type: bool = False, tol: float = 1e-9) -> AllowedClasses:
    """Classes the monodromy theorem allows for cone order ``beta``.

    For log type singularities ``beta`` is ``N + 1`` and hence an integer.
    """
    if is_log_type and not _near_int(beta, tol):
        raise DomainError("log type singularities have integer beta = N + 1")
    if not _near_int(beta, tol):
        return AllowedClasses(frozenset({"elliptic"}), beta, 2 * float(np.cos(np.pi * beta)))
    if round(beta) % 2 == 0:
        return AllowedClasses(frozenset({"trivial", "parabolic-plus"}), beta, 2.0)
    return AllowedClasses(frozenset({"minus-identity", "parabolic-minus"}), beta, -2.0)


def sp2z_check(beta: float, tol: float = 1e-9) -> bool:
    """Whether the monodromy for ``beta`` can be conjugated into SL(2, Z)."""
    return _near_int(2 * beta, tol) or _near_int(3 * beta, tol)


def trace_is_integral(beta: float, tol: float = 1e-9) -> bool:
    """Direct test: ``2 cos(pi beta)`` is an integer (then one of 0, +-1, +-2)."""
    return _near_int(2 * np.cos(np.pi * beta), tol)
