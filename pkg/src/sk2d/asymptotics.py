"""Singularity exponents of sampled metrics and the order of the cubic form.

Two local models are compared on the angular average of ``w``:

* power:     ``w ~ C r^beta``
* log type:  ``w ~ -C r^s log r`` with integer ``s = N + 1``

The log model is regressed in two forms.  The plain one fits
``log w - log(-log r) = log C + s log r``.  The refined one keeps ``s`` fixed
at the rounded slope and fits ``w r^{-s} = C L + D`` with ``L = -log r``,
which also absorbs the ``1/L`` correction carried by e.g. ``-(A log r + B)``.
The log model is selected only if it beats the power model by the factor
``select_ratio`` and its ``C L`` part carries a non-negligible share of ``w``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContourError, DomainError, FitError
from .fields import TWO_PI
from .sk_core import complex_derivative


@dataclass(frozen=True)
class SingularityFit:
    """Result of ``fit_singularity``.

    ``beta`` is the fitted exponent in the power case and ``N + 1`` in the log case.
    """

    kind: str
    beta: float
    C: float
    fit_residual: float
    N: Optional[int] = None
    ambiguous: bool = False
    residual_power: float = float("nan")
    residual_log: float = float("nan")
    slope: float = float("nan")

    def __post_init__(self):
        if self.kind not in ("power", "log-type"):
            raise ValueError(f"unknown fit kind {self.kind!r}")

    def to_dict(self):
        return {"kind": self.kind, "beta": self.beta, "N": self.N, "C": self.C,
                "fit_residual": self.fit_residual, "ambiguous": self.ambiguous,
                "residual_power": self.residual_power, "residual_log": self.residual_log,
                "slope": self.slope}


def angular_average(w: Callable, radii, center: complex = 0j, n_angles: int = 64):
    """Mean of ``w`` over ``n_angles`` equispaced points on each circle."""
    r = np.asarray(radii, dtype=float)[:, None]
    t = TWO_PI * (np.arange(n_angles) + 0.5) / n_angles
    z = center + r * np.exp(1j * t)[None, :]
    vals = np.asarray(w(z.real, z.imag), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise DomainError("metric is not finite at the sample points")
    if np.any(vals <= 0):
        raise DomainError("metric must be positive at the sample points")
    return vals.mean(axis=1)


def _lstsq(X, y):
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond > 1e12:
        raise FitError(f"ill-conditioned regression (cond = {cond:.2e})")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = y - X @ coef
    return coef, float(np.sqrt(np.mean(res ** 2)))


def fit_singularity(w: Callable, radii: Sequence[float], center: complex = 0j, n_angles: int = 64,
                    select_ratio: float = 0.5, min_log_share: float = 0.05) -> SingularityFit:
    """Fit power and log-type models to ``w`` near ``center``.

    Parameters
    ----------
    w : callable
        ``(x, y) -> w`` positive.
    radii : sequence of float
        At least 6 radii below 1 spanning at least two decades.
    select_ratio : float
        The log model wins only if its residual is below ``select_ratio``
        times the power residual; the symmetric case picks the power model.
        Anything in between is flagged ``ambiguous``.
    min_log_share : float
        Minimum mean share of ``C L`` in ``C L + D`` for the refined log
        model to count as log type rather than a power with corrections.
    """
    r = np.sort(np.asarray(radii, dtype=float))[::-1]
    if r.size < 6:
        raise FitError("need at least 6 radii")
    if np.any(r <= 0) or np.any(r >= 1):
        raise DomainError("radii must lie in (0, 1)")
    if r[0] / r[-1] < 100 * (1 - 1e-12):
        raise FitError("radii must span at least two decades")
    wbar = angular_average(w, r, center, n_angles)
    lr, lw = np.log(r), np.log(wbar)
    L = -lr
    ones = np.ones_like(lr)

    (logC_p, beta), res_p = _lstsq(np.column_stack([ones, lr]), lw)
    (logC_l, slope), res_l = _lstsq(np.column_stack([ones, lr]), lw - np.log(L))

    s = int(np.round(slope))
    y = wbar * r ** (-s)
    (c_ref, d_ref), _ = _lstsq(np.column_stack([L, ones]), y)
    model = c_ref * L + d_ref
    log_C, log_res = np.exp(logC_l), res_l
    share = 0.0
    if c_ref > 0 and np.all(model > 0):
        share = float(np.mean(c_ref * L / model))
        res_ref = float(np.sqrt(np.mean((np.log(model) - np.log(y)) ** 2)))
        if share >= min_log_share and res_ref < res_l:
            log_C, log_res = float(c_ref), res_ref
    log_ok = share >= min_log_share or res_l < select_ratio * res_p

    if log_ok and log_res < select_ratio * res_p:
        return SingularityFit("log-type", float(s), float(log_C), log_res, N=s - 1,
                              residual_power=res_p, residual_log=log_res, slope=float(slope))
    ambiguous = log_ok and not (res_p < select_ratio * log_res)
    return SingularityFit("power", float(beta), float(np.exp(logC_p)), res_p, ambiguous=ambiguous,
                          residual_power=res_p, residual_log=log_res, slope=float(slope))


def cubic_order(xi0: Callable, r0: float, center: complex = 0j, n: int = 256,
                dxi0: Optional[Callable] = None, tol: float = 0.1) -> int:
    """Order of ``xi0`` at ``center`` as the winding number on the circle of radius ``r0``.

    ``(1/2 pi i) \\oint xi0'/xi0 dz`` by the periodic trapezoid rule; the
    derivative is taken from ``dxi0`` or by a Cauchy integral on small circles.
    """
    if r0 <= 0:
        raise DomainError("radius must be positive")
    t = TWO_PI * np.arange(n) / n
    z = center + r0 * np.exp(1j * t)
    f = np.asarray(xi0(z), dtype=complex) * np.ones_like(z)
    mag = np.abs(f)
    if not np.all(np.isfinite(mag)) or mag.min() <= 1e-12 * max(1.0, mag.max()):
        raise ContourError("cubic form (nearly) vanishes on the contour; try another radius")
    if dxi0 is not None:
        df = np.asarray(dxi0(z), dtype=complex) * np.ones_like(z)
    else:
        df = complex_derivative(xi0, z, 1, radius=0.25 * r0)
    dz = 1j * (z - center)
    val = np.mean(df / f * dz) * TWO_PI / (2j * np.pi)
    N = int(np.round(val.real))
    if abs(val - N) >= tol:
        raise ContourError(f"winding number {val:.4f} is not close to an integer")
    return N


def check_bound(fit: SingularityFit, N: int, margin: float = 1e-3) -> bool:
    """Dichotomy of the singularity theorem: ``beta < N + 1`` or log type with matching ``N``."""
    if fit.kind == "log-type":
        return fit.N == N
    return bool(fit.beta < N + 1 - margin)
