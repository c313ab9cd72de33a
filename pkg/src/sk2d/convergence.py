"""Grid-refinement studies on nested log-polar grids."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Sequence

import numpy as np

from .fields import LogPolarGrid


@dataclass
class RefinementStudy:
    """Errors on a sequence of nested grids and the observed orders between them."""

    sizes: List[tuple]
    errors: List[float]
    floor: float = 0.0
    orders: List[float] = field(init=False)

    def __post_init__(self):
        self.orders = observed_orders(self.errors)

    @property
    def final_order(self):
        return self.orders[-1] if self.orders else float("nan")

    def passes(self, min_order=1.9):
        """Order requirement met, or every error already below the round-off floor."""
        if all(e <= self.floor for e in self.errors):
            return True
        return bool(np.isfinite(self.final_order) and self.final_order >= min_order)


def observed_orders(errors: Sequence[float], ratio: float = 2.0):
    e = np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return list(np.log(e[:-1] / e[1:]) / np.log(ratio))


def refinement_study(metric: Callable[[LogPolarGrid, int], float], grid: LogPolarGrid,
                     levels: int = 3, base_margin: int = 1, floor: float = 0.0) -> RefinementStudy:
    """Evaluate ``metric(grid, margin)`` on ``levels`` successively doubled grids.

    The margin doubles with the grid, so the maximum is always taken over the
    same physical sub-annulus.  Without this the excluded boundary band shrinks
    and the maximum drifts towards the boundary, which pollutes the order.
    """
    sizes, errors = [], []
    g, m = grid, base_margin
    for _ in range(levels):
        sizes.append(g.shape)
        errors.append(float(metric(g, m)))
        g, m = g.refine(2), 2 * m
    return RefinementStudy(sizes, errors, floor)


def laplacian_roundoff(values, grid: LogPolarGrid, margin: int = 1):
    """Rounding-error scale of the discrete Laplacian of ``values``.

    Stencil weights sum to ``4/h^2`` in each direction and the grid factor
    ``e^{-2 rho}`` is largest on the inner rows.
    """
    eps = np.finfo(float).eps
    scale = np.max(np.abs(values))
    weight = np.exp(-2 * grid.rho[margin])
    return 8 * eps * scale * weight * (1 / grid.d_rho ** 2 + 1 / grid.d_theta ** 2)


def first_derivative_roundoff(magnitude, grid: LogPolarGrid, margin: int = 1):
    """Rounding-error scale of one Cartesian derivative of a field of size ``magnitude``.

    Used when the field itself is a cancellation of terms of that size, so its
    computed value is pure rounding noise.
    """
    eps = np.finfo(float).eps
    return 8 * eps * magnitude * np.exp(-grid.rho[margin]) / min(grid.d_rho, grid.d_theta)
