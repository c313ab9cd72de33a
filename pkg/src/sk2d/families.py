"""Closed-form special Kähler structures on (punctured) discs.

Every family returns a :class:`ClosedFormMetric`: an evaluator for the metric
density ``w`` of ``g = w |dz|^2``, the generating triple when the metric is
special Kähler, and metadata used as test oracles (exponent, cubic-form order,
known holonomy).

Curvature sign for the Liouville construction: ``curvature`` is the signed
Gaussian curvature ``K < 0`` of ``4|f'|^2/(1 + K|f|^2)^2 |dz|^2``. The matching
triple is ``h = sqrt(-K) x``, ``u = log(sqrt(w_const))``, so the cubic form is
``Xi_0 = -i sqrt(-K)/4``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .sk_core import ClosedForm, SKTriple, connection_evaluator, cubic_form

DEFAULT_DOMAIN = (1e-3, 0.9)


@dataclass(frozen=True)
class ClosedFormMetric:
    """Metric ``w(x, y) |dz|^2`` with optional special Kähler data.

    ``meta`` keys in use: ``beta`` (exponent of ``w`` at 0, or ``N + 1`` for
    log type), ``N`` (order of the cubic form), ``log_type``, ``holonomy``
    (known monodromy in the reference frame), ``holonomy_radius``, ``kind``.
    """

    name: str
    params: dict
    w: Callable
    triple: Optional[SKTriple]
    domain: tuple = DEFAULT_DOMAIN
    max_domain: tuple = (0.0, 1.0)
    meta: dict = field(default_factory=dict)
    explicit_connection: Optional[Callable] = None

    def u(self, x, y):
        return -np.log(self.w(x, y))

    @property
    def is_special_kahler(self):
        return self.triple is not None

    def connection_evaluator(self):
        """Connection derived from the triple (see ``explicit_connection`` for the direct formula)."""
        if self.triple is None:
            raise DomainError(f"family {self.name!r} is a model metric without a connection")
        return connection_evaluator(self.triple)

    def xi0(self):
        if self.triple is None:
            raise DomainError(f"family {self.name!r} has no cubic form")
        return cubic_form(self.triple)

    def metadata(self):
        return {"family": self.name, "params": dict(self.params),
                "a": self.triple.a if self.triple is not None else None}


def _r2(x, y):
    return x ** 2 + y ** 2


def _radial(grad_rho):
    """Gradient of a function of ``rho = log r`` given ``d/d rho``."""
    def grad(x, y):
        r2 = _r2(x, y)
        g = grad_rho(0.5 * np.log(r2))
        return g * x / r2, g * y / r2
    return grad


def log_family(A: float, B: float):
    """``h = A log r + B``, ``u = -log(-h)``, ``a = 0``; metric ``-(A log r + B)``."""
    if A < 0 or B >= 0:
        raise DomainError("log family needs A >= 0 and B < 0")
    A, B = float(A), float(B)

    def h(x, y):
        return A * 0.5 * np.log(_r2(x, y)) + B

    h_cf = ClosedForm(h, _radial(lambda rho: A + 0 * rho))
    u_cf = ClosedForm(lambda x, y: -np.log(-h(x, y)),
                      _radial(lambda rho: -A / (A * rho + B)))
    triple = SKTriple(h_cf, u_cf, 0.0)

    def explicit(x, y):
        # (A/h) [[0, 0], [*d log r, d log r]]
        r2 = _r2(x, y)
        hv = h(x, y)
        lx, ly = x / r2, y / r2
        z = np.zeros_like(hv)
        wx = np.stack([np.stack([z, z], -1), np.stack([-ly * A / hv, lx * A / hv], -1)], -2)
        wy = np.stack([np.stack([z, z], -1), np.stack([lx * A / hv, ly * A / hv], -1)], -2)
        return wx, wy

    r_max = 1.0 if A == 0 else min(1.0, float(np.exp(-B / A)))
    meta = {
        "kind": "special-kahler",
        "holonomy": [[1.0, -2 * A * np.pi / B], [0.0, 1.0]],
        "holonomy_radius": 1.0,
        "log_type": A > 0,
        "N": -1 if A > 0 else None,
        "beta": 0.0,
        "flat": A == 0,
    }
    return ClosedFormMetric("log", {"A": A, "B": B}, lambda x, y: -h(x, y), triple,
                            max_domain=(0.0, r_max), meta=meta, explicit_connection=explicit)


def twisted_log_family(a: float = 1.0):
    """``h = 0`` with nonzero ``a``: ``u = -log(-a log r)``, metric ``-a log r`` on ``B_1^*``.

    Radial solution of ``Delta u = a^2 e^{2u} / r^2``; it is the simplest
    closed-form structure whose connection involves the angular form.
    """
    if a <= 0:
        raise DomainError("twisted log family needs a > 0")
    a = float(a)
    zero = ClosedForm(lambda x, y: 0 * x, lambda x, y: (0 * x, 0 * y))
    u_cf = ClosedForm(lambda x, y: -np.log(-a * 0.5 * np.log(_r2(x, y))),
                      _radial(lambda rho: -1.0 / rho))
    triple = SKTriple(zero, u_cf, a)
    meta = {"kind": "special-kahler", "log_type": True, "N": -1, "beta": 0.0,
            "holonomy_radius": 0.5}
    return ClosedFormMetric("twisted-log", {"a": a}, lambda x, y: -a * 0.5 * np.log(_r2(x, y)),
                            triple, meta=meta)


# --- Liouville construction ---------------------------------------------------

@dataclass(frozen=True)
class Meromorphic:
    """A meromorphic function given by evaluators for ``f``, ``f'`` and optionally ``f''``."""

    f: Callable
    df: Callable
    d2f: Optional[Callable] = None
    label: str = "f"

    def second(self, z):
        if self.d2f is not None:
            return self.d2f(z)
        from .sk_core import complex_derivative
        z = np.asarray(z, dtype=complex)
        return complex_derivative(self.df, z, 1, radius=1e-3 * np.maximum(np.abs(z), 1e-3))


def power_map(n: int) -> Meromorphic:
    n = int(n)
    return Meromorphic(lambda z: z ** n, lambda z: n * z ** (n - 1),
                       lambda z: n * (n - 1) * z ** (n - 2) if n > 1 else 0 * z, f"z^{n}")


def mobius_map(a, b, c, d) -> Meromorphic:
    det = a * d - b * c
    if det == 0:
        raise DomainError("degenerate Möbius map")
    return Meromorphic(lambda z: (a * z + b) / (c * z + d),
                       lambda z: det / (c * z + d) ** 2,
                       lambda z: -2 * c * det / (c * z + d) ** 3, "mobius")


def liouville_metric(fn: Meromorphic, curvature: float = -1.0, name: str = "liouville",
                     params: Optional[dict] = None, max_domain=(0.0, 1.0), meta=None):
    """Special Kähler metric ``|1 + K|f|^2| / (2|f'|)`` from a constant-curvature factor.

    The constant-curvature factor ``4|f'|^2 / (1 + K|f|^2)^2`` is exposed as
    ``meta["constant_curvature_w"]``.
    """
    K = float(curvature)
    if not K < 0:
        raise DomainError("the Liouville construction needs negative curvature")
    sk = np.sqrt(-K)

    def parts(x, y):
        z = np.asarray(x) + 1j * np.asarray(y)
        f, df = fn.f(z), fn.df(z)
        if np.any(df == 0):
            raise DomainError("f' vanishes on the domain")
        return z, f, df

    def w_const(x, y):
        _, f, df = parts(x, y)
        return 4 * np.abs(df) ** 2 / (1 + K * np.abs(f) ** 2) ** 2

    def u(x, y):
        _, f, df = parts(x, y)
        return np.log(2.0) + np.log(np.abs(df)) - np.log(np.abs(1 + K * np.abs(f) ** 2))

    def grad_u(x, y):
        z, f, df = parts(x, y)
        ratio = fn.second(z) / df
        m = 1 + K * np.abs(f) ** 2
        cf = np.conj(f) * df
        mx, my = 2 * K * cf.real, -2 * K * cf.imag
        return ratio.real - mx / m, -ratio.imag - my / m

    h_cf = ClosedForm(lambda x, y: sk * x, lambda x, y: (sk + 0 * x, 0 * y))
    triple = SKTriple(h_cf, ClosedForm(u, grad_u), 0.0)
    info = {"kind": "special-kahler", "N": 0, "log_type": False, "curvature": K,
            "constant_curvature_w": w_const, "xi0_constant": -1j * sk / 4}
    info.update(meta or {})
    return ClosedFormMetric(name, dict(params or {}, K=K, f=fn.label),
                            lambda x, y: np.exp(-u(x, y)), triple,
                            max_domain=max_domain, meta=info)


def liouville_zn(n: int = 1, curvature: float = -1.0):
    """``f = z^n`` with ``K = -1``: ``w = |z|^{1-n}(1 - |z|^{2n}) / (2n)``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if not curvature < 0:
        raise DomainError("the Liouville construction needs negative curvature")
    r_max = float((-1.0 / curvature) ** (1.0 / (2 * n)))
    beta = 1.0 - n
    return liouville_metric(power_map(n), curvature, name="liouville-zn", params={"n": int(n)},
                            max_domain=(0.0, r_max),
                            meta={"beta": beta, "C": 1.0 / (2 * n), "holonomy_radius": 0.5})


def poincare_derived():
    """``w = -r log r`` from the Poincaré metric ``r^{-2} (log r)^{-2}`` on the punctured disc."""
    def u(x, y):
        rho = 0.5 * np.log(_r2(x, y))
        return -rho - np.log(-rho)

    h_cf = ClosedForm(lambda x, y: x + 0 * y, lambda x, y: (1.0 + 0 * x, 0 * y))
    triple = SKTriple(h_cf, ClosedForm(u, _radial(lambda rho: -1.0 - 1.0 / rho)), 0.0)
    meta = {"kind": "special-kahler", "log_type": True, "N": 0, "beta": 1.0,
            "holonomy_radius": 0.5,
            "constant_curvature_w": lambda x, y: np.exp(2 * u(x, y))}
    return ClosedFormMetric("poincare", {}, lambda x, y: np.exp(-u(x, y)), triple, meta=meta)


def flat_from_harmonic(h: Callable, grad_h: Callable, name="flat-harmonic", params=None,
                       domain=DEFAULT_DOMAIN, check_points=None, meta=None):
    """Structure with a special coordinate: triple ``(h, -log(-h), 0)`` for negative harmonic ``h``.

    Raises :class:`DomainError` if ``h >= 0`` at any check point (by default a
    polar sample of the annulus ``domain``).
    """
    if check_points is None:
        r = np.linspace(domain[0], domain[1], 40)
        th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        check_points = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    cp = np.asarray(check_points)
    if np.any(h(cp.real, cp.imag) >= 0):
        raise DomainError("h must be negative on the domain")

    def grad_u(x, y):
        hx, hy = grad_h(x, y)
        hv = h(x, y)
        return -hx / hv, -hy / hv

    triple = SKTriple(ClosedForm(h, grad_h), ClosedForm(lambda x, y: -np.log(-h(x, y)), grad_u), 0.0)

    def explicit(x, y):
        # (1/h) [[0, 0], [*dh, dh]]
        hx, hy = grad_h(x, y)
        hv = h(x, y)
        z = np.zeros_like(hv)
        wx = np.stack([np.stack([z, z], -1), np.stack([-hy / hv, hx / hv], -1)], -2)
        wy = np.stack([np.stack([z, z], -1), np.stack([hx / hv, hy / hv], -1)], -2)
        return wx, wy

    info = {"kind": "special-kahler", "log_type": False}
    info.update(meta or {})
    return ClosedFormMetric(name, dict(params or {}), lambda x, y: -h(x, y), triple,
                            domain=domain, meta=info, explicit_connection=explicit)


def flat_harmonic_affine(c0: float = -1.0, cx: float = -1.0, cy: float = 0.0):
    """``h = c0 + cx x + cy y``; with the defaults ``w = 1 + Re z`` and ``Xi_0 = i/4``."""
    if c0 >= 0:
        raise DomainError("h must be negative at the origin")
    slope = float(np.hypot(cx, cy))
    flat = slope == 0
    meta = {"beta": 0.0, "N": None if flat else 0, "flat": flat}
    r_max = 1.0 if flat else min(1.0, -c0 / slope)
    return flat_from_harmonic(lambda x, y: c0 + cx * x + cy * y + 0 * x,
                           lambda x, y: (cx + 0 * x, cy + 0 * y),
                           params={"kind": "affine", "c0": c0, "cx": cx, "cy": cy},
                           domain=(DEFAULT_DOMAIN[0], min(DEFAULT_DOMAIN[1], 0.9 * r_max)),
                           meta=meta)


def flat_harmonic_exp():
    """``h = -e^x cos y``; negative on ``|y| < pi/2``, in particular on the unit disc."""
    return flat_from_harmonic(lambda x, y: -np.exp(x) * np.cos(y),
                              lambda x, y: (-np.exp(x) * np.cos(y), np.exp(x) * np.sin(y)),
                              params={"kind": "exp"}, meta={"beta": 0.0, "N": 0, "flat": False})


def conical_model(beta: float, C: float = 1.0):
    """Pure power ``w = C |z|^beta``; a fit target, not a special Kähler metric."""
    if not C > 0:
        raise DomainError("C must be positive")
    beta, C = float(beta), float(C)
    return ClosedFormMetric("conical-model", {"beta": beta, "C": C},
                            lambda x, y: C * _r2(x, y) ** (0.5 * beta), None,
                            max_domain=(0.0, np.inf), meta={"kind": "model", "beta": beta, "C": C})


# --- registry -----------------------------------------------------------------

def _log(params):
    return log_family(params.get("A", 1.0), params.get("B", -1.0))


def _flat(params):
    if params.get("kind", "affine") == "exp":
        return flat_harmonic_exp()
    return flat_harmonic_affine(params.get("c0", -1.0), params.get("cx", -1.0), params.get("cy", 0.0))


FAMILIES = {
    "log": _log,
    "liouville-zn": lambda p: liouville_zn(int(p.get("n", 1)), p.get("K", -1.0)),
    "poincare": lambda p: poincare_derived(),
    "flat-harmonic": _flat,
    "conical-model": lambda p: conical_model(p.get("beta", 0.0), p.get("C", 1.0)),
    "twisted-log": lambda p: twisted_log_family(p.get("a", 1.0)),
}


def build_family(name: str, params: Optional[dict] = None) -> ClosedFormMetric:
    """Look up ``name`` in :data:`FAMILIES`; raises :class:`KeyError` for unknown names."""
    if name not in FAMILIES:
        raise KeyError(f"unknown family {name!r}; known: {sorted(FAMILIES)}")
    return FAMILIES[name](dict(params or {}))
