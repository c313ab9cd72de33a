"""Invariant suite run against a closed-form family (used by ``sk2d verify`` and the tests)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import asymptotics as asy
from . import holonomy as hol
from . import sk_core as sk
from .convergence import first_derivative_roundoff, laplacian_roundoff, refinement_study
from .families import ClosedFormMetric
from .fields import LogPolarGrid, ScalarField

DEFAULT_FIT_RADII = np.geomspace(1e-2, 1e-8, 25)


@dataclass
class Check:
    name: str
    passed: bool
    value: object = None
    threshold: object = None
    detail: str = ""

    def to_dict(self):
        def plain(v):
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, (list, tuple)):
                return [plain(x) for x in v]
            return v
        return {"name": self.name, "passed": bool(self.passed), "value": plain(self.value),
                "threshold": plain(self.threshold), "detail": self.detail}


@dataclass
class VerifyResult:
    family: str
    params: dict
    checks: List[Check] = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {"family": self.family, "params": self.params, "passed": self.passed,
                "checks": [c.to_dict() for c in self.checks]}


STRUCTURAL_CHECKS = ("flatness", "eta_divergence", "eta_laplacian", "kw", "harmonicity", "holomorphy")


def structural_studies(m: ClosedFormMetric, n_base: int = 128, levels: int = 3, base_margin: int = 2):
    """Refinement studies of every structural residual on the family's default annulus."""
    t = m.triple
    r_in, r_out = m.domain
    g0 = LogPolarGrid.from_radii(r_in, r_out, n_base + 1, n_base)
    gf = g0
    for _ in range(levels - 1):
        gf = gf.refine(2)
    margin_fine = base_margin * 2 ** (levels - 1)
    h_fine = t.h.sample(gf).values
    u_fine = t.u.sample(gf).values
    du_fine = t.u.sample_gradient(gf)
    eta_scale = np.max(np.exp(-u_fine) * np.sqrt(du_fine.norm_squared().values))
    metrics = {
        "flatness": lambda g, k: sk.flatness_residual(sk.connection_from_triple(t, g), k),
        "eta_divergence": lambda g, k: sk.eta_residual(t, g, k)[0],
        "eta_laplacian": lambda g, k: sk.eta_residual(t, g, k)[1],
        "kw": lambda g, k: sk.kw_residual_of_triple(t, g, k),
        "harmonicity": lambda g, k: sk.harmonicity_residual(t, g, k),
        "holomorphy": lambda g, k: sk.holomorphy_residual(sk.cubic_form(t, g), k),
    }
    # residuals that vanish identically for some families only measure rounding
    floors = {"harmonicity": laplacian_roundoff(h_fine, gf, margin_fine),
              "eta_divergence": first_derivative_roundoff(eta_scale, gf, margin_fine)}
    return {name: refinement_study(fn, g0, levels, base_margin, floors.get(name, 0.0))
            for name, fn in metrics.items()}


def verify_family(m: ClosedFormMetric, n_base: int = 128, min_order: float = 1.9,
                  curvature_tol: float = 1e-6, rtol: float = 1e-10,
                  fit_radii=DEFAULT_FIT_RADII) -> VerifyResult:
    res = VerifyResult(m.name, dict(m.params))
    meta = m.meta
    if m.triple is None:
        fit = asy.fit_singularity(m.w, fit_radii)
        ok = fit.kind == "power" and abs(fit.beta - meta["beta"]) <= 1e-3
        res.checks.append(Check("model_exponent", ok, fit.beta, meta["beta"]))
        return res

    for name, study in structural_studies(m, n_base).items():
        at_floor = all(e <= study.floor for e in study.errors)
        res.checks.append(Check(f"{name}_order", study.passes(min_order), study.orders, min_order,
                                f"errors {['%.3e' % e for e in study.errors]}, floor {study.floor:.1e}"
                                + (", at round-off floor" if at_floor else "")))

    g = LogPolarGrid.from_radii(*m.domain, 2 * n_base + 1, 2 * n_base)
    c = sk.connection_from_triple(m.triple, g)
    res.checks.append(Check("trace_condition", True,
                            sk.trace_defect(c, m.triple.u.sample_gradient(g)), 1e-12))
    res.checks[-1].passed = res.checks[-1].value <= 1e-12
    kmin = float(sk.gaussian_curvature(ScalarField(g, m.w(g.X, g.Y))).values[1:-1].min())
    res.checks.append(Check("curvature_nonnegative", kmin >= -curvature_tol, kmin, -curvature_tol))

    conn = m.connection_evaluator()
    r_in, r_out = m.domain
    mono, spread = hol.monodromy(conn, r_in, r_out, rtol=rtol)
    cls = hol.classify(mono, tol=1e-6)
    beta = meta.get("beta")
    if beta is not None:
        allowed = hol.predicted_class(beta, bool(meta.get("log_type")))
        res.checks.append(Check("monodromy_class", allowed.contains(cls), cls.tag, sorted(allowed.tags),
                                f"trace {cls.trace:.9f}, spread over radii {spread:.1e}"))

    fit = asy.fit_singularity(m.w, fit_radii)
    if beta is not None:
        kind = "log-type" if meta.get("log_type") else "power"
        ok = fit.kind == kind and abs(fit.beta - beta) <= 1e-3
        res.checks.append(Check("singularity_fit", ok, [fit.kind, fit.beta], [kind, beta]))
    N_meta = meta.get("N")
    if N_meta is not None:
        N = asy.cubic_order(m.xi0(), float(np.sqrt(r_in * r_out)))
        res.checks.append(Check("cubic_order", N == N_meta, N, N_meta))
        res.checks.append(Check("singularity_bound", asy.check_bound(fit, N), [fit.kind, fit.beta], N))
    return res
