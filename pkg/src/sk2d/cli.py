"""Command line interface: ``sk2d <command> [options]``.

Every command prints one JSON document (``"schema": "sk2d/1"``) to stdout and
optionally writes it to ``--json PATH``; sampled fields go to CSV files below
``--out``.  Exit codes: 0 success, 1 failed verification, 2 invalid input,
3 numerical non-convergence, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import asymptotics as asy
from . import global_p1 as gp
from . import holonomy as hol
from . import kw_solver as kw
from . import sk_core as sk
from .errors import (AccuracyError, ConstructionError, ContourError, DimensionError, DomainError,
                     FitError, IntegrationError, SolverError)
from .families import FAMILIES, build_family
from .fields import LogPolarGrid, Loop, ScalarField
from .schemas import SCHEMA_VERSION
from .verify import DEFAULT_FIT_RADII, verify_family

EXIT_OK, EXIT_FAILED, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_IO = 0, 1, 2, 3, 4

COMMANDS = ("family", "solve-kw", "holonomy", "classify", "asymptotics", "gauss-bonnet", "p1",
            "verify")
FLAG_PARAMS = ("A", "B", "K", "n", "a")


class ValidationError(Exception):
    pass


class NonConvergence(Exception):
    def __init__(self, message, doc=None):
        super().__init__(message)
        self.doc = doc


@dataclass
class RunConfig:
    command: str
    family: Optional[str] = None
    params: dict = field(default_factory=dict)
    n_rho: int = 129
    n_theta: int = 128
    r_min: Optional[float] = None
    r_max: Optional[float] = None
    radius: Optional[float] = None
    rtol: float = 1e-10
    out: Optional[str] = None
    json_path: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        if self.family is not None and self.family not in FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}; known: {sorted(FAMILIES)}")
        if not self.rtol > 0:
            raise ValidationError("--rtol must be positive")
        if self.n_rho < 4 or self.n_theta < 8 or self.n_theta % 2:
            raise ValidationError("grid needs n_rho >= 4 and an even n_theta >= 8")
        for name in ("r_min", "r_max", "radius"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValidationError(f"--{name.replace('_', '')} must be positive")
        if self.r_min is not None and self.r_max is not None and not self.r_min < self.r_max:
            raise ValidationError("--rmin must be smaller than --rmax")
        return self

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        params = {}
        if getattr(ns, "params", None):
            try:
                given = json.loads(ns.params)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"--params is not valid JSON: {exc}") from exc
            if not isinstance(given, dict):
                raise ValidationError("--params must be a JSON object")
            params.update(given)
        for p in FLAG_PARAMS:
            v = getattr(ns, p, None)
            if v is not None:
                params[p] = v
        skip = {"command", "family", "params", "grid_nrho", "grid_ntheta", "rmin", "rmax", "radius",
                "rtol", "out", "json", "verbose", *FLAG_PARAMS}
        extra = {k: v for k, v in vars(ns).items() if k not in skip}
        return cls(ns.command, getattr(ns, "family", None), params, ns.grid_nrho, ns.grid_ntheta,
                   ns.rmin, ns.rmax, ns.radius, ns.rtol, ns.out, ns.json, extra).validate()


# --- helpers ------------------------------------------------------------------

def _family(cfg: RunConfig):
    if cfg.family is None:
        raise ValidationError("--family is required")
    return build_family(cfg.family, cfg.params)


def _domain(cfg: RunConfig, m=None):
    lo, hi = m.domain if m is not None else (1e-3, 0.9)
    return (cfg.r_min if cfg.r_min is not None else lo, cfg.r_max if cfg.r_max is not None else hi)


def _grid(cfg: RunConfig, m=None):
    r_in, r_out = _domain(cfg, m)
    return LogPolarGrid.from_radii(r_in, r_out, cfg.n_rho, cfg.n_theta)


def _out_path(cfg: RunConfig, name):
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items() if not callable(v)}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


# --- commands -------------------------------------------------------------------

def cmd_family(cfg: RunConfig):
    m = _family(cfg)
    g = _grid(cfg, m)
    files = {}
    w = ScalarField(g, np.asarray(m.w(g.X, g.Y), dtype=float) * np.ones(g.shape))
    if cfg.out:
        w.to_csv(files.setdefault("w", _out_path(cfg, "w.csv")))
        ScalarField(g, -np.log(w.values)).to_csv(files.setdefault("u", _out_path(cfg, "u.csv")))
        if m.triple is not None:
            c = sk.connection_from_triple(m.triple, g)
            c.omega11.to_csv(files.setdefault("omega11", _out_path(cfg, "omega11.csv")))
            c.omega22.to_csv(files.setdefault("omega22", _out_path(cfg, "omega22.csv")))
            sk.cubic_form(m.triple, g).xi0.to_csv(files.setdefault("xi0", _out_path(cfg, "xi0.csv")))
    grid = {"r_min": g.r_min, "r_max": g.r_max, "n_rho": g.n_rho, "n_theta": g.n_theta}
    return {"metadata": m.metadata(), "grid": grid, "files": files, "meta": _jsonable(m.meta)}


def cmd_solve_kw(cfg: RunConfig):
    oracle = cfg.extra.get("oracle")
    tol = cfg.extra.get("tol") or 1e-10
    if cfg.extra.get("problem"):
        with open(cfg.extra["problem"]) as fh:
            problem = json.load(fh)
        gproblem = problem.get("grid", {})
        cfg.n_rho = int(gproblem.get("n_rho", cfg.n_rho))
        cfg.n_theta = int(gproblem.get("n_theta", cfg.n_theta))
        cfg.r_min = gproblem.get("r_min", cfg.r_min)
        cfg.r_max = gproblem.get("r_max", cfg.r_max)
        oracle = problem.get("oracle", oracle)
        tol = problem.get("tol", tol)
        if "family" in problem:
            cfg.family = problem["family"]
            cfg.params = dict(problem.get("params", {}))
            for key in ("A", "a"):
                if key in problem:
                    cfg.params[key] = problem[key]
        cfg.validate()
    if oracle is not None:
        exact = {"hyperbolic-disc": kw.hyperbolic_disc_potential,
                 "punctured-disc": kw.punctured_disc_potential}.get(oracle)
        if exact is None:
            raise ValidationError(f"unknown oracle {oracle!r}")
        default = (0.05, 0.9) if oracle == "hyperbolic-disc" else (1e-3, 0.5)
        r_in = cfg.r_min if cfg.r_min is not None else default[0]
        r_out = cfg.r_max if cfg.r_max is not None else default[1]
        g = LogPolarGrid.from_radii(r_in, r_out, cfg.n_rho, cfg.n_theta)
        q = np.ones(g.shape)
    else:
        m = _family(cfg)
        if m.triple is None:
            raise ValidationError(f"family {m.name!r} has no special Kähler triple")
        g = _grid(cfg, m)
        exact = m.u
        q = m.triple.kw_source_at(g.X, g.Y) * np.ones(g.shape)
    prob = kw.KWProblem.from_exact(g, q, exact)
    u, report = kw.solve_kw(prob, tol=tol, max_iter=int(cfg.extra.get("max_iter") or 50))
    files = {}
    if cfg.out:
        u.to_csv(files.setdefault("u", _out_path(cfg, "u.csv")))
    doc = {"report": report.to_dict(), "kw_residual": kw.kw_residual(u, ScalarField(g, q)),
           "max_error": float(np.max(np.abs(u.values - exact(g.X, g.Y)))), "files": files}
    if not report.converged:
        raise NonConvergence(report.message, doc)
    return doc


def cmd_holonomy(cfg: RunConfig):
    m = _family(cfg)
    r_in, r_out = _domain(cfg, m)
    radius = cfg.radius or m.meta.get("holonomy_radius") or float(np.sqrt(r_in * r_out))
    mm = hol.parallel_transport(m.connection_evaluator(), Loop(0j, radius), rtol=cfg.rtol)
    cls = hol.classify(mm, tol=1e-6)
    ref = mm.in_reference_frame()
    doc = {"matrix": ref.m.tolist(), "matrix_cartesian": mm.m.tolist(), "det": mm.det,
           "trace": mm.trace, "radius": radius, "class": cls.tag,
           "beta_candidates": list(cls.beta_candidates), "predicted": None, "in_predicted": None}
    beta = m.meta.get("beta")
    if beta is not None:
        allowed = hol.predicted_class(beta, bool(m.meta.get("log_type")))
        doc["predicted"] = sorted(allowed.tags)
        doc["in_predicted"] = allowed.contains(cls)
    return doc


def cmd_classify(cfg: RunConfig):
    src = cfg.extra.get("matrix")
    if cfg.extra.get("input"):
        path = cfg.extra["input"]
        text = sys.stdin.read() if path == "-" else open(path).read()
        src = json.loads(text).get("matrix")
    elif src is not None:
        try:
            src = json.loads(src)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"--matrix is not valid JSON: {exc}") from exc
    if src is None:
        raise ValidationError("give --matrix or --input")
    m = np.asarray(src, dtype=float)
    if m.shape != (2, 2):
        raise ValidationError("matrix must be 2x2")
    cls = hol.classify(m, tol=cfg.extra.get("tol") or 1e-6)
    return {"matrix": m.tolist(), **cls.to_dict()}


def cmd_asymptotics(cfg: RunConfig):
    m = _family(cfg)
    if cfg.r_min is not None or cfg.r_max is not None:
        lo = cfg.r_min if cfg.r_min is not None else 1e-8
        hi = cfg.r_max if cfg.r_max is not None else 1e-2
        radii = np.geomspace(hi, lo, 25)
    else:
        radii = DEFAULT_FIT_RADII
    fit = asy.fit_singularity(m.w, radii)
    N = bound = None
    if m.triple is not None:
        r0 = float(np.sqrt(m.domain[0] * m.domain[1]))
        try:
            N = asy.cubic_order(m.xi0(), r0)
            bound = asy.check_bound(fit, N)
        except ContourError:
            N = bound = None
    return {"fit": fit.to_dict(), "cubic_order": N, "bound_holds": bound, "radii": radii.tolist()}


def _parse_orders(text):
    if text is None:
        return None
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"cannot parse orders {text!r}") from exc


def cmd_gauss_bonnet(cfg: RunConfig):
    metric = cfg.extra.get("metric")
    if metric is not None:
        ws = {"euclidean": lambda x, y: 1.0 + 0 * x,
              "hyperbolic-disc": lambda x, y: 4.0 / (1 - x * x - y * y) ** 2}
        if metric not in ws:
            raise ValidationError(f"unknown metric {metric!r}")
        w = ws[metric]
        r_in, r_out = _domain(cfg)
    else:
        m = _family(cfg)
        w = m.w
        r_in, r_out = _domain(cfg, m)
    res = gp.gauss_bonnet_bounded(w, r_in, r_out, cfg.n_rho, cfg.n_theta)
    doc = res.to_dict()
    orders = _parse_orders(cfg.extra.get("orders"))
    doc["budget"] = None
    if orders:
        doc["budget"] = gp.cone_budget([gp.ConeDatum(0j, o) for o in orders]).to_dict()
    return doc


def cmd_p1(cfg: RunConfig):
    src = cfg.extra.get("punctures")
    if src is None:
        raise ValidationError("--punctures is required")
    try:
        data = json.load(open(src)) if os.path.exists(src) else json.loads(src)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"--punctures is neither a file nor JSON: {exc}") from exc
    pts = [complex(p[0], p[1]) if isinstance(p, (list, tuple)) else complex(p) for p in data]
    orders = _parse_orders(cfg.extra.get("orders"))
    if orders is None:
        raise ValidationError("--orders is required")
    if len(orders) == 1:
        orders = orders * len(pts)
    fam = gp.p1_family_construct(pts, orders, h=cfg.extra.get("h") or 0.03,
                                 n_theta=cfg.extra.get("n_theta_patch") or 96)
    fitted = [fam.fit_cone(j).beta / 2 for j in range(fam.k)]
    traces = [fam.cone_holonomy(j).trace for j in range(fam.k)]
    files = {}
    if cfg.out:
        for j, patch in enumerate(fam.cones):
            patch.u.to_csv(files.setdefault(f"cone_{j}", _out_path(cfg, f"cone_{j}.csv")))
        fam.infinity.u.to_csv(files.setdefault("infinity", _out_path(cfg, "infinity_zeta.csv")))
        path = files.setdefault("cartesian", _out_path(cfg, "cartesian.csv"))
        mid = fam.middle
        X, Y = np.meshgrid(mid.x, mid.y, indexing="ij")
        sel = mid.active
        np.savetxt(path, np.column_stack([X[sel], Y[sel], mid.u[sel]]), delimiter=",",
                   header="x,y,value", comments="")
    doc = fam.summary()
    doc.update({"fitted_orders": fitted, "order_at_infinity": fam.fit_infinity().beta / 2,
                "holonomy_traces": traces,
                "expected_traces": [2 * float(np.cos(np.pi * a)) for a in fam.alphas],
                "budget": gp.cone_budget(fam.punctures).to_dict(), "files": files})
    return _jsonable(doc)


def cmd_verify(cfg: RunConfig):
    m = _family(cfg)
    res = verify_family(m, n_base=cfg.extra.get("n_base") or 128, rtol=cfg.rtol)
    return res.to_dict()


HANDLERS = {"family": cmd_family, "solve-kw": cmd_solve_kw, "holonomy": cmd_holonomy,
            "classify": cmd_classify, "asymptotics": cmd_asymptotics,
            "gauss-bonnet": cmd_gauss_bonnet, "p1": cmd_p1, "verify": cmd_verify}


# --- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--family", help=f"one of {', '.join(sorted(FAMILIES))}")
    common.add_argument("--params", help="family parameters as a JSON object")
    common.add_argument("--A", type=float)
    common.add_argument("--B", type=float)
    common.add_argument("--K", type=float, help="signed curvature of the Liouville metric (< 0)")
    common.add_argument("--n", type=int)
    common.add_argument("--a", type=float)
    common.add_argument("--grid-nrho", type=int, default=129)
    common.add_argument("--grid-ntheta", type=int, default=128)
    common.add_argument("--rmin", type=float)
    common.add_argument("--rmax", type=float)
    common.add_argument("--radius", type=float)
    common.add_argument("--rtol", type=float, default=1e-10)
    common.add_argument("--out", help="directory for CSV output")
    common.add_argument("--json", help="also write the JSON result to this file")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="sk2d", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("family", parents=[common], help="dump w, u, connection and cubic form")
    s = sub.add_parser("solve-kw", parents=[common], help="solve Delta u = q e^{2u}")
    s.add_argument("--problem", help="JSON problem file")
    s.add_argument("--oracle", choices=["hyperbolic-disc", "punctured-disc"])
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iter", type=int)
    sub.add_parser("holonomy", parents=[common], help="monodromy around the origin")
    s = sub.add_parser("classify", parents=[common], help="conjugacy class of a 2x2 matrix")
    s.add_argument("--matrix", help="JSON 2x2 array")
    s.add_argument("--input", help="JSON file with a 'matrix' key ('-' for stdin)")
    s.add_argument("--tol", type=float)
    sub.add_parser("asymptotics", parents=[common], help="fit the singularity at the origin")
    s = sub.add_parser("gauss-bonnet", parents=[common], help="bounded Gauss-Bonnet and cone budget")
    s.add_argument("--metric", choices=["euclidean", "hyperbolic-disc"])
    s.add_argument("--orders", help="comma separated cone orders for the budget")
    s = sub.add_parser("p1", parents=[common], help="special Kähler metric on P^1 with cone points")
    s.add_argument("--punctures", help="JSON file or literal list of [x, y]")
    s.add_argument("--orders", help="comma separated orders alpha_j/2 (one value for all)")
    s.add_argument("--h", type=float, help="Cartesian mesh width")
    s.add_argument("--n-theta-patch", type=int)
    s = sub.add_parser("verify", parents=[common], help="run the invariant suite on a family")
    s.add_argument("--n-base", type=int)
    return p


def _emit(doc, cfg_json):
    text = json.dumps(doc, indent=2)
    print(text)
    if cfg_json:
        with open(cfg_json, "w") as fh:
            fh.write(text + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    header = {"schema": SCHEMA_VERSION, "command": ns.command}
    json_path = getattr(ns, "json", None)

    def fail(msg, code, doc=None):
        out = dict(header, error=msg, exit_code=code)
        if doc:
            out.update(_jsonable(doc))
        try:
            _emit(out, json_path)
        except OSError:
            pass
        print(f"sk2d: error: {msg}", file=sys.stderr)
        return code

    try:
        cfg = RunConfig.from_args(ns)
        doc = HANDLERS[cfg.command](cfg)
    except (ValidationError, DomainError, DimensionError, KeyError, FitError, ValueError) as exc:
        return fail(str(exc), EXIT_INVALID)
    except NonConvergence as exc:
        return fail(str(exc), EXIT_NONCONVERGED, exc.doc)
    except (SolverError, ConstructionError, IntegrationError, AccuracyError, ContourError) as exc:
        return fail(str(exc), EXIT_NONCONVERGED)
    except OSError as exc:
        return fail(str(exc), EXIT_IO)
    doc = dict(header, **_jsonable(doc))
    try:
        _emit(doc, json_path)
    except OSError as exc:
        print(f"sk2d: error: {exc}", file=sys.stderr)
        return EXIT_IO
    if ns.command == "verify" and not doc["passed"]:
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
