"""JSON Schemas of every document the command line emits (version ``sk2d/1``)."""

SCHEMA_VERSION = "sk2d/1"

_num = {"type": "number"}
_num_or_null = {"type": ["number", "null"]}
_matrix = {"type": "array", "minItems": 2, "maxItems": 2,
           "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": _num}}


def _doc(command, properties, required):
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "properties": {"schema": {"const": SCHEMA_VERSION}, "command": {"const": command},
                       **properties},
        "required": ["schema", "command", *required],
    }


_family_meta = {
    "type": "object",
    "properties": {"family": {"type": "string"}, "params": {"type": "object"},
                   "a": _num_or_null},
    "required": ["family", "params", "a"],
}

_solve_report = {
    "type": "object",
    "properties": {
        "iterations": {"type": "integer", "minimum": 0},
        "final_residual": _num,
        "damping": {"type": "array", "items": _num},
        "converged": {"type": "boolean"},
        "residual_history": {"type": "array", "items": _num},
        "message": {"type": "string"},
    },
    "required": ["iterations", "final_residual", "damping", "converged"],
}

_class = {
    "type": "object",
    "properties": {
        "tag": {"enum": ["trivial", "minus-identity", "parabolic-plus", "parabolic-minus",
                         "elliptic", "hyperbolic"]},
        "trace": _num,
        "beta_candidates": {"type": "array", "items": _num},
    },
    "required": ["tag", "trace", "beta_candidates"],
}

_fit = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["power", "log-type"]},
        "beta": _num,
        "N": {"type": ["integer", "null"]},
        "C": {"type": "number", "exclusiveMinimum": 0},
        "fit_residual": _num,
        "ambiguous": {"type": "boolean"},
    },
    "required": ["kind", "beta", "N", "C", "fit_residual"],
}

SCHEMAS = {
    "family": _doc("family", {
        "metadata": _family_meta,
        "grid": {"type": "object"},
        "files": {"type": "object", "additionalProperties": {"type": "string"}},
        "meta": {"type": "object"},
    }, ["metadata", "grid", "files"]),
    "solve-kw": _doc("solve-kw", {
        "report": _solve_report,
        "kw_residual": _num,
        "max_error": _num_or_null,
        "files": {"type": "object"},
    }, ["report", "kw_residual"]),
    "holonomy": _doc("holonomy", {
        "matrix": _matrix,
        "matrix_cartesian": _matrix,
        "det": _num,
        "trace": _num,
        "radius": _num,
        "class": _class["properties"]["tag"],
        "beta_candidates": {"type": "array", "items": _num},
        "predicted": {"type": ["array", "null"], "items": {"type": "string"}},
        "in_predicted": {"type": ["boolean", "null"]},
    }, ["matrix", "det", "trace", "class", "beta_candidates"]),
    "classify": _doc("classify", {
        "matrix": _matrix, **_class["properties"],
    }, ["matrix", "tag", "trace", "beta_candidates"]),
    "asymptotics": _doc("asymptotics", {
        "fit": _fit,
        "cubic_order": {"type": ["integer", "null"]},
        "bound_holds": {"type": ["boolean", "null"]},
        "radii": {"type": "array", "items": _num},
    }, ["fit"]),
    "gauss-bonnet": _doc("gauss-bonnet", {
        "lhs": _num, "rhs": _num, "curvature_integral": _num, "boundary_term": _num,
        "budget": {"type": ["object", "null"]},
    }, ["lhs", "rhs"]),
    "p1": _doc("p1", {
        "punctures": {"type": "array", "items": {"type": "object"}},
        "moduli_dim": {"type": "integer"},
        "report": {"type": "object"},
        "fitted_orders": {"type": "array", "items": _num},
        "order_at_infinity": _num,
        "holonomy_traces": {"type": "array", "items": _num},
        "expected_traces": {"type": "array", "items": _num},
        "budget": {"type": "object"},
        "files": {"type": "object"},
    }, ["punctures", "moduli_dim", "report", "fitted_orders", "order_at_infinity"]),
    "verify": _doc("verify", {
        "family": {"type": "string"},
        "params": {"type": "object"},
        "passed": {"type": "boolean"},
        "checks": {"type": "array", "items": {
            "type": "object",
            "properties": {"name": {"type": "string"}, "passed": {"type": "boolean"}},
            "required": ["name", "passed"],
        }},
    }, ["family", "passed", "checks"]),
    "error": {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "properties": {"schema": {"const": SCHEMA_VERSION}, "command": {"type": "string"},
                       "error": {"type": "string"}, "exit_code": {"type": "integer"}},
        "required": ["schema", "command", "error", "exit_code"],
    },
}
