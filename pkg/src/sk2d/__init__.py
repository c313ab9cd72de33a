"""Numerical toolkit for two-dimensional affine special Kähler structures with isolated singularities."""

from . import (asymptotics, convergence, errors, families, fields, global_p1, holonomy, kw_solver,
               sk_core, verify)
from .families import FAMILIES, build_family

__version__ = "0.1.0"

__all__ = ["asymptotics", "convergence", "errors", "families", "fields", "global_p1", "holonomy",
           "kw_solver", "sk_core", "verify", "FAMILIES", "build_family"]
