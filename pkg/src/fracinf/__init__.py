"""Numerics for the infinity fractional Laplacian.

Operator evaluation, stable tug-of-war games, Dirichlet and obstacle
solvers in strips, a comparison counterexample for the weak definition,
and regularity measurement tools.
"""
__version__ = "0.1.0"

from .errors import (CertificationError, ConfigError, FracInfError,  # noqa: F401
                     NumericalError)
from .operator import QuadratureConfig, ifl_eval, ifl_eval_weak  # noqa: F401
