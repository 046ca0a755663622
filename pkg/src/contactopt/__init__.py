"""Design optimization for frictionless unilateral contact assemblies.

The package couples a small plane-strain finite element kernel with a
mortar discretization of the contact conditions, solves the resulting
convex quadratic program by a primal-dual interior-point method, and
differentiates the converged solution with respect to shape and load
parameters.  Two outer optimizers consume those evaluations: a
gradient-based nonlinear programming solver and a constrained Bayesian
optimizer built on Gaussian process surrogates.
"""

__version__ = "0.1.0"

from . import bayesopt, config, elasticity, forward, geometry, linalg, mortar
from . import nlpopt, scenarios, sensitivity

__all__ = [
    "__version__",
    "bayesopt",
    "cli",
    "config",
    "elasticity",
    "forward",
    "geometry",
    "linalg",
    "mortar",
    "nlpopt",
    "report",
    "scenarios",
    "sensitivity",
]


def __getattr__(name):
    # report drags in matplotlib and cli builds on it; load them only
    # when asked for
    if name in ("cli", "report"):
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
