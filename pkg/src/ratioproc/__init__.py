"""ratioproc: localized concentration bounds, expectation bounds and exact
Monte Carlo suprema for ratio-type empirical processes.

Modules
-------
classes  concrete function classes, scale functionals, envelopes, capacities
peel     slicing grids, the gamma inverse, deviation radii, ratio bounds
expect   expectation upper/lower bounds under uniform entropy models
sim      seeded Monte Carlo supremum engine and the exact small oracle
learn    margin-distribution ratios, excess-risk certificates, ERM solvers
lab      CLI, configuration, scaling studies, serialization
"""

from . import classes, expect, learn, peel, sim  # noqa: F401
from .backend import USE_NUMBA, backend_name  # noqa: F401

__version__ = "0.1.0"
