"""Drifted Brownian motion stopped at its last passage time of a level.

Submodules:

* :mod:`~lastpassage.analytic_core` closed-form laws and integrals,
* :mod:`~lastpassage.kernels` transition kernel, semigroup, conditional laws, generator,
* :mod:`~lastpassage.sampler` exact, brute-force and bang-bang path samplers,
* :mod:`~lastpassage.estimators` path functionals and test statistics,
* :mod:`~lastpassage.pde` finite differences for the backward equation,
* :mod:`~lastpassage.suite` and :mod:`~lastpassage.cli` the verification checks and their CLI.
"""
from .analytic_core import ModelParams
from .errors import ConfigurationError, DomainError, EvaluationError, UsageError
from .reports import TestReport, Verdict

__all__ = ["ModelParams", "TestReport", "Verdict", "ConfigurationError", "DomainError", "EvaluationError",
           "UsageError"]
__version__ = "0.1.0"
