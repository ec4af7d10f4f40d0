"""Conflation of probability distributions.

The conflation of P_1, ..., P_n is the normalized product of their mass
functions (discrete inputs) or densities (continuous inputs).
"""
from .conflation import (
    ConflationResult,
    compatible,
    conflate,
    conflate_closed_form,
    conflate_discrete,
    conflate_grid,
    conflate_truncated,
)
from .distributions import (
    CMP,
    Bernoulli,
    Beta,
    Binomial,
    Cauchy,
    ChiSquare,
    DiscretePMF,
    DiscreteUniform,
    Distribution,
    Exponential,
    Gamma,
    Geometric,
    GridDensity,
    Laplace,
    Normal,
    Pareto,
    PmfTable,
    Poisson,
    Support,
    Truncated,
    Uniform,
    Zeta,
    Zipf,
    evaluate,
    interval_prob,
    support,
    validate,
)
from .errors import ConflationError, ConflationUndefined, IncompatibleInputs, InvalidSpec, NonIntegrableProduct

__version__ = "0.1.0"
