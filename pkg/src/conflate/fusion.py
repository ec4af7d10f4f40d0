"""Inverse-variance fusion of independent unbiased measurements."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import distributions as D
from .conflation import _rule_normal, conflate
from .errors import InvalidSpec


@dataclass(frozen=True)
class FusionEstimate:
    value: float
    variance: float
    weights: np.ndarray

    def to_dict(self):
        return {"value": self.value, "variance": self.variance, "weights": [float(w) for w in self.weights]}


def _normals(means, variances):
    means = np.atleast_1d(np.asarray(means, dtype=float))
    variances = np.atleast_1d(np.asarray(variances, dtype=float))
    if means.ndim != 1 or means.shape != variances.shape or len(means) == 0:
        raise ValueError("means and variances must be nonempty and of equal length")
    if not np.all(np.isfinite(means)):
        raise ValueError("means must be finite")
    if not np.all(np.isfinite(variances)) or np.any(variances <= 0):
        raise ValueError("variances must be finite and positive")
    return [D.Normal(float(m), float(v)) for m, v in zip(means, variances)]


def gaussian_conflation_params(means, variances):
    """(mean, variance) of the conflation of N(mean_i, variance_i).

    Computed with the same exact rule the conflation engine uses, so the
    floats agree bit for bit with ``conflate`` on the same normals.
    """
    q = _rule_normal(_normals(means, variances))
    return float(q.mu), float(q.sigma2)


def blue_estimate(observations, variances) -> FusionEstimate:
    """Inverse-variance weighted mean of independent unbiased estimates."""
    specs = _normals(observations, variances)
    value, var = gaussian_conflation_params(observations, variances)
    prec = np.array([1.0 / float(s.sigma2) for s in specs])
    return FusionEstimate(value, var, prec / prec.sum())


@dataclass(frozen=True)
class WlsComparison:
    conflation_mean: float
    wls_value: float
    wls_variance: float

    def to_dict(self):
        return {"conflation_mean": self.conflation_mean, "wls_value": self.wls_value, "wls_variance": self.wls_variance}


def compare_conflation_vs_wls(spec1, spec2) -> WlsComparison:
    """Mean of the conflation next to the weighted least-squares combination."""
    specs = [D.validate(spec1), D.validate(spec2)]
    means, variances = [], []
    for s in specs:
        m, v = s.mean(), s.var()
        if not (math.isfinite(m) and math.isfinite(v)):
            raise InvalidSpec(f"{s.kind} has no finite mean and variance; weighted least squares is undefined")
        means.append(m)
        variances.append(v)
    est = blue_estimate(means, variances)
    return WlsComparison(float(conflate(specs).mean()), est.value, est.variance)


def normal_log_likelihood(theta, observations, variances):
    x = np.asarray(observations, dtype=float)
    v = np.asarray(variances, dtype=float)
    return float(-0.5 * np.sum(np.log(2 * np.pi * v)) - math.fsum((x - theta) ** 2 / (2 * v)))


def normal_score(theta, observations, variances):
    """d/dtheta of the joint normal log-likelihood."""
    x = np.asarray(observations, dtype=float)
    v = np.asarray(variances, dtype=float)
    return math.fsum((x - theta) / v)


def normal_score_derivative(variances):
    return -math.fsum(1.0 / np.asarray(variances, dtype=float))
