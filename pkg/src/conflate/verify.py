"""Worked-example checks run by ``conflate verify``."""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import distributions as D
from .conflation import conflate, conflate_grid
from .diagnostics import convolution_check
from .dyadic import mu_j
from .fusion import blue_estimate


def _bernoulli_dyadic():
    specs = [D.Bernoulli(1 / 3), D.Bernoulli(1 / 4)]
    worst = 0.0
    for j in range(1, 11):
        got = mu_j(specs, j).as_dict()
        if set(got) != {0.0, 1.0}:
            return False, f"level {j}: atoms {sorted(got)}"
        worst = max(worst, abs(got[0.0] - 0.5), abs(got[1.0] - 1 / 12))
    return worst <= 1e-15, f"max error {worst:.1e} over levels 1-10"


def _bernoulli_pair():
    r = conflate([D.Bernoulli(1 / 3), D.Bernoulli(1 / 4)])
    m = r.form.as_dict()
    err = max(abs(m.get(0.0, 0) - 6 / 7), abs(m.get(1.0, 0) - 1 / 7), abs(r.norm_constant - 7 / 12))
    return err <= 1e-12, f"max error {err:.1e}"


def _normal_bernoulli():
    r = conflate([D.Normal(0, 1), D.Bernoulli(1 / 3)])
    m = r.form.as_dict()
    e = math.exp(-0.5)
    err = max(abs(m.get(0.0, 0) - 2 / (2 + e)), abs(m.get(1.0, 0) - e / (2 + e)))
    return err <= 1e-12, f"max error {err:.1e}"


def _binomial_poisson():
    r = conflate([D.Binomial(2, 1 / 3), D.Poisson(5)])
    m = r.form.as_dict()
    want = {0.0: 8 / 73, 1.0: 40 / 73, 2.0: 25 / 73}
    if set(m) != set(want):
        return False, f"atoms {sorted(m)}"
    err = max(abs(m[k] - v) for k, v in want.items())
    return err <= 1e-12, f"max error {err:.1e}"


def _normal_exponential():
    r = conflate([D.Normal(0, 1), D.Exponential(1)])
    ref = D.Truncated(D.Normal(-1, 1), 0, math.inf)
    x = r.form.points
    err = float(np.max(np.abs(r.form.values - ref.pdf(x))))
    return err <= 1e-6, f"sup density error {err:.1e} against N(-1,1) truncated to x>0"


def _normal_pair():
    r = conflate([D.Normal(0, 1), D.Normal(0, 1)])
    res = convolution_check(D.Normal(0, 1), D.Normal(0, 1))
    ok = r.form == D.Normal(0, 0.5) and res <= 1e-6
    return ok, f"N({r.form.mu}, {r.form.sigma2}), convolution residual {res:.1e}"


def _normal_closed_form():
    r = conflate([D.Normal(1, 1), D.Normal(2, 4)])
    g = conflate_grid([D.Normal(1, 1), D.Normal(2, 4)])
    err = float(np.max(np.abs(g.form.values - D.Normal(1.2, 0.8).pdf(g.form.points))))
    exact = r.engine == "closed_form" and (Fraction(r.form.mu), Fraction(r.form.sigma2)) == (Fraction(6, 5), Fraction(4, 5))
    return exact and err <= 1e-6, f"N({r.form.mu}, {r.form.sigma2}), grid sup density error {err:.1e}"


def _uniform_wls():
    r = conflate([D.Uniform(0, 1), D.Uniform(-0.1, 1)])
    w = blue_estimate([0.5, 0.45], [1 / 12, 1.21 / 12])
    ok = r.form == D.Uniform(0, 1) and abs(r.mean() - 0.5) <= 1e-9 and w.value < 0.48
    return ok, f"conflation mean {r.mean():.9f}, weighted least squares {w.value:.6f}"


CHECKS = [
    ("bernoulli-dyadic-measure", _bernoulli_dyadic),
    ("bernoulli-pair", _bernoulli_pair),
    ("normal-bernoulli-mixed", _normal_bernoulli),
    ("binomial-poisson", _binomial_poisson),
    ("normal-exponential", _normal_exponential),
    ("normal-pair-convolution", _normal_pair),
    ("normal-closed-form", _normal_closed_form),
    ("uniform-vs-wls", _uniform_wls),
]


def run_all():
    """[(name, passed, detail)] for every check; exceptions count as failures."""
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # report, do not abort the table
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
