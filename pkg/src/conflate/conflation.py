"""Normalized products of distributions: closed-form, discrete and grid engines."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import distributions as D
from . import quadrature as Qd
from .errors import ConflationUndefined, IncompatibleInputs, InvalidSpec, NonIntegrableProduct
from .serialization import canonical_key

ENGINES = ("closed_form", "discrete_product", "grid_quadrature")
MIXED_WARNING = "mixed discrete and continuous inputs: atom masses weighted by density values at the atoms"


@dataclass(frozen=True)
class ConflationResult:
    """The conflation ``form`` plus the normalizer of the raw product.

    ``norm_constant`` is the sum over common atoms of the product of
    masses (discrete), or the integral of the product of densities
    (continuous).  It is ``inf`` when the product does not integrate, in
    which case ``form`` is a point mass at ``concentration``.
    """

    form: D.Distribution
    norm_constant: float
    engine: str
    warnings: tuple = ()
    concentration: float | None = None

    def pdf(self, x):
        return self.form.pdf(x)

    def mean(self):
        return self.form.mean()

    def var(self):
        return self.form.var()


def _frac(v):
    return v if isinstance(v, Fraction) else Fraction(v)


def _prod(vals):
    out = Fraction(1)
    for v in vals:
        out *= v
    return out


def _sum(vals):
    return sum(vals, Fraction(0))


def _maybe_int(v: Fraction):
    return int(v) if v.denominator == 1 else v


# ---------------------------------------------------------------------------
# compatibility


def compatible(specs) -> bool:
    """True when the inputs share a region of positive product mass."""
    specs = [D.validate(s) for s in specs]
    if len(specs) <= 1:
        return True
    discrete = [s for s in specs if s.discrete]
    if not discrete:
        lo, hi = Qd.support_overlap(specs)
        return lo < hi
    if len(discrete) == len(specs) and all(s.support().is_lattice for s in specs):
        lo = max(s.support().lo for s in specs)
        hi = min(s.support().hi for s in specs)
        return math.ceil(lo) <= hi
    try:
        xs, _, _ = _driver_atoms(discrete, specs)
    except ConflationUndefined:
        return False
    return len(xs) > 0


# ---------------------------------------------------------------------------
# discrete engine


def _enumeration_size(spec):
    s = spec.support()
    if s.atoms is not None:
        return len(s.atoms)
    stop = spec.isf(D.TAIL_CUTOFF)
    return float(stop) - s.lo if np.isfinite(stop) else math.inf


def _driver_atoms(discrete, specs, tail=D.TAIL_CUTOFF):
    """Atoms of the lightest discrete input where the whole product is positive.

    Returns ``(xs, log_product, tail_bound)``.  Lattice drivers are
    enumerated further while the product is still within
    ``quadrature.LOG_DROP`` nats of its peak at the last atom.
    """
    driver = min(discrete, key=lambda s: (_enumeration_size(s), canonical_key(s)))
    cap = D.MAX_LATTICE_ATOMS
    finite_driver = driver.support().atoms is not None
    size = cap if finite_driver else 4096
    while True:
        xs, _, rest = driver.atoms(tail=tail, max_atoms=size)
        L = Qd.log_product(specs, xs)
        finite = np.isfinite(L)
        # past the last atom K the driver leaves mass ``rest`` and every other
        # pmf is at most its supremum beyond K: p(K+1) once a unimodal pmf is
        # decreasing there, P(X > K) in general
        bound = rest
        for s in discrete:
            if s is not driver and len(xs):
                k = float(xs[-1])
                here, nxt = float(s.pdf(k)), float(s.pdf(k + 1))
                unimodal = s.support().is_lattice
                sup = nxt if unimodal and nxt <= here else float(s.sf(k))
                bound *= min(1.0, sup)
        if finite_driver or len(xs) < size or size >= cap:
            break
        if finite.any():
            peak = float(L[finite].max())
            if bound <= tail * math.exp(peak) * math.fsum(np.exp(L[finite] - peak)):
                break
        size *= 2
    keep = np.isfinite(L)
    if not keep.any():
        raise ConflationUndefined("no common atoms")
    return xs[keep], L[keep], bound


def conflate_discrete(specs) -> ConflationResult:
    """Normalized product of mass functions over the common atoms.

    Continuous inputs, when present, contribute their density values at
    the atoms and a warning is attached.
    """
    specs = [D.validate(s) for s in specs]
    discrete = [s for s in specs if s.discrete]
    if not discrete:
        raise InvalidSpec("discrete engine needs at least one discrete input")
    xs, L, tail = _driver_atoms(discrete, specs)
    w = np.ones(len(xs))
    for s in specs:
        w = w * np.asarray(s.pdf(xs), dtype=float)
    if np.all(w > 0) and np.all(np.isfinite(w)):
        total = norm = math.fsum(w)
    else:
        # direct products under- or overflow; rescale in log space
        peak = float(L.max())
        w = np.exp(L - peak)
        total = math.fsum(w)
        norm = math.exp(peak) * total
    notes = () if len(discrete) == len(specs) else (MIXED_WARNING,)
    form = D.PmfTable.from_arrays(xs, w / total, tail_bound=tail / norm if norm > 0 else tail)
    return ConflationResult(form, norm, "discrete_product", notes)


# ---------------------------------------------------------------------------
# grid engine


def _grid_from_points(specs, x, ref=None):
    L = Qd.log_product(specs, x)
    if not np.any(np.isfinite(L)):
        raise IncompatibleInputs("product of densities vanishes on the grid")
    peak = float(L[np.isfinite(L)].max()) if ref is None else ref
    with np.errstate(over="ignore", under="ignore"):
        y = np.exp(L - peak)
    return y, peak


def _singular_edge(x, y, w, side):
    """Normalizers with the edge cut at 1e-4, 1e-8 and 1e-12 window widths."""
    width = w.hi - w.lo
    d = (x - w.lo) if side == "lo" else (w.hi - x)
    zs = []
    for cut in (1e-4, 1e-8, 1e-12):
        m = d >= cut * width * (1 - 1e-9)
        zs.append(Qd.trapezoid(x[m], y[m]))
    r1 = (zs[1] - zs[0]) / zs[0]
    r2 = (zs[2] - zs[1]) / zs[1]
    return r1 > 0.1 and r2 > 0.1


def conflate_grid(specs, grid=None, n_points=4097, rtol=1e-9, max_points=2**22) -> ConflationResult:
    """Normalized product of densities by trapezoid quadrature.

    With ``grid=None`` the points follow a sinh map centred on the
    product's peak, with geometric clusters at finite support endpoints,
    and are doubled until the normalizer changes by less than ``rtol``.
    A product that fails to stabilize as the grid approaches a support
    endpoint triggers :class:`NonIntegrableProduct` and a point-mass
    result at the concentration estimate.
    """
    specs = [D.validate(s) for s in specs]
    if any(s.discrete for s in specs):
        raise InvalidSpec("grid engine needs continuous inputs")
    notes = []
    if grid is not None:
        x = np.asarray(grid, dtype=float)
        y, peak = _grid_from_points(specs, x)
        z = Qd.trapezoid(x, y)
        norm = math.exp(peak) * z
        if not norm > 0:
            raise IncompatibleInputs("normalizer underflows to zero")
        return ConflationResult(D.GridDensity(x, y), norm, "grid_quadrature", ())

    w = Qd.find_window(specs)
    n = max(int(n_points), 65)
    n = 2 ** math.ceil(math.log2(n - 1)) + 1
    prev = prev_est = None
    while True:
        x = Qd.mapped_grid(w, n)
        # one shift for every level so successive sums are comparable
        y, peak = _grid_from_points(specs, x, None if prev is None else peak)
        for side, flag in (("lo", w.lo_edge), ("hi", w.hi_edge)):
            if flag and _singular_edge(x, y, w, side):
                return _non_integrable(x, y, side)
        z = Qd.trapezoid(x, y)
        if w.lo_edge:
            z += Qd.edge_power_correction(x, y, w.lo, "lo")
        if w.hi_edge:
            z += Qd.edge_power_correction(x, y, w.hi, "hi")
        if math.isinf(z):
            return _non_integrable(x, y, "lo" if w.lo_edge else "hi")
        # nested grids: Richardson-extrapolate the O(h^2) trapezoid error
        est = None if prev is None else (4 * z - prev) / 3
        if est is not None and prev_est is not None and abs(est - prev_est) <= rtol * abs(est):
            break
        if 2 * n - 1 > max_points:
            if est is not None and prev_est is not None:
                notes.append(f"normalizer converged only to relative change {abs(est - prev_est) / est:.2e}")
            break
        prev, prev_est = z, est
        n = 2 * n - 1
    z = est if est is not None and est > 0 else z
    norm = math.exp(peak + math.log(z))
    if not norm > 0:
        raise IncompatibleInputs("normalizer underflows to zero")
    return ConflationResult(D.GridDensity(x, y), norm, "grid_quadrature", tuple(notes))


def _non_integrable(x, y, side):
    cum = np.concatenate([[0.0], np.cumsum(np.diff(x) * (y[1:] + y[:-1]) / 2)])
    xstar = float(np.interp(cum[-1] / 2, cum, x))
    msg = f"product of densities is not integrable near the {'lower' if side == 'lo' else 'upper'} support endpoint; mass concentrates near {xstar:.3g}"
    warnings.warn(msg, NonIntegrableProduct, stacklevel=3)
    form = D.PmfTable(((xstar, 1.0),))
    return ConflationResult(form, math.inf, "grid_quadrature", ("NonIntegrableProduct: " + msg,), xstar)


# ---------------------------------------------------------------------------
# closed-form rules


def _rule_normal(specs):
    prec = [1 / _frac(s.sigma2) for s in specs]
    total = _sum(prec)
    mu = _sum(p * _frac(s.mu) for p, s in zip(prec, specs)) / total
    return D.Normal(_maybe_int(mu), _maybe_int(1 / total))


def _rule_bernoulli(specs):
    a = _prod(_frac(s.p) for s in specs)
    b = _prod(1 - _frac(s.p) for s in specs)
    if a + b == 0:
        raise ConflationUndefined("no common atoms")
    return D.Bernoulli(_maybe_int(a / (a + b)))


def _rule_geometric(specs):
    return D.Geometric(_maybe_int(1 - _prod(1 - _frac(s.p) for s in specs)))


def _rule_discrete_uniform(specs):
    return D.DiscreteUniform(min(int(s.n) for s in specs))


def _rule_zipf(specs):
    return D.Zipf(_maybe_int(_sum(_frac(s.alpha) for s in specs)), min(int(s.n) for s in specs))


def _rule_zeta(specs):
    return D.Zeta(_maybe_int(_sum(_frac(s.alpha) for s in specs)))


def _rule_gamma(specs):
    n = len(specs)
    return D.Gamma(
        _maybe_int(_sum(_frac(s.alpha) for s in specs) - (n - 1)),
        _maybe_int(1 / _sum(1 / _frac(s.beta) for s in specs)),
    )


def _rule_beta(specs):
    n = len(specs)
    return D.Beta(
        _maybe_int(_sum(_frac(s.alpha) for s in specs) - (n - 1)),
        _maybe_int(_sum(_frac(s.beta) for s in specs) - (n - 1)),
    )


def _rule_uniform(specs):
    return D.Uniform(_maybe_int(max(_frac(s.a) for s in specs)), _maybe_int(min(_frac(s.b) for s in specs)))


def _rule_laplace(specs):
    return D.Laplace(_maybe_int(1 / _sum(1 / _frac(s.scale) for s in specs)))


def _rule_pareto(specs):
    n = len(specs)
    return D.Pareto(_maybe_int(_sum(_frac(s.alpha) for s in specs) + n - 1), _maybe_int(max(_frac(s.beta) for s in specs)))


def _rule_exponential(specs):
    return D.Exponential(_maybe_int(1 / _sum(1 / _frac(s.mean_) for s in specs)))


def _rule_chi_square(specs):
    # chi2(k) is gamma(k/2, scale 2); the product is gamma(sum k/2 - n + 1, scale 2/n)
    n = len(specs)
    return D.Gamma(_maybe_int(_sum(Fraction(int(s.k), 2) for s in specs) - n + 1), Fraction(2, n))


def _rule_cmp(specs):
    lam = _prod(_frac(s.lam) for s in specs)
    nu = sum(int(getattr(s, "nu", 1)) for s in specs)
    return D.CMP(_maybe_int(lam), nu)


RULES = {
    "normal": _rule_normal,
    "bernoulli": _rule_bernoulli,
    "geometric": _rule_geometric,
    "discrete_uniform": _rule_discrete_uniform,
    "zipf": _rule_zipf,
    "zeta": _rule_zeta,
    "gamma": _rule_gamma,
    "beta_dist": _rule_beta,
    "uniform": _rule_uniform,
    "laplace": _rule_laplace,
    "pareto": _rule_pareto,
    "exponential": _rule_exponential,
    "chi_square": _rule_chi_square,
    "poisson": _rule_cmp,
    "cmp": _rule_cmp,
}

TRUNCATABLE = {"normal", "exponential", "gamma", "laplace", "pareto"}


def _rule_for(specs):
    kinds = {s.kind for s in specs}
    if kinds <= {"poisson", "cmp"}:
        return _rule_cmp
    if len(kinds) == 1:
        return RULES.get(kinds.pop())
    return None


def _log_norm(specs, q):
    """log of the product's integral, read off at one point of positive mass."""
    x0 = float(q.median)
    lq = float(q.logpdf(x0))
    lp = float(Qd.log_product(specs, np.array([x0]))[0])
    return lp - lq


def conflate_closed_form(specs) -> ConflationResult:
    """Family rule for same-family inputs; grid or discrete engine otherwise.

    Parameters are combined in exact rational arithmetic.  A derived
    parameter outside the family's range falls back to the numeric
    engine with a warning instead of being clipped.
    """
    specs = [D.validate(s) for s in specs]
    rule = _rule_for(specs)
    if rule is None:
        raise InvalidSpec("no closed-form rule for these inputs: " + ", ".join(sorted({s.kind for s in specs})))
    try:
        q = rule(specs)
    except InvalidSpec as exc:
        note = f"closed-form parameters invalid ({exc}); fell back to numeric engine"
        res = conflate_discrete(specs) if specs[0].discrete else conflate_grid(specs)
        return ConflationResult(res.form, res.norm_constant, res.engine, (note,) + res.warnings, res.concentration)
    return ConflationResult(q, math.exp(_log_norm(specs, q)), "closed_form", ())


def conflate_truncated(specs) -> ConflationResult:
    """Truncated members of one family: conflate the inners, intersect windows."""
    specs = [D.validate(s) for s in specs]
    inners, lo, hi = [], -math.inf, math.inf
    for s in specs:
        if isinstance(s, D.Truncated):
            inners.append(s.inner)
            lo, hi = max(lo, float(s.lo)), min(hi, float(s.hi))
        else:
            inners.append(s)
    if not lo < hi:
        raise IncompatibleInputs(f"truncation windows do not intersect")
    kinds = {s.kind for s in inners}
    if len(kinds) != 1 or not kinds <= TRUNCATABLE:
        raise InvalidSpec("truncated closure needs one family among " + ", ".join(sorted(TRUNCATABLE)))
    inner = conflate_closed_form(inners)
    if inner.engine != "closed_form":
        return conflate_grid(specs)
    try:
        form = D.Truncated(inner.form, lo, hi)
    except InvalidSpec:
        raise IncompatibleInputs("intersected window carries no mass") from None
    log_z = sum(math.log(s.mass) for s in specs if isinstance(s, D.Truncated))
    norm = inner.norm_constant * form.mass / math.exp(log_z)
    return ConflationResult(form, norm, "closed_form", ())


# ---------------------------------------------------------------------------
# dispatcher

FINITE_DISCRETE = {"bernoulli", "discrete_uniform", "zipf", "binomial", "pmf"}


def conflate(specs) -> ConflationResult:
    """Conflation of one or more distributions.

    Inputs are put in a canonical order first, so any permutation gives
    an identical result.  Same-family inputs with a closure rule use it;
    finite discrete families are returned as exact mass tables.
    """
    specs = [D.validate(s) for s in specs]
    if not specs:
        raise ValueError("need at least one distribution")
    if len(specs) == 1:
        return ConflationResult(specs[0], 1.0, "closed_form", ())
    specs = sorted(specs, key=canonical_key)
    kinds = {s.kind for s in specs}
    discrete = [s.discrete for s in specs]
    if any(isinstance(s, D.Truncated) for s in specs):
        try:
            return conflate_truncated(specs)
        except InvalidSpec:
            return conflate_grid(specs)
    if all(discrete):
        if not kinds & FINITE_DISCRETE and _rule_for(specs) is not None:
            if not compatible(specs):
                raise ConflationUndefined("no common atoms")
            return conflate_closed_form(specs)
        return conflate_discrete(specs)
    if any(discrete):
        return conflate_discrete(specs)
    if _rule_for(specs) is not None:
        return conflate_closed_form(specs)
    return conflate_grid(specs)


# ---------------------------------------------------------------------------
# chi-square scaling


def chi_square_scaling(ks, n_points=4097):
    """Which rescaling of the conflation of chi-square(k_i) is chi-square.

    Compares the densities of n*X and X/n (X distributed as the grid
    conflation) against chi-square with sum(k) - 2n + 2 degrees of
    freedom; returns the sup errors and the better-matching label.
    """
    from scipy import stats

    specs = [D.ChiSquare(int(k)) for k in ks]
    n = len(specs)
    dof = sum(int(k) for k in ks) - 2 * n + 2
    if dof <= 0:
        raise InvalidSpec("sum of degrees of freedom too small for a chi-square conflation")
    res = conflate_grid(specs, n_points=n_points)
    g = res.form
    target = stats.chi2(dof)
    errors = {}
    for label, c in (("nX", n), ("X/n", 1 / n)):
        y = np.linspace(target.ppf(1e-6), target.isf(1e-6), 2001)
        dens = g.pdf(y / c) / c
        errors[label] = float(np.max(np.abs(dens - target.pdf(y))))
    return {"dof": dof, "errors": errors, "match": min(errors, key=errors.get)}
