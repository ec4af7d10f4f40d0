"""Input distributions: evaluation, interval probabilities, supports.

Every family is an immutable dataclass validated on construction.
Parametric families are backed by :mod:`scipy.stats` where scipy has the
family; CMP, Bernoulli, finite tables, grid densities and truncations are
implemented here.

Parameters may be ``int``, ``float`` or :class:`fractions.Fraction`.
Closed-form conflation rules produce ``Fraction`` parameters so that
nested conflations stay exact; evaluation always happens in floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from fractions import Fraction
from functools import cached_property
from typing import ClassVar

import numpy as np
from scipy import special, stats

from .errors import InvalidSpec

TAIL_CUTOFF = 1e-12
MAX_LATTICE_ATOMS = 2_000_000
PMF_RENORMALIZE_TOL = 1e-9


def _finite(name, value):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise InvalidSpec(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(v):
        raise InvalidSpec(f"{name} must be finite, got {value!r}")
    return v


def _positive(name, value):
    if _finite(name, value) <= 0:
        raise InvalidSpec(f"{name} must be positive, got {value!r}")


def _as_int(name, value, minimum=1):
    if isinstance(value, bool):
        raise InvalidSpec(f"{name} must be an integer, got {value!r}")
    v = _finite(name, value)
    if v != int(v) or v < minimum:
        raise InvalidSpec(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(v)


@dataclass(frozen=True)
class Support:
    """Where a distribution lives.

    ``kind`` is ``"atoms"`` for discrete laws and ``"interval"`` for
    absolutely continuous ones.  A discrete support is either a finite
    tuple of ``atoms`` or the integer lattice ``{lo, lo+1, ...}`` up to
    ``hi`` (``hi`` may be infinite).
    """

    kind: str
    lo: float
    hi: float
    atoms: tuple | None = None

    @property
    def is_lattice(self):
        return self.kind == "atoms" and self.atoms is None

    def contains(self, x):
        if self.kind == "interval":
            return self.lo <= x <= self.hi
        if self.atoms is not None:
            return x in self.atoms
        return float(x).is_integer() and self.lo <= x <= self.hi


class Distribution:
    """Shared behaviour of every catalog entry."""

    kind: ClassVar[str] = ""
    discrete: ClassVar[bool] = False
    _json_names: ClassVar[dict] = {}

    # -- evaluation ------------------------------------------------------
    def logpdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        """Mass function for discrete kinds, density for continuous ones."""
        with np.errstate(under="ignore"):
            return np.exp(self.logpdf(x))

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        return 1.0 - np.asarray(self.cdf(x))

    def ppf(self, q):
        raise NotImplementedError

    def isf(self, q):
        return self.ppf(1.0 - np.asarray(q))

    @cached_property
    def median(self):
        return float(self.ppf(0.5))

    def interval_prob(self, a, b):
        """P((a, b]) computed from whichever tail keeps precision."""
        if not a < b:
            raise ValueError(f"empty interval ({a}, {b}]")
        return float(self.interval_probs(np.array([a, b], dtype=float))[0])

    def interval_probs(self, edges):
        """Probabilities of the consecutive half-open cells (e[i], e[i+1]]."""
        edges = np.asarray(edges, dtype=float)
        return self.probs_between(edges[:-1], edges[1:])

    def probs_between(self, a, b):
        """Elementwise P((a, b]) for arrays of left and right ends."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        m = self.median
        with np.errstate(invalid="ignore"):
            ca, cb = np.asarray(self.cdf(a), float), np.asarray(self.cdf(b), float)
            sa, sb = np.asarray(self.sf(a), float), np.asarray(self.sf(b), float)
        out = np.where(b <= m, cb - ca, np.where(a >= m, sa - sb, 1.0 - ca - sb))
        return np.clip(out, 0.0, 1.0)

    # -- descriptive -----------------------------------------------------
    def support(self) -> Support:
        raise NotImplementedError

    def quantile_range(self, tail=1e-9):
        s = self.support()
        lo = float(self.ppf(tail)) if s.lo == -math.inf else s.lo
        hi = float(self.isf(tail)) if s.hi == math.inf else s.hi
        return lo, hi

    @cached_property
    def scale_hint(self):
        w = float(self.ppf(0.75)) - float(self.ppf(0.25))
        return w / 2 if w > 0 else 1.0

    def mean(self):
        raise NotImplementedError

    def var(self):
        raise NotImplementedError

    def rvs(self, size, rng):
        raise NotImplementedError

    def params(self):
        """Parameters as a JSON-ready mapping."""
        out = {}
        for f in (f.name for f in fields(self) if f.init):
            v = getattr(self, f)
            if isinstance(v, Fraction):
                v = float(v)
            out[self._json_names.get(f, f)] = v
        return out


class _ScipyBacked(Distribution):
    """Delegates evaluation to a frozen :mod:`scipy.stats` object."""

    def _build(self):
        raise NotImplementedError

    @cached_property
    def _dist(self):
        return self._build()

    def logpdf(self, x):
        if self.discrete:
            return self._dist.logpmf(x)
        return self._dist.logpdf(x)

    def pdf(self, x):
        if self.discrete:
            return self._dist.pmf(x)
        return self._dist.pdf(x)

    def cdf(self, x):
        return self._dist.cdf(x)

    def sf(self, x):
        return self._dist.sf(x)

    def ppf(self, q):
        return self._dist.ppf(q)

    def isf(self, q):
        return self._dist.isf(q)

    @cached_property
    def median(self):
        return float(self._dist.median())

    def mean(self):
        return float(self._dist.mean())

    def var(self):
        return float(self._dist.var())

    def rvs(self, size, rng):
        return np.asarray(self._dist.rvs(size=size, random_state=rng), dtype=float)


class _DiscreteMixin:
    """Atom enumeration for discrete kinds."""

    discrete = True
    finite_support = True

    def atoms(self, tail=TAIL_CUTOFF, max_atoms=MAX_LATTICE_ATOMS):
        """Return ``(xs, masses, tail_mass)`` of the positive-mass atoms.

        Finite supports are enumerated completely (``tail_mass == 0``).
        Lattices stop once the remaining mass is below ``tail`` or after
        ``max_atoms`` points, and report what was left out.
        """
        s = self.support()
        if s.atoms is not None:
            xs = np.asarray(s.atoms, dtype=float)
            ps = np.asarray(self.pdf(xs), dtype=float)
            keep = ps > 0
            return xs[keep], ps[keep], 0.0
        start = int(s.lo)
        stop = self.isf(tail)
        stop = int(stop) if np.isfinite(stop) else start + max_atoms - 1
        stop = min(stop, start + max_atoms - 1, int(s.hi) if s.hi < math.inf else stop)
        xs = np.arange(start, stop + 1, dtype=float)
        ps = np.asarray(self.pdf(xs), dtype=float)
        rest = float(self.sf(stop))
        keep = ps > 0
        return xs[keep], ps[keep], max(rest, 0.0)

    def probs_between(self, a, b):
        if not self.finite_support:
            return Distribution.probs_between(self, a, b)
        xs, ps, _ = self.atoms()
        cum = np.concatenate([[0.0], np.cumsum(ps)])
        i = np.searchsorted(xs, np.asarray(a, dtype=float), side="right")
        k = np.searchsorted(xs, np.asarray(b, dtype=float), side="right")
        single = ps[np.clip(i, 0, len(ps) - 1)]
        return np.where(k - i == 1, single, np.where(k > i, cum[k] - cum[i], 0.0))

    def interval_probs(self, edges):
        if not self.finite_support:
            return Distribution.interval_probs(self, edges)
        edges = np.asarray(edges, dtype=float)
        xs, ps, _ = self.atoms()
        idx = np.searchsorted(edges, xs, side="left") - 1
        ok = (idx >= 0) & (idx < len(edges) - 1)
        return np.bincount(idx[ok], weights=ps[ok], minlength=len(edges) - 1)

    @cached_property
    def scale_hint(self):
        return 1.0


# ---------------------------------------------------------------------------
# continuous families


@dataclass(frozen=True)
class Normal(_ScipyBacked):
    mu: float
    sigma2: float
    kind: ClassVar[str] = "normal"

    def __post_init__(self):
        _finite("mu", self.mu)
        _positive("sigma2", self.sigma2)

    def _build(self):
        return stats.norm(float(self.mu), math.sqrt(float(self.sigma2)))

    def support(self):
        return Support("interval", -math.inf, math.inf)


@dataclass(frozen=True)
class Exponential(_ScipyBacked):
    mean_: float
    kind: ClassVar[str] = "exponential"
    _json_names: ClassVar[dict] = {"mean_": "mean"}

    def __post_init__(self):
        _positive("mean", self.mean_)

    def _build(self):
        return stats.expon(scale=float(self.mean_))

    def support(self):
        return Support("interval", 0.0, math.inf)


@dataclass(frozen=True)
class Gamma(_ScipyBacked):
    """Shape ``alpha`` and scale ``beta``: density ∝ x^(alpha-1) e^(-x/beta)."""

    alpha: float
    beta: float
    kind: ClassVar[str] = "gamma"

    def __post_init__(self):
        _positive("alpha", self.alpha)
        _positive("beta", self.beta)

    def _build(self):
        return stats.gamma(float(self.alpha), scale=float(self.beta))

    def support(self):
        return Support("interval", 0.0, math.inf)


@dataclass(frozen=True)
class Beta(_ScipyBacked):
    alpha: float
    beta: float
    kind: ClassVar[str] = "beta_dist"

    def __post_init__(self):
        _positive("alpha", self.alpha)
        _positive("beta", self.beta)

    def _build(self):
        return stats.beta(float(self.alpha), float(self.beta))

    def support(self):
        return Support("interval", 0.0, 1.0)


@dataclass(frozen=True)
class Uniform(_ScipyBacked):
    a: float
    b: float
    kind: ClassVar[str] = "uniform"

    def __post_init__(self):
        if not _finite("a", self.a) < _finite("b", self.b):
            raise InvalidSpec(f"uniform needs a < b, got ({self.a}, {self.b})")

    def _build(self):
        a, b = float(self.a), float(self.b)
        return stats.uniform(a, b - a)

    def support(self):
        return Support("interval", float(self.a), float(self.b))


@dataclass(frozen=True)
class Laplace(_ScipyBacked):
    """Zero-centred Laplace, density ∝ exp(-|x|/scale)."""

    scale: float
    kind: ClassVar[str] = "laplace"

    def __post_init__(self):
        _positive("scale", self.scale)

    def _build(self):
        return stats.laplace(0.0, float(self.scale))

    def support(self):
        return Support("interval", -math.inf, math.inf)


@dataclass(frozen=True)
class Pareto(_ScipyBacked):
    """Density ∝ x^-(alpha+1) on (beta, inf)."""

    alpha: float
    beta: float
    kind: ClassVar[str] = "pareto"

    def __post_init__(self):
        _positive("alpha", self.alpha)
        _positive("beta", self.beta)

    def _build(self):
        return stats.pareto(float(self.alpha), scale=float(self.beta))

    def support(self):
        return Support("interval", float(self.beta), math.inf)


@dataclass(frozen=True)
class Cauchy(_ScipyBacked):
    loc: float
    scale: float
    kind: ClassVar[str] = "cauchy"

    def __post_init__(self):
        _finite("loc", self.loc)
        _positive("scale", self.scale)

    def _build(self):
        return stats.cauchy(float(self.loc), float(self.scale))

    def support(self):
        return Support("interval", -math.inf, math.inf)


@dataclass(frozen=True)
class ChiSquare(_ScipyBacked):
    k: int
    kind: ClassVar[str] = "chi_square"

    def __post_init__(self):
        _as_int("k", self.k)

    def _build(self):
        return stats.chi2(int(self.k))

    def support(self):
        return Support("interval", 0.0, math.inf)


# ---------------------------------------------------------------------------
# discrete families


@dataclass(frozen=True)
class Bernoulli(_DiscreteMixin, Distribution):
    p: float
    kind: ClassVar[str] = "bernoulli"

    def __post_init__(self):
        if not 0 <= _finite("p", self.p) <= 1:
            raise InvalidSpec(f"bernoulli p must lie in [0, 1], got {self.p}")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        p = float(self.p)
        return np.where(x == 1, p, np.where(x == 0, 1.0 - p, 0.0))

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 0.0, np.where(x < 1, 1.0 - float(self.p), 1.0))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 1.0, np.where(x < 1, float(self.p), 0.0))

    def ppf(self, q):
        return np.where(np.asarray(q) <= 1.0 - float(self.p), 0.0, 1.0)

    def support(self):
        return Support("atoms", 0.0, 1.0, atoms=(0.0, 1.0))

    def mean(self):
        return float(self.p)

    def var(self):
        return float(self.p) * (1.0 - float(self.p))

    def rvs(self, size, rng):
        return (rng.random(size) < float(self.p)).astype(float)


@dataclass(frozen=True)
class Geometric(_DiscreteMixin, _ScipyBacked):
    """pmf (1-p)^(k-1) p on k = 1, 2, ..."""

    p: float
    kind: ClassVar[str] = "geometric"
    finite_support: ClassVar[bool] = False

    def __post_init__(self):
        if not 0 < _finite("p", self.p) <= 1:
            raise InvalidSpec(f"geometric p must lie in (0, 1], got {self.p}")

    def _build(self):
        return stats.geom(float(self.p))

    def support(self):
        if self.p == 1:
            return Support("atoms", 1.0, 1.0, atoms=(1.0,))
        return Support("atoms", 1.0, math.inf)


@dataclass(frozen=True)
class DiscreteUniform(_DiscreteMixin, _ScipyBacked):
    n: int
    kind: ClassVar[str] = "discrete_uniform"

    def __post_init__(self):
        _as_int("n", self.n)

    def _build(self):
        return stats.randint(1, int(self.n) + 1)

    def support(self):
        n = int(self.n)
        return Support("atoms", 1.0, float(n), atoms=tuple(float(k) for k in range(1, n + 1)))


@dataclass(frozen=True)
class Zipf(_DiscreteMixin, _ScipyBacked):
    """pmf ∝ k^-alpha on {1, ..., n}."""

    alpha: float
    n: int
    kind: ClassVar[str] = "zipf"

    def __post_init__(self):
        _positive("alpha", self.alpha)
        _as_int("n", self.n)

    def _build(self):
        return stats.zipfian(float(self.alpha), int(self.n))

    def support(self):
        n = int(self.n)
        return Support("atoms", 1.0, float(n), atoms=tuple(float(k) for k in range(1, n + 1)))


@dataclass(frozen=True)
class Zeta(_DiscreteMixin, _ScipyBacked):
    """pmf k^-alpha / zeta(alpha) on k = 1, 2, ...; needs alpha > 1."""

    alpha: float
    kind: ClassVar[str] = "zeta"
    finite_support: ClassVar[bool] = False

    def __post_init__(self):
        if _finite("alpha", self.alpha) <= 1:
            raise InvalidSpec(f"zeta needs alpha > 1 (the series diverges otherwise), got {self.alpha}")

    def _build(self):
        return stats.zipf(float(self.alpha))

    def logpdf(self, x):
        # scipy re-evaluates zeta(alpha) once per element
        a = float(self.alpha)
        x = np.asarray(x, dtype=float)
        ok = (x >= 1) & (x == np.floor(x))
        with np.errstate(divide="ignore"):
            out = np.where(ok, -a * np.log(np.where(ok, x, 1.0)) - math.log(special.zeta(a, 1)), -np.inf)
        return out if out.ndim else float(out)

    def pdf(self, x):
        out = np.exp(self.logpdf(x))
        return out if np.ndim(out) else float(out)

    def sf(self, x):
        a = float(self.alpha)
        k = np.floor(np.maximum(np.asarray(x, dtype=float), 0.0))
        return special.zeta(a, k + 1) / special.zeta(a, 1)

    def cdf(self, x):
        return 1.0 - self.sf(x)

    def isf(self, q):
        # scipy's generic search allocates the whole lattice for heavy
        # tails; bisect on the Hurwitz-zeta tail instead
        def one(qq):
            if qq >= 1:
                return 0.0
            lo, hi = 0, 1
            while float(self.sf(hi)) > qq:
                lo, hi = hi, hi * 2
                if hi > 2**62:
                    return math.inf
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if float(self.sf(mid)) > qq:
                    lo = mid
                else:
                    hi = mid
            return float(hi)

        q = np.asarray(q, dtype=float)
        out = np.vectorize(one, otypes=[float])(q)
        return out if out.ndim else float(out)

    def ppf(self, q):
        return self.isf(1.0 - np.asarray(q, dtype=float))

    def support(self):
        return Support("atoms", 1.0, math.inf)


@dataclass(frozen=True)
class Poisson(_DiscreteMixin, _ScipyBacked):
    lam: float
    kind: ClassVar[str] = "poisson"
    finite_support: ClassVar[bool] = False
    _json_names: ClassVar[dict] = {"lam": "lambda"}

    def __post_init__(self):
        _positive("lambda", self.lam)

    def _build(self):
        return stats.poisson(float(self.lam))

    def support(self):
        return Support("atoms", 0.0, math.inf)


@dataclass(frozen=True)
class Binomial(_DiscreteMixin, _ScipyBacked):
    n: int
    p: float
    kind: ClassVar[str] = "binomial"

    def __post_init__(self):
        _as_int("n", self.n)
        if not 0 <= _finite("p", self.p) <= 1:
            raise InvalidSpec(f"binomial p must lie in [0, 1], got {self.p}")

    def _build(self):
        return stats.binom(int(self.n), float(self.p))

    def support(self):
        n = int(self.n)
        return Support("atoms", 0.0, float(n), atoms=tuple(float(k) for k in range(n + 1)))


@dataclass(frozen=True)
class CMP(_DiscreteMixin, Distribution):
    """Conway-Maxwell-Poisson: pmf ∝ lam^k / (k!)^nu on k = 0, 1, ..."""

    lam: float
    nu: int
    kind: ClassVar[str] = "cmp"
    finite_support: ClassVar[bool] = False
    _json_names: ClassVar[dict] = {"lam": "lambda"}

    def __post_init__(self):
        _positive("lambda", self.lam)
        _as_int("nu", self.nu)

    @cached_property
    def _table(self):
        # log terms rise until the mode near lam**(1/nu), then fall faster
        # than geometrically; stop where the masses underflow
        log_lam, nu = math.log(float(self.lam)), int(self.nu)
        chunks, peak, start = [], -math.inf, 0
        while True:
            k = np.arange(start, start + 4096, dtype=float)
            t = k * log_lam - nu * special.gammaln(k + 1)
            chunks.append(t)
            peak = max(peak, float(t.max()))
            if t[-1] < peak - 750 and t[-1] < t[-2]:
                break
            start += 4096
        logt = np.concatenate(chunks)
        logt = logt[: int(np.nonzero(logt >= peak - 750)[0][-1]) + 1]
        logz = float(special.logsumexp(logt))
        logp = logt - logz
        p = np.exp(logp)
        cdf = np.cumsum(p)
        sf = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])
        return logp, cdf, sf, logz

    @property
    def log_normalizer(self):
        return self._table[3]

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        ok = (x >= 0) & (x == np.floor(x))
        k = np.where(ok, x, 0.0)
        t = k * math.log(float(self.lam)) - int(self.nu) * special.gammaln(k + 1) - self.log_normalizer
        out = np.where(ok, t, -np.inf)
        return out if out.ndim else float(out)

    def pdf(self, x):
        out = np.exp(self.logpdf(x))
        return out if np.ndim(out) else float(out)

    def _lookup(self, table, x, below, above):
        x = np.asarray(x, dtype=float)
        k = np.floor(x)
        idx = np.clip(k, 0, len(table) - 1).astype(np.int64)
        out = np.where(k < 0, below, np.where(k >= len(table), above, table[idx]))
        return out if out.ndim else float(out)

    def cdf(self, x):
        return self._lookup(self._table[1], x, 0.0, 1.0)

    def sf(self, x):
        return self._lookup(self._table[2], x, 1.0, 0.0)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        out = np.searchsorted(self._table[1], q, side="left").astype(float)
        return out if out.ndim else float(out)

    def isf(self, q):
        q = np.asarray(q, dtype=float)
        sf = self._table[2]
        # smallest k with sf(k) <= q; sf is non-increasing
        out = np.searchsorted(-sf, -q, side="left").astype(float)
        return out if out.ndim else float(out)

    def support(self):
        return Support("atoms", 0.0, math.inf)

    def mean(self):
        p = np.exp(self._table[0])
        return float(np.dot(np.arange(len(p)), p))

    def var(self):
        p = np.exp(self._table[0])
        k = np.arange(len(p))
        m = np.dot(k, p)
        return float(np.dot((k - m) ** 2, p))

    def rvs(self, size, rng):
        return np.searchsorted(self._table[1], rng.random(size), side="right").astype(float)


# ---------------------------------------------------------------------------
# tabulated and derived kinds


@dataclass(frozen=True, eq=False)
class PmfTable(_DiscreteMixin, Distribution):
    """Finite table of atoms and masses.

    Masses must sum to one within ``1e-9``; they are renormalized to sum
    to one exactly (up to rounding).  Zero-mass atoms are dropped.
    ``tail_bound`` records mass that an enumeration could not include.
    """

    atoms_: tuple
    tail_bound: float = 0.0
    kind: ClassVar[str] = "pmf"

    def __post_init__(self):
        items = list(self.atoms_.items() if isinstance(self.atoms_, dict) else self.atoms_)
        try:
            arr = np.array(items, dtype=float).reshape(len(items), 2)
        except (TypeError, ValueError):
            raise InvalidSpec("pmf atoms must be (value, mass) pairs of real numbers") from None
        if not np.all(np.isfinite(arr)):
            raise InvalidSpec("pmf atoms and masses must be finite")
        if np.any(arr[:, 1] < 0):
            raise InvalidSpec("pmf masses must be nonnegative")
        arr = arr[arr[:, 1] > 0]
        if not len(arr):
            raise InvalidSpec("pmf table has no positive mass")
        arr = arr[np.lexsort((arr[:, 1], arr[:, 0]))]
        xs, ps = arr[:, 0].copy(), arr[:, 1].copy()
        if np.any(np.diff(xs) == 0):
            raise InvalidSpec("pmf table has duplicate atoms")
        total = math.fsum(ps)
        if abs(total - 1.0) > PMF_RENORMALIZE_TOL + float(self.tail_bound):
            raise InvalidSpec(f"pmf masses sum to {total!r}, not 1")
        ps = ps / total
        object.__setattr__(self, "atoms_", tuple(zip(xs.tolist(), ps.tolist())))
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_ps", ps)

    @classmethod
    def from_arrays(cls, xs, ps, tail_bound=0.0):
        return cls(tuple(zip(np.asarray(xs, float).tolist(), np.asarray(ps, float).tolist())), tail_bound)

    def __eq__(self, other):
        if not isinstance(other, PmfTable):
            return NotImplemented
        return self.atoms_ == other.atoms_ and self.tail_bound == other.tail_bound

    def __hash__(self):
        return hash(self.atoms_)

    def as_dict(self):
        return dict(self.atoms_)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(self._xs, x), 0, len(self._xs) - 1)
        out = np.where(self._xs[i] == x, self._ps[i], 0.0)
        return out if out.ndim else float(out)

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def cdf(self, x):
        c = np.concatenate([[0.0], np.cumsum(self._ps)])
        out = c[np.searchsorted(self._xs, np.asarray(x, dtype=float), side="right")]
        return np.minimum(out, 1.0)

    def sf(self, x):
        c = np.concatenate([np.cumsum(self._ps[::-1])[::-1], [0.0]])
        return c[np.searchsorted(self._xs, np.asarray(x, dtype=float), side="right")]

    def ppf(self, q):
        c = np.cumsum(self._ps)
        i = np.searchsorted(c, np.asarray(q, dtype=float) - 1e-15, side="left")
        return self._xs[np.clip(i, 0, len(self._xs) - 1)]

    def support(self):
        return Support("atoms", float(self._xs[0]), float(self._xs[-1]), atoms=tuple(self._xs.tolist()))

    def mean(self):
        return float(np.dot(self._xs, self._ps))

    def var(self):
        return float(np.dot((self._xs - self.mean()) ** 2, self._ps))

    def rvs(self, size, rng):
        return self._xs[np.searchsorted(np.cumsum(self._ps), rng.random(size), side="right").clip(0, len(self._xs) - 1)]

    def params(self):
        return {"atoms": [list(a) for a in self.atoms_]}


DiscretePMF = PmfTable


def trapezoid_weights(points):
    """Weights w with sum(w * f) equal to the trapezoid rule on ``points``."""
    points = np.asarray(points, dtype=float)
    h = np.diff(points)
    w = np.zeros_like(points)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


@dataclass(frozen=True, eq=False)
class GridDensity(Distribution):
    """Density tabulated on strictly increasing points, linear in between.

    Values are rescaled so the trapezoid rule on ``points`` gives one;
    the mass before rescaling is kept in ``norm``.
    """

    points: np.ndarray
    values: np.ndarray
    norm: float = field(default=1.0, init=False)
    kind: ClassVar[str] = "grid"

    def __post_init__(self):
        x = np.asarray(self.points, dtype=float)
        f = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != f.shape or len(x) < 2:
            raise InvalidSpec("grid needs two or more points and matching values")
        if not np.all(np.isfinite(x)) or np.any(np.diff(x) <= 0):
            raise InvalidSpec("grid points must be finite and strictly increasing")
        if not np.all(np.isfinite(f)) or np.any(f < 0):
            raise InvalidSpec("grid values must be finite and nonnegative")
        mass = float(np.dot(trapezoid_weights(x), f))
        if not mass > 0:
            raise InvalidSpec("grid density has zero mass")
        x.flags.writeable = False
        f = f / mass
        f.flags.writeable = False
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "values", f)
        object.__setattr__(self, "norm", mass)

    def __eq__(self, other):
        if not isinstance(other, GridDensity):
            return NotImplemented
        return np.array_equal(self.points, other.points) and np.array_equal(self.values, other.values)

    __hash__ = object.__hash__

    @cached_property
    def _cum(self):
        h = np.diff(self.points)
        return np.concatenate([[0.0], np.cumsum(h * (self.values[:-1] + self.values[1:]) / 2)])

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self._interp(x))

    def _interp(self, x):
        return np.interp(x, self.points, self.values, left=0.0, right=0.0)

    def cdf(self, x):
        # exact integral of the piecewise-linear interpolant
        x = np.asarray(x, dtype=float)
        pts, f, cum = self.points, self.values, self._cum
        i = np.clip(np.searchsorted(pts, x, side="right") - 1, 0, len(pts) - 2)
        d = np.clip(x - pts[i], 0.0, None)
        h = pts[i + 1] - pts[i]
        d = np.minimum(d, h)
        part = cum[i] + f[i] * d + (f[i + 1] - f[i]) * d * d / (2 * h)
        out = np.where(x <= pts[0], 0.0, np.where(x >= pts[-1], cum[-1], part))
        return np.clip(out / cum[-1], 0.0, 1.0)

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def ppf(self, q):
        q = np.asarray(q, dtype=float) * self._cum[-1]
        pts, f, cum = self.points, self.values, self._cum
        i = np.clip(np.searchsorted(cum, q, side="right") - 1, 0, len(pts) - 2)
        r = q - cum[i]
        h = pts[i + 1] - pts[i]
        slope = (f[i + 1] - f[i]) / h
        # solve f_i d + slope d^2 / 2 = r for d in [0, h]
        with np.errstate(divide="ignore", invalid="ignore"):
            disc = np.sqrt(np.maximum(f[i] ** 2 + 2 * slope * r, 0.0))
            quad = 2 * r / (f[i] + disc)
            lin = np.where(f[i] > 0, r / f[i], 0.0)
        d = np.where(np.abs(slope) > 1e-300, quad, lin)
        d = np.clip(np.nan_to_num(d), 0.0, h)
        return pts[i] + d

    def support(self):
        return Support("interval", float(self.points[0]), float(self.points[-1]))

    def moment(self, k):
        """k-th raw moment by the trapezoid rule on the grid."""
        return float(np.dot(trapezoid_weights(self.points), self.points**k * self.values))

    def mean(self):
        return self.moment(1)

    def var(self):
        m = self.mean()
        return float(np.dot(trapezoid_weights(self.points), (self.points - m) ** 2 * self.values))

    def rvs(self, size, rng):
        return self.ppf(rng.random(size))

    def params(self):
        return {"points": self.points.tolist(), "values": self.values.tolist()}


@dataclass(frozen=True)
class Truncated(Distribution):
    """A continuous law conditioned on the window (lo, hi)."""

    inner: Distribution
    lo: float = -math.inf
    hi: float = math.inf
    kind: ClassVar[str] = "truncated"

    def __post_init__(self):
        if not isinstance(self.inner, Distribution) or self.inner.discrete:
            raise InvalidSpec("truncated needs a continuous inner distribution")
        if isinstance(self.inner, Truncated):
            raise InvalidSpec("nested truncation; intersect the windows instead")
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi) or not lo < hi:
            raise InvalidSpec(f"truncation window ({self.lo}, {self.hi}) is empty")
        if not self.mass > 0:
            raise InvalidSpec(f"inner distribution has no mass on ({self.lo}, {self.hi})")

    @cached_property
    def mass(self):
        s = self.inner.support()
        lo, hi = max(float(self.lo), s.lo), min(float(self.hi), s.hi)
        if not lo < hi:
            return 0.0
        return self.inner.interval_prob(lo, hi)

    @cached_property
    def window(self):
        s = self.inner.support()
        return max(float(self.lo), s.lo), min(float(self.hi), s.hi)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.window
        inside = (x > lo) & (x < hi)
        out = np.where(inside, self.inner.logpdf(np.where(inside, x, (lo + hi) / 2 if math.isfinite(lo + hi) else 0.0)), -np.inf)
        out = out - math.log(self.mass)
        return out if out.ndim else float(out)

    def cdf(self, x):
        lo, hi = self.window
        x = np.clip(np.asarray(x, dtype=float), lo, hi)
        if self.inner.median >= lo:
            base = self.inner.cdf(x) - self.inner.cdf(lo)
        else:
            base = self.inner.sf(lo) - self.inner.sf(x)
        return np.clip(base / self.mass, 0.0, 1.0)

    def sf(self, x):
        lo, hi = self.window
        x = np.clip(np.asarray(x, dtype=float), lo, hi)
        if self.inner.median <= hi:
            base = self.inner.sf(x) - self.inner.sf(hi)
        else:
            base = self.inner.cdf(hi) - self.inner.cdf(x)
        return np.clip(base / self.mass, 0.0, 1.0)

    def ppf(self, q):
        lo, hi = self.window
        q = np.asarray(q, dtype=float)
        if self.inner.median >= lo:
            x = self.inner.ppf(self.inner.cdf(lo) + q * self.mass)
        else:
            x = self.inner.isf(self.inner.sf(lo) - q * self.mass)
        return np.clip(x, lo, hi)

    @cached_property
    def median(self):
        return float(self.ppf(0.5))

    def support(self):
        lo, hi = self.window
        return Support("interval", lo, hi)

    def _moment(self, g):
        from scipy.integrate import quad

        lo, hi = self.window
        val, _ = quad(lambda t: g(t) * float(self.pdf(t)), lo, hi, limit=200)
        return val

    def mean(self):
        return self._moment(lambda t: t)

    def var(self):
        m = self.mean()
        return self._moment(lambda t: (t - m) ** 2)

    def rvs(self, size, rng):
        return np.asarray(self.ppf(rng.random(size)), dtype=float)

    def params(self):
        return {"lo": float(self.lo), "hi": float(self.hi)}


FAMILIES = {
    cls.kind: cls
    for cls in (
        Normal, Exponential, Gamma, Beta, Uniform, Laplace, Pareto, Cauchy, ChiSquare,
        Bernoulli, Geometric, DiscreteUniform, Zipf, Zeta, Poisson, Binomial, CMP,
        PmfTable, GridDensity, Truncated,
    )
}


# ---------------------------------------------------------------------------
# module-level operations


def validate(spec):
    """Return a validated distribution; dict input is parsed from JSON form."""
    if isinstance(spec, Distribution):
        return spec
    if isinstance(spec, dict):
        from .serialization import spec_from_dict

        return spec_from_dict(spec)
    raise InvalidSpec(f"not a distribution description: {spec!r}")


def evaluate(spec, x):
    """p(x) for discrete kinds, f(x) for continuous ones; 0 off the support."""
    return float(validate(spec).pdf(x))


def interval_prob(spec, a, b):
    return validate(spec).interval_prob(a, b)


def support(spec) -> Support:
    return validate(spec).support()


def is_discrete(spec):
    return validate(spec).discrete
