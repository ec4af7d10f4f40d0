"""Optimality checks: information loss, likelihood-ratio spread, proportionality.

Also characteristic functions and the check that the characteristic
function of a conflation of two densities is the normalized convolution
of theirs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import chain

import numpy as np
from scipy import signal, special

from . import distributions as D
from . import dyadic
from . import quadrature as Qd
from .conflation import ConflationResult, conflate, conflate_discrete
from .errors import ConflationUndefined, InvalidSpec

EXHAUSTIVE_LIMIT = 20
TIE_TOL = 1e-12
UNDERFLOW = 1e-300
LOG_UNDERFLOW = math.log(UNDERFLOW)


def _form(q):
    return q.form if isinstance(q, ConflationResult) else D.validate(q)


@dataclass(frozen=True)
class EventSet:
    """A finite union of atoms, or of disjoint half-open intervals (a, b]."""

    kind: str
    atoms: tuple = ()
    intervals: tuple = ()

    def __post_init__(self):
        if self.kind == "atoms":
            xs = tuple(sorted(float(x) for x in self.atoms))
            if len(set(xs)) != len(xs):
                raise ValueError("event atoms must be distinct")
            object.__setattr__(self, "atoms", xs)
        elif self.kind == "intervals":
            iv = tuple(sorted((float(a), float(b)) for a, b in self.intervals))
            for a, b in iv:
                if not a < b:
                    raise ValueError(f"empty interval ({a}, {b}]")
            for (_, b0), (a1, _) in zip(iv, iv[1:]):
                if a1 < b0:
                    raise ValueError("event intervals overlap")
            object.__setattr__(self, "intervals", iv)
        else:
            raise ValueError(f"unknown event kind {self.kind!r}")

    @classmethod
    def of_atoms(cls, xs):
        return cls("atoms", atoms=tuple(xs))

    @classmethod
    def of_intervals(cls, pairs):
        return cls("intervals", intervals=tuple(pairs))

    @classmethod
    def whole_line(cls):
        return cls("intervals", intervals=((-math.inf, math.inf),))

    def prob(self, spec) -> float:
        spec = _form(spec)
        if self.kind == "atoms":
            if not spec.discrete or not self.atoms:
                return 0.0
            return math.fsum(np.asarray(spec.pdf(np.array(self.atoms)), float))
        if not self.intervals:
            return 0.0
        a = np.array([p[0] for p in self.intervals])
        b = np.array([p[1] for p in self.intervals])
        return min(math.fsum(spec.probs_between(a, b)), 1.0)

    def to_dict(self):
        if self.kind == "atoms":
            return {"atoms": list(self.atoms)}
        return {"intervals": [[None if math.isinf(a) else a, None if math.isinf(b) else b] for a, b in self.intervals]}


def joint_information(specs, event: EventSet) -> float:
    """Bits of information in observing every input inside ``event``."""
    p = math.prod(event.prob(s) for s in specs)
    if p == 0:
        return math.inf
    return 0.0 if p >= 1 else -math.log2(p)


def information_loss(q, specs, event: EventSet) -> float:
    """Joint information of the inputs minus the information under ``q``."""
    pq = event.prob(q)
    pp = math.prod(event.prob(s) for s in specs)
    if pq == 0 and pp == 0:
        return 0.0
    if pp == 0:
        return math.inf
    if pq == 0:
        return -math.inf
    return math.log2(pq / pp)


@dataclass(frozen=True)
class InformationReport:
    bound: float
    max_loss: float
    witness: EventSet
    attains_bound: bool
    method: str

    def to_dict(self):
        f = lambda v: None if math.isinf(v) else v
        return {
            "bound": f(self.bound),
            "max_loss": f(self.max_loss),
            "witness": self.witness.to_dict(),
            "attains_bound": self.attains_bound,
            "method": self.method,
        }


def _atom_universe(q, specs):
    pts = []
    for s in chain([q], specs):
        xs, _, tail = s.atoms()
        if tail > 0:
            raise InvalidSpec(f"{s.kind} has infinitely many atoms; exhaustive search needs finite supports")
        pts.append(xs)
    return np.unique(np.concatenate(pts))


def _exhaustive(q, specs, xs):
    m = len(xs)
    qv = np.asarray(q.pdf(xs), float)
    pv = [np.asarray(s.pdf(xs), float) for s in specs]
    best = -math.inf
    cands: list[int] = []
    chunk = 1 << 16
    bit = np.arange(m)
    for start in range(0, 1 << m, chunk):
        masks = np.arange(start, min(start + chunk, 1 << m), dtype=np.int64)
        member = ((masks[:, None] >> bit) & 1).astype(float)
        pq = member @ qv
        pp = np.ones(len(masks))
        for v in pv:
            pp = pp * (member @ v)
        with np.errstate(divide="ignore", invalid="ignore"):
            loss = np.where(pp > 0, np.where(pq > 0, np.log2(pq / pp), -np.inf), np.where(pq > 0, np.inf, 0.0))
        top = float(loss.max())
        if top > best + TIE_TOL:
            best = top
            cands = []
        if top >= best - TIE_TOL:
            cands.extend(int(k) for k in masks[loss >= best - TIE_TOL])
    # lexicographically smallest witness: compare sorted atom tuples
    key = lambda mask: tuple(i for i in range(m) if mask >> i & 1)
    win = min(cands, key=key)
    return best, EventSet.of_atoms(xs[list(key(win))].tolist())


def _singletons(q, specs, xs):
    qv = np.asarray(q.pdf(xs), float)
    pp = np.ones(len(xs))
    for s in specs:
        pp = pp * np.asarray(s.pdf(xs), float)
    with np.errstate(divide="ignore", invalid="ignore"):
        loss = np.where(pp > 0, np.where(qv > 0, np.log2(qv / pp), -np.inf), np.where(qv > 0, np.inf, 0.0))
    best = max(float(loss.max()), 0.0)  # the empty event loses nothing
    hits = np.nonzero(loss >= best - TIE_TOL)[0]
    witness = EventSet.of_atoms([float(xs[hits[0]])]) if len(hits) else EventSet.of_atoms([])
    return best, witness


def max_information_loss(q, specs, method="auto", level=8) -> InformationReport:
    """Largest information loss of ``q`` over events, and the lower bound.

    Discrete inputs are searched exactly: all subsets when at most
    ``EXHAUSTIVE_LIMIT`` atoms are involved, otherwise single atoms,
    which give the same maximum because a product of sums dominates the
    sum of products.  Continuous inputs are discretized into dyadic cells
    at ``level`` and the same search runs over unions of cells.
    """
    q = _form(q)
    specs = [D.validate(s) for s in specs]
    disc = {s.discrete for s in specs}
    if len(disc) != 1 or q.discrete not in disc:
        raise InvalidSpec("candidate and inputs must be all discrete or all continuous")
    if q.discrete:
        try:
            norm = conflate_discrete(specs).norm_constant
        except ConflationUndefined:
            norm = 0.0
        bound = math.inf if norm == 0 else max(-math.log2(norm), 0.0)
        xs = _atom_universe(q, specs)
        if method == "auto":
            method = "exhaustive" if len(xs) <= EXHAUSTIVE_LIMIT else "singleton"
        if method == "exhaustive":
            if len(xs) > EXHAUSTIVE_LIMIT:
                raise ValueError(f"{len(xs)} atoms exceed the exhaustive limit of {EXHAUSTIVE_LIMIT}")
            best, witness = _exhaustive(q, specs, xs)
        else:
            best, witness = _singletons(q, specs, xs)
    else:
        window = dyadic.default_window(specs)
        ks, _ = dyadic.discretize(specs[0], level, window)
        h = 2.0**-level
        cells = [dyadic._cell_probs(s, ks, level) for s in specs]
        prod = np.prod(cells, axis=0)
        norm = math.fsum(prod)
        bound = math.inf if norm == 0 else max(-math.log2(norm), 0.0)
        qv = q.probs_between((ks - 1) * h, ks * h)
        with np.errstate(divide="ignore", invalid="ignore"):
            loss = np.where(prod > 0, np.where(qv > 0, np.log2(qv / prod), -np.inf), np.where(qv > UNDERFLOW, np.inf, 0.0))
        best = max(float(loss.max()), 0.0)
        i = int(np.argmax(loss >= best - TIE_TOL))
        witness = EventSet.of_intervals([((ks[i] - 1) * h, ks[i] * h)])
        method = f"dyadic-level-{level}"
    attains = math.isfinite(bound) and abs(best - bound) <= 1e-9
    return InformationReport(bound, best, witness, attains, method)


# ---------------------------------------------------------------------------
# likelihood ratio


@dataclass(frozen=True)
class MlrReport:
    delta: float
    argmax_point: float
    argmin_point: float

    def to_dict(self):
        return {"delta": None if math.isinf(self.delta) else self.delta, "argmax_point": self.argmax_point, "argmin_point": self.argmin_point}


def _discrete_points(q, specs):
    pts = [q.atoms()[0]] + [s.atoms()[0] for s in specs]
    xs = np.unique(np.concatenate(pts))
    # one point that is an atom of nobody: 0/0 there, ratio 1
    generic = float(xs.max()) + 0.5 if len(xs) else 0.5
    return np.append(xs, generic)


def _continuous_points(q, specs):
    lo, hi = Qd.support_overlap(specs)
    parts = []
    try:
        w = Qd.find_window(specs)
        parts.append(Qd.mapped_grid(w, 4097))
    except Exception:  # product vanishes; the candidate grid below still applies
        pass
    for s in [q, *specs]:
        a, b = s.quantile_range(1e-12)
        parts.append(np.linspace(a, b, 2049))
        sup = s.support()
        for e, d in ((sup.lo, 1), (sup.hi, -1)):
            if math.isfinite(e):
                width = max(b - a, 1.0)
                parts.append(e + d * width * np.logspace(-300, 0, 3001))
                parts.append(np.array([e - d]))  # just outside
    if isinstance(q, D.GridDensity):
        parts.append(q.points)
    return np.unique(np.concatenate(parts)), (lo, hi)


def _log_ratios(q, specs, discrete):
    """Points, log q, log product, and whether the product is zero by support."""
    if discrete:
        xs = _discrete_points(q, specs)
        if isinstance(q, D.PmfTable) and q.tail_bound > 0:
            # an enumerated table says nothing past its last atom
            xs = xs[xs <= q.atoms()[0][-1]]
        qv = np.asarray(q.pdf(xs), float)
        pv = np.ones(len(xs))
        for s in specs:
            pv = pv * np.asarray(s.pdf(xs), float)
        with np.errstate(divide="ignore"):
            return xs, np.log(qv), np.log(pv), pv == 0
    xs, (lo, hi) = _continuous_points(q, specs)
    if isinstance(q, D.GridDensity):
        # a tabulated candidate is only known at its own points; support
        # endpoints themselves are a null set and are left out
        xs = np.concatenate([q.points, xs[(xs < q.points[0]) | (xs > q.points[-1])]])
        xs = np.unique(xs[(xs >= q.points[0]) & (xs <= q.points[-1]) | ((xs < lo) | (xs > hi))])
    with np.errstate(divide="ignore", invalid="ignore"):
        lq = np.asarray(q.logpdf(xs), float)
    lp = Qd.log_product(specs, xs)
    outside = (xs <= lo) | (xs >= hi) if lo < hi else np.ones(len(xs), bool)
    structural = outside & ~np.isfinite(lp)
    return xs, lq, lp, structural


def mlr_delta(q, specs) -> MlrReport:
    """Spread max - min of q / prod(p_i), with 0/0 read as 1.

    Continuous ratios use a grid that reaches within 1e-300 of finite
    support endpoints; points where the product is positive but below
    1e-300 are skipped.
    """
    q = _form(q)
    specs = [D.validate(s) for s in specs]
    disc = {s.discrete for s in specs}
    if len(disc) != 1 or q.discrete not in disc:
        raise InvalidSpec("candidate and inputs must be all discrete or all continuous")
    xs, lq, lp, structural = _log_ratios(q, specs, q.discrete)
    qpos = np.isfinite(lq)
    if q.discrete:
        use = np.ones(len(xs), bool)
    else:
        use = (np.isfinite(lp) & (lp > LOG_UNDERFLOW)) | structural
    with np.errstate(over="ignore", invalid="ignore"):
        r = np.where(
            np.isfinite(lp),
            np.where(qpos, np.exp(lq - lp), 0.0),
            np.where(qpos, np.inf, 1.0),
        )
    r = np.where(use, r, np.nan)
    imax, imin = int(np.nanargmax(r)), int(np.nanargmin(r))
    hi, lo = float(r[imax]), float(r[imin])
    delta = math.inf if math.isinf(hi) else hi - lo
    return MlrReport(delta, float(xs[imax]), float(xs[imin]))


@dataclass(frozen=True)
class ProportionalityReport:
    ok: bool
    pair: tuple
    spread: float

    def __bool__(self):
        return self.ok

    def __iter__(self):
        return iter((self.ok, self.pair, self.spread))


def proportionality_check(q, specs, tol=1e-9) -> ProportionalityReport:
    """Whether q(x)/q(y) equals prod p_i(x) / prod p_i(y) at all test points.

    ``spread`` is max/min - 1 of q / prod(p_i) over points of positive
    product; ``pair`` holds the points attaining the max and the min.  A
    candidate with mass where the product vanishes fails with spread inf.
    """
    q = _form(q)
    specs = [D.validate(s) for s in specs]
    disc = {s.discrete for s in specs}
    if len(disc) != 1 or q.discrete not in disc:
        raise InvalidSpec("candidate and inputs must be all discrete or all continuous")
    xs, lq, lp, structural = _log_ratios(q, specs, q.discrete)
    pos = np.isfinite(lp) & (lp > LOG_UNDERFLOW)
    stray = np.nonzero(structural & np.isfinite(lq))[0]
    if len(stray) or not pos.any():
        anchor = float(xs[np.argmax(pos)]) if pos.any() else float("nan")
        return ProportionalityReport(False, (float(xs[stray[0]]) if len(stray) else anchor, anchor), math.inf)
    with np.errstate(invalid="ignore"):
        lr = np.where(pos, lq - lp, np.nan)
    if np.any(np.isneginf(lr[pos])):
        i = int(np.nanargmax(lr))
        j = int(np.argmax(np.isneginf(lr) & pos))
        return ProportionalityReport(False, (float(xs[i]), float(xs[j])), math.inf)
    i, j = int(np.nanargmax(lr)), int(np.nanargmin(lr))
    gap = float(lr[i] - lr[j])
    spread = math.expm1(gap) if gap < 709.0 else math.inf
    return ProportionalityReport(spread <= tol, (float(xs[i]), float(xs[j])), spread)


# ---------------------------------------------------------------------------
# characteristic functions


@dataclass(frozen=True, eq=False)
class CharacteristicGrid:
    t_points: np.ndarray
    values: np.ndarray

    def hermitian_error(self):
        """max |psi(-t) - conj(psi(t))| over the symmetric grid."""
        return float(np.max(np.abs(self.values[::-1] - np.conj(self.values))))


def _cf_closed(spec, t):
    k = spec.kind
    if k == "normal":
        return np.exp(1j * float(spec.mu) * t - float(spec.sigma2) * t * t / 2)
    if k == "exponential":
        return 1 / (1 - 1j * float(spec.mean_) * t)
    if k == "uniform":
        a, b = float(spec.a), float(spec.b)
        with np.errstate(invalid="ignore", divide="ignore"):
            v = (np.exp(1j * t * b) - np.exp(1j * t * a)) / (1j * t * (b - a))
        return np.where(t == 0, 1.0 + 0j, v)
    if k == "cauchy":
        return np.exp(1j * float(spec.loc) * t - float(spec.scale) * np.abs(t))
    if k == "laplace":
        return 1 / (1 + (float(spec.scale) * t) ** 2) + 0j
    if k == "gamma":
        return (1 - 1j * float(spec.beta) * t) ** (-float(spec.alpha))
    if k == "chi_square":
        return (1 - 2j * t) ** (-int(spec.k) / 2)
    return None


def characteristic_fn(spec, t_grid) -> CharacteristicGrid:
    """psi(t) = E exp(itX): closed form where known, else sums or quadrature."""
    spec = _form(spec)
    t = np.asarray(t_grid, dtype=float)
    v = _cf_closed(spec, t)
    if v is None:
        if spec.discrete:
            xs, ps, tail = spec.atoms()
            v = np.array([np.dot(ps, np.exp(1j * tt * xs)) for tt in t])
        else:
            if isinstance(spec, D.GridDensity):
                x, f = spec.points, spec.values
            else:
                x = Qd.mapped_grid(Qd.find_window([spec]), 1 << 15 | 1)
                f = np.asarray(spec.pdf(x), float)
                f = f / Qd.trapezoid(x, f)
            wts = D.trapezoid_weights(x) * f
            v = np.empty(len(t), complex)
            for i0 in range(0, len(t), 256):
                tt = t[i0 : i0 + 256]
                v[i0 : i0 + 256] = np.exp(1j * np.outer(tt, x)) @ wts
    return CharacteristicGrid(t, np.asarray(v, complex))


def convolution_check(spec1, spec2, t_max=10.0, s_max=20.0, n_s=8192) -> float:
    """Max deviation between psi of the conflation and (psi1 * psi2) / (2 pi int f1 f2).

    The convolution integral is the trapezoid rule on a uniform lattice
    over [-s_max, s_max]; results are compared for |t| <= t_max on the
    same lattice.
    """
    spec1, spec2 = D.validate(spec1), D.validate(spec2)
    if spec1.discrete or spec2.discrete:
        raise InvalidSpec(
            "characteristic functions of discrete laws are not integrable, so their convolution does not exist"
        )
    h = 2 * s_max / n_s
    m = int(round(s_max / h))
    mt = int(math.floor(t_max / h))
    s = np.arange(-m, m + 1) * h
    ext = np.arange(-(m + mt), m + mt + 1) * h
    w = np.full(len(s), h)
    w[0] = w[-1] = h / 2
    psi1 = characteristic_fn(spec1, s).values * w
    psi2 = characteristic_fn(spec2, ext).values
    conv = signal.convolve(psi2, psi1, mode="valid", method="direct")
    t = np.arange(-mt, mt + 1) * h
    res = conflate([spec1, spec2])
    lhs = conv / (2 * math.pi * res.norm_constant)
    rhs = characteristic_fn(res.form, t).values
    return float(np.max(np.abs(lhs - rhs)))
