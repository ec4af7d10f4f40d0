"""Dyadic product measures and the brute-force conflation oracle.

At level ``j`` the line is cut into cells ((k-1)/2^j, k/2^j] and each cell
gets the product of the inputs' probabilities of that cell, placed at its
right endpoint k/2^j.  Normalizing and refining gives an approximation of
the conflation that uses nothing but interval probabilities.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import distributions as D
from . import quadrature as Qd
from .errors import IncompatibleInputs
from .serialization import canonical_key, dumps, pmf_csv, spec_to_dict

LEVEL_CAP = 30
MAX_CELLS = 2**25
WINDOW_DROP = 30.0
MONOTONE_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class DyadicMeasure:
    """Sub-probability with mass ``masses[i]`` at ``ks[i] / 2**level``.

    ``window`` is the inclusive range of cell indices that was enumerated
    and ``tail_bound`` bounds the mass of all cells outside it.
    """

    level: int
    ks: np.ndarray
    masses: np.ndarray
    total_mass: float
    window: tuple
    tail_bound: float

    @property
    def points(self):
        return self.ks * 2.0**-self.level

    def as_dict(self):
        return dict(zip(self.points.tolist(), self.masses.tolist()))

    def coarsen(self):
        """The same masses summed onto the parent cells one level up."""
        parents = -((-self.ks) // 2)  # ceil(k / 2)
        uniq, inv = np.unique(parents, return_inverse=True)
        return uniq, np.bincount(inv, weights=self.masses)


def _check_level(j):
    if isinstance(j, bool) or int(j) != j or not 1 <= j <= LEVEL_CAP:
        raise ValueError(f"level must be an integer in 1..{LEVEL_CAP}, got {j!r}")
    return int(j)


def _cell_probs(spec, ks, j):
    """P((k-1)2^-j, k 2^-j] for every k in ``ks``."""
    h = 2.0**-j
    s = spec.support()
    if spec.discrete and s.atoms is not None:
        xs, ps, _ = spec.atoms()
        cells = np.ceil(xs * 2.0**j).astype(np.int64)
        uniq, inv = np.unique(cells, return_inverse=True)
        sums = np.bincount(inv, weights=ps)
        i = np.clip(np.searchsorted(uniq, ks), 0, len(uniq) - 1)
        return np.where(uniq[i] == ks, sums[i], 0.0)
    if spec.discrete:
        # integer lattice: a cell at level j >= 0 holds at most one integer,
        # namely k*h when that is an integer
        x = ks * h
        on = x == np.floor(x)
        return np.where(on, np.asarray(spec.pdf(np.where(on, x, s.lo)), float), 0.0)
    return spec.probs_between((ks - 1) * h, ks * h)


def _sparse_ks(specs, j):
    """Cells holding an atom of the lightest discrete input; only they can carry mass."""
    from .conflation import _driver_atoms, _enumeration_size

    discrete = [s for s in specs if s.discrete]
    if all(s.support().is_lattice for s in discrete):
        # a cell holds at most one integer, so shared cells are shared atoms
        xs, _, bound = _driver_atoms(discrete, discrete)
    else:
        driver = min(discrete, key=lambda s: (_enumeration_size(s), canonical_key(s)))
        xs, _, bound = driver.atoms()
    return np.unique(np.ceil(xs * 2.0**j).astype(np.int64)), bound


def default_window(specs):
    """Integer-aligned interval holding all but a negligible part of the product."""
    w = Qd.find_window(specs, drop=WINDOW_DROP)
    return float(math.floor(w.lo)), float(math.ceil(w.hi))


def mu_j(specs, j, window=None) -> DyadicMeasure:
    """The level-``j`` dyadic product measure of the inputs.

    Discrete inputs restrict the cells to those holding an atom of the
    lightest discrete input.  Otherwise every cell inside ``window``
    (default :func:`default_window`) is enumerated.
    """
    specs = [D.validate(s) for s in specs]
    if not specs:
        raise ValueError("need at least one distribution")
    j = _check_level(j)
    specs = sorted(specs, key=canonical_key)
    scale = 2.0**j
    if any(s.discrete for s in specs):
        ks, tail = _sparse_ks(specs, j)
        if window is not None:
            lo, hi = window
            ks = ks[(ks > math.floor(lo * scale)) & (ks <= math.ceil(hi * scale))]
    else:
        lo, hi = default_window(specs) if window is None else (float(window[0]), float(window[1]))
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"window must be finite and nonempty, got ({lo}, {hi})")
        k0, k1 = math.floor(lo * scale) + 1, math.ceil(hi * scale)
        if k1 - k0 + 1 > MAX_CELLS:
            raise ValueError(f"{k1 - k0 + 1} cells at level {j}; narrow the window or lower the level")
        ks = np.arange(k0, k1 + 1, dtype=np.int64)
        left = [s.probs_between(np.array([-math.inf]), np.array([(k0 - 1) / scale]))[0] for s in specs]
        right = [s.sf((k1) / scale) for s in specs]
        tail = float(np.prod(left) + np.prod(np.asarray(right, dtype=float)))
    m = np.ones(len(ks))
    for s in specs:
        m = m * _cell_probs(s, ks, j)
    keep = m > 0
    ks, m = ks[keep], m[keep]
    win = (int(ks[0]), int(ks[-1])) if len(ks) else (0, -1)
    return DyadicMeasure(j, ks, m, math.fsum(m), win, tail)


def normalized(mu: DyadicMeasure) -> D.PmfTable:
    if not mu.total_mass > 0:
        raise IncompatibleInputs(f"dyadic measure at level {mu.level} has zero mass")
    return D.PmfTable.from_arrays(mu.points, mu.masses / mu.total_mass, tail_bound=mu.tail_bound / mu.total_mass)


@dataclass(frozen=True, eq=False)
class OracleReport:
    approx: D.PmfTable
    mass_sequence: np.ndarray
    monotonicity_ok: bool
    escape_flag: bool
    achieved_level: int
    tv_sequence: np.ndarray
    window: tuple | None = None

    def to_dict(self):
        return {
            "approx": spec_to_dict(self.approx),
            "mass_sequence": [float(v) for v in self.mass_sequence],
            "tv_sequence": [float(v) for v in self.tv_sequence],
            "monotonicity_ok": bool(self.monotonicity_ok),
            "escape_flag": bool(self.escape_flag),
            "achieved_level": int(self.achieved_level),
        }

    def to_json(self):
        return dumps(self.to_dict())

    def to_csv(self):
        xs, ps, _ = self.approx.atoms()
        return pmf_csv(xs, ps)


def _quantiles(mu: DyadicMeasure, probs=(0.005, 0.995)):
    c = np.cumsum(mu.masses) / mu.total_mass
    return [float(mu.points[min(np.searchsorted(c, p), len(c) - 1)]) for p in probs]


def monotone_step(fine: DyadicMeasure, coarse: DyadicMeasure, slack=MONOTONE_SLACK) -> bool:
    """Mass of every level-j cell never grows when split at level j+1."""
    pk, pm = fine.coarsen()
    i = np.searchsorted(coarse.ks, pk)
    i = np.clip(i, 0, max(len(coarse.ks) - 1, 0))
    have = coarse.masses[i] if len(coarse.ks) else np.zeros_like(pm)
    have = np.where(len(coarse.ks) and coarse.ks[i] == pk, have, 0.0)
    return bool(np.all(pm <= have + slack))


def _successive_tv(fine: DyadicMeasure, coarse: DyadicMeasure):
    pk, pm = fine.coarsen()
    pm = pm / fine.total_mass
    keys = np.union1d(pk, coarse.ks)
    a = np.zeros(len(keys))
    b = np.zeros(len(keys))
    a[np.searchsorted(keys, pk)] = pm
    b[np.searchsorted(keys, coarse.ks)] = coarse.masses / coarse.total_mass
    return 0.5 * float(np.abs(a - b).sum())


def _escaping(history, run=5):
    """Quantile drift that keeps one sign, stays large and does not shrink.

    ``history`` holds (level, q_low, q_high).  Ordinary convergence makes
    successive drifts shrink by about half each level; mass running away
    to infinity keeps moving by whole units.
    """
    for col in (1, 2):
        streak, prev = 0, None
        for t in range(1, len(history)):
            j = history[t][0]
            d = history[t][col] - history[t - 1][col]
            if abs(d) <= 8 * 2.0**-j:
                streak, prev = 0, None
                continue
            if prev is not None and np.sign(d) == np.sign(prev) and abs(d) >= 0.75 * abs(prev):
                streak += 1
            else:
                streak = 1
            prev = d
            if streak >= run:
                return True
    return False


def oracle_conflation(specs, j_max=12, tv_tol=1e-4, window=None) -> OracleReport:
    """Refine the dyadic measures until successive normalizations agree.

    Stops at the first level whose normalized measure, summed onto the
    previous level's cells, is within ``tv_tol`` in total variation of
    the previous one, or at ``j_max``.
    """
    specs = [D.validate(s) for s in specs]
    j_max = _check_level(j_max)
    if window is None and not any(s.discrete for s in specs):
        window = default_window(specs)
    masses, tvs, hist = [], [], []
    mono = True
    prev = None
    level = 0
    for j in range(1, j_max + 1):
        mu = mu_j(specs, j, window)
        if not mu.total_mass > 0:
            raise IncompatibleInputs(f"dyadic measure vanishes at level {j}")
        masses.append(mu.total_mass)
        hist.append((j, *_quantiles(mu)))
        level = j
        if prev is not None:
            mono = mono and monotone_step(mu, prev) and mu.total_mass <= prev.total_mass + MONOTONE_SLACK
            tv = _successive_tv(mu, prev)
            tvs.append(tv)
            if tv < tv_tol:
                prev = mu
                break
        prev = mu
    return OracleReport(
        approx=normalized(prev),
        mass_sequence=np.array(masses),
        monotonicity_ok=mono,
        escape_flag=_escaping(hist),
        achieved_level=level,
        tv_sequence=np.array(tvs),
        window=window,
    )


def measure_to_json(mu: DyadicMeasure) -> str:
    return dumps(
        {
            "level": mu.level,
            "atoms": [[float(x), float(m)] for x, m in zip(mu.points, mu.masses)],
            "total_mass": mu.total_mass,
            "window": list(mu.window),
            "tail_bound": mu.tail_bound,
        }
    )


def measure_to_csv(mu: DyadicMeasure) -> str:
    return pmf_csv(mu.points, mu.masses)


def discretize(spec, j, window):
    """Cell probabilities of one distribution on the oracle's grid, normalized."""
    lo, hi = window
    scale = 2.0**j
    ks = np.arange(math.floor(lo * scale) + 1, math.ceil(hi * scale) + 1, dtype=np.int64)
    p = _cell_probs(D.validate(spec), ks, j)
    return ks, p / p.sum()


def tv_to(report: OracleReport, spec) -> float:
    """Total variation between the oracle's approximation and ``spec`` on the same cells."""
    q = report.approx
    j = report.achieved_level
    xs, ps, _ = q.atoms()
    ks = np.round(xs * 2.0**j).astype(np.int64)
    if report.window is not None:
        kk, pp = discretize(spec, j, report.window)
    else:
        kk = ks
        pp = _cell_probs(D.validate(spec), ks, j)
        pp = pp / pp.sum()
    keys = np.union1d(ks, kk)
    a = np.zeros(len(keys))
    b = np.zeros(len(keys))
    a[np.searchsorted(keys, ks)] = ps
    b[np.searchsorted(keys, kk)] = pp
    return 0.5 * float(np.abs(a - b).sum())
