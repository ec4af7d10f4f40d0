"""Rejection sampling of the conflation as "all inputs agree".

Draw X_1..X_n independently and keep X_1 when they coincide (discrete
inputs) or all lie within epsilon of each other (continuous inputs).
Each chain and each input gets its own Philox stream spawned from one
seed, so a batch is a pure function of its arguments.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import distributions as D
from .conflation import ConflationResult, compatible, conflate
from .errors import IncompatibleInputs, InvalidSpec
from .serialization import dumps

DEFAULT_CAP = 10**8
MIN_BATCH = 1 << 14
MAX_BATCH = 1 << 22


@dataclass(frozen=True, eq=False)
class SampleBatch:
    values: np.ndarray
    accepted: int
    proposed: int
    acceptance_rate: float
    epsilon: float
    seed: int
    cap_reached: bool = False

    def metadata(self):
        return {
            "accepted": self.accepted,
            "proposed": self.proposed,
            "acceptance_rate": self.acceptance_rate,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "cap_reached": self.cap_reached,
        }

    def to_csv(self):
        return "x\n" + "".join(f"{v!r}\n" for v in self.values.tolist())

    def metadata_json(self):
        return dumps(self.metadata())


def thread_cap():
    try:
        return max(1, int(os.environ.get("CONFLATE_THREADS", "")))
    except ValueError:
        return os.cpu_count() or 1


def _streams(seed, chains, n):
    root = np.random.SeedSequence(seed)
    return [[np.random.Generator(np.random.Philox(ss)) for ss in chain.spawn(n)] for chain in root.spawn(chains)]


def _run_chain(specs, rngs, accept, target, cap):
    kept, accepted, proposed = [], 0, 0
    size = MIN_BATCH
    while accepted < target and proposed < cap:
        size = int(min(size, cap - proposed))
        draws = np.stack([s.rvs(size, rng) for s, rng in zip(specs, rngs)])
        hits = np.nonzero(accept(draws))[0]
        need = target - accepted
        if len(hits) >= need:
            hits = hits[:need]
            proposed += int(hits[-1]) + 1
        else:
            proposed += size
        kept.append(draws[0, hits])
        accepted += len(hits)
        rate = accepted / proposed
        size = MAX_BATCH if rate == 0 else int(np.clip(1.2 * (target - accepted) / rate, MIN_BATCH, MAX_BATCH))
    vals = np.concatenate(kept) if kept else np.empty(0)
    return vals, accepted, proposed


def _sample(specs, accept, n_target, seed, proposal_cap, chains, epsilon):
    if n_target < 1:
        raise ValueError("n_target must be positive")
    chains = max(1, int(chains))
    share = [n_target // chains + (c < n_target % chains) for c in range(chains)]
    caps = [proposal_cap // chains + (c < proposal_cap % chains) for c in range(chains)]
    streams = _streams(seed, chains, len(specs))
    jobs = list(zip(streams, share, caps))
    if chains == 1:
        out = [_run_chain(specs, jobs[0][0], accept, jobs[0][1], jobs[0][2])]
    else:
        with ThreadPoolExecutor(max_workers=min(chains, thread_cap())) as pool:
            out = list(pool.map(lambda j: _run_chain(specs, j[0], accept, j[1], j[2]), jobs))
    values = np.concatenate([o[0] for o in out])
    accepted = sum(o[1] for o in out)
    proposed = sum(o[2] for o in out)
    if accepted == 0:
        raise IncompatibleInputs(f"no agreeing draws in {proposed} proposals; the inputs look incompatible")
    return SampleBatch(values, accepted, proposed, accepted / proposed, float(epsilon), int(seed), accepted < n_target)


def sample_agree_discrete(specs, n_target, seed, proposal_cap=DEFAULT_CAP, chains=1) -> SampleBatch:
    """Keep X_1 whenever X_1 = X_2 = ... = X_n."""
    specs = [D.validate(s) for s in specs]
    if not all(s.discrete for s in specs):
        raise InvalidSpec("exact agreement needs discrete inputs")
    if not compatible(specs):
        raise IncompatibleInputs("no common atoms: exact agreement has probability zero")
    accept = lambda d: np.all(d == d[0], axis=0)
    return _sample(specs, accept, n_target, seed, proposal_cap, chains, 0.0)


def agreement_volume(n, epsilon):
    """Lebesgue measure of {y in R^(n-1): max(0, y) - min(0, y) < epsilon}.

    The acceptance rate behaves like this volume times int prod f as
    epsilon shrinks. It equals (2 eps)^(n-1) only for n = 2.
    """
    return n * epsilon ** (n - 1)


def default_epsilon(specs, rate=1e-3):
    """Tolerance whose predicted acceptance rate is about ``rate``."""
    specs = [D.validate(s) for s in specs]
    n = len(specs)
    if n == 1:
        return 1.0
    z = conflate(specs).norm_constant
    return (rate / (n * z)) ** (1.0 / (n - 1))


def sample_agree_ac(specs, epsilon=None, n_target=10**4, seed=0, proposal_cap=DEFAULT_CAP, chains=1) -> SampleBatch:
    """Keep X_1 whenever every pair satisfies |X_i - X_j| < epsilon."""
    specs = [D.validate(s) for s in specs]
    if any(s.discrete for s in specs):
        raise InvalidSpec("near agreement needs continuous inputs")
    if not compatible(specs):
        raise IncompatibleInputs("supports do not overlap")
    eps = default_epsilon(specs) if epsilon is None else float(epsilon)
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    # max_i X_i - min_i X_i < eps is the same event as all pairwise gaps < eps
    accept = lambda d: (d.max(axis=0) - d.min(axis=0)) < eps
    return _sample(specs, accept, n_target, seed, proposal_cap, chains, eps)


def empirical_distance(batch: SampleBatch, target) -> dict:
    """Total variation on atoms for discrete targets, KS statistic otherwise."""
    if batch.accepted == 0 or len(batch.values) == 0:
        raise ValueError("empty batch")
    form = target.form if isinstance(target, ConflationResult) else D.validate(target)
    if form.discrete:
        xs, ps, _ = form.atoms()
        vals, counts = np.unique(batch.values, return_counts=True)
        keys = np.union1d(xs, vals)
        a = np.zeros(len(keys))
        b = np.zeros(len(keys))
        a[np.searchsorted(keys, xs)] = ps
        b[np.searchsorted(keys, vals)] = counts / counts.sum()
        return {"tv": 0.5 * float(np.abs(a - b).sum())}
    res = stats.kstest(batch.values, lambda x: np.asarray(form.cdf(x), float))
    return {"ks": float(res.statistic)}
