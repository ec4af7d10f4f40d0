"""Grids and log-space products shared by the numeric engines."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import Distribution, trapezoid_weights
from .errors import IncompatibleInputs

LOG_DROP = 46.0  # exp(-46) ~ 1e-20 relative to the peak
EDGE_DECADES = 12


def log_product(specs, x):
    """Sum of log densities (or log masses); ``-inf`` off any support."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for s in specs:
            out = out + np.asarray(s.logpdf(x), dtype=float)
    return np.where(np.isnan(out), -np.inf, out)


def support_overlap(specs):
    lo = max(s.support().lo for s in specs)
    hi = min(s.support().hi for s in specs)
    return lo, hi


def _spec_quantile_points(spec: Distribution, lo, hi, tail=1e-12, m=60):
    probs = np.geomspace(tail, 0.5, m)
    with np.errstate(all="ignore"):
        pts = np.concatenate([np.asarray(spec.ppf(probs), float), np.asarray(spec.isf(probs), float)])
    pts = pts[np.isfinite(pts)]
    return pts[(pts > lo) & (pts < hi)]


def edge_cluster(edge, width, direction, per_decade):
    """Points edge + direction*width*10**t for t in [-EDGE_DECADES, 0)."""
    t = np.linspace(-EDGE_DECADES, 0.0, EDGE_DECADES * per_decade + 1)[:-1]
    return edge + direction * width * 10.0**t


@dataclass(frozen=True)
class Window:
    """Where the product carries essentially all of its mass.

    ``lo_edge``/``hi_edge`` are true when that end is a finite support
    endpoint (the product may blow up or jump there); otherwise the end
    is a point where the product has fallen ``LOG_DROP`` nats below peak.
    """

    lo: float
    hi: float
    center: float
    scale: float
    lo_edge: bool
    hi_edge: bool
    log_peak: float


def find_window(specs, tail=1e-12, drop=LOG_DROP) -> Window:
    lo_s, hi_s = support_overlap(specs)
    if not lo_s < hi_s:
        raise IncompatibleInputs("supports do not overlap")
    qlo = min(s.quantile_range(tail)[0] for s in specs)
    qhi = max(s.quantile_range(tail)[1] for s in specs)
    lo, hi = max(lo_s, qlo), min(hi_s, qhi)
    if not lo < hi:
        # the bulks sit outside the overlap; fall back to each spec's wider range
        lo = max(lo_s, min(s.quantile_range(1e-300)[0] for s in specs))
        hi = min(hi_s, max(s.quantile_range(1e-300)[1] for s in specs))
        if not lo < hi:
            raise IncompatibleInputs("no region of positive product density")
    width = hi - lo
    pts = [np.linspace(lo, hi, 4001)]
    for s in specs:
        pts.append(_spec_quantile_points(s, lo, hi, tail))
    if math.isfinite(lo_s) and lo == lo_s:
        pts.append(edge_cluster(lo, width, 1, 4))
    if math.isfinite(hi_s) and hi == hi_s:
        pts.append(edge_cluster(hi, width, -1, 4))
    x = np.unique(np.concatenate(pts))
    x = x[(x > lo_s) & (x < hi_s)]
    L = log_product(specs, x)
    if not np.any(np.isfinite(L)):
        raise IncompatibleInputs("product of densities vanishes on the common support")
    i_peak = int(np.argmax(L))
    peak = float(L[i_peak])
    keep = np.nonzero(L >= peak - drop)[0]
    i0, i1 = int(keep[0]), int(keep[-1])
    a = float(x[i0 - 1]) if i0 > 0 else lo
    b = float(x[i1 + 1]) if i1 < len(x) - 1 else hi
    lo_edge = i0 == 0 and math.isfinite(lo_s) and lo == lo_s
    hi_edge = i1 == len(x) - 1 and math.isfinite(hi_s) and hi == hi_s
    if lo_edge:
        a = lo_s
    if hi_edge:
        b = hi_s
    near = np.nonzero(L >= peak - 2.0)[0]
    spread = float(x[near[-1]] - x[near[0]]) / 2
    if spread <= 0:
        nb = [abs(float(x[j]) - float(x[i_peak])) for j in (i_peak - 1, i_peak + 1) if 0 <= j < len(x)]
        spread = min(nb) if nb else (b - a) / 2
    spread = max(spread, (b - a) * 1e-9)
    return Window(a, b, float(x[i_peak]), spread, lo_edge, hi_edge, peak)


def mapped_grid(w: Window, n):
    """``n`` points c + s*sinh(u) over the window plus edge clusters.

    Finite support endpoints are never included themselves; the product
    can be infinite there.
    """
    u0 = math.asinh((w.lo - w.center) / w.scale)
    u1 = math.asinh((w.hi - w.center) / w.scale)
    u = np.linspace(u0, u1, n)
    x = w.center + w.scale * np.sinh(u)
    x[0], x[-1] = w.lo, w.hi
    parts = [x]
    width = w.hi - w.lo
    per_decade = max(4, n // (16 * EDGE_DECADES))
    if w.lo_edge:
        parts.append(edge_cluster(w.lo, width, 1, per_decade))
    if w.hi_edge:
        parts.append(edge_cluster(w.hi, width, -1, per_decade))
    x = np.unique(np.concatenate(parts))
    x = x[(x >= w.lo) & (x <= w.hi)]
    if w.lo_edge:
        x = x[x > w.lo]
    if w.hi_edge:
        x = x[x < w.hi]
    return x


def trapezoid(x, y):
    return float(np.dot(trapezoid_weights(x), y))


def edge_power_correction(x, y, edge, side):
    """Mass between a support endpoint and the nearest grid point.

    Fits y ~ C|x - edge|^s from the two innermost points; returns the
    integral of that power law, or ``inf`` when s <= -1.
    """
    if side == "lo":
        d0, d1, y0, y1 = x[0] - edge, x[1] - edge, y[0], y[1]
    else:
        d0, d1, y0, y1 = edge - x[-1], edge - x[-2], y[-1], y[-2]
    if not (y0 > 0 and y1 > 0):
        return 0.0
    s = math.log(y1 / y0) / math.log(d1 / d0)
    if s <= -1 + 1e-3:
        return math.inf
    return float(y0 * d0 / (s + 1))
