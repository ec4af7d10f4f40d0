"""Canonical JSON and CSV encodings.

Canonical JSON means sorted keys, shortest round-trip float text, UTF-8
and a trailing newline, so equal objects always produce equal bytes.
Infinite window bounds are written as ``null``.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from fractions import Fraction

import numpy as np

from . import distributions as D
from .errors import InvalidSpec


def _num(v):
    if isinstance(v, Fraction):
        v = float(v)
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and v.is_integer() and abs(v) < 2**53:
        # 2.0 and 2 must serialize identically
        return int(v)
    return v


def _bound(v):
    v = float(v)
    return None if math.isinf(v) else _num(v)


def spec_to_dict(spec: D.Distribution) -> dict:
    if isinstance(spec, D.PmfTable):
        out = {"kind": "pmf", "atoms": [[_num(x), _num(m)] for x, m in spec.atoms_]}
        if spec.tail_bound:
            out["tail_bound"] = _num(spec.tail_bound)
        return out
    if isinstance(spec, D.GridDensity):
        return {
            "kind": "grid",
            "points": [_num(v) for v in spec.points.tolist()],
            "values": [_num(v) for v in spec.values.tolist()],
        }
    if isinstance(spec, D.Truncated):
        return {"kind": "truncated", "inner": spec_to_dict(spec.inner), "lo": _bound(spec.lo), "hi": _bound(spec.hi)}
    return {"kind": spec.kind, "params": {k: _num(v) for k, v in spec.params().items()}}


def spec_from_dict(obj) -> D.Distribution:
    """Parse the JSON form of a distribution; raises :class:`InvalidSpec`."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise InvalidSpec(f"expected an object with a 'kind' field, got {obj!r}")
    kind = obj["kind"]
    if kind in ("pmf", "pmf_table"):
        atoms = obj.get("atoms")
        if isinstance(atoms, dict):
            atoms = [(float(k), v) for k, v in atoms.items()]
        if not isinstance(atoms, (list, tuple)) or not all(isinstance(a, (list, tuple)) and len(a) == 2 for a in atoms):
            raise InvalidSpec("pmf needs 'atoms' as a list of [value, mass] pairs")
        return D.PmfTable(tuple(tuple(a) for a in atoms), float(obj.get("tail_bound", 0.0)))
    if kind in ("grid", "grid_density"):
        try:
            return D.GridDensity(np.array(obj["points"], dtype=float), np.array(obj["values"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidSpec):
                raise
            raise InvalidSpec(f"malformed grid density: {exc}") from None
    if kind == "truncated":
        lo = obj.get("lo")
        hi = obj.get("hi")
        lo = -math.inf if lo is None else float(lo)
        hi = math.inf if hi is None else float(hi)
        return D.Truncated(spec_from_dict(obj.get("inner")), lo, hi)
    cls = D.FAMILIES.get(kind)
    if cls is None:
        raise InvalidSpec(f"unknown distribution family {kind!r}")
    params = dict(obj.get("params", {}))
    names = {v: k for k, v in cls._json_names.items()}
    fields = [f.name for f in dataclasses.fields(cls) if f.init]
    kwargs = {}
    for key, val in params.items():
        name = names.get(key, key)
        if name not in fields:
            raise InvalidSpec(f"{kind} has no parameter {key!r}")
        kwargs[name] = val
    missing = [cls._json_names.get(f, f) for f in fields if f not in kwargs]
    if missing:
        raise InvalidSpec(f"{kind} is missing parameter(s) {', '.join(missing)}")
    return cls(**kwargs)


def dumps(obj) -> str:
    """Canonical JSON text for a plain JSON-ready object."""
    return json.dumps(obj, sort_keys=True, allow_nan=False, ensure_ascii=False) + "\n"


def dump_spec(spec) -> str:
    return dumps(spec_to_dict(spec))


def load_spec(text: str) -> D.Distribution:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"malformed JSON: {exc}") from None
    return spec_from_dict(obj)


def canonical_key(spec) -> str:
    return json.dumps(spec_to_dict(spec), sort_keys=True)


def result_to_dict(result) -> dict:
    out = {
        "form": spec_to_dict(result.form),
        "norm_constant": None if math.isinf(result.norm_constant) else _num(result.norm_constant),
        "engine": result.engine,
        "warnings": list(result.warnings),
    }
    if result.concentration is not None:
        out["concentration"] = _num(result.concentration)
    return out


def dump_result(result) -> str:
    return dumps(result_to_dict(result))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) for v in r])
    return buf.getvalue()


def pmf_csv(xs, masses) -> str:
    return _csv(["x", "mass"], zip(xs, masses))


def density_csv(xs, values) -> str:
    return _csv(["x", "density"], zip(xs, values))


def result_csv(result) -> str:
    form = result.form
    if isinstance(form, D.GridDensity):
        return density_csv(form.points, form.values)
    if form.discrete:
        xs, ps, _ = form.atoms()
        return pmf_csv(xs, ps)
    lo, hi = form.quantile_range(1e-9)
    xs = np.linspace(lo, hi, 1025)
    return density_csv(xs, form.pdf(xs))
