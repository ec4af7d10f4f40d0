"""Command-line interface.

Exit status: 0 on success, 1 for usage or input errors (and failed
``verify`` checks), 2 when the conflation does not exist or the inputs
are incompatible.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import serialization as S
from .conflation import conflate, conflate_grid
from .diagnostics import max_information_loss, mlr_delta, proportionality_check
from .dyadic import oracle_conflation
from .errors import IncompatibleInputs, InvalidSpec
from .fusion import blue_estimate
from .sampler import sample_agree_ac, sample_agree_discrete


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p, inputs=True):
    if inputs:
        p.add_argument("--input", action="append", default=[], metavar="PATH", help="JSON file with one spec or a list of specs")
        p.add_argument("--spec", action="append", default=[], metavar="JSON", help="inline JSON spec (repeatable)")
    p.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    p.add_argument("--format", choices=("json", "csv", "text"), default="json")


def build_parser():
    ap = _Parser(prog="conflate", description="Conflation of probability distributions.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("conflate", help="compute the conflation of the inputs")
    _common(p)
    p.add_argument("--grid", type=int, metavar="N", help="force the grid engine starting from N points")
    p = sub.add_parser("oracle", help="dyadic brute-force approximation")
    _common(p)
    p.add_argument("--jmax", type=int, default=12)
    p.add_argument("--tv-tol", type=float, default=1e-4)
    p = sub.add_parser("diagnose", help="information loss, likelihood-ratio spread, proportionality")
    _common(p)
    p.add_argument("--candidate", metavar="JSON", help="candidate distribution (default: the conflation)")
    p = sub.add_parser("sample", help="rejection sampling given agreement")
    _common(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=10000, help="accepted draws wanted")
    p.add_argument("--cap", type=int, default=10**8, help="proposal cap")
    p = sub.add_parser("fuse", help="inverse-variance fusion of (observation, variance) CSV rows")
    _common(p, inputs=False)
    p.add_argument("--input", action="append", default=[], metavar="PATH", help="CSV file, '-' for stdin")
    p = sub.add_parser("verify", help="run the worked-example checks")
    _common(p, inputs=False)
    p.set_defaults(format="text")
    return ap


def _read(path):
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _specs(args):
    out = []
    for path in args.input:
        try:
            obj = json.loads(_read(path))
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"{path}: malformed JSON: {exc}") from None
        out.extend(S.spec_from_dict(o) for o in (obj if isinstance(obj, list) else [obj]))
    for text in args.spec:
        out.append(S.load_spec(text))
    if not out:
        raise UsageError("give at least one --input or --spec")
    return out


def _table(rows):
    rows = [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n" for r in rows)


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.12g}"
    return str(v)


def _cmd_conflate(args):
    specs = _specs(args)
    res = conflate_grid(specs, n_points=args.grid) if args.grid else conflate(specs)
    if args.format == "csv":
        return S.result_csv(res)
    if args.format == "text":
        rows = [("field", "value"), ("engine", res.engine), ("norm_constant", _fmt(res.norm_constant))]
        form = S.spec_to_dict(res.form)
        if "params" in form:
            rows.append(("form", f"{form['kind']} " + " ".join(f"{k}={_fmt(v)}" for k, v in sorted(form["params"].items()))))
        elif form["kind"] == "pmf":
            rows += [(f"mass at {_fmt(x)}", _fmt(m)) for x, m in form["atoms"]]
        else:
            rows.append(("form", form["kind"]))
        rows += [("warning", w) for w in res.warnings]
        return _table(rows)
    return S.dump_result(res)


def _cmd_oracle(args):
    rep = oracle_conflation(_specs(args), j_max=args.jmax, tv_tol=args.tv_tol)
    if args.format == "csv":
        return rep.to_csv()
    if args.format == "text":
        rows = [("level", "mass", "tv to previous")]
        tvs = [""] + [_fmt(float(t)) for t in rep.tv_sequence]
        rows += [(j + 1, _fmt(float(m)), tvs[j]) for j, m in enumerate(rep.mass_sequence)]
        tail = [("monotone", rep.monotonicity_ok), ("escape", rep.escape_flag), ("level reached", rep.achieved_level)]
        return _table(rows) + _table(tail)
    return rep.to_json()


def _cmd_diagnose(args):
    specs = _specs(args)
    res = conflate(specs)
    cand = S.load_spec(args.candidate) if args.candidate else res.form
    info = max_information_loss(cand, specs)
    mlr = mlr_delta(cand, specs)
    prop = proportionality_check(cand, specs)
    report = {
        "information": info.to_dict(),
        "mlr": mlr.to_dict(),
        "proportional": {"ok": prop.ok, "pair": list(prop.pair), "spread": None if math.isinf(prop.spread) else prop.spread},
    }
    if args.format == "text":
        rows = [
            ("check", "value"),
            ("information bound (bits)", _fmt(info.bound)),
            ("max information loss (bits)", _fmt(info.max_loss)),
            ("attains bound", info.attains_bound),
            ("likelihood-ratio spread", _fmt(mlr.delta)),
            ("proportional", prop.ok),
        ]
        return _table(rows)
    if args.format == "csv":
        raise UsageError("diagnose has no CSV output")
    return S.dumps(report)


def _cmd_sample(args):
    specs = _specs(args)
    if all(s.discrete for s in specs):
        batch = sample_agree_discrete(specs, args.n, args.seed, proposal_cap=args.cap)
    else:
        batch = sample_agree_ac(specs, args.epsilon, args.n, args.seed, proposal_cap=args.cap)
    if args.format == "csv":
        return batch.to_csv()
    if args.format == "text":
        return _table([("field", "value")] + [(k, _fmt(v)) for k, v in batch.metadata().items()])
    return batch.metadata_json()


def _cmd_fuse(args):
    paths = args.input or ["-"]
    obs, var = [], []
    for path in paths:
        for row in csv.reader(io.StringIO(_read(path))):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                x, v = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if not obs:  # header line
                    continue
                raise UsageError(f"bad CSV row {row!r}") from None
            obs.append(x)
            var.append(v)
    if not obs:
        raise UsageError("no (observation, variance) rows")
    try:
        est = blue_estimate(obs, var)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.format == "text":
        return _table([("value", _fmt(est.value)), ("variance", _fmt(est.variance))])
    return S.dumps(est.to_dict())


def _cmd_verify(args):
    from .verify import run_all

    results = run_all()
    if args.format == "json":
        text = S.dumps([{"check": n, "passed": ok, "detail": d} for n, ok, d in results])
    else:
        text = _table([("check", "result", "detail")] + [(n, "PASS" if ok else "FAIL", d) for n, ok, d in results])
    return text, all(ok for _, ok, _ in results)


COMMANDS = {
    "conflate": _cmd_conflate,
    "oracle": _cmd_oracle,
    "diagnose": _cmd_diagnose,
    "sample": _cmd_sample,
    "fuse": _cmd_fuse,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = COMMANDS[args.command](args)
    except IncompatibleInputs as exc:
        print(f"conflate: {exc}", file=sys.stderr)
        return 2
    except (InvalidSpec, UsageError, ValueError) as exc:
        print(f"conflate: {exc}", file=sys.stderr)
        return 1
    ok = True
    if isinstance(out, tuple):
        out, ok = out
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
