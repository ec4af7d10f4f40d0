import json
import subprocess
import sys

import pytest

from conflate import serialization as S
from conflate.cli import main

B13 = '{"kind":"bernoulli","params":{"p":0.3333333333333333}}'
B14 = '{"kind":"bernoulli","params":{"p":0.25}}'


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestConflate:
    def test_bernoulli_pair(self, capsys):
        code, out, _ = run(capsys, "conflate", "--spec", B13, "--spec", B14)
        assert code == 0
        d = json.loads(out)
        assert d["form"]["kind"] == "pmf"
        (x0, m0), (x1, m1) = d["form"]["atoms"]
        assert (x0, x1) == (0, 1)
        assert m0 == pytest.approx(6 / 7, abs=1e-12) and m1 == pytest.approx(1 / 7, abs=1e-12)
        assert d["norm_constant"] == pytest.approx(7 / 12, abs=1e-12)
        assert out.endswith("\n")

    def test_disjoint_tables_exit_two(self, capsys):
        code, out, err = run(capsys, "conflate", "--spec", '{"kind":"pmf","atoms":[[0,1]]}', "--spec", '{"kind":"pmf","atoms":[[1,1]]}')
        assert code == 2 and out == ""
        assert "no common atoms" in err

    @pytest.mark.parametrize(
        "specs",
        [
            [B13, B14, '{"kind":"poisson","params":{"lam":2.0}}'],
            ['{"kind":"normal","params":{"mu":1,"sigma2":1}}', '{"kind":"normal","params":{"mu":2,"sigma2":4}}'],
            ['{"kind":"normal","params":{"mu":0,"sigma2":1}}', '{"kind":"exponential","params":{"mean":1}}', '{"kind":"cauchy","params":{"loc":0,"scale":1}}'],
        ],
        ids=["discrete", "closed-form", "grid"],
    )
    def test_output_invariant_under_permutation(self, capsys, specs):
        outs = set()
        for order in (specs, specs[::-1], specs[1:] + specs[:1]):
            argv = ["conflate"]
            for s in order:
                argv += ["--spec", s]
            code, out, _ = run(capsys, *argv)
            assert code == 0
            outs.add(out)
        assert len(outs) == 1

    def test_input_file_and_out(self, capsys, tmp_path):
        src = tmp_path / "in.json"
        src.write_text(f"[{B13}, {B14}]")
        dst = tmp_path / "out.json"
        code, out, _ = run(capsys, "conflate", "--input", str(src), "--out", str(dst))
        assert code == 0 and out == ""
        assert json.loads(dst.read_text())["norm_constant"] == pytest.approx(7 / 12)

    def test_emitted_form_reparses(self, capsys):
        _, out, _ = run(capsys, "conflate", "--spec", '{"kind":"gamma","params":{"alpha":3,"beta":1}}', "--spec", '{"kind":"gamma","params":{"alpha":2,"beta":2}}')
        form = json.loads(out)["form"]
        assert S.spec_to_dict(S.spec_from_dict(form)) == form

    def test_csv_and_text(self, capsys):
        _, out, _ = run(capsys, "conflate", "--spec", B13, "--spec", B14, "--format", "csv")
        assert out.splitlines()[0] == "x,mass"
        _, out, _ = run(capsys, "conflate", "--spec", B13, "--spec", B14, "--format", "text")
        assert "norm_constant" in out and "mass at 0" in out


class TestUsageErrors:
    @pytest.mark.parametrize(
        "argv",
        [
            ["conflate", "--spec", "{not json"],
            ["conflate", "--spec", '{"kind":"weibull","params":{"k":1}}'],
            ["conflate", "--spec", '{"kind":"normal","params":{"mu":0,"sigma2":-1}}'],
            ["conflate"],
            ["conflate", "--input", "/nonexistent/file.json"],
            ["bogus"],
            ["conflate", "--spec", B13, "--format", "yaml"],
        ],
        ids=["malformed", "unknown-family", "bad-param", "no-inputs", "missing-file", "bad-command", "bad-format"],
    )
    def test_exit_one(self, capsys, argv):
        code = None
        try:
            code = main(argv)
        except SystemExit as exc:
            code = exc.code
        assert code == 1

    def test_malformed_file(self, capsys, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("[{")
        code, _, err = run(capsys, "conflate", "--input", str(p))
        assert code == 1 and "malformed JSON" in err


class TestOtherCommands:
    def test_oracle(self, capsys):
        code, out, _ = run(capsys, "oracle", "--spec", B13, "--spec", B14, "--jmax", "4")
        d = json.loads(out)
        assert code == 0 and d["mass_sequence"] == pytest.approx([7 / 12] * len(d["mass_sequence"]))
        assert not d["escape_flag"]

    def test_diagnose(self, capsys):
        code, out, _ = run(capsys, "diagnose", "--spec", B13, "--spec", B14)
        d = json.loads(out)
        assert code == 0 and d["mlr"]["delta"] == pytest.approx(5 / 7)
        assert d["proportional"]["ok"]

    def test_sample_deterministic(self, capsys):
        argv = ["sample", "--spec", B13, "--spec", B14, "--n", "500", "--seed", "9", "--format", "csv"]
        _, a, _ = run(capsys, *argv)
        _, b, _ = run(capsys, *argv)
        assert a == b and len(a.splitlines()) == 501

    def test_sample_metadata(self, capsys):
        code, out, _ = run(capsys, "sample", "--spec", B13, "--spec", B14, "--n", "100")
        assert code == 0 and json.loads(out)["accepted"] == 100

    def test_fuse(self, capsys, tmp_path):
        p = tmp_path / "obs.csv"
        p.write_text("observation,variance\n1,1\n2,4\n")
        code, out, _ = run(capsys, "fuse", "--input", str(p))
        d = json.loads(out)
        assert code == 0 and d["value"] == pytest.approx(1.2) and d["variance"] == pytest.approx(0.8)

    def test_fuse_bad_variance(self, capsys, tmp_path):
        p = tmp_path / "obs.csv"
        p.write_text("1,1\n2,-4\n")
        assert run(capsys, "fuse", "--input", str(p))[0] == 1

    def test_verify_all_pass(self, capsys):
        code, out, _ = run(capsys, "verify")
        assert code == 0
        rows = out.splitlines()[1:]
        assert len(rows) == 8 and all(" PASS " in r for r in rows)


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "conflate.cli", "conflate", "--spec", B13, "--spec", B14],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["engine"] == "discrete_product"
