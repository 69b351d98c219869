import csv
import io
import json
from fractions import Fraction

import numpy as np
import pytest

import ergodic_spde.verification as verification
from ergodic_spde import cli
from ergodic_spde.integrators import StepError
from ergodic_spde.noise import RNG_VERSION
from ergodic_spde.verification import Check

SMALL = ["--n", "8", "--tau", "2^-4", "--T", "1", "--samples", "30", "--seed", "3"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def body(text):
    return [r for r in csv.DictReader(io.StringIO("".join(l for l in text.splitlines(True) if not l.startswith("#"))))]


def test_parse_dyadic():
    assert cli.parse_dyadic("2^-6") == Fraction(1, 64)
    assert cli.parse_dyadic("3*2^-4") == Fraction(3, 16)
    assert cli.parse_dyadic("2^(-2)") == Fraction(1, 4)
    assert cli.parse_dyadic("1/64") == Fraction(1, 64)
    assert cli.parse_dyadic("0.015625") == Fraction(1, 64)
    assert cli.parse_dyadic("50") == 50
    with pytest.raises(cli.ConfigError):
        cli.parse_dyadic("3^-1")
    assert cli.format_dyadic(Fraction(1, 64)) == "2^-6"
    assert cli.format_dyadic(Fraction(20)) == "20"
    assert cli.format_dyadic(Fraction(3, 16)) == "3/16"


def test_parse_ladders():
    assert cli.parse_ladder("2^-5..2^-8") == [Fraction(1, 2**e) for e in (5, 6, 7, 8)]
    assert cli.parse_ladder("2^-2,2^-4") == [Fraction(1, 4), Fraction(1, 16)]
    assert cli.parse_nladder("2^1..2^4") == [2, 4, 8, 16]
    with pytest.raises(cli.ConfigError):
        cli.parse_ladder("3..2^-4")
    with pytest.raises(cli.ConfigError):
        cli.parse_nladder("2^-1,4")


def test_config_file_and_flag_override(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\nn = 12\nphi = phi2\ntau = 2^-5\nunknown_line_without_equals\n")
    cfg = cli.resolve_config(cli.read_config(f), {"n": "16"})
    assert cfg["n"] == 16 and cfg["functional"] == "phi2" and cfg["tau"] == Fraction(1, 32)
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    with pytest.raises(cli.ConfigError):
        cli.read_config(bad)


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv(cli.SEED_ENV, "42")
    assert cli.resolve_config({}, {})["seed"] == 42
    assert cli.resolve_config({}, {"seed": "7"})["seed"] == 7


def test_M_and_T(monkeypatch):
    cfg = cli.resolve_config({}, {"M": "64", "tau": "2^-6"})
    assert cfg["T"] == 1
    with pytest.raises(cli.ConfigError):
        cli.resolve_config({}, {"M": "64", "tau": "2^-6", "T": "2"})


def test_ergodic_report_schema(capsys):
    code, out, _ = run(capsys, "ergodic", *SMALL)
    assert code == 0
    assert f"#rng {RNG_VERSION}" in out and "#cfg seed=3" in out and "#cfg tau=2^-4" in out
    rows = body(out)
    assert len(rows) == 1 and list(rows[0]) == cli.ERGODIC_COLUMNS
    assert rows[0]["functional"] == "phi1" and 0.8 < float(rows[0]["value"]) < 1


def test_thread_count_does_not_change_output(capsys):
    _, a, _ = run(capsys, "weak-temporal", *SMALL, "--tau-ladder", "2^-2..2^-4", "--tau-ref", "2^-5",
                  "--threads", "1")
    _, b, _ = run(capsys, "weak-temporal", *SMALL, "--tau-ladder", "2^-2..2^-4", "--tau-ref", "2^-5",
                  "--threads", "8")
    assert a == b


def test_config_echo_round_trip(capsys, tmp_path):
    _, first, _ = run(capsys, "compare", *SMALL, "--tau-ladder", "2^-2..2^-4", "--tau-ref", "2^-5",
                      "--noise", "trace", "--out", str(tmp_path))
    saved = tmp_path / "compare.csv"
    assert saved.read_text() == first
    _, again, _ = run(capsys, "compare", "--config", str(saved))
    assert again == first
    _, from_cfg, _ = run(capsys, "compare", "--config", str(tmp_path / "compare.cfg"))
    assert from_cfg == first


def test_compare_rows_and_fits(capsys, tmp_path):
    code, out, _ = run(capsys, "compare", *SMALL, "--tau-ladder", "2^-2..2^-4", "--tau-ref", "2^-5",
                       "--out", str(tmp_path))
    assert code == 0
    rows = body(out)
    assert list(rows[0]) == cli.WEAK_COLUMNS
    assert [r["scheme"] for r in rows] == ["ee"] * 3 + ["lie"] * 3
    fits = [json.loads(l[5:]) for l in out.splitlines() if l.startswith("#fit ")]
    assert {f["scheme"] for f in fits} == {"ee", "lie"} and all("slope" in f for f in fits)
    fit_rows = list(csv.DictReader(open(tmp_path / "compare_fit.csv")))
    assert [r["scheme"] for r in fit_rows] == ["ee", "lie"]
    assert float(fit_rows[0]["slope"]) == pytest.approx(fits[0]["slope"])
    script = (tmp_path / "plot_compare.py").read_text()
    compile(script, "plot_compare.py", "exec")
    assert "compare.csv" in script


def test_weak_spatial_and_simulate(capsys):
    code, out, _ = run(capsys, "weak-spatial", "--n-ladder", "2,4,8", "--n-ref", "16", "--tau", "2^-8",
                       "--T", "2^-2", "--samples", "10")
    assert code == 0 and [r["level"] for r in body(out)] == ["2", "4", "8"]
    code, out, _ = run(capsys, "simulate", *SMALL, "--record-every", "4")
    rows = body(out)
    assert code == 0 and [r["step"] for r in rows] == ["0", "4", "8", "12", "16"]


def test_validation_failures_exit_1(capsys):
    for argv in (["ergodic", "--tau", "2^-1"],
                 ["ergodic", "--tau", "2^-4", "--T", "3/40"],
                 ["ergodic", "--noise", "pink"],
                 ["weak-temporal", "--tau-ladder", "3*2^-6", "--tau-ref", "2^-5", "--T", "1"]):
        code, out, err = run(capsys, *argv)
        assert code == cli.EXIT_VALIDATION, argv
        msg = json.loads(err.strip().splitlines()[-1])
        assert msg["status"] == "error" and msg["kind"] == "validation" and msg["reason"]
        assert out == ""


def test_runtime_failure_exit_2(capsys, monkeypatch):
    def boom(cfg):
        raise StepError("non-finite state", 17, np.array([3]))

    monkeypatch.setitem(cli.COMMANDS, "ergodic", boom)
    code, _, err = run(capsys, "ergodic")
    assert code == cli.EXIT_RUNTIME
    msg = json.loads(err)
    assert msg["kind"] == "runtime" and '"step": 17' in msg["reason"] and '"samples": [3]' in msg["reason"]


def test_verify_exit_codes(capsys, monkeypatch, tmp_path):
    code, out, _ = run(capsys, "verify", "--quick", "--out", str(tmp_path))
    assert code == 0 and "PASS  transform round trip" in out
    assert (tmp_path / "verify.csv").read_text().startswith("property,passed,detail")
    monkeypatch.setattr(verification, "CHECKS", [lambda: Check("always fails", False, "forced")])
    code, out, _ = run(capsys, "verify")
    assert code == cli.EXIT_VERIFY and "FAIL  always fails" in out
