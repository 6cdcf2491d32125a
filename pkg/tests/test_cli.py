"""Command-line surface: outputs, exit codes, config handling, determinism.

Commands are exercised through ``run(argv)`` because the exit-code
contract (1 usage, 2 math precondition, 3 convergence failure) is part
of the interface.
"""

import json

import numpy as np
import pytest

from ratetip.cli import run

QUAD_TEXT = """f: 0.1 + -1 * x^2 + 2 * x * lambda + -1 * lambda^2
ramp: arctan
range: -1 1
"""


# --- branches ----------------------------------------------------------------

def test_branches_csv(tmp_path, capsys):
    assert run(["branches", "--out", str(tmp_path)]) == 0
    assert "branches.csv" in capsys.readouterr().out
    lines = (tmp_path / "branches.csv").read_text().splitlines()
    meta = [l for l in lines if l.startswith("#")]
    assert any(l.startswith("# d0 = ") for l in meta)
    header = next(l for l in lines if not l.startswith("#"))
    assert header == "tau,lambda,Xs,Xu,gap,dxf_s,dxf_u"


def test_branches_deterministic(tmp_path):
    for sub in ("a", "b"):
        (tmp_path / sub).mkdir()
        assert run(["branches", "--out", str(tmp_path / sub)]) == 0
    assert ((tmp_path / "a" / "branches.csv").read_bytes()
            == (tmp_path / "b" / "branches.csv").read_bytes())


# --- series ------------------------------------------------------------------

def test_series_no_fit(tmp_path):
    assert run(["series", "--order", "2", "--no-fit",
                "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "series_stable.json").read_text())
    assert summary["order"] == 2
    assert summary["validity_radius"] > 0
    header = next(l for l in (tmp_path / "series_stable.csv")
                  .read_text().splitlines() if not l.startswith("#"))
    assert header == "tau,a0,a1,a2"


def test_series_unstable_kind(tmp_path):
    assert run(["series", "--order", "1", "--kind", "unstable", "--no-fit",
                "--out", str(tmp_path)]) == 0
    assert (tmp_path / "series_unstable.csv").exists()


def test_series_order_too_high(tmp_path, capsys):
    assert run(["series", "--order", "6", "--out", str(tmp_path)]) == 1
    assert "maximum" in capsys.readouterr().err


# --- pullback ----------------------------------------------------------------

def test_pullback_csv(tmp_path):
    assert run(["pullback", "--r", "0.15", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "pullback.csv").read_text()
    header = next(l for l in text.splitlines() if not l.startswith("#"))
    assert header == "t,x_minus,x_plus"


def test_pullback_requires_rate(tmp_path, capsys):
    assert run(["pullback", "--out", str(tmp_path)]) == 1
    assert "--r" in capsys.readouterr().err


def test_pullback_unreachable_window_exits_3(tmp_path):
    # above the critical rate the attractor dies long before t = 30
    assert run(["pullback", "--r", "0.5", "--window", "30:40",
                "--out", str(tmp_path)]) == 3


def test_pullback_bad_window_syntax(tmp_path):
    assert run(["pullback", "--r", "0.15", "--window", "oops",
                "--out", str(tmp_path)]) == 1


# --- tip ---------------------------------------------------------------------

def test_tip_frozen_model(tmp_path, capsys):
    assert run(["tip", "--model", "quad_frozen", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "end_point_tracking" in out
    payload = json.loads((tmp_path / "tip_report.json").read_text())
    assert payload["classification"] == "end_point_tracking"
    assert payload["r_star"] is None
    header = next(l for l in (tmp_path / "discriminants.csv")
                  .read_text().splitlines() if not l.startswith("#"))
    assert header == "r,tau,d_out,d_in,flags"


def test_tip_outside_tracking_regime_exits_2(tmp_path, capsys):
    assert run(["tip", "--r-range", "0.29:0.5", "--out", str(tmp_path)]) == 2
    assert "tracking regime" in capsys.readouterr().err


def test_tip_epsilon_precedence_flag_over_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("epsilon = 0.05\nmodel = quad_frozen\n")
    assert run(["tip", "--config", str(cfg), "--epsilon", "0.11",
                "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "tip_report.json").read_text())
    assert payload["epsilon"] == 0.11
    assert payload["model"] == "quad_frozen"


def test_tip_config_without_flags(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("epsilon = 0.07\nmodel = quad_frozen\n")
    assert run(["tip", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "tip_report.json").read_text())
    assert payload["epsilon"] == 0.07


def test_tip_user_model_file(tmp_path):
    model_file = tmp_path / "study.model"
    model_file.write_text(QUAD_TEXT)
    assert run(["tip", "--model", str(model_file), "--r-range", "0.05:0.1",
                "--tau", "30", "--epsilon", "0.2",
                "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "tip_report.json").read_text())
    assert payload["model"] == "study"
    assert payload["classification"] == "end_point_tracking"


# --- option and argument validation ------------------------------------------

def test_nonpositive_zeta_usage_error(tmp_path, capsys):
    assert run(["branches", "--zeta", "-0.5", "--out", str(tmp_path)]) == 1
    assert "no equilibria" in capsys.readouterr().err


def test_zeta_on_file_model_rejected(tmp_path, capsys):
    model_file = tmp_path / "study.model"
    model_file.write_text(QUAD_TEXT)
    assert run(["branches", "--model", str(model_file), "--zeta", "0.2",
                "--out", str(tmp_path)]) == 1
    assert "built-in" in capsys.readouterr().err


def test_unknown_subcommand():
    assert run(["frobnicate"]) == 1


def test_unknown_model(tmp_path):
    assert run(["branches", "--model", "nope", "--out", str(tmp_path)]) == 1


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("this is not key value\n")
    assert run(["tip", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "key=value" in capsys.readouterr().err


# --- figure ------------------------------------------------------------------

def test_figure_unknown_number(tmp_path, capsys):
    assert run(["figure", "9", "--out", str(tmp_path)]) == 1
    assert "known: 1..5" in capsys.readouterr().err


def test_figure_csv_only(tmp_path):
    assert run(["figure", "1", "--no-render", "--out", str(tmp_path)]) == 0
    csvs = sorted(p.name for p in tmp_path.glob("figure1*.csv"))
    assert csvs == ["figure1_panel1.csv", "figure1_panel2.csv"]
    assert not list(tmp_path.glob("*.png"))


# --- validate ----------------------------------------------------------------

@pytest.mark.parametrize("args", [
    [],
    ["--model", "quad_tanh", "--seed", "11"],
    ["--model", "quad_frozen"],
    ["--zeta", "1.1"],
])
def test_validate_builtin_models(tmp_path, capsys, args):
    assert run(["validate", *args, "--out", str(tmp_path)]) == 0
    assert "ok" in capsys.readouterr().out
    payload = json.loads((tmp_path / "validate.json").read_text())
    assert payload["ramp_ok"] is True
    assert payload["ramp_violations"] == []
    assert payload["d0"] > 0 and payload["margin_s"] > 0
