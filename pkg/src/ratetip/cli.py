"""Command-line surface.

Subcommands: branches, series, pullback, tip, figure, validate.  Every
command resolves its parameters with precedence flags > config file >
defaults, writes CSV/JSON (and PNG for figures) under --out, and maps
errors to exit codes: 0 success, 1 usage or configuration, 2 violated
mathematical precondition, 3 convergence failure.
"""

from __future__ import annotations

import os
import sys

import click
import numpy as np

from . import __version__
from .asymptotics import build_series_approximation, series_summary
from .equilibria import branches_for, min_branch_gap
from .errors import RatetipError, UsageError
from .figures import write_figure
from .integrate import (DEFAULT_IVP_TOLERANCE, estimate_pullback_attractor,
                        estimate_pullback_repeller)
from .model import REGISTRY, get_model, validate_ramp
from .reporting import read_config, write_csv, write_json
from .tipping import PROBE_TOLERANCE, delta_curve, detect_tipping


def _parse_range(text: str):
    try:
        lo_text, hi_text = text.split(":")
        lo, hi = float(lo_text), float(hi_text)
    except ValueError as exc:
        raise UsageError(f"expected lo:hi, got {text!r}") from exc
    if not 0 < lo < hi:
        raise UsageError(f"range must satisfy 0 < lo < hi, got {text!r}")
    return lo, hi


def _opt(config: dict, name: str, flag, default, cast=float):
    """Resolve one option: explicit flag > config file > default."""
    if flag is not None:
        return flag
    raw = config.get(name)
    if raw is None:
        return default
    try:
        return cast(raw)
    except UsageError:
        raise
    except (TypeError, ValueError) as exc:
        raise UsageError(f"config value {name}={raw!r} is invalid") from exc


def _load_config(path) -> dict:
    return read_config(path) if path else {}


def _load_model(config: dict, model_flag, zeta_flag):
    name = _opt(config, "model", model_flag, "quad_arctan", str)
    zeta = _opt(config, "zeta", zeta_flag, None, float)
    if zeta is not None and zeta <= 0:
        raise UsageError("frozen system has no equilibria")
    params = {}
    if zeta is not None:
        if name not in REGISTRY:
            raise UsageError("--zeta applies to built-in models only")
        params["zeta"] = zeta
    return get_model(name, **params)


def _out_dir(config: dict, out_flag) -> str:
    out = _opt(config, "out", out_flag, ".", str)
    os.makedirs(out, exist_ok=True)
    return out


def _common(command):
    decorators = [
        click.option("--model", "model_flag", default=None,
                     help="Built-in model name or model file path."),
        click.option("--zeta", "zeta_flag", type=float, default=None,
                     help="Frozen-field offset for built-in models."),
        click.option("--out", "out_flag", default=None,
                     help="Output directory (default: current directory)."),
        click.option("--tol", "tol_flag", type=float, default=None,
                     help="Integration tolerance."),
        click.option("--seed", "seed_flag", type=int, default=None,
                     help="Seed for randomized spot checks."),
        click.option("--config", "config_path", default=None,
                     help="Flat key=value configuration file."),
    ]
    for decorator in reversed(decorators):
        command = decorator(command)
    return command


@click.group()
@click.version_option(__version__, prog_name="ratetip")
def cli():
    """Rate-induced tipping diagnostics for scalar ramped ODEs."""


@cli.command()
@_common
def branches(model_flag, zeta_flag, out_flag, tol_flag, seed_flag,
             config_path):
    """Trace the quasi-static equilibrium branches to CSV."""
    config = _load_config(config_path)
    model = _load_model(config, model_flag, zeta_flag)
    out = _out_dir(config, out_flag)
    branch_s, branch_u = branches_for(model)
    gap = branch_s.values - branch_u.values
    path = os.path.join(out, "branches.csv")
    write_csv(path, [
        ("tau", branch_s.grid),
        ("lambda", branch_s.lambda_values),
        ("Xs", branch_s.values),
        ("Xu", branch_u.values),
        ("gap", gap),
        ("dxf_s", branch_s.dxf_values),
        ("dxf_u", branch_u.dxf_values),
    ], metadata={"model": model.name,
                 "d0": min_branch_gap(branch_s, branch_u),
                 "margin_s": branch_s.margin,
                 "margin_u": branch_u.margin})
    click.echo(f"wrote {path}")


@cli.command()
@_common
@click.option("--order", "order_flag", type=int, default=None,
              help="Series truncation order n (0..5).")
@click.option("--kind", "kind_flag",
              type=click.Choice(["stable", "unstable"]), default=None)
@click.option("--fit/--no-fit", "do_fit", default=True,
              help="Measure the error constant against the pullback oracle.")
def series(model_flag, zeta_flag, out_flag, tol_flag, seed_flag, config_path,
           order_flag, kind_flag, do_fit):
    """Asymptotic-series coefficients plus measured quality numbers."""
    config = _load_config(config_path)
    model = _load_model(config, model_flag, zeta_flag)
    out = _out_dir(config, out_flag)
    order = _opt(config, "order", order_flag, 1, int)
    kind = _opt(config, "kind", kind_flag, "stable", str)
    if do_fit:
        approx = build_series_approximation(model, kind, order)
        coeffs = approx.coefficients
        summary = series_summary(approx)
    else:
        from .asymptotics import compute_coefficients, validity_radius
        branch_s, branch_u = branches_for(model)
        branch = branch_s if kind == "stable" else branch_u
        coeffs = compute_coefficients(branch, model.field, model.ramp, order)
        summary = {"kind": kind, "order": order,
                   "sup_norms": [float(m) for m in coeffs.sup_norms],
                   "validity_radius": float(validity_radius(
                       coeffs, model.field, model.ramp))}
    csv_path = os.path.join(out, f"series_{kind}.csv")
    write_csv(csv_path,
              [("tau", coeffs.grid)]
              + [(f"a{i}", coeffs.coeff_values[i])
                 for i in range(order + 1)],
              metadata={"model": model.name, "order": order, "kind": kind})
    json_path = os.path.join(out, f"series_{kind}.json")
    summary["model"] = model.name
    write_json(json_path, summary)
    click.echo(f"wrote {csv_path}")
    click.echo(f"wrote {json_path}")


@cli.command()
@_common
@click.option("--r", "r_flag", type=float, default=None, required=False,
              help="Rate parameter (required).")
@click.option("--side", "side_flag",
              type=click.Choice(["attractor", "repeller", "both"]),
              default=None)
@click.option("--window", "window_flag", default=None,
              help="Time window lo:hi (default +/- 20/r).")
def pullback(model_flag, zeta_flag, out_flag, tol_flag, seed_flag,
             config_path, r_flag, side_flag, window_flag):
    """Estimate the pullback attracting/repelling solutions to CSV."""
    config = _load_config(config_path)
    model = _load_model(config, model_flag, zeta_flag)
    out = _out_dir(config, out_flag)
    r = _opt(config, "r", r_flag, None, float)
    if r is None:
        raise UsageError("--r is required")
    side = _opt(config, "side", side_flag, "both", str)
    tol = _opt(config, "tol", tol_flag, DEFAULT_IVP_TOLERANCE, float)
    window_text = _opt(config, "window", window_flag, None, str)
    if window_text is None:
        window = (-20.0 / r, 20.0 / r)
    else:
        try:
            lo_text, hi_text = window_text.split(":")
            window = (float(lo_text), float(hi_text))
        except ValueError as exc:
            raise UsageError(f"expected lo:hi, got {window_text!r}") from exc
    ts = np.linspace(window[0], window[1], 2001)
    columns = [("t", ts)]
    metadata = {"model": model.name, "r": r, "tol": tol}
    if side in ("attractor", "both"):
        attractor = estimate_pullback_attractor(model, r, window, tol)
        metadata["attractor_gap"] = attractor.convergence_gap
        metadata["attractor_window"] = "%g:%g" % attractor.window
        values = np.full(ts.shape, np.nan)
        mask = (ts >= attractor.window[0]) & (ts <= attractor.window[1])
        values[mask] = attractor.at(ts[mask])
        columns.append(("x_minus", values))
    if side in ("repeller", "both"):
        repeller = estimate_pullback_repeller(model, r, window, tol)
        metadata["repeller_gap"] = repeller.convergence_gap
        metadata["repeller_window"] = "%g:%g" % repeller.window
        values = np.full(ts.shape, np.nan)
        mask = (ts >= repeller.window[0]) & (ts <= repeller.window[1])
        values[mask] = repeller.at(ts[mask])
        columns.append(("x_plus", values))
    path = os.path.join(out, "pullback.csv")
    write_csv(path, columns, metadata=metadata)
    click.echo(f"wrote {path}")


@cli.command()
@_common
@click.option("--order", "order_flag", type=int, default=None,
              help="Series order n used by the probes.")
@click.option("--epsilon", "epsilon_flag", type=float, default=None)
@click.option("--tau", "tau_flag", type=float, default=None)
@click.option("--r-range", "r_range_flag", default=None,
              help="Scan range lo:hi (default 0.05:5).")
@click.option("--delta-curve/--no-delta-curve", "with_delta", default=False,
              help="Also sample the delta(n, tau) curve (slower).")
def tip(model_flag, zeta_flag, out_flag, tol_flag, seed_flag, config_path,
        order_flag, epsilon_flag, tau_flag, r_range_flag, with_delta):
    """Detect, localize, and classify rate-induced tipping."""
    config = _load_config(config_path)
    model = _load_model(config, model_flag, zeta_flag)
    out = _out_dir(config, out_flag)
    order = _opt(config, "order", order_flag, 1, int)
    epsilon = _opt(config, "epsilon", epsilon_flag, None, float)
    tau = _opt(config, "tau", tau_flag, None, float)
    r_range = _opt(config, "r_range", r_range_flag, (0.05, 5.0), _parse_range)
    if isinstance(r_range, str):
        r_range = _parse_range(r_range)
    tol = _opt(config, "tol", tol_flag, PROBE_TOLERANCE, float)
    report = detect_tipping(model, n=order, epsilon=epsilon, tau=tau,
                            r_range=r_range, probe_tol=tol)
    if with_delta and report.r_star is not None:
        samples = delta_curve(model, n=order, epsilon=report.epsilon,
                              r_star=report.r_star)
        report.delta_curve = [(s.tau, s.delta) for s in samples]
    json_path = os.path.join(out, "tip_report.json")
    write_json(json_path, report.to_json_dict())
    csv_path = os.path.join(out, "discriminants.csv")
    rows = [e for e in report.evidence if "d_out" in e]
    write_csv(csv_path, [
        ("r", [e["r"] for e in rows]),
        ("tau", [e["tau"] for e in rows]),
        ("d_out", [e["d_out"] for e in rows]),
        ("d_in", [e["d_in"] for e in rows]),
        ("flags", [";".join(e["flags"]) for e in rows]),
    ], metadata={"model": model.name, "n": report.n,
                 "epsilon": report.epsilon, "tau": report.tau})
    click.echo(f"wrote {json_path}")
    click.echo(f"wrote {csv_path}")
    summary = f"classification={report.classification.value}"
    if report.bracket is not None:
        summary += (f" r_star={report.r_star:.6g}"
                    f" bracket=[{report.bracket[0]:.6g},"
                    f"{report.bracket[1]:.6g}]")
    click.echo(summary)


@cli.command()
@click.argument("which", type=int)
@click.option("--out", "out_flag", default=None)
@click.option("--config", "config_path", default=None)
@click.option("--render/--no-render", "render", default=True,
              help="Also rasterize a PNG beside the CSV panels.")
def figure(which, out_flag, config_path, render):
    """Reproduce the data (and image) behind reference figure WHICH."""
    config = _load_config(config_path)
    out = _out_dir(config, out_flag)
    for path in write_figure(which, out, render=render):
        click.echo(f"wrote {path}")


@cli.command()
@_common
def validate(model_flag, zeta_flag, out_flag, tol_flag, seed_flag,
             config_path):
    """Check ramp and branch preconditions; nonzero exit on violations."""
    config = _load_config(config_path)
    model = _load_model(config, model_flag, zeta_flag)
    out = _out_dir(config, out_flag)
    seed = _opt(config, "seed", seed_flag, 0, int)
    rng = np.random.default_rng(seed)
    # stay inside the ramp's live region: beyond tau_tail the increments
    # drown in float roundoff and monotonicity checks turn meaningless
    span = max(1.0, min(40.0, model.ramp.tau_tail))
    grid = np.sort(np.concatenate([
        np.linspace(-span, span, 401),
        rng.uniform(-span, span, size=64),
    ]))
    ramp_report = validate_ramp(model.ramp, grid)
    branch_s, branch_u = branches_for(model)
    payload = {
        "model": model.name,
        "seed": seed,
        "ramp_ok": ramp_report.ok,
        "ramp_violations": ramp_report.violations,
        "lambda_minus": ramp_report.lambda_minus,
        "lambda_plus": ramp_report.lambda_plus,
        "d0": min_branch_gap(branch_s, branch_u),
        "margin_s": branch_s.margin,
        "margin_u": branch_u.margin,
    }
    path = os.path.join(out, "validate.json")
    write_json(path, payload)
    click.echo(f"wrote {path}")
    if not ramp_report.ok:
        raise RatetipError("; ".join(ramp_report.violations))
    click.echo("ok")


def run(argv=None) -> int:
    """Execute the CLI, mapping errors to the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except RatetipError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1


def main():
    sys.exit(run())
