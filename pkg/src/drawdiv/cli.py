"""Command-line front end.

Every command is a pure function of (config, input files) -> (output files,
exit code); re-runs are byte-identical.  Exit codes: 0 success/pass,
2 verification fail, 3 numerical error, 4 usage error.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
from pydantic import ValidationError

from .errors import (
    DegenerateDiffusion,
    DomainError,
    DrawdivError,
    RegimeError,
)
from .model import ModelParams
from .service import handlers
from .service import schemas as S

EXIT_VERIFY_FAIL = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 4


def _model_options(fn):
    for opt in (
        click.option("--mu", type=float, default=None, help="drift rate"),
        click.option("--sigma", type=float, default=None, help="volatility"),
        click.option("--q", type=float, default=None, help="discount rate"),
        click.option("--a", type=float, default=None, help="drawdown fraction in (0,1)"),
        click.option("--cbar", type=float, default=None, help="maximum dividend rate"),
        click.option(
            "--config",
            "config_path",
            type=click.Path(exists=True, dir_okay=False),
            default=None,
            help="key=value file with mu, sigma, q, a, cbar",
        ),
    ):
        fn = opt(fn)
    return fn


def _resolve_model(mu, sigma, q, a, cbar, config_path) -> S.ModelIn:
    fields = {}
    if config_path is not None:
        p = ModelParams.from_text(Path(config_path).read_text())
        fields = {"mu": p.mu, "sigma": p.sigma, "q": p.q, "a": p.a, "cbar": p.cbar}
    for key, val in (("mu", mu), ("sigma", sigma), ("q", q), ("a", a), ("cbar", cbar)):
        if val is not None:
            fields[key] = val
    missing = {"mu", "sigma", "q", "a", "cbar"} - set(fields)
    if missing:
        raise DomainError(f"missing model parameters: {sorted(missing)}")
    model = S.ModelIn(**fields)
    model.to_params()  # validate ranges up front
    return model


def _trap(fn):
    """Map exceptions to the documented exit codes with error JSON on stderr."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DomainError, RegimeError, DegenerateDiffusion, ValidationError) as exc:
            _emit_error(exc)
            sys.exit(EXIT_USAGE)
        except DrawdivError as exc:
            _emit_error(exc)
            sys.exit(EXIT_NUMERICAL)

    return wrapper


def _emit_error(exc: Exception) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(payload), err=True)


@click.group()
def main():
    """Optimal dividend rates under a drawdown constraint."""


@main.command()
@_model_options
@click.option("--n-steps", type=int, default=2000, show_default=True)
@click.option(
    "--stepper", type=click.Choice(["euler", "heun"]), default="euler", show_default=True
)
@click.option("--c-low", type=float, default=0.0, show_default=True)
@click.option("--out-curves", type=click.Path(dir_okay=False), default="curves.csv")
@click.option("--out-boundary", type=click.Path(dir_okay=False), default="boundary.json")
@_trap
def solve(mu, sigma, q, a, cbar, config_path, n_steps, stepper, c_low, out_curves, out_boundary):
    """Solve the boundary values and integrate the optimal curves."""
    model = _resolve_model(mu, sigma, q, a, cbar, config_path)
    resp = handlers.handle_solve(
        S.SolveRequest(model=model, n_steps=n_steps, stepper=stepper, c_low=c_low)
    )
    Path(out_boundary).write_text(
        json.dumps(
            {
                "boundary": resp.boundary.model_dump(),
                "truncated": resp.truncated,
                "c_trunc": resp.c_trunc,
                "truncation_reason": resp.truncation_reason,
            },
            indent=2,
        )
        + "\n"
    )
    if resp.curves_csv is not None:
        Path(out_curves).write_text(resp.curves_csv)
        if resp.truncated:
            click.echo(f"curve grid truncated at c={resp.c_trunc}: {resp.truncation_reason}")
    else:
        click.echo("degenerate regime: no curves to solve (see boundary JSON)")


@main.command()
@_model_options
@click.option("--curves", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--n-x", type=int, default=400, show_default=True)
@click.option("--n-c", type=int, default=200, show_default=True)
@click.option("--tol", type=float, default=None, help="residual tolerance (default 1e-5*cbar)")
@click.option("--out", type=click.Path(dir_okay=False), default="verification.json")
@_trap
def verify(mu, sigma, q, a, cbar, config_path, curves, n_x, n_c, tol, out):
    """Check the assembled surface against the optimality conditions."""
    model = _resolve_model(mu, sigma, q, a, cbar, config_path)
    resp = handlers.handle_verify(
        S.VerifyRequest(
            model=model,
            curves_csv=Path(curves).read_text(),
            n_x=n_x,
            n_c=n_c,
            tol=tol,
        )
    )
    Path(out).write_text(json.dumps(resp.report, indent=2) + "\n")
    if not resp.passed:
        click.echo("verification FAILED", err=True)
        sys.exit(EXIT_VERIFY_FAIL)
    click.echo("verification passed")


@main.command()
@_model_options
@click.option("--curves", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--x-grid", default="0:60:500", show_default=True, help="start:stop:n")
@click.option("--c", "c_rate", type=float, required=True)
@click.option("--out", type=click.Path(dir_okay=False), default="value.csv")
@_trap
def value(mu, sigma, q, a, cbar, config_path, curves, x_grid, c_rate, out):
    """Evaluate the value surface along an x-grid at fixed rate c."""
    model = _resolve_model(mu, sigma, q, a, cbar, config_path)
    try:
        start_s, stop_s, n_s = x_grid.split(":")
        start, stop, n = float(start_s), float(stop_s), int(n_s)
    except ValueError as exc:
        raise DomainError(f"bad --x-grid {x_grid!r}, expected start:stop:n") from exc
    resp = handlers.handle_value(
        S.ValueRequest(
            model=model,
            curves_csv=Path(curves).read_text(),
            c=c_rate,
            x_start=start,
            x_stop=stop,
            x_n=n,
        )
    )
    Path(out).write_text(resp.csv)


@main.command()
@_model_options
@click.option(
    "--strategy",
    type=click.Choice(["constant", "refraction", "two-curve", "lump-sum"]),
    required=True,
)
@click.option("--x0", type=float, required=True)
@click.option("--c0", type=float, default=0.0, show_default=True)
@click.option("--d", type=float, default=None, help="constant strategy rate")
@click.option("--b", type=float, default=None, help="refraction threshold")
@click.option("--low", type=float, default=None)
@click.option("--high", type=float, default=None)
@click.option("--curves", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--dt", type=float, default=1e-3, show_default=True)
@click.option("--horizon", type=float, default=None)
@click.option("--paths", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default="simulation.json")
@_trap
def simulate(mu, sigma, q, a, cbar, config_path, strategy, x0, c0, d, b, low, high,
             curves, dt, horizon, paths, seed, out):
    """Monte Carlo estimate of a strategy's expected discounted dividends."""
    model = _resolve_model(mu, sigma, q, a, cbar, config_path)
    curves_csv = Path(curves).read_text() if curves is not None else None
    resp = handlers.handle_simulate(
        S.SimulateRequest(
            model=model,
            strategy=strategy,
            x0=x0,
            c0=c0,
            d=d,
            b=b,
            low=low,
            high=high,
            curves_csv=curves_csv,
            dt=dt,
            horizon=horizon,
            n_paths=paths,
            seed=seed,
        )
    )
    Path(out).write_text(resp.model_dump_json(indent=2) + "\n")


@main.command()
@click.option("--mu", type=float, required=True)
@click.option("--q", type=float, required=True)
@click.option("--a", type=float, required=True)
@click.option("--cbar", type=float, required=True)
@click.option("--x", type=float, default=None)
@click.option("--b", type=float, default=None)
@click.option("--out", type=click.Path(dir_okay=False), default="det.json")
@_trap
def det(mu, q, a, cbar, x, b, out):
    """Closed forms of the zero-volatility sandbox."""
    resp = handlers.handle_det(S.DetRequest(mu=mu, q=q, a=a, cbar=cbar, x=x, b=b))
    Path(out).write_text(resp.model_dump_json(indent=2) + "\n")


@main.command()
@_model_options
@click.option("--cbar-grid", required=True, help="comma-separated ceiling values")
@click.option("--skip-xstar", is_flag=True, default=False)
@click.option("--out", type=click.Path(dir_okay=False), default="asymptotics.csv")
@_trap
def asymptotics(mu, sigma, q, a, cbar, config_path, cbar_grid, skip_xstar, out):
    """Sweep the ceiling and tabulate boundary values with their expansions."""
    fields = {}
    if config_path is not None:
        p = ModelParams.from_text(Path(config_path).read_text())
        fields = {"mu": p.mu, "sigma": p.sigma, "q": p.q, "a": p.a}
    for key, val in (("mu", mu), ("sigma", sigma), ("q", q), ("a", a)):
        if val is not None:
            fields[key] = val
    missing = {"mu", "sigma", "q", "a"} - set(fields)
    if missing:
        raise DomainError(f"missing model parameters: {sorted(missing)}")
    try:
        grid = [float(v) for v in cbar_grid.split(",") if v.strip()]
    except ValueError as exc:
        raise DomainError(f"bad --cbar-grid {cbar_grid!r}") from exc
    if not grid:
        raise DomainError("empty --cbar-grid")
    resp = handlers.handle_asymptotics(
        S.AsymptoticsRequest(cbar_grid=grid, include_xstar=not skip_xstar, **fields)
    )
    Path(out).write_text(resp.csv)


if __name__ == "__main__":
    main()
