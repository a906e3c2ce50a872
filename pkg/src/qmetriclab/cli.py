"""Command-line front end for the verification suites."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import harness
from .elements import load_element
from .fixtures import SPACE_CONFIGS, TOWER_CONFIGS
from .seminorms import af_propinquity_bound, l_seminorm, xn_factors
from .towers import BetaSequence


def _echo_report(report: harness.Report, fmt: str, out: str | None) -> None:
    path = harness.emit_report(report, fmt, out)
    s = report.summary
    click.echo(
        f"{report.mode}: rows={s['rows']} failures={s['failures']} "
        f"max_violation={s['max_violation']:.3e} -> {'PASS' if report.passed else 'FAIL'}"
    )
    click.echo(f"report written to {path}")


def _finish(passed: bool) -> None:
    sys.exit(0 if passed else 1)


def _load_json_arg(value: str):
    """Accept inline JSON or a path to a JSON file."""
    value = value.strip()
    if value.startswith("{") or value.startswith("["):
        return json.loads(value)
    with open(value, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _tower_ref(value: str):
    return value if value in TOWER_CONFIGS else _load_json_arg(value)


def _space_ref(value: str):
    return value if value in SPACE_CONFIGS else _load_json_arg(value)


@click.group()
def main():
    """Certificate suites for tower seminorms, ideal balls, and repair maps."""


# -- tower --------------------------------------------------------------------


@main.group()
def tower():
    """Tower-level utilities."""


@tower.command("validate")
@click.argument("tower_ref")
def tower_validate(tower_ref):
    """Check every structural invariant of a tower config."""
    from .towers import tower_from_config

    ref = _tower_ref(tower_ref)
    if isinstance(ref, str):
        from .fixtures import builtin_tower

        t, _ = builtin_tower(ref)
    else:
        t, _ = tower_from_config(ref)
    report = t.validate()
    for line in report.lines():
        click.echo(line)
    _finish(report.passed)


# -- af -----------------------------------------------------------------------


@main.group()
def af():
    """Suites for the matrix-tower side."""


def _resolve_tower_arg(tower_ref):
    return harness._resolve_tower(_tower_ref(tower_ref))


@af.command("lseminorm")
@click.argument("tower_ref")
@click.option("--element", "element_path", required=True, type=click.Path(exists=True))
def af_lseminorm(tower_ref, element_path):
    """Evaluate the tower seminorm of a serialized element."""
    t, beta = _resolve_tower_arg(tower_ref)
    a = load_element(element_path)
    click.echo(repr(l_seminorm(t, beta, a)))
    _finish(True)


@af.command("bound")
@click.argument("tower_ref")
@click.option("-n", "--level", type=int, required=True)
def af_bound(tower_ref, level):
    """Print the level bound beta(n) and the recovery constants x'_n, x_n."""
    _, beta = _resolve_tower_arg(tower_ref)
    click.echo(f"beta({level}) = {af_propinquity_bound(beta, level)!r}")
    if level >= 1:
        xf = xn_factors(beta, level)
        click.echo(f"x'_{level} = {xf.x_prime!r}")
        click.echo(f"x_{level} = {xf.x!r}")
        click.echo(f"max(beta, x-1) = {xf.bound!r}")
    _finish(True)


@af.command("certify")
@click.argument("tower_ref")
@click.option("--ideal", "ideal_specs", multiple=True,
              help="JSON ideal config {\"top_support\": [...]}; repeatable. "
                   "Default: the full ideal.")
@click.option("--samples", default=200, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--tol", default=1e-8, show_default=True, type=float)
@click.option("--format", "fmt", default="json", type=click.Choice(["json", "csv"]))
@click.option("--out", default=None, type=click.Path())
def af_certify(tower_ref, ideal_specs, samples, seed, tol, fmt, out):
    """Run the recovery and imprint certificate sweep."""
    ideals = [json.loads(s) for s in ideal_specs] or [{"top_support": None}]
    cfg = {
        "mode": "af_certificates",
        "tower": _tower_ref(tower_ref),
        "ideals": ideals,
        "samples": samples,
        "seed": seed,
        "tol": tol,
    }
    report = harness.run_experiment(cfg)
    _echo_report(report, fmt, out)
    _finish(report.passed)


@af.command("converge")
@click.argument("tower_ref")
@click.option("--sequence", required=True,
              help="JSON list of ideal configs, inline or a file path.")
@click.option("--limit", required=True,
              help="JSON ideal config of the limit, inline or a file path.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--format", "fmt", default="csv", type=click.Choice(["json", "csv"]))
@click.option("--out", default=None, type=click.Path())
def af_converge(tower_ref, sequence, limit, seed, fmt, out):
    """Tabulate certificate bounds for an ideal sequence against its limit."""
    cfg = {
        "mode": "af_convergence",
        "tower": _tower_ref(tower_ref),
        "sequence": _load_json_arg(sequence),
        "limit": _load_json_arg(limit),
        "seed": seed,
    }
    report = harness.run_experiment(cfg)
    _echo_report(report, fmt, out)
    _finish(report.passed)


# -- comm ---------------------------------------------------------------------


@main.group()
def comm():
    """Suites for the function-space side."""


@comm.command("repair")
@click.option("--trials", default=500, show_default=True, type=int)
@click.option("--max-points", default=12, show_default=True, type=int)
@click.option("--space", "space_ref", default=None,
              help="Optional fixed space (builtin name, JSON, or path).")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--tol", default=1e-9, show_default=True, type=float)
@click.option("--format", "fmt", default="json", type=click.Choice(["json", "csv"]))
@click.option("--out", default=None, type=click.Path())
def comm_repair(trials, max_points, space_ref, seed, tol, fmt, out):
    """Random sweep of the ball-repair certificate."""
    cfg = {
        "mode": "comm_repair",
        "trials": trials,
        "max_points": max_points,
        "seed": seed,
        "tol": tol,
    }
    if space_ref:
        cfg["space"] = _space_ref(space_ref)
    report = harness.run_experiment(cfg)
    _echo_report(report, fmt, out)
    _finish(report.passed)


@comm.command("ball-haus")
@click.argument("space_ref", required=False, default=None)
@click.option("--f1", default=None, help="Comma-separated labels of the first zero set.")
@click.option("--f2", default=None, help="Comma-separated labels of the second zero set.")
@click.option("--fixtures", default=6, show_default=True, type=int,
              help="Number of random fixtures when no space is given.")
@click.option("--samples", default=8, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--tol", default=1e-3, show_default=True, type=float)
@click.option("--format", "fmt", default="json", type=click.Choice(["json", "csv"]))
@click.option("--out", default=None, type=click.Path())
def comm_ball_haus(space_ref, f1, f2, fixtures, samples, seed, tol, fmt, out):
    """Sampled ball-Hausdorff estimates against the repair bound."""
    if space_ref:
        if not (f1 and f2):
            raise click.UsageError("--f1 and --f2 are required with a space")
        fixture_list = [
            {
                "space": _space_ref(space_ref),
                "f1": [s for s in f1.split(",") if s],
                "f2": [s for s in f2.split(",") if s],
            }
        ]
        cfg_fixtures: object = fixture_list
    else:
        cfg_fixtures = fixtures
    cfg = {
        "mode": "comm_ball_haus",
        "fixtures": cfg_fixtures,
        "samples": samples,
        "seed": seed,
        "tol": tol,
    }
    report = harness.run_experiment(cfg)
    _echo_report(report, fmt, out)
    _finish(report.passed)


# -- triples ------------------------------------------------------------------


@main.group()
def triples():
    """Growth-function admissibility checks."""


@triples.command("check")
@click.option("--samples", default=10000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--format", "fmt", default="csv", type=click.Choice(["json", "csv"]))
@click.option("--out", default=None, type=click.Path())
def triples_check(samples, seed, fmt, out):
    """Sweep the domination and monotonicity inequalities on random tuples."""
    cfg = {"mode": "triple_check", "tuples": samples, "seed": seed}
    report = harness.run_experiment(cfg)
    _echo_report(report, fmt, out)
    _finish(report.passed)


# -- run ----------------------------------------------------------------------


@main.command("run")
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--format", "fmt", default="json", type=click.Choice(["json", "csv"]))
@click.option("--out", default=None, type=click.Path())
@click.option("--seed", default=None, type=int, help="Override the config seed.")
@click.option("--samples", default=None, type=int, help="Override the sample count.")
@click.option("--tol", default=None, type=float, help="Override the tolerance.")
def run_cmd(config_path, fmt, out, seed, samples, tol):
    """Run an experiment config file."""
    with open(config_path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if seed is not None:
        raw["seed"] = seed
    if samples is not None:
        raw["samples"] = samples
    if tol is not None:
        raw["tol"] = tol
    try:
        report = harness.run_experiment(raw)
    except harness.ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    _echo_report(report, fmt, out)
    _finish(report.passed)


if __name__ == "__main__":
    main()
