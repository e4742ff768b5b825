"""Command-line entry point: ``topodeeponet <subcommand> --config run.yaml``.

Exit status: 0 on success, 1 when a tolerance audit is flagged (unless
``--best-effort``), 2 for configuration errors, 3 when a stage fails.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from ..errors import ConfigError
from .config import load_config
from .reporting import write_report
from .runs import StageError, run_construct, run_discretize, run_evaluate, run_reduction_check, run_sweep, run_train

EXIT_FLAGGED = 1
EXIT_CONFIG = 2
EXIT_STAGE = 3


def common_options(fn):
    @click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False),
                  help="YAML experiment config.")
    @click.option("--seed", type=int, default=None, help="Override the config seed.")
    @click.option("--out", type=click.Path(file_okay=False), default=None,
                  help="Output directory (default: <output_dir>/<name>).")
    @click.option("--best-effort", is_flag=True, help="Exit 0 even when a tolerance audit is flagged.")
    @click.option("--workers", type=click.IntRange(min=1), default=1, help="Worker threads for evaluation.")
    @functools.wraps(fn)
    def wrapper(config_path, seed, out, best_effort, workers, **kw):
        try:
            cfg = load_config(config_path)
        except ConfigError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        if seed is not None:
            cfg = cfg.model_copy(update={"seed": seed})
        out_dir = Path(out) if out else Path(cfg.output_dir) / cfg.name
        return fn(cfg=cfg, out=out_dir, best_effort=best_effort, workers=workers, **kw)

    return wrapper


def _finish(report, out, best_effort):
    write_report(Path(out) / "report.json", report)
    for flag in report["flags"]:
        click.echo(f"flag: {flag}", err=True)
    ev = report.get("metrics", {}).get("evaluation")
    if ev:
        click.echo(f"sup error {ev['sup']:.6g}  mean {ev['mean']:.6g}")
    click.echo(f"report: {Path(out) / 'report.json'}")
    if report["flags"] and not best_effort:
        sys.exit(EXIT_FLAGGED)


def _guard(fn, *args):
    try:
        return fn(*args)
    except StageError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_STAGE)


@click.group()
def main():
    """Topological DeepONets: constructive builds, training and sensor studies."""


@main.command()
@common_options
def construct(cfg, out, best_effort, workers):
    """Build the covering-based separable approximant and its DeepONet."""
    _finish(_guard(run_construct, cfg, out, workers), out, best_effort)


@main.command("train")
@common_options
def train_cmd(cfg, out, best_effort, workers):
    """Train a DeepONet on sampled oracle data."""
    _finish(_guard(run_train, cfg, out, workers), out, best_effort)


@main.command()
@common_options
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Persisted model document.")
def evaluate(cfg, out, best_effort, workers, model_path):
    """Reload a model and recompute its sup error against the oracle."""
    _finish(_guard(run_evaluate, cfg, model_path, out, workers), out, best_effort)


@main.command()
@common_options
def discretize(cfg, out, best_effort, workers):
    """Certified sensor-count study for an integral functional."""
    report = _guard(run_discretize, cfg, out, workers)
    for k, err in report["metrics"]["table"]:
        click.echo(f"k={k:4d}  certified={err:.3e}")
    _finish(report, out, best_effort)


@main.command("reduction-check")
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(file_okay=False), default=None)
def reduction_check(seed, out):
    """Compare a coordinate-embedded network with a plain dense MLP."""
    report = run_reduction_check(seed)
    status = "PASS" if report["passed"] else "FAIL"
    click.echo(f"{status} euclidean reduction: max abs diff {report['max_abs_diff']:.3e}")
    if out:
        write_report(Path(out) / "report.json", report)
    if not report["passed"]:
        sys.exit(EXIT_FLAGGED)


@main.command()
@common_options
def sweep(cfg, out, best_effort, workers):
    """Run the configured pipeline over a list of parameter values."""
    _finish(_guard(run_sweep, cfg, out, workers), out, best_effort)


if __name__ == "__main__":
    main()
