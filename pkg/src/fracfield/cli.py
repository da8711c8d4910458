"""Command-line surface.

Exit codes: 0 success, 1 configuration/validation error, 2 numerical failure.
The master seed resolves as: explicit flag > config file > FRACFIELD_SEED
environment variable > built-in default.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import __version__
from .config import dump_config, load_config
from .errors import ConfigError, FracfieldError
from .harness import (
    RunConfig,
    convergence_report,
    load_records,
    run_campaign,
    write_convergence_csv,
    write_plots,
)

DEFAULT_SEED = RunConfig.__dataclass_fields__["seed"].default


def _resolve_seed(flag: int | None, config_seed: int | None = None) -> int:
    if flag is not None:
        return flag
    if config_seed is not None:
        return config_seed
    env = os.environ.get("FRACFIELD_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"FRACFIELD_SEED must be an integer, got {env!r}")
    return DEFAULT_SEED


@click.group()
@click.version_option(version=__version__)
def cli():
    """Simulation lab for increment statistics of paired random fields on
    Poisson-Delaunay graphs."""


@cli.command()
@click.option("--config", "config_path", type=click.Path(), required=True,
              help="TOML campaign configuration.")
@click.option("--seed", type=int, default=None, help="Override the master seed.")
@click.option("--workers", type=int, default=None, help="Worker processes.")
@click.option("--out", type=click.Path(), default=None, help="Override output_dir.")
def simulate(config_path, seed, workers, out):
    """Run the full campaign described by a config file."""
    cfg = load_config(config_path)
    updates: dict = {"seed": _resolve_seed(seed, cfg.seed)}
    if workers is not None:
        updates["workers"] = workers
    if out is not None:
        updates["output_dir"] = out
    cfg = RunConfig.from_dict(cfg.to_dict() | updates)
    records = run_campaign(cfg, progress=True)
    n_failed = sum(not r.ok for r in records)
    click.echo(f"campaign complete: {len(records)} replicates, {n_failed} failed "
               f"-> {cfg.output_dir}")
    if n_failed:
        raise FracfieldError(f"{n_failed} replicates failed")


@cli.group()
def constants():
    """Limit-constant evaluation and the typical-edge density table."""


@constants.command("compute")
@click.option("--alpha", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default="constants.json", show_default=True)
@click.option("--fast", is_flag=True, help="Smaller Monte Carlo budgets.")
@click.option("--nodes", type=int, default=None, help="Override the z-grid node count.")
@click.option("--samples", type=int, default=None, help="Override MC samples per node.")
def constants_compute(alpha, seed, out, fast, nodes, samples):
    """Evaluate c_V2 and c_V3 with error estimates."""
    from .consts import compute_constants

    report = compute_constants(
        alpha, _resolve_seed(seed), fast=fast, n_nodes=nodes, n_samples=samples
    )
    Path(out).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    click.echo(
        f"alpha={alpha:g}: c_V2 = {report.c_v2:.6f} (+-{report.c_v2_err:.2g}), "
        f"c_V3 = {report.c_v3:.6f} (+-{report.c_v3_err:.2g}) -> {out}"
    )


@constants.command("table-fd")
@click.option("--out", type=click.Path(), default="fd.csv", show_default=True)
def constants_table_fd(out):
    """Dump the tabulated typical-edge length density as CSV."""
    from .palm import write_fd_csv

    write_fd_csv(out)
    click.echo(f"typical-edge density table -> {out}")


@cli.command()
@click.option("--fast", is_flag=True, help="Small-instance oracle suite.")
@click.option("--seed", type=int, default=None)
def verify(fast, seed):
    """Run the oracle suites (geometry, covariance, constants)."""
    from .verify import run_verify

    if not run_verify(_resolve_seed(seed), fast=fast):
        raise FracfieldError("verification failed")
    click.echo("all verifications passed")


@cli.command("typical-cell")
@click.option("--samples", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default="typical_cells.csv", show_default=True)
def typical_cell(samples, seed, out):
    """Dump typical-cell draws (circumradius, side lengths, area) as CSV."""
    from .palm import sample_typical_cells
    from .rng import substream

    batch = sample_typical_cells(substream(_resolve_seed(seed), "cli", "cells"), samples)
    with open(out, "w") as fh:
        fh.write("r,d12,d23,d13,area\n")
        for r, d12, d23, d13, area in zip(
            batch.r, batch.d12, batch.d23, batch.d13, batch.areas
        ):
            fh.write(f"{r:.12g},{d12:.12g},{d23:.12g},{d13:.12g},{area:.12g}\n")
    click.echo(f"{samples} typical cells -> {out}")


@cli.command()
@click.option("--run", "run_dir", type=click.Path(), required=True,
              help="Campaign output directory (with manifest.json).")
def report(run_dir):
    """Regenerate aggregates and plots from persisted records."""
    root = Path(run_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"no manifest.json under {run_dir}")
    manifest = json.loads(manifest_path.read_text())
    alpha = manifest["config"]["alpha"]
    records = load_records(root, alpha)
    agg = convergence_report(records, alpha)
    (root / "convergence.json").write_text(json.dumps(agg, indent=2, sort_keys=True) + "\n")
    write_convergence_csv(root / "convergence.csv", agg)
    write_plots(root, agg)
    click.echo(f"aggregates regenerated from {len(records)} records -> {run_dir}")


@cli.command("config-dump")
@click.option("--out", type=click.Path(), default="run.toml", show_default=True)
def config_dump(out):
    """Write the default configuration (all recorded defaults) to a TOML file."""
    dump_config(RunConfig(), out)
    click.echo(f"default config -> {out}")


def main(argv=None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return 1
    except click.exceptions.ClickException as exc:
        exc.show()
        return 1
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except FracfieldError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
