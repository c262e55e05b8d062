"""Command-line front end.

Every config key can be set in a flat config file (--config) and overridden
on the command line with repeated --set key=value flags.  Exit codes:
0 success, 2 bad configuration or usage, 3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import harness
from .grid import TorusGrid, sample_initial
from .lattice import (lattice_points, mc_points, random_shifts,
                      save_generating_vector)
from .normals import map_points
from .observables import observable_by_name
from .potential import evaluate as evaluate_potential
from .splitting import propagate, scheme_by_name


def _load_cfg(config, sets) -> harness.ExperimentConfig:
    overrides = {}
    for item in sets:
        if "=" not in item:
            raise click.ClickException(f"--set expects key=value, got '{item}'")
        key, raw = (s.strip() for s in item.split("=", 1))
        overrides[key] = harness._parse_value(key, raw)
    if config:
        return harness.load_config(config, overrides)
    return harness.ExperimentConfig(**overrides)


def _fail_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, KeyError, TypeError) as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(2)
        except FloatingPointError as e:
            click.echo(f"numerical failure: {e}", err=True)
            sys.exit(3)
        except OSError as e:
            click.echo(f"i/o failure: {e}", err=True)
            sys.exit(4)
    return wrapper


common = [
    click.option("--config", type=click.Path(exists=True), default=None,
                 help="flat key-value config file"),
    click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
                 help="override any config key"),
    click.option("--out", default=None, help="output directory (overrides config)"),
]


def with_common(fn):
    for opt in reversed(common):
        fn = opt(fn)
    return fn


def _outdir(cfg, out):
    return Path(out) if out else Path(cfg.output)


@click.group()
def main():
    """Sampling and split-step solver toolkit for random-potential dynamics."""


@main.command()
@with_common
@click.option("--xi", default="", help="comma-separated coefficients (default zeros)")
@_fail_codes
def solve(config, sets, out, xi):
    """Propagate one sample and write the observable profile."""
    cfg = _load_cfg(config, sets)
    xivec = (np.array([float(v) for v in xi.split(",")]) if xi
             else np.zeros(cfg.m))
    if len(xivec) != cfg.m:
        raise ValueError(f"xi has {len(xivec)} entries, config says m={cfg.m}")
    grid = TorusGrid(cfg.M)
    pot = harness._build_potential(cfg)
    V = evaluate_potential(pot, xivec, grid)
    f = propagate(sample_initial(grid), scheme_by_name(cfg.scheme),
                  cfg.tau, cfg.nsteps, V)
    obs = observable_by_name(cfg.observable)(f)
    outdir = _outdir(cfg, out)
    outdir.mkdir(parents=True, exist_ok=True)
    harness.write_csv(outdir / "solve.csv",
                      {"x": grid.nodes.tolist(), "value": obs.values.tolist()})
    from .plotting import render_field
    render_field(obs, outdir, "solve")
    click.echo(f"wrote {outdir / 'solve.csv'}")


@main.command()
@with_common
@_fail_codes
def cbc(config, sets, out):
    """Construct a generating vector and write it to a file."""
    cfg = _load_cfg(config, sets)
    gv = harness.resolve_generating_vector(cfg)
    outdir = _outdir(cfg, out)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / f"gv_N{gv.N}_m{gv.m}.txt"
    save_generating_vector(gv, path)
    click.echo(f"wrote {path}")


@main.command()
@with_common
@click.option("--space", type=click.Choice(["unit", "normal"]), default="normal",
              help="emit raw unit-cube points or mapped normal points")
@click.option("--shift-index", default=0, help="which random shift (qmc only)")
@_fail_codes
def points(config, sets, out, space, shift_index):
    """Emit the sample points as CSV (column j, then m coordinate columns)."""
    cfg = _load_cfg(config, sets)
    if cfg.sampler == "qmc":
        gv = harness.resolve_generating_vector(cfg)
        shifts = random_shifts(cfg.R, cfg.m, cfg.seed).shifts
        if not (0 <= shift_index < cfg.R):
            raise ValueError(f"shift index {shift_index} outside [0, {cfg.R})")
        pts = lattice_points(gv, shifts[shift_index])
        if space == "normal":
            pts = map_points(pts)
    else:
        if space == "unit":
            raise ValueError("mc points are generated directly in normal space")
        pts = mc_points(cfg.N, cfg.m, cfg.seed)
    cols = {"j": list(range(1, pts.shape[0] + 1))}
    for d in range(cfg.m):
        cols[f"x{d + 1}"] = pts[:, d].tolist()
    outdir = _outdir(cfg, out)
    outdir.mkdir(parents=True, exist_ok=True)
    harness.write_csv(outdir / "points.csv", cols)
    click.echo(f"wrote {outdir / 'points.csv'}")


@main.command()
@with_common
@_fail_codes
def estimate(config, sets, out):
    """Run the sampling estimator and write result CSVs plus a manifest."""
    cfg = _load_cfg(config, sets)
    result = (harness.qmc_estimate(cfg) if cfg.sampler == "qmc"
              else harness.mc_estimate(cfg))
    files = harness.emit_outputs(result, _outdir(cfg, out), basename="estimate")
    for f in files:
        click.echo(f"wrote {f}")


@main.command("study-time")
@with_common
@click.option("--taus", default="0.025,0.0125,0.00625,0.003125,0.0015625",
              help="comma-separated time steps")
@_fail_codes
def study_time(config, sets, out, taus):
    """Temporal convergence study against the collocation reference."""
    cfg = _load_cfg(config, sets)
    ladder = [float(t) for t in taus.split(",")]
    study = harness.run_time_study(cfg, ladder)
    files = harness.emit_outputs(study, _outdir(cfg, out), basename="study_time")
    for f in files:
        click.echo(f"wrote {f}")
    for name, fit in study.fits.items():
        click.echo(f"slope({name}) = {fit.slope:.4f}")


@main.command("study-samples")
@with_common
@click.option("--ladder", default="256,512,1024,2048,4096,8192",
              help="comma-separated per-shift sample counts N")
@click.option("--mode", type=click.Choice(["l2", "stderr"]), default="l2")
@_fail_codes
def study_samples(config, sets, out, ladder, mode):
    """Sampling convergence study over an N ladder."""
    cfg = _load_cfg(config, sets)
    Ns = [int(v) for v in ladder.split(",")]
    study = harness.run_sample_study(cfg, Ns, mode=mode)
    files = harness.emit_outputs(study, _outdir(cfg, out), basename="study_samples")
    for f in files:
        click.echo(f"wrote {f}")
    for name, fit in study.fits.items():
        click.echo(f"slope({name}) = {fit.slope:.4f}")


@main.command()
@with_common
@_fail_codes
def reference(config, sets, out):
    """Compute the tensor-collocation reference and write the profile CSV."""
    cfg = _load_cfg(config, sets)
    ref = harness.reference_solution(cfg)
    outdir = _outdir(cfg, out)
    outdir.mkdir(parents=True, exist_ok=True)
    harness.write_csv(outdir / "reference.csv",
                      {"x": ref.grid.nodes.tolist(), "value": ref.values.tolist()})
    from .plotting import render_field
    render_field(ref, outdir, "reference")
    click.echo(f"wrote {outdir / 'reference.csv'}")


@main.command()
@click.argument("csv_path", type=click.Path(exists=True))
@click.option("--x-col", default=None, help="abscissa column (default: first)")
@click.option("--y-col", default=None, help="error column (default: second)")
@click.option("--window", default=4, help="number of trailing points to fit")
@click.option("--kind", type=click.Choice(["samples", "time"]), default="samples")
@_fail_codes
def fit(csv_path, x_col, y_col, window, kind):
    """Fit a log-log convergence rate on an existing study CSV."""
    lines = Path(csv_path).read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    xi = header.index(x_col) if x_col else 0
    yi = header.index(y_col) if y_col else 1
    xs = [float(r[xi]) for r in rows]
    ys = [float(r[yi]) for r in rows]
    result = harness.fit_rate(xs, ys, window=window, kind=kind)
    click.echo(json.dumps({"slope": result.slope, "intercept": result.intercept,
                           "window": list(result.window)}))


if __name__ == "__main__":
    main()
