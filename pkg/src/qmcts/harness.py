"""End-to-end drivers: estimators, reference solutions, rate fits, studies.

A run is described by a flat :class:`ExperimentConfig`.  The per-sample work
(potential evaluation, split-step propagation, observable extraction) is
batched; the reductions over samples, shifts, and collocation nodes happen
in a fixed ascending order with compensated summation so that results are
bitwise reproducible for a given config and seed.
"""

from __future__ import annotations

import hashlib
import json
import math
import subprocess
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .grid import TorusGrid, sample_initial
from .lattice import (GeneratingVector, cbc_construct, lattice_points,
                      load_generating_vector, random_shifts)
from .normals import map_points
from .observables import ObservableField, point_eval
from .potential import KLPotential, build_cosine_potential, decay_sequences, evaluate_batch
from .splitting import SplittingScheme, propagate_batch, scheme_by_name
from .weights import build_weight_spec

CHUNK = 4096
_OBSERVABLES = ("density", "current")


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ExperimentConfig:
    family: str = "cosine"
    alpha: float = 4.5
    m: int = 4
    offset: float = 1.0
    M: int = 128
    scheme: str = "strang"
    tau: float = 1e-3
    T: float = 1.0
    sampler: str = "qmc"      # qmc | mc
    N: int = 256
    R: int = 8
    seed: int = 0
    gv_source: str = "cbc"    # cbc | file:<path>
    p: float = 0.0            # 0 means infer from alpha
    delta: float = 0.1
    observable: str = "density"
    point_x: float | None = None
    ref_tau: float = 0.0      # 0 means reuse tau
    ref_M: int = 0            # 0 means reuse M
    ref_scheme: str = "strang"
    ref_prune: float = 1e-12
    fit_window: int = 4
    output: str = "out"

    def __post_init__(self):
        if self.N < 1 or self.R < 1 or self.m < 0:
            raise ValueError("need N >= 1, R >= 1, m >= 0")
        if self.sampler not in ("qmc", "mc"):
            raise ValueError(f"unknown sampler '{self.sampler}'")
        if self.observable not in _OBSERVABLES:
            raise ValueError(f"unknown observable '{self.observable}'")
        if self.tau <= 0 or self.T < 0:
            raise ValueError("need tau > 0 and T >= 0")
        if abs(self.T - self.tau * round(self.T / self.tau)) > 1e-12 * max(1.0, self.T):
            raise ValueError(f"T={self.T} is not an integer multiple of tau={self.tau}")

    @property
    def nsteps(self) -> int:
        return int(round(self.T / self.tau))

    @property
    def p_effective(self) -> float:
        # smallest summability exponent for the cosine family is 1/(alpha-1);
        # back off by 25% for a comfortable margin unless the user pinned p
        if self.p > 0:
            return self.p
        return min(1.0, 1.25 / (self.alpha - 1.0))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _parse_value(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ValueError(f"unknown config key '{key}'")
    t = _FIELD_TYPES[key]
    if key == "point_x":
        return None if raw.lower() in ("none", "") else float(raw)
    if t == "int":
        return int(raw)
    if t == "float":
        return float(raw)
    return raw


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a flat key-value config file ("key = value", '#' comments)."""
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, raw = (s.strip() for s in line.split("=", 1))
        else:
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = parts
        values[key] = _parse_value(key, raw)
    if overrides:
        values.update(overrides)
    return ExperimentConfig(**values)


# ---------------------------------------------------------------------------
# sample propagation core

def _build_potential(cfg: ExperimentConfig) -> KLPotential:
    if cfg.family != "cosine":
        raise ValueError(f"unknown potential family '{cfg.family}'")
    return build_cosine_potential(alpha=cfg.alpha, m=cfg.m, offset=cfg.offset)


def _observable_fields(values: np.ndarray, grid: TorusGrid) -> dict:
    """Per-sample observable profiles for a (B, M) batch of solutions."""
    import scipy.fft as sfft

    dens = np.abs(values) ** 2
    mult = 1j * grid.wavenumbers.copy()
    mult[grid.M // 2] = 0.0
    dpsi = sfft.ifft(mult[None, :] * sfft.fft(values, axis=1), axis=1)
    curr = np.imag(np.conj(values) * dpsi)
    return {"density": dens, "current": curr}


def _weighted_mean_fields(xis: np.ndarray, weights: np.ndarray | None,
                          cfg: ExperimentConfig, pot: KLPotential, grid: TorusGrid,
                          scheme: SplittingScheme, psi0: np.ndarray) -> dict:
    """Observable means sum_j w_j G(psi(xi_j)) over one block of samples.

    weights=None means the plain average 1/n sum G.  Samples are processed in
    CHUNK-sized blocks in order; block partials are reduced by exact fsum per
    grid node so the result does not depend on the chunking.
    """
    n = xis.shape[0]
    if weights is None:
        weights = np.full(n, 1.0 / n)
    partials = {name: [] for name in _OBSERVABLES}
    for lo in range(0, n, CHUNK):
        hi = min(lo + CHUNK, n)
        V = evaluate_batch(pot, xis[lo:hi], grid)
        batch = np.broadcast_to(psi0, (hi - lo, grid.M)).copy()
        batch = propagate_batch(batch, V, grid, scheme, cfg.tau, cfg.nsteps)
        if not np.all(np.isfinite(batch)):
            bad = int(np.argwhere(~np.isfinite(batch).all(axis=1))[0][0])
            raise FloatingPointError(
                f"non-finite solution for sample {lo + bad}, xi={xis[lo + bad]}")
        obs = _observable_fields(batch, grid)
        w = weights[lo:hi, None]
        for name in _OBSERVABLES:
            partials[name].append(np.sum(w * obs[name], axis=0))
    out = {}
    for name in _OBSERVABLES:
        stacked = np.stack(partials[name])
        out[name] = np.array([math.fsum(stacked[:, i]) for i in range(grid.M)])
    return out


def _comp_mean(rows: np.ndarray) -> np.ndarray:
    """Column-wise mean of (R, M) rows, exact summation in ascending order."""
    R = rows.shape[0]
    return np.array([math.fsum(rows[:, i]) for i in range(rows.shape[1])]) / R


# ---------------------------------------------------------------------------
# estimators

@dataclass(frozen=True)
class EstimatorResult:
    per_shift: np.ndarray        # (R, M) per-shift mean observable profiles
    mean: np.ndarray             # (M,) mean over shifts
    std_error: float
    grid: TorusGrid
    observable: str
    point_x: float | None
    wall_time: float
    config_hash: str

    @property
    def R(self) -> int:
        return self.per_shift.shape[0]

    def mean_field(self) -> ObservableField:
        return ObservableField(grid=self.grid, values=self.mean, name=self.observable)

    def per_shift_scalars(self) -> np.ndarray:
        """Point values Q_k of the configured functional, one per shift."""
        x0 = self.point_x
        if x0 is None:
            raise ValueError("no point functional configured")
        return np.array([point_eval(ObservableField(self.grid, row, self.observable), x0)
                         for row in self.per_shift])


def standard_error(per_shift: np.ndarray) -> float:
    """sqrt( (1/(R(R-1))) sum_k (Q_k - mean)^2 ), the usual unbiased proxy."""
    q = np.asarray(per_shift, dtype=np.float64)
    R = len(q)
    if R < 2:
        raise ValueError("standard error needs at least 2 values")
    mean = math.fsum(q) / R
    ss = math.fsum((v - mean) ** 2 for v in q)
    return math.sqrt(ss / (R * (R - 1)))


def _stderr_field(per_shift: np.ndarray) -> np.ndarray:
    return np.array([standard_error(per_shift[:, i]) for i in range(per_shift.shape[1])])


def resolve_generating_vector(cfg: ExperimentConfig, N: int | None = None) -> GeneratingVector:
    N = cfg.N if N is None else N
    if cfg.gv_source.startswith("file:"):
        gv = load_generating_vector(cfg.gv_source[5:])
        if gv.N != N or gv.m < cfg.m:
            raise ValueError(f"generating vector file has N={gv.N}, m={gv.m}; "
                             f"need N={N}, m>={cfg.m}")
        return GeneratingVector(z=gv.z[:cfg.m], N=N)
    if cfg.gv_source != "cbc":
        raise ValueError(f"unknown gv_source '{cfg.gv_source}'")
    pot = _build_potential(cfg)
    spec = build_weight_spec(decay_sequences(pot).b, cfg.p_effective, cfg.delta, T=cfg.T)
    return cbc_construct(cfg.m, N, spec)


def _all_fields_estimate(cfg: ExperimentConfig, gv: GeneratingVector | None = None,
                         shifts=None) -> tuple[dict, float]:
    """Per-shift mean profiles for every observable: dict name -> (R, M)."""
    t0 = time.perf_counter()
    pot = _build_potential(cfg)
    grid = TorusGrid(cfg.M)
    scheme = scheme_by_name(cfg.scheme)
    psi0 = sample_initial(grid).values

    rows = {name: np.empty((cfg.R, grid.M)) for name in _OBSERVABLES}
    if cfg.sampler == "qmc":
        if gv is None:
            gv = resolve_generating_vector(cfg)
        if shifts is None:
            shifts = random_shifts(cfg.R, cfg.m, cfg.seed).shifts
        for k in range(cfg.R):
            xis = map_points(lattice_points(gv, shifts[k]))
            means = _weighted_mean_fields(xis, None, cfg, pot, grid, scheme, psi0)
            for name in _OBSERVABLES:
                rows[name][k] = means[name]
    else:
        for k in range(cfg.R):
            xis = _mc_batch_points(cfg.N, cfg.m, cfg.seed, k)
            means = _weighted_mean_fields(xis, None, cfg, pot, grid, scheme, psi0)
            for name in _OBSERVABLES:
                rows[name][k] = means[name]
    return rows, time.perf_counter() - t0


def _mc_batch_points(N: int, m: int, seed: int, batch: int) -> np.ndarray:
    """Normal draws for MC batch k; a smaller N is a prefix of a larger one."""
    rng = np.random.Generator(np.random.Philox(key=(seed << 32) + batch))
    return map_points(rng.random((N, m)))


def _wrap_result(cfg: ExperimentConfig, rows: dict, wall: float) -> EstimatorResult:
    grid = TorusGrid(cfg.M)
    per_shift = rows[cfg.observable]
    mean = _comp_mean(per_shift)
    if cfg.point_x is not None:
        vals = np.array([point_eval(ObservableField(grid, r, cfg.observable), cfg.point_x)
                         for r in per_shift])
        se = standard_error(vals) if cfg.R >= 2 else 0.0
    else:
        # scalar summary of the pointwise error bars: L2 norm of the stderr field
        se = (float(np.sqrt(grid.h) * np.linalg.norm(_stderr_field(per_shift)))
              if cfg.R >= 2 else 0.0)
    return EstimatorResult(per_shift=per_shift, mean=mean, std_error=se, grid=grid,
                           observable=cfg.observable, point_x=cfg.point_x,
                           wall_time=wall, config_hash=cfg.digest())


def qmc_estimate(cfg: ExperimentConfig, gv: GeneratingVector | None = None) -> EstimatorResult:
    """Randomly shifted lattice estimate Q_bar of E[G(|psi(T)|^2)]."""
    if cfg.sampler != "qmc":
        cfg = replace(cfg, sampler="qmc")
    rows, wall = _all_fields_estimate(cfg, gv=gv)
    return _wrap_result(cfg, rows, wall)


def mc_estimate(cfg: ExperimentConfig) -> EstimatorResult:
    """Plain Monte Carlo estimate; R independent batches give the error bar."""
    if cfg.sampler != "mc":
        cfg = replace(cfg, sampler="mc")
    rows, wall = _all_fields_estimate(cfg)
    return _wrap_result(cfg, rows, wall)


# ---------------------------------------------------------------------------
# reference solution: tensor Gauss-Hermite collocation

def gauss_hermite_nodes(n: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of n-point quadrature for the standard normal."""
    x, w = hermgauss(n)
    return x * math.sqrt(2.0), w / math.sqrt(math.pi)


def _tensor_nodes(m: int, n: int, prune: float) -> tuple[np.ndarray, np.ndarray]:
    """Pruned tensor grid: nodes (K, m) and weights (K,), product weight >= prune."""
    x, w = gauss_hermite_nodes(n)
    nodes = x[:, None]
    weights = w.copy()
    for _ in range(1, m):
        nodes = np.hstack([np.repeat(nodes, n, axis=0),
                           np.tile(x, len(weights))[:, None]])
        weights = (weights[:, None] * w[None, :]).ravel()
        keep = weights >= prune
        nodes, weights = nodes[keep], weights[keep]
    keep = weights >= prune
    return nodes[keep], weights[keep]


def reference_fields(cfg: ExperimentConfig) -> dict:
    """E[G(|psi|^2)] by tensor collocation, for every observable; m <= 4 only."""
    if cfg.m > 4:
        raise ValueError("tensor collocation reference is limited to m <= 4; "
                         "use the standard-error study mode for larger m")
    ref_cfg = replace(cfg,
                      tau=cfg.ref_tau if cfg.ref_tau > 0 else cfg.tau,
                      M=cfg.ref_M if cfg.ref_M > 0 else cfg.M,
                      scheme=cfg.ref_scheme)
    pot = _build_potential(ref_cfg)
    grid = TorusGrid(ref_cfg.M)
    scheme = scheme_by_name(ref_cfg.scheme)
    psi0 = sample_initial(grid).values
    if cfg.m == 0:
        nodes = np.zeros((1, 0))
        weights = np.array([1.0])
    else:
        nodes, weights = _tensor_nodes(cfg.m, 20, cfg.ref_prune)
    means = _weighted_mean_fields(nodes, weights, ref_cfg, pot, grid, scheme, psi0)
    return {name: ObservableField(grid=grid, values=means[name], name=name)
            for name in _OBSERVABLES}


def reference_solution(cfg: ExperimentConfig) -> ObservableField:
    return reference_fields(cfg)[cfg.observable]


def restrict_field(f: ObservableField, M: int) -> ObservableField:
    """Restrict to a coarser power-of-two grid whose nodes are a subset."""
    if f.grid.M == M:
        return f
    if f.grid.M % M != 0:
        raise ValueError(f"cannot restrict M={f.grid.M} onto M={M}")
    stride = f.grid.M // M
    return ObservableField(grid=TorusGrid(M), values=f.values[::stride], name=f.name)


# ---------------------------------------------------------------------------
# rate fitting

@dataclass(frozen=True)
class RateFit:
    points: tuple              # ((x, error), ...)
    slope: float
    intercept: float
    window: tuple              # indices used
    expected: float | None = None


def fit_rate(xs, errors, window: int | None = None, kind: str = "samples",
             expected: float | None = None) -> RateFit:
    """Least-squares log-log slope over the last `window` ladder points.

    kind="samples": slope of -log(err) vs log(N) (positive for decay).
    kind="time": slope of log(err) vs log(tau) (positive for decay).
    """
    xs = np.asarray(xs, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    if np.any(errors <= 0):
        raise ValueError("rate fit needs strictly positive errors")
    n = len(xs)
    if window is None or window <= 0 or window > n:
        window = n
    idx = tuple(range(n - window, n))
    if len(idx) < 2:
        raise ValueError("rate fit needs at least 2 points in the window")
    lx = np.log(xs[list(idx)])
    ly = np.log(errors[list(idx)])
    sign = -1.0 if kind == "samples" else 1.0
    slope, intercept = np.polyfit(lx, sign * ly, 1)
    return RateFit(points=tuple(zip(xs.tolist(), errors.tolist())),
                   slope=float(slope), intercept=float(intercept),
                   window=idx, expected=expected)


# ---------------------------------------------------------------------------
# studies

@dataclass(frozen=True)
class StudyResult:
    kind: str                 # "time" | "samples"
    columns: dict             # column name -> list of values, equal lengths
    fits: dict                # label -> RateFit
    config: ExperimentConfig
    wall_time: float


def run_time_study(cfg: ExperimentConfig, tau_ladder, refs: dict | None = None) -> StudyResult:
    """L2 relative errors of E[S], E[J] against the collocation reference.

    refs may carry precomputed reference fields (e.g. shared across studies);
    by default they are recomputed from the config.
    """
    from .observables import l2_relative_error

    t0 = time.perf_counter()
    if refs is None:
        refs = reference_fields(cfg)
    refs = {k: restrict_field(v, cfg.M) for k, v in refs.items()}
    gv = resolve_generating_vector(cfg) if cfg.sampler == "qmc" else None
    grid = TorusGrid(cfg.M)
    cols = {"tau": [], "err_density": [], "err_current": []}
    for tau in tau_ladder:
        run = replace(cfg, tau=float(tau))
        rows, _ = _all_fields_estimate(run, gv=gv)
        for name in _OBSERVABLES:
            mean = ObservableField(grid, _comp_mean(rows[name]), name)
            cols[f"err_{name}"].append(l2_relative_error(mean, refs[name]))
        cols["tau"].append(float(tau))
    fits = {name: fit_rate(cols["tau"], cols[f"err_{name}"], cfg.fit_window, kind="time")
            for name in _OBSERVABLES}
    return StudyResult(kind="time", columns=cols, fits=fits, config=cfg,
                       wall_time=time.perf_counter() - t0)


def run_sample_study(cfg: ExperimentConfig, N_ladder, mode: str = "l2",
                     refs: dict | None = None) -> StudyResult:
    """Sampling-error decay over an N ladder.

    mode="l2": L2 relative error of the mean profiles against the collocation
    reference at the same tau and M (m <= 4).  mode="stderr": standard error
    of the point functionals S_T(x0), J_T(x0), any m; x0 from cfg.point_x.
    """
    from .observables import l2_relative_error

    t0 = time.perf_counter()
    if mode not in ("l2", "stderr"):
        raise ValueError(f"unknown study mode '{mode}'")
    if mode == "stderr" and cfg.point_x is None:
        raise ValueError("stderr mode needs point_x")
    grid = TorusGrid(cfg.M)
    if mode == "l2":
        if refs is None:
            refs = reference_fields(cfg)
        refs = {k: restrict_field(v, cfg.M) for k, v in refs.items()}
    shifts_full = (random_shifts(cfg.R, cfg.m, cfg.seed).shifts
                   if cfg.sampler == "qmc" else None)
    cols = {"N": [], "N_total": []}
    metric = "err" if mode == "l2" else "stderr"
    for name in _OBSERVABLES:
        cols[f"{metric}_{name}"] = []
    for N in N_ladder:
        run = replace(cfg, N=int(N))
        gv = resolve_generating_vector(run) if cfg.sampler == "qmc" else None
        rows, _ = _all_fields_estimate(run, gv=gv, shifts=shifts_full)
        for name in _OBSERVABLES:
            if mode == "l2":
                mean = ObservableField(grid, _comp_mean(rows[name]), name)
                cols[f"err_{name}"].append(l2_relative_error(mean, refs[name]))
            else:
                vals = [point_eval(ObservableField(grid, r, name), cfg.point_x)
                        for r in rows[name]]
                cols[f"stderr_{name}"].append(standard_error(np.array(vals)))
        cols["N"].append(int(N))
        cols["N_total"].append(int(N) * cfg.R)
    fits = {name: fit_rate(cols["N_total"], cols[f"{metric}_{name}"],
                           cfg.fit_window, kind="samples")
            for name in _OBSERVABLES}
    return StudyResult(kind="samples", columns=cols, fits=fits, config=cfg,
                       wall_time=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# persistence

def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10,
                             cwd=Path(__file__).resolve().parent)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, columns: dict) -> None:
    names = list(columns)
    nrows = len(columns[names[0]]) if names else 0
    lines = [",".join(names)]
    for i in range(nrows):
        lines.append(",".join(_fmt(columns[name][i]) for name in names))
    path.write_text("\n".join(lines) + "\n")


def emit_outputs(result, outdir, basename: str = "study", figures: bool = True) -> list:
    """Write CSV tables, a JSON manifest, and convergence figures.

    The manifest holds the full config, seed, git description, and fit
    summaries.  Wall time is written to a side .log file, not the manifest,
    so that repeated runs with the same config produce identical bytes.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    if isinstance(result, EstimatorResult):
        csv_path = outdir / f"{basename}_per_shift.csv"
        cols = {"shift": list(range(result.R))}
        cols["value"] = ([float(v) for v in result.per_shift_scalars()]
                         if result.point_x is not None
                         else [float(np.sqrt(result.grid.h) *
                                     np.linalg.norm(row)) for row in result.per_shift])
        write_csv(csv_path, cols)
        written.append(csv_path)
        mean_path = outdir / f"{basename}_mean.csv"
        write_csv(mean_path, {"x": result.grid.nodes.tolist(),
                              "value": result.mean.tolist()})
        written.append(mean_path)
        manifest = {
            "kind": "estimate",
            "observable": result.observable,
            "point_x": result.point_x,
            "std_error": result.std_error,
            "mean_point": (float(point_eval(result.mean_field(), result.point_x))
                           if result.point_x is not None else None),
            "config_hash": result.config_hash,
            "git": _git_describe(),
        }
        wall = result.wall_time
    elif isinstance(result, StudyResult):
        csv_path = outdir / f"{basename}.csv"
        write_csv(csv_path, result.columns)
        written.append(csv_path)
        manifest = {
            "kind": f"{result.kind}-study",
            "config": result.config.to_dict(),
            "config_hash": result.config.digest(),
            "seed": result.config.seed,
            "fits": {k: {"slope": f.slope, "intercept": f.intercept,
                         "window": list(f.window)}
                     for k, f in result.fits.items()},
            "git": _git_describe(),
        }
        wall = result.wall_time
        if figures:
            from .plotting import render_study
            written += render_study(result, outdir, basename)
    else:
        raise TypeError(f"cannot emit {type(result).__name__}")

    man_path = outdir / f"{basename}_manifest.json"
    man_path.write_text(json.dumps(manifest, indent=2, sort_keys=True,
                                   default=str) + "\n")
    written.append(man_path)
    (outdir / f"{basename}_wall.log").write_text(f"{wall:.3f} s\n")
    return written
