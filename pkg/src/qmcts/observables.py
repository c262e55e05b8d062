"""Physical observables of a wave field and error metrics between fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import TorusGrid, WaveField, discrete_l2_norm, spectral_derivative


@dataclass(frozen=True)
class ObservableField:
    """Real-valued grid function, e.g. a density or current profile."""

    grid: TorusGrid
    values: np.ndarray
    name: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.M,):
            raise ValueError(f"values shape {v.shape} does not match grid size {self.grid.M}")
        if not np.all(np.isfinite(v)):
            raise ValueError("observable values must be finite")
        object.__setattr__(self, "values", v)


def position_density(f: WaveField) -> ObservableField:
    """S(x) = |psi(x)|^2."""
    return ObservableField(grid=f.grid, values=np.abs(f.values) ** 2, name="density")


def current_density(f: WaveField) -> ObservableField:
    """J(x) = Im(conj(psi) d_x psi), the probability current."""
    dpsi = spectral_derivative(f).values
    return ObservableField(grid=f.grid, values=np.imag(np.conj(f.values) * dpsi),
                           name="current")


def observable_by_name(name: str):
    table = {"density": position_density, "current": current_density}
    if name not in table:
        raise ValueError(f"unknown observable '{name}', expected one of {sorted(table)}")
    return table[name]


def point_eval(field: ObservableField, x: float) -> float:
    """Value at the grid node nearest to x; ties go to the smaller index.

    x is wrapped into [-pi, pi) first.
    """
    g = field.grid
    xw = (x + np.pi) % (2.0 * np.pi) - np.pi
    pos = (xw + np.pi) / g.h
    i = int(np.floor(pos))
    lo, hi = i % g.M, (i + 1) % g.M
    d_lo = pos - i
    d_hi = (i + 1) - pos
    if d_lo < d_hi:
        return float(field.values[lo])
    if d_hi < d_lo:
        return float(field.values[hi])
    return float(field.values[min(lo, hi)])  # midpoint tie: smaller index


def l2_relative_error(approx: ObservableField, ref: ObservableField) -> float:
    """||approx - ref||_{L^2} / ||ref||_{L^2} with the trapezoid-on-torus norm."""
    if approx.grid.M != ref.grid.M:
        raise ValueError("fields live on different grids")
    denom = discrete_l2_norm(WaveField(ref.grid, ref.values))
    if denom == 0.0:
        raise ValueError("reference field has zero norm")
    return discrete_l2_norm(WaveField(ref.grid, approx.values - ref.values)) / denom
