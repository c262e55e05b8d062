"""Uniform periodic grid on [-pi, pi), spectral transforms and exact subflows.

Conventions fixed here and relied on everywhere else:

* transform pair is the unnormalised forward FFT / normalised inverse FFT
  (numpy layout), wavenumbers k in {-M/2, ..., M/2 - 1} in FFT ordering;
* the free flow exp(i t d_xx / 2) acts as the mode multiplier
  exp(-i k^2 t / 2);
* the first-derivative multiplier is i*k with the unpaired Nyquist mode
  -M/2 zeroed (odd-order operator); even symbols keep the Nyquist mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft as sfft


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid of M nodes x_k = -pi + k*h, h = 2*pi/M."""

    M: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)
    wavenumbers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (_is_power_of_two(self.M) and self.M >= 2):
            raise ValueError(f"grid size must be a power of two >= 2, got {self.M}")
        h = 2.0 * np.pi / self.M
        nodes = -np.pi + h * np.arange(self.M)
        k = np.fft.fftfreq(self.M, d=1.0 / self.M)  # integer wavenumbers, FFT order
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "wavenumbers", k)
        nodes.setflags(write=False)
        k.setflags(write=False)


@dataclass
class WaveField:
    """Complex-valued samples of the wavefunction at the grid nodes."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.grid.M,):
            raise ValueError(
                f"field length {self.values.shape} does not match grid size {self.grid.M}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite entries")

    def copy(self) -> "WaveField":
        return WaveField(self.grid, self.values.copy())


def sample_initial(grid: TorusGrid, kind="gaussian", k: int = 0,
                   fn: Callable[[np.ndarray], np.ndarray] | None = None) -> WaveField:
    """Sample initial data at the grid nodes.

    kind is one of "gaussian" (the localized packet sqrt(8/pi)*exp(-8 x^2)),
    "plane-wave" (exp(i k x), needs |k| < M/2), or "custom" with a closure fn.
    """
    x = grid.nodes
    if kind == "gaussian":
        vals = np.sqrt(8.0 / np.pi) * np.exp(-8.0 * x**2)
    elif kind == "plane-wave":
        if not (-grid.M // 2 < k < grid.M // 2):
            raise ValueError(f"plane-wave k={k} not representable on M={grid.M} grid")
        vals = np.exp(1j * k * x)
    elif kind == "custom":
        if fn is None:
            raise ValueError("custom initial data needs a closure")
        vals = np.asarray(fn(x), dtype=np.complex128)
    else:
        raise ValueError(f"unknown initial data kind {kind!r}")
    return WaveField(grid, vals)


def kinetic_phase(grid: TorusGrid, t: float) -> np.ndarray:
    """Mode multipliers exp(-i k^2 t / 2) of the free flow over time t."""
    return np.exp(-0.5j * grid.wavenumbers**2 * t)


def kinetic_step(f: WaveField, t: float) -> WaveField:
    """Exact free flow exp(i t d_xx / 2); an L2 isometry for any real t."""
    if not np.isfinite(t):
        raise ValueError("non-finite time step")
    fhat = sfft.fft(f.values)
    fhat *= kinetic_phase(f.grid, t)
    return WaveField(f.grid, sfft.ifft(fhat))


def potential_step(f: WaveField, V: np.ndarray, t: float) -> WaveField:
    """Exact potential flow: pointwise multiplication by exp(-i t V(x_k))."""
    V = np.asarray(V, dtype=np.float64)
    if V.shape != (f.grid.M,):
        raise ValueError("potential field does not match the grid")
    if not np.all(np.isfinite(V)):
        raise ValueError("potential field contains non-finite entries")
    return WaveField(f.grid, f.values * np.exp(-1j * t * V))


def spectral_derivative(f: WaveField) -> WaveField:
    """First derivative by the i*k multiplier; Nyquist mode zeroed."""
    g = f.grid
    fhat = sfft.fft(f.values)
    mult = 1j * g.wavenumbers.copy()
    mult[g.M // 2] = 0.0  # unpaired -M/2 mode
    fhat *= mult
    return WaveField(g, sfft.ifft(fhat))


def discrete_l2_norm(f: WaveField) -> float:
    """sqrt(h * sum |f_k|^2), the grid realization of the L2(T) norm."""
    return float(np.sqrt(f.grid.h * np.sum(np.abs(f.values) ** 2)))
