"""Randomly shifted rank-1 lattice rules: kernels, CBC construction, points.

The component-by-component (CBC) search minimizes the shift-averaged
worst-case quadrature error in the weighted space, written with POD weights
as

    e^2(z_1..z_s) = sum_{nonempty u} Gamma_|u| prod_{j in u} gamma_j
                    * (1/N) sum_k prod_{j in u} K_j(frac(k z_j / N)),

where K_j is a per-dimension shift-invariant kernel function tabulated at
the N lattice fractions by a pluggable provider.  The default provider
derives K_j by quadrature for the Gaussian-density / exponential-weight
pairing; a toy unit-cube provider (the Bernoulli kernel x^2 - x + 1/6, also
the exact quadrature limit of the generic tabulator for the uniform pairing)
exists for exhaustive-search tests, and precomputed generating vectors can
be loaded from a plain-text file instead of running CBC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import erfc

from .normals import map_points
from .weights import WeightSpec

RNG_ID = "philox4x64-10(numpy)"
_CAND_CHUNK = 256


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class GeneratingVector:
    z: np.ndarray
    N: int

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.int64)
        object.__setattr__(self, "z", z)
        if self.N < 1:
            raise ValueError("point count must be positive")
        if len(z) and z[0] != 1:
            raise ValueError("first generating-vector component must be 1")
        for zj in z:
            if not (1 <= zj <= max(self.N - 1, 1)):
                raise ValueError(f"component {zj} outside [1, {self.N - 1}]")
            if math.gcd(int(zj), self.N) != 1:
                raise ValueError(f"component {zj} not coprime with N={self.N}")

    @property
    def m(self) -> int:
        return len(self.z)


@dataclass(frozen=True)
class ShiftSet:
    shifts: np.ndarray  # (R, m) in [0, 1)
    seed: int
    rng_id: str = RNG_ID

    @property
    def R(self) -> int:
        return self.shifts.shape[0]


# ---------------------------------------------------------------------------
# kernel providers

class CubeKernel:
    """Toy product kernel B2(x) = x^2 - x + 1/6 on the unit cube (all dims)."""

    def values(self, dim: int, N: int) -> np.ndarray:
        x = np.arange(N) / N
        return x * x - x + 1.0 / 6.0


class GaussianExpKernel:
    """Shift-invariant kernel for the Gaussian density with weight exp(-theta*|xi|).

    Tabulated numerically: with u = Phi(xi) the space transforms to a
    weighted unanchored Sobolev space on (0, 1) whose derivative weight is
    psi^2(u) = phi(xi) * exp(-2*theta*|xi|); the kernel follows from the
    cumulative integrals of u/psi^2 and (1-u)/psi^2 (see _tabulate).
    Tabulations are cached per (theta, N).
    """

    def __init__(self, spec: WeightSpec, grid_points: int = 200_001, cutoff: float = 12.0):
        self.spec = spec
        self.grid_points = grid_points
        self.cutoff = cutoff
        self._cache: dict[tuple[float, int], np.ndarray] = {}

    def values(self, dim: int, N: int) -> np.ndarray:
        theta = float(self.spec.theta[dim])
        key = (theta, N)
        if key not in self._cache:
            self._cache[key] = _tabulate_gaussian_kernel(
                theta, N, self.grid_points, self.cutoff)
        return self._cache[key]


def _cumtrapz(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    out[0] = 0.0
    np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x), out=out[1:])
    return out


def _tabulate_gaussian_kernel(theta: float, N: int, n_grid: int, cutoff: float) -> np.ndarray:
    """Kernel values K(i/N), i = 0..N-1, for weight rate theta.

    Writing h(u) = u/psi^2(u), g(u) = (1-u)/psi^2(u) with
    psi^2(u) = phi(xi)*w^2(xi), xi = Phi^{-1}(u), the unanchored kernel is
    C(x, y) = c0 + G(max) + H(min) with H(y) = int_0^y h du,
    G(y) = int_y^1 g du; shift averaging gives
    K(x) = c0 + 2*GG(1) - GG(x) - GG(1-x) + HH(x) + HH(1-x)
    with GG, HH the antiderivatives of G and H.  All integrals are computed
    in xi coordinates where the integrands are Gaussian-tailed:
    H = int Phi(xi) e^{2 theta |xi|} dxi, G = int (1 - Phi) e^{2 theta |xi|} dxi.
    """
    xi = np.linspace(-cutoff, cutoff, n_grid)
    u = 0.5 * erfc(-xi / math.sqrt(2.0))
    dens = np.exp(-0.5 * xi * xi) / math.sqrt(2.0 * math.pi)
    wexp = np.exp(2.0 * theta * np.abs(xi))

    H = _cumtrapz(u * wexp, xi)                      # H(u(xi)) from below
    G = _cumtrapz(((1.0 - u) * wexp)[::-1], -xi[::-1])[::-1]  # from above
    HH = _cumtrapz(H * dens, xi)                     # int_0^u H du
    GG = _cumtrapz(G * dens, xi)

    mid = n_grid // 2  # xi = 0, u = 1/2
    GG1 = GG[-1]
    c0 = -(u[mid] * G[mid] + HH[mid] + GG1 - GG[mid] + (1.0 - u[mid]) * H[mid])

    x = np.arange(N) / N
    HH_x = np.interp(x, u, HH)
    GG_x = np.interp(x, u, GG)
    HH_1mx = np.interp(1.0 - x, u, HH)
    GG_1mx = np.interp(1.0 - x, u, GG)
    vals = c0 + 2.0 * GG1 - GG_x - GG_1mx + HH_x + HH_1mx
    # x = 0 needs no interpolation: K(0) = c0 + GG(1) + HH(1)
    vals[0] = c0 + GG1 + HH[-1]
    return vals


# ---------------------------------------------------------------------------
# CBC construction

def coprime_candidates(N: int) -> np.ndarray:
    return np.array([z for z in range(1, N) if math.gcd(z, N) == 1], dtype=np.int64)


def cbc_construct(m: int, N: int, spec: WeightSpec, kernel=None,
                  order_cap: int = 35) -> GeneratingVector:
    """Greedy per-coordinate minimization of the shift-averaged error.

    z_1 = 1 by convention; each later z_j minimizes the error criterion given
    the fixed prefix, with ties broken toward the smallest admissible z.
    Uses the POD order recursion with orders capped at min(m, order_cap);
    order factors come from the spec's log-domain table.
    """
    if N < 1:
        raise ValueError("point count must be positive")
    if m < 0:
        raise ValueError("dimension must be nonnegative")
    if m > spec.m:
        raise ValueError(f"weight spec covers {spec.m} dimensions, asked for {m}")
    if kernel is None:
        kernel = GaussianExpKernel(spec)
    if m == 0 or N == 1:
        # N = 1 is the degenerate one-point rule;z is all ones by convention
        return GeneratingVector(z=np.ones(m, dtype=np.int64), N=N)

    cap = min(m, order_cap)
    Gamma = np.array([spec.order_factor(l) for l in range(cap + 1)])
    cands = coprime_candidates(N)
    karr = np.arange(N, dtype=np.int64)

    # q[l, k]: order-l elementary sum over chosen dims at lattice fraction k
    q = np.zeros((cap + 1, N))
    q[0] = 1.0
    z = [1]
    Kv = kernel.values(0, N)
    q[1] = spec.gamma_dim[0] * Kv[(karr * 1) % N]

    for j in range(1, m):
        Kv = kernel.values(j, N)
        lmax = min(j, cap)  # orders populated so far
        w = Gamma[1:lmax + 2][:, None] * q[0:lmax + 1]
        w = w.sum(axis=0)  # sum_l Gamma_{l+1} q_l(k)
        best_z, best_score = None, math.inf
        for lo in range(0, len(cands), _CAND_CHUNK):
            chunk = cands[lo:lo + _CAND_CHUNK]
            idx = (chunk[:, None] * karr[None, :]) % N
            scores = Kv[idx] @ w
            # candidates ascend, argmin takes the first minimum, and ties
            # across chunks keep the earlier hit: smallest z wins throughout
            i = int(np.argmin(scores))
            if scores[i] < best_score:
                best_z, best_score = int(chunk[i]), float(scores[i])
        zj = best_z
        z.append(zj)
        vals = spec.gamma_dim[j] * Kv[(karr * zj) % N]
        top = min(j + 1, cap)
        for l in range(top, 0, -1):
            q[l] = q[l] + vals * q[l - 1]
    return GeneratingVector(z=np.array(z, dtype=np.int64), N=N)


def shift_averaged_error_sq(gv: GeneratingVector, spec: WeightSpec, kernel=None,
                            order_cap: int = 35) -> float:
    """Diagnostic value of the squared criterion for a full generating vector."""
    if kernel is None:
        kernel = GaussianExpKernel(spec)
    m, N = gv.m, gv.N
    cap = min(m, order_cap)
    karr = np.arange(N, dtype=np.int64)
    q = np.zeros((cap + 1, N))
    q[0] = 1.0
    for j in range(m):
        vals = spec.gamma_dim[j] * kernel.values(j, N)[(karr * int(gv.z[j])) % N]
        top = min(j + 1, cap)
        for l in range(top, 0, -1):
            q[l] = q[l] + vals * q[l - 1]
    total = 0.0
    for l in range(1, cap + 1):
        total += spec.order_factor(l) * float(np.sum(q[l])) / N
    return total


# ---------------------------------------------------------------------------
# point generation

def lattice_points(gv: GeneratingVector, shift: np.ndarray) -> np.ndarray:
    """The N shifted lattice points frac(j*z/N + shift), j = 1..N, in [0,1)^m.

    Products are reduced mod N in integer arithmetic before division so no
    large-product rounding occurs.  Components exactly 0 are kept; they are
    clamped downstream when mapped through the inverse CDF.
    """
    shift = np.asarray(shift, dtype=np.float64)
    if shift.shape != (gv.m,):
        raise ValueError(f"shift length {shift.shape} does not match dimension {gv.m}")
    j = np.arange(1, gv.N + 1, dtype=np.int64)
    frac = ((j[:, None] * gv.z[None, :]) % gv.N) / gv.N
    return (frac + shift) % 1.0


def random_shifts(R: int, m: int, seed: int) -> ShiftSet:
    """R i.i.d. uniform shift vectors from the counter-based Philox stream."""
    if R < 1:
        raise ValueError("need at least one shift")
    rng = np.random.Generator(np.random.Philox(key=seed))
    return ShiftSet(shifts=rng.random((R, m)), seed=seed)


def mc_points(Nmc: int, m: int, seed: int) -> np.ndarray:
    """Nmc i.i.d. standard normal vectors via the inverse CDF of Philox uniforms."""
    if Nmc < 1:
        raise ValueError("need at least one sample")
    rng = np.random.Generator(np.random.Philox(key=seed))
    u = rng.random((Nmc, m))
    # rng.random can return exactly 0; clamp like the lattice path
    return map_points(u)


# ---------------------------------------------------------------------------
# generating-vector file format: "N <value>" then one component per line

def save_generating_vector(gv: GeneratingVector, path) -> None:
    lines = [f"N {gv.N}"] + [str(int(zj)) for zj in gv.z]
    Path(path).write_text("\n".join(lines) + "\n")


def load_generating_vector(path) -> GeneratingVector:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("N"):
        raise ValueError(f"{path}: first line must be 'N <value>'")
    N = int(lines[0].split()[1])
    z = np.array([int(ln) for ln in lines[1:]], dtype=np.int64)
    return GeneratingVector(z=z, N=N)
