"""Weight machinery driving the lattice construction.

From the decay sequence b_j and the summability exponent p this module
derives the convergence-rate exponent lambda*, the exponential weight-function
rates theta_j, the per-dimension auxiliary factors rho_j(lambda), and the
product-and-order-dependent (POD) quadrature weights
gamma_nu = Gamma_{|nu|} * prod_{j in nu} gamma_j, with the order factors kept
in the log domain (they grow like a squared factorial).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta


def lambda_star(p: float, delta: float = 0.1) -> float:
    """Rate exponent: 1/(2-2*delta) for p <= 2/3, p/(2-p) for 2/3 < p <= 1."""
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if not (0.0 < delta <= 0.5):
        raise ValueError(f"delta must lie in (0, 1/2], got {delta}")
    if p <= 2.0 / 3.0:
        return 1.0 / (2.0 - 2.0 * delta)
    return p / (2.0 - p)


def theta_for(b_j: float, lam: float) -> float:
    """Weight-function rate theta_j = (b_j + sqrt(b_j^2 + 1 - 1/(2*lam)))/2.

    Exceeds b_j whenever lam > 1/2, so the gap theta_j - b_j stays positive.
    """
    if lam <= 0.5:
        raise ValueError(f"lambda must exceed 1/2, got {lam}")
    if b_j < 0:
        raise ValueError("decay coefficient must be nonnegative")
    return 0.5 * (b_j + math.sqrt(b_j * b_j + 1.0 - 1.0 / (2.0 * lam)))


def rho(theta: float, lam: float) -> float:
    """Auxiliary factor rho_j(lam) combining the weight rate and zeta(lam+1/2)."""
    if not (0.5 < lam <= 1.0):
        raise ValueError(f"lambda must lie in (1/2, 1], got {lam}")
    eta = (2.0 * lam - 1.0) / (4.0 * lam)
    core = math.sqrt(2.0 * math.pi) * math.exp(theta * theta / eta)
    core /= math.pi ** (2.0 - 2.0 * eta) * (1.0 - eta) * eta
    return 2.0 * core**lam * float(zeta(lam + 0.5))


@dataclass(frozen=True)
class WeightSpec:
    """Frozen weight parameters for one potential/p/delta/T configuration."""

    p: float
    delta: float
    lam_star: float
    C_T: float
    b: np.ndarray
    theta: np.ndarray
    gamma_dim: np.ndarray
    log_gamma_order: np.ndarray = field(repr=False)  # index by order l
    D: float = math.inf

    @property
    def m(self) -> int:
        return len(self.b)

    def order_factor(self, ell: int) -> float:
        """Gamma_ell = (C_ell)^(1/(1+lambda*)) with C_ell = ((ell+1)!)^2 (4 C_T)^(2 ell)."""
        if ell < len(self.log_gamma_order):
            return math.exp(self.log_gamma_order[ell])
        return math.exp(_log_order_factor(ell, self.C_T, self.lam_star))

    def gamma_nu(self, nu) -> float:
        """Assembled POD weight for a subset given as 0/1 multi-index or index set."""
        nu = np.asarray(nu)
        if nu.ndim == 1 and nu.size == self.m and set(np.unique(nu)) <= {0, 1}:
            idx = np.flatnonzero(nu)
        else:
            idx = nu.astype(int)
        val = self.order_factor(len(idx))
        for j in idx:
            val *= self.gamma_dim[j]
        return val


def _log_order_factor(ell: int, C_T: float, lam: float) -> float:
    return (2.0 * math.lgamma(ell + 2) + 2.0 * ell * math.log(4.0 * C_T)) / (1.0 + lam)


def build_weight_spec(b, p: float, delta: float = 0.1, T: float = 1.0,
                      max_order: int | None = None) -> WeightSpec:
    """Derive the full weight specification from a decay sequence.

    gamma_j = (b_j^2 / ((theta_j - b_j) * rho_j(lambda*)))^(1/(1+lambda*)),
    order factors stored as logs up to max_order (default max(m, 64)).
    """
    b = np.asarray(b, dtype=np.float64)
    if np.any(b < 0):
        raise ValueError("decay sequence must be nonnegative")
    lam = lambda_star(p, delta)
    C_T = max(1.0, float(T))
    theta = np.array([theta_for(bj, lam) for bj in b])
    gap = theta - b
    if len(b) and np.any(gap <= 0):
        raise AssertionError("weight-rate gap must be positive for lambda* > 1/2")
    gamma_dim = np.array(
        [(bj * bj / (g * rho(th, lam))) ** (1.0 / (1.0 + lam)) if bj > 0 else 0.0
         for bj, th, g in zip(b, theta, gap)]
    )
    if max_order is None:
        max_order = max(len(b), 64)
    log_order = np.array([_log_order_factor(l, C_T, lam) for l in range(max_order + 1)])
    D = float(np.min(gap)) if len(b) else math.inf
    return WeightSpec(p=p, delta=delta, lam_star=lam, C_T=C_T, b=b, theta=theta,
                      gamma_dim=gamma_dim, log_gamma_order=log_order, D=D)


@dataclass(frozen=True)
class SumConditionReport:
    satisfied: bool
    lhs: float
    rhs: float


def check_p1_condition(spec: WeightSpec, theta_max: float | None = None) -> SumConditionReport:
    """Side condition required when p = 1:

    sum_j b_j < sqrt(D) / (4 * C_T * sqrt(rho_max(1))), with rho_max(1) the
    rho factor evaluated at theta_max (default: the largest theta_j) and
    lambda = 1.
    """
    if theta_max is None:
        theta_max = float(np.max(spec.theta)) if spec.m else theta_for(0.0, 1.0)
    lhs = math.fsum(float(x) for x in spec.b)
    rhs = math.sqrt(spec.D) / (4.0 * spec.C_T * math.sqrt(rho(theta_max, 1.0)))
    return SumConditionReport(satisfied=lhs < rhs, lhs=lhs, rhs=rhs)
