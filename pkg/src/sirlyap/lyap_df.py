"""Piecewise-linear ISS Lyapunov function for the disease-free equilibrium.

The function is linear on each of three regions of the deviation space
R x R+^2; the regions are separated by the plane x1t = 0 and by the tilted
plane x1t = -(beta*x1hat/mu0) * (x2t + lambda3*x3t).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from . import model
from .errors import DomainError, InfeasibleOverride, OnBoundary, RegimeError
from .model import Deviation, EquilibriumKind, ModelParams

#: boundary band (relative) inside which analytic gradients are refused
BOUNDARY_BAND = 1e-9


@dataclass(frozen=True)
class DfLyapParams:
    """Constants of the disease-free function.

    mu0 in (0, mu); eps in (max{mu/(gamma+mu) - R0, 0}, 1 - R0);
    gamma0 = (gamma+mu)*(R0+eps) - mu lies in (0, gamma);
    lambda3 = 1 - gamma0/gamma > 0; delta in (0,1) splits the decay budget.
    """

    mu0: float
    eps: float
    gamma0: float
    lambda3: float
    delta: float

    def as_dict(self) -> dict:
        return {
            "mu0": self.mu0,
            "eps": self.eps,
            "gamma0": self.gamma0,
            "lambda3": self.lambda3,
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DfLyapParams":
        return cls(float(d["mu0"]), float(d["eps"]), float(d["gamma0"]),
                   float(d["lambda3"]), float(d["delta"]))


class DfRegion(Enum):
    A = "A"  # x1t >= 0
    B = "B"  # threshold <= x1t < 0
    C = "C"  # x1t < threshold


def _eps_interval(p: ModelParams) -> tuple:
    r0 = model.r0_hat(p)
    lo = max(p.mu / (p.gamma + p.mu) - r0, 0.0)
    hi = 1.0 - r0
    return lo, hi


def select_df_params(p: ModelParams, mu0: Optional[float] = None,
                     eps: Optional[float] = None,
                     delta: Optional[float] = None) -> DfLyapParams:
    """Choose feasible constants; defaults put eps mid-interval, mu0 = 0.99*mu.

    Raises RegimeError unless b_hat > 0 and R0 < 1, and InfeasibleOverride
    when a supplied override violates its open-interval constraint.
    """
    r0 = model.r0_hat(p)
    if p.b_hat <= 0.0 or r0 >= 1.0:
        raise RegimeError(f"disease-free construction needs b_hat > 0 and R0 < 1 (R0={r0:.6g})")
    lo, hi = _eps_interval(p)
    if eps is None:
        eps = 0.5 * (lo + hi)
    elif not (lo < eps < hi):
        raise InfeasibleOverride(f"eps={eps:.6g} outside open interval ({lo:.6g}, {hi:.6g})")
    if mu0 is None:
        mu0 = 0.99 * p.mu
    elif not (0.0 < mu0 < p.mu):
        raise InfeasibleOverride(f"mu0={mu0:.6g} outside (0, mu)")
    if delta is None:
        delta = 0.5
    elif not (0.0 < delta < 1.0):
        raise InfeasibleOverride(f"delta={delta:.6g} outside (0, 1)")
    gamma0 = (p.gamma + p.mu) * (r0 + eps) - p.mu
    lambda3 = 1.0 - gamma0 / p.gamma
    if not (0.0 < gamma0 < p.gamma and lambda3 > 0.0):
        raise InfeasibleOverride("derived gamma0 not in (0, gamma)")
    return DfLyapParams(mu0=mu0, eps=eps, gamma0=gamma0, lambda3=lambda3, delta=delta)


def _x1hat(p: ModelParams) -> float:
    return p.b_hat / p.mu


def _threshold(lp: DfLyapParams, p: ModelParams, x2t, x3t):
    """Boundary surface between regions B and C (an x1t level per point)."""
    return -(p.beta * _x1hat(p) / lp.mu0) * (x2t + lp.lambda3 * x3t)


def _require_domain(dev: Deviation) -> None:
    if dev.x2t < 0.0 or dev.x3t < 0.0:
        raise DomainError("disease-free function needs x2t >= 0 and x3t >= 0")


def df_region(lp: DfLyapParams, p: ModelParams, dev: Deviation) -> DfRegion:
    """Classify a deviation; boundary points go to the closed-inequality side."""
    _require_domain(dev)
    if dev.x1t >= 0.0:
        return DfRegion.A
    if dev.x1t >= _threshold(lp, p, dev.x2t, dev.x3t):
        return DfRegion.B
    return DfRegion.C


def df_value(lp: DfLyapParams, p: ModelParams, dev: Deviation) -> float:
    _require_domain(dev)
    reg = df_region(lp, p, dev)
    if reg is DfRegion.A:
        return dev.x1t + dev.x2t + lp.lambda3 * dev.x3t
    if reg is DfRegion.B:
        return dev.x2t + lp.lambda3 * dev.x3t
    return -lp.mu0 * dev.x1t / (p.beta * _x1hat(p))


def df_gradient(lp: DfLyapParams, p: ModelParams, dev: Deviation) -> tuple:
    """Analytic gradient; refuses points within the boundary band."""
    _require_domain(dev)
    norm = np.sqrt(dev.x1t ** 2 + dev.x2t ** 2 + dev.x3t ** 2)
    band = BOUNDARY_BAND * (1.0 + norm)
    thr = _threshold(lp, p, dev.x2t, dev.x3t)
    if abs(dev.x1t) <= band or abs(dev.x1t - thr) <= band:
        raise OnBoundary("deviation within band of a region boundary")
    reg = df_region(lp, p, dev)
    if reg is DfRegion.A:
        return (1.0, 1.0, lp.lambda3)
    if reg is DfRegion.B:
        return (0.0, 1.0, lp.lambda3)
    return (-lp.mu0 / (p.beta * _x1hat(p)), 0.0, 0.0)


def df_chi(lp: DfLyapParams, p: ModelParams, u_mag: float) -> float:
    """ISS threshold |u| / (delta*(mu - mu0))."""
    return abs(u_mag) / (lp.delta * (p.mu - lp.mu0))


def df_decay_rate(lp: DfLyapParams, p: ModelParams) -> float:
    """Certified decay rate (1-delta)*(mu-mu0) above the chi threshold."""
    return (1.0 - lp.delta) * (p.mu - lp.mu0)


def df_grad_dot_f(lp: DfLyapParams, p: ModelParams, dev: Deviation, u: float) -> float:
    """Directional derivative along the deviation dynamics.

    Uses the gradient of the region the point is assigned to, so on a
    boundary this is the one-sided derivative of the closed-inequality side
    (at the anchor itself the dynamics vanish and the choice is immaterial).
    """
    reg = df_region(lp, p, dev)
    if reg is DfRegion.A:
        g = (1.0, 1.0, lp.lambda3)
    elif reg is DfRegion.B:
        g = (0.0, 1.0, lp.lambda3)
    else:
        g = (-lp.mu0 / (p.beta * _x1hat(p)), 0.0, 0.0)
    x1h = _x1hat(p)
    f = model.rhs_arrays(p, x1h + dev.x1t, dev.x2t, dev.x3t, p.b_hat + u)
    return g[0] * f[0] + g[1] * f[1] + g[2] * f[2]


def df_decrease_slack(lp: DfLyapParams, p: ModelParams, dev: Deviation, u: float) -> float:
    """Slack of the decrease inequality at one point.

    Nonnegative slack certifies the ISS implication here whenever
    V(dev) >= chi(|u|).  u must stay >= -b_hat so the rate B stays valid.
    """
    if u < -p.b_hat:
        raise DomainError("u must be >= -b_hat")
    gf = df_grad_dot_f(lp, p, dev, u)
    v = df_value(lp, p, dev)
    return -gf - df_decay_rate(lp, p) * v


# ---------------------------------------------------------------------------
# vectorised evaluation (used by grid certification and level sets)
# ---------------------------------------------------------------------------

def df_value_region_arrays(lp: DfLyapParams, p: ModelParams, X: np.ndarray):
    """Values and region codes (0=A, 1=B, 2=C) for deviations X of shape (n, 3)."""
    x1t, x2t, x3t = X[:, 0], X[:, 1], X[:, 2]
    thr = _threshold(lp, p, x2t, x3t)
    in_a = x1t >= 0.0
    in_b = ~in_a & (x1t >= thr)
    lin23 = x2t + lp.lambda3 * x3t
    v = np.where(in_a, x1t + lin23, np.where(in_b, lin23, -lp.mu0 * x1t / (p.beta * _x1hat(p))))
    codes = np.where(in_a, 0, np.where(in_b, 1, 2)).astype(np.int8)
    return v, codes


def df_grad_dot_f_arrays(lp: DfLyapParams, p: ModelParams, X: np.ndarray, u: float) -> np.ndarray:
    """grad V . f for a batch of deviations under a constant perturbation u."""
    _, codes = df_value_region_arrays(lp, p, X)
    x1h = _x1hat(p)
    f1, f2, f3 = model.rhs_arrays(p, x1h + X[:, 0], X[:, 1], X[:, 2], p.b_hat + u)
    g1 = np.where(codes == 0, 1.0, np.where(codes == 1, 0.0, -lp.mu0 / (p.beta * x1h)))
    g2 = np.where(codes == 2, 0.0, 1.0)
    g3 = np.where(codes == 2, 0.0, lp.lambda3)
    return g1 * f1 + g2 * f2 + g3 * f3


def df_boundary_distance_arrays(lp: DfLyapParams, p: ModelParams, X: np.ndarray) -> np.ndarray:
    """Per-point distance (along x1t) to the nearest region boundary."""
    thr = _threshold(lp, p, X[:, 1], X[:, 2])
    return np.minimum(np.abs(X[:, 0]), np.abs(X[:, 0] - thr))


def write_grid_csv(path, X: np.ndarray, codes: np.ndarray, v: np.ndarray,
                   slack: np.ndarray) -> None:
    """Emit grid-check rows `x1t,x2t,x3t,region,V,slack`."""
    names = np.array(["A", "B", "C"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1t", "x2t", "x3t", "region", "V", "slack"])
        for j in range(len(v)):
            w.writerow([repr(float(X[j, 0])), repr(float(X[j, 1])), repr(float(X[j, 2])),
                        names[codes[j]], repr(float(v[j])), repr(float(slack[j]))])


class DiseaseFreeLyapunov:
    """Bound (model, params) pair with vectorised evaluation helpers."""

    kind = EquilibriumKind.DISEASE_FREE

    def __init__(self, p: ModelParams, lp: DfLyapParams):
        self.p = p
        self.lp = lp
        self.equilibrium = model.disease_free_eq(p)

    def value(self, dev: Deviation) -> float:
        return df_value(self.lp, self.p, dev)

    def value_many(self, X: np.ndarray) -> np.ndarray:
        return df_value_region_arrays(self.lp, self.p, X)[0]

    def value_of_states(self, S: np.ndarray) -> np.ndarray:
        q = self.equilibrium.point.as_array()
        return self.value_many(S - q[None, :])

    def chi(self, u_mag: float) -> float:
        return df_chi(self.lp, self.p, u_mag)

    def admissible_u(self) -> tuple:
        """Perturbation range keeping B(t) nonnegative."""
        return (-self.p.b_hat, np.inf)
