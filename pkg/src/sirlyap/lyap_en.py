"""Six-region ISS Lyapunov function for the endemic equilibrium.

The planar part V12 is assembled from linear pieces and from compositions of
two monotone maps:

    theta(s)  = x2h * s / (x1h + s)          on (-x1h, inf), range (-inf, x2h)
    omega(s)  = lambda1*s + lambda_hat2*theta(s)   (a bijection onto R)
    P(s)      = (lambda2 - k*lambda1) * theta(omega^{-1}(s))
    nu(s)     = (lambda_hat2*s - P((lambda2 - k*lambda1)*s)) / lambda1

P has the closed-form inverse

    P^{-1}(s) = lambda1*theta^{-1}(s/lam0) + lambda_hat2*s/lam0,  lam0 = lambda2 - k*lambda1,

defined for s < lam0*x2h, with derivative bounded below by lambda_hat2/lam0.
The sublevel sets of V = V12 + lambda3*|x3t| are closed loops around the
endemic equilibrium; feasibility of (k, lambda3, lambda_hat2, l_bar) is
certified numerically by `check_condition_50`.
"""
from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from . import model
from .errors import (DomainError, InfeasibleOverride, NoConvergence, OnBoundary,
                     OutOfH, RegimeError)
from .model import Deviation, EquilibriumKind, ModelParams, Regime

BOUNDARY_BAND = 1e-9
OMEGA_INV_RTOL = 1e-12


@dataclass(frozen=True)
class EnLyapParams:
    """Constants of the endemic function; lambda1 == lambda2 by construction."""

    lambda1: float
    lambda2: float
    lambda_hat2: float
    k: float
    lambda3: float
    l_bar: float
    delta: float

    def __post_init__(self):
        if not (self.lambda1 > 0.0 and self.lambda1 == self.lambda2):
            raise ValueError("need 0 < lambda1 == lambda2")
        if not self.lambda_hat2 > 0.0:
            raise ValueError("lambda_hat2 must be positive")
        if not (0.0 < self.k < 1.0):
            raise ValueError("k must lie in (0, 1)")
        if not self.lambda2 - self.k * self.lambda1 > 0.0:
            raise ValueError("need lambda2 - k*lambda1 > 0")
        if not self.lambda3 > 0.0:
            raise ValueError("lambda3 must be positive")
        if not self.l_bar > 0.0:
            raise ValueError("l_bar must be positive")
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")

    @property
    def lam0(self) -> float:
        return self.lambda2 - self.k * self.lambda1

    def as_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "lambda_hat2": self.lambda_hat2,
            "k": self.k,
            "lambda3": self.lambda3,
            "l_bar": self.l_bar,
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnLyapParams":
        return cls(float(d["lambda1"]), float(d["lambda2"]), float(d["lambda_hat2"]),
                   float(d["k"]), float(d["lambda3"]), float(d["l_bar"]), float(d["delta"]))


class EnRegion(Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E = "E"
    F = "F"


class X3Sign(Enum):
    NONNEG = "nonneg"
    NEG = "neg"


@dataclass(frozen=True)
class EnRegionLabel:
    region: EnRegion
    x3_sign: X3Sign


@dataclass(frozen=True)
class EnDerivedConstants:
    """Per-region decrease constants appearing in the certified rate bounds."""

    gamma_a: float
    gamma_c: float
    gamma_d: float
    gamma_e: float
    gamma_f: float
    a_b: float


def _xhat(p: ModelParams) -> tuple:
    q = model.endemic_eq(p).point
    return q.s, q.i, q.r


# ---------------------------------------------------------------------------
# monotone helper maps
# ---------------------------------------------------------------------------

def theta(p: ModelParams, s):
    """x2h*s/(x1h+s); strictly increasing on (-x1h, inf) with range (-inf, x2h)."""
    x1h, x2h, _ = _xhat(p)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= -x1h):
        raise DomainError("theta needs s > -x1h")
    out = x2h * s_arr / (x1h + s_arr)
    return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out


def theta_inv(p: ModelParams, s):
    """Exact inverse x1h*s/(x2h-s), defined for s < x2h."""
    x1h, x2h, _ = _xhat(p)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr >= x2h):
        raise DomainError("theta_inv needs s < x2h")
    out = x1h * s_arr / (x2h - s_arr)
    return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out


def omega(p: ModelParams, lp: EnLyapParams, s):
    out = lp.lambda1 * np.asarray(s, dtype=float) + lp.lambda_hat2 * theta(p, s)
    return float(out) if np.isscalar(s) or np.asarray(s).ndim == 0 else out


def _omega_prime(p: ModelParams, lp: EnLyapParams, s):
    x1h, x2h, _ = _xhat(p)
    return lp.lambda1 + lp.lambda_hat2 * x1h * x2h / (x1h + s) ** 2


def omega_inv(p: ModelParams, lp: EnLyapParams, v, rtol: float = OMEGA_INV_RTOL):
    """Invert omega by bracketing bisection with a Newton polish.

    omega is strictly increasing with a pole at -x1h, so the left bracket end
    is shrunk geometrically toward -x1h and the right end grown geometrically
    until the target is enclosed.
    """
    x1h, x2h, _ = _xhat(p)
    v_arr = np.atleast_1d(np.asarray(v, dtype=float))
    lam1, lh2 = lp.lambda1, lp.lambda_hat2

    def w(sv):
        return lam1 * sv + lh2 * x2h * sv / (x1h + sv)

    gap = np.full_like(v_arr, 0.5 * x1h)
    for _ in range(400):
        need = w(-x1h + gap) > v_arr
        if not need.any():
            break
        gap[need] /= 16.0
    lo = -x1h + gap
    hi = np.full_like(v_arr, x1h)
    for _ in range(400):
        need = w(hi) < v_arr
        if not need.any():
            break
        hi[need] = 2.0 * hi[need] + x1h
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        left = w(mid) < v_arr
        lo = np.where(left, mid, lo)
        hi = np.where(left, hi, mid)
    s = 0.5 * (lo + hi)
    for _ in range(4):
        step = (w(s) - v_arr) / (lam1 + lh2 * x1h * x2h / (x1h + s) ** 2)
        s = np.clip(s - step, lo, hi)
    s[v_arr == 0.0] = 0.0  # omega(0) = 0 exactly
    if np.isscalar(v) or np.asarray(v).ndim == 0:
        return float(s[0])
    return s


def p_fun(p: ModelParams, lp: EnLyapParams, s):
    """P(s) = lam0 * theta(omega^{-1}(s)); increasing, range (-inf, lam0*x2h)."""
    out = lp.lam0 * theta(p, omega_inv(p, lp, s))
    return float(out) if np.isscalar(s) or np.asarray(s).ndim == 0 else out


def p_inv(p: ModelParams, lp: EnLyapParams, s):
    """Closed-form inverse of P, defined for s < lam0*x2h."""
    _, x2h, _ = _xhat(p)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr >= lp.lam0 * x2h):
        raise DomainError("p_inv needs s < lam0*x2h")
    r = s_arr / lp.lam0
    out = lp.lambda1 * theta_inv(p, r) + lp.lambda_hat2 * r
    return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out


def p_inv_prime(p: ModelParams, lp: EnLyapParams, s):
    """(P^{-1})'(s) > lambda_hat2/lam0 for s < lam0*x2h."""
    x1h, x2h, _ = _xhat(p)
    s_arr = np.asarray(s, dtype=float)
    lam0 = lp.lam0
    out = (lp.lambda1 * lam0 ** 2 * x1h * x2h / (lam0 * x2h - s_arr) ** 2
           + lp.lambda_hat2) / lam0
    return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out


def nu_fun(p: ModelParams, lp: EnLyapParams, s):
    """Boundary curve between the two regions left of the equilibrium."""
    s_arr = np.asarray(s, dtype=float)
    out = (lp.lambda_hat2 * s_arr - p_fun(p, lp, lp.lam0 * s_arr)) / lp.lambda1
    return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# feasibility of the constants
# ---------------------------------------------------------------------------

def _require_endemic_regime(p: ModelParams) -> None:
    if model.classify_regime(p) is not Regime.ENDEMIC_THEOREM_APPLIES:
        raise RegimeError(
            f"endemic construction needs R0 > gamma/mu + 2 "
            f"(R0={model.r0_hat(p):.6g}, gamma/mu+2={p.gamma / p.mu + 2.0:.6g})")


def k0_bound(p: ModelParams, l_bar: float, lambda1: float = 1.0,
             lambda2: float = 1.0) -> float:
    """Upper bound k0 on the slope parameter k, given the level budget l_bar."""
    _require_endemic_regime(p)
    r0 = model.r0_hat(p)
    term1 = 1.0 - (p.gamma + p.mu) / (p.mu * (r0 - 1.0))
    ti = theta_inv(p, -l_bar / lambda2)
    term2 = lambda2 * ti / (lambda1 * ti - l_bar)
    return min(term1, term2)


def lambda3_bound_terms(p: ModelParams, lp: EnLyapParams) -> tuple:
    """The four admissibility ceilings for lambda3, in declaration order."""
    r0 = model.r0_hat(p)
    _, x2h, _ = _xhat(p)
    t1 = lp.k * p.mu * lp.lambda1 * (r0 - 1.0) * (1.0 - lp.k) / p.gamma
    t2 = lp.lambda_hat2 ** 2 / ((1.0 - lp.k) * lp.lambda1)
    t3 = p.beta * lp.lambda_hat2 * (x2h - theta(p, omega_inv(p, lp, lp.l_bar))) / p.gamma
    t4 = lp.lambda_hat2
    return t1, t2, t3, t4


def lambda3_bound(p: ModelParams, lp: EnLyapParams) -> float:
    """min of the four admissibility ceilings; lambda3 itself is ignored."""
    return min(lambda3_bound_terms(p, lp))


def lambda3_default(p: ModelParams, lp: EnLyapParams) -> float:
    """Half of the tightened ceiling min(t1, t2, k*t3, t4).

    The extra factor k on the third term keeps the certified region-E
    decrease constant strictly positive (the un-scaled ceiling only makes it
    nonnegative in the limit).
    """
    t1, t2, t3, t4 = lambda3_bound_terms(p, lp)
    return 0.5 * min(t1, t2, lp.k * t3, t4)


Cond50Result = namedtuple("Cond50Result", "passed worst_margin argmin_l samples")


def check_condition_50(p: ModelParams, lp: EnLyapParams,
                       n_samples: int = 2048) -> Cond50Result:
    """Certify nu(L/lam0) <= theta_inv(-L/lam0) on an even grid of [0, l_bar].

    Both sides vanish at L = 0, so the reported worst margin legitimately
    touches zero at that endpoint; interior margins are what feasibility
    hinges on.
    """
    L = np.linspace(0.0, lp.l_bar, n_samples + 1)
    s = L / lp.lam0
    lhs = nu_fun(p, lp, s)
    rhs = theta_inv(p, -s)
    margin = rhs - lhs
    tol = 1e-9 * (1.0 + np.abs(rhs) + np.abs(lhs))
    passed = bool(np.all(margin >= -tol))
    j = int(np.argmin(margin))
    return Cond50Result(passed, float(margin[j]), float(L[j]), len(L))


def derived_constants(p: ModelParams, lp: EnLyapParams) -> EnDerivedConstants:
    r0 = model.r0_hat(p)
    _, x2h, _ = _xhat(p)
    lam0 = lp.lam0
    spread = x2h - theta(p, omega_inv(p, lp, lp.l_bar))
    gamma_a = p.gamma * (1.0 - lp.lambda3 / lp.lambda2)
    gamma_c = p.gamma * (1.0 - lp.lambda3 * lam0 / lp.lambda_hat2 ** 2)
    gamma_d = p.gamma * (1.0 - lp.lambda3 * lam0 / (lp.lambda2 * lp.lambda_hat2))
    gamma_e = 1.0 - lp.lambda3 * p.gamma / (lp.lambda_hat2 * spread * p.beta)
    gamma_f = p.gamma * (1.0 - lp.lambda3 / lp.lambda_hat2)
    a_b = min(lp.k * p.mu * (r0 - 1.0) - lp.lambda3 * p.gamma / lam0, p.mu)
    return EnDerivedConstants(gamma_a, gamma_c, gamma_d, gamma_e, gamma_f, a_b)


def en_params_from(p: ModelParams, l_bar: float, lambda_hat2: float, k: float,
                   lambda3: Optional[float] = None, delta: float = 0.5,
                   lambda1: float = 1.0, n_cond50: int = 2048) -> EnLyapParams:
    """Build validated constants from explicit choices.

    Raises InfeasibleOverride when k, lambda3 or the (l_bar, lambda_hat2)
    pair fails its feasibility condition.
    """
    k0 = k0_bound(p, l_bar, lambda1, lambda1)
    if not (0.0 < k < k0):
        raise InfeasibleOverride(f"k={k:.6g} outside (0, k0={k0:.6g})")
    provisional = EnLyapParams(lambda1, lambda1, lambda_hat2, k, 1e-300, l_bar, delta)
    bound = lambda3_bound(p, provisional)
    if lambda3 is None:
        lambda3 = lambda3_default(p, provisional)
    elif not (0.0 < lambda3 < bound):
        raise InfeasibleOverride(f"lambda3={lambda3:.6g} outside (0, {bound:.6g})")
    lp = replace(provisional, lambda3=lambda3)
    res = check_condition_50(p, lp, n_cond50)
    if not res.passed:
        raise InfeasibleOverride(
            f"condition (50) fails: margin {res.worst_margin:.3g} at L={res.argmin_l:.6g}")
    return lp


def _box_corners_and_grid(box, n: int = 7) -> np.ndarray:
    axes = [np.linspace(lo, hi, n) for lo, hi in box]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    corners = np.array([[a, b, c] for a in box[0] for b in box[1] for c in box[2]])
    return np.vstack([G, corners])


def select_en_params(p: ModelParams, l_bar: Optional[float] = None,
                     box=None, delta: float = 0.5,
                     max_iter: int = 64) -> EnLyapParams:
    """Geometric shrink search for feasible constants.

    Either a level budget l_bar or a compact deviation box inside G must be
    supplied; with a box target the budget is raised to cover the box and
    lambda_hat2 (and, on a slower schedule, k) is halved until condition (50)
    passes and the box lies in the sublevel set.
    """
    _require_endemic_regime(p)
    if (l_bar is None) == (box is None):
        raise ValueError("supply exactly one of l_bar or box")
    x1h, x2h, x3h = _xhat(p)
    pts = None
    if box is not None:
        pts = _box_corners_and_grid(box)
        if np.any(pts[:, 0] + pts[:, 1] <= -x2h) or np.any(pts[:, 1] <= -x2h) \
                or np.any(pts[:, 2] < -x3h) or np.any(pts[:, 0] < -x1h):
            raise DomainError("box must be contained in the interior of G")
        l_cur = max(1.0, 2.0 * float(np.abs(pts).sum(axis=1).max()))
    else:
        l_cur = float(l_bar)

    lam_h2 = 0.1
    k_frac = 0.9
    for it in range(max_iter):
        k = k_frac * k0_bound(p, l_cur)
        provisional = EnLyapParams(1.0, 1.0, lam_h2, k, 1e-300, l_cur, delta)
        lp = replace(provisional, lambda3=lambda3_default(p, provisional))
        ok = check_condition_50(p, lp).passed
        if ok and pts is not None:
            v = en_value_many(p, lp, pts, l_cap=np.inf)
            if np.all(np.isfinite(v)):
                vmax = float(v.max())
                if vmax > l_cur:
                    l_cur = 1.05 * vmax  # raise the budget to cover the box
                    continue
                ok = bool(np.all(in_sublevel_many(p, lp, pts, l_cur)))
            else:
                ok = False  # box pokes out of H; shrink the constants
        if ok:
            return lp
        lam_h2 *= 0.5
        if (it + 1) % 4 == 0:
            k_frac *= 0.5
    raise NoConvergence("feasibility search exhausted its iteration budget")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _h_masks(p: ModelParams, lp: EnLyapParams, x1t, x2t, l_cap: float):
    _, x2h, _ = _xhat(p)
    lam0 = lp.lam0
    h1 = (x2t > -x2h) & (x2t <= l_cap / (lp.lambda2 * (1.0 - lp.k)))
    h2 = -x1t - x2t < (1.0 - lp.k) * x2h
    h3 = -lp.lambda1 * x1t + lp.lambda_hat2 * x2t < lam0 * x2h
    return h1 & h2 & h3


def _region_codes(p: ModelParams, lp: EnLyapParams, x1t, x2t):
    """Codes 0..5 for regions A..F; assumes arguments already lie in H."""
    _, x2h, _ = _xhat(p)
    lam0, lam1, lh2 = lp.lam0, lp.lambda1, lp.lambda_hat2
    pos = x2t >= 0.0
    codes = np.full(x1t.shape, 5, dtype=np.int8)
    # upper half: A / B / C split by -k*x2t and the nu-curve
    a = pos & (x1t >= -lp.k * x2t)
    codes[a] = 0
    rest = pos & ~a
    v = -lam1 * x1t + lh2 * x2t
    v_c = np.minimum(v, lam0 * x2h * (1.0 - 1e-15))  # clip for safe p_inv evaluation
    r = v_c / lam0
    pinv_v = lam1 * (np.where(r < x2h, np.asarray(theta_inv(p, np.minimum(r, x2h * (1 - 1e-15))), dtype=float), np.inf)) + lh2 * r
    # x1t < nu(x2t)  <=>  P^{-1}(v) > lam0*x2t  (monotone transform of the same cut)
    c = rest & (pinv_v > lam0 * x2t)
    b = rest & ~c
    codes[c] = 2
    codes[b] = 1
    # lower half: D / E / F split by -k*x2t and the hyperbola branch
    neg = ~pos
    d = neg & (x1t <= -lp.k * x2t)
    codes[d] = 3
    rest = neg & ~d
    ti = theta_inv(p, np.minimum(-x2t, x2h * (1 - 1e-15)))
    e = rest & (x1t <= ti)
    codes[e] = 4
    return codes


def en_value_many(p: ModelParams, lp: EnLyapParams, X: np.ndarray,
                  l_cap: Optional[float] = None) -> np.ndarray:
    """Vectorised V over deviations X (n, 3); NaN outside the domain H.

    l_cap widens the first domain inequality (used by contour extraction to
    reach level sets that touch the nominal budget); callers must have
    verified condition (50) out to l_cap when passing a value above l_bar.
    """
    if l_cap is None:
        l_cap = lp.l_bar
    x1t, x2t, x3t = X[:, 0], X[:, 1], X[:, 2]
    ok = _h_masks(p, lp, x1t, x2t, l_cap)
    lam0, lam1, lam2, lh2 = lp.lam0, lp.lambda1, lp.lambda2, lp.lambda_hat2
    _, x2h, _ = _xhat(p)
    codes = _region_codes(p, lp, np.where(ok, x1t, 0.0), np.where(ok, x2t, 0.0))

    def pinv_of(arg):
        arg = np.minimum(arg, lam0 * x2h * (1.0 - 1e-15))
        r = arg / lam0
        return lam1 * (_xhat(p)[0] * r / (x2h - r)) + lh2 * r

    v12 = np.empty_like(x1t)
    m = codes == 0
    v12[m] = lam1 * x1t[m] + lam2 * x2t[m]
    m = codes == 1
    v12[m] = lam0 * x2t[m]
    m = codes == 2
    v12[m] = pinv_of(-lam1 * x1t[m] + lh2 * x2t[m])
    m = codes == 3
    v12[m] = pinv_of(-lam1 * x1t[m] - lam2 * x2t[m])
    m = codes == 4
    v12[m] = pinv_of(lam0 * (-x2t[m]))
    m = codes == 5
    v12[m] = lam1 * x1t[m] - lh2 * x2t[m]
    out = v12 + lp.lambda3 * np.abs(x3t)
    out[~ok] = np.nan
    return out


def en_region(p: ModelParams, lp: EnLyapParams, dev: Deviation) -> EnRegionLabel:
    """Classify a deviation; boundary points follow the non-strict inequalities."""
    if not in_H(p, lp, dev):
        raise OutOfH("deviation outside the domain H")
    code = int(_region_codes(p, lp, np.array([dev.x1t]), np.array([dev.x2t]))[0])
    sign = X3Sign.NONNEG if dev.x3t >= 0.0 else X3Sign.NEG
    return EnRegionLabel(list(EnRegion)[code], sign)


def en_value(p: ModelParams, lp: EnLyapParams, dev: Deviation) -> float:
    v = en_value_many(p, lp, dev.as_array()[None, :])
    if math.isnan(v[0]):
        raise OutOfH("deviation outside the domain H")
    return float(v[0])


def en_gradient_arrays(p: ModelParams, lp: EnLyapParams, X: np.ndarray) -> np.ndarray:
    """Per-point analytic gradient (n, 3); no boundary-band policing."""
    x1t, x2t, x3t = X[:, 0], X[:, 1], X[:, 2]
    codes = _region_codes(p, lp, x1t, x2t)
    lam0, lam1, lam2, lh2 = lp.lam0, lp.lambda1, lp.lambda2, lp.lambda_hat2
    arg = np.zeros_like(x1t)
    arg = np.where(codes == 2, -lam1 * x1t + lh2 * x2t, arg)
    arg = np.where(codes == 3, -lam1 * x1t - lam2 * x2t, arg)
    arg = np.where(codes == 4, lam0 * (-x2t), arg)
    q = p_inv_prime(p, lp, np.minimum(arg, lam0 * _xhat(p)[1] * (1.0 - 1e-15)))
    masks = [codes == j for j in range(6)]
    g1 = np.select(masks, [np.full_like(q, lam1), np.zeros_like(q), -lam1 * q,
                           -lam1 * q, np.zeros_like(q), np.full_like(q, lam1)])
    g2 = np.select(masks, [np.full_like(q, lam2), np.full_like(q, lam0), lh2 * q,
                           -lam2 * q, (lp.k * lam1 - lam2) * q, np.full_like(q, -lh2)])
    g3 = np.where(x3t >= 0.0, lp.lambda3, -lp.lambda3)
    return np.stack([g1, g2, g3], axis=1)


def en_gradient(p: ModelParams, lp: EnLyapParams, dev: Deviation) -> tuple:
    """Analytic gradient; raises OnBoundary within the band of any kink."""
    if not in_H(p, lp, dev):
        raise OutOfH("deviation outside the domain H")
    norm = math.sqrt(dev.x1t ** 2 + dev.x2t ** 2 + dev.x3t ** 2)
    band = BOUNDARY_BAND * (1.0 + norm)
    dists = [abs(dev.x2t), abs(dev.x1t + lp.k * dev.x2t), abs(dev.x3t)]
    if dev.x2t >= 0.0:
        dists.append(abs(dev.x1t - nu_fun(p, lp, dev.x2t)))
    else:
        dists.append(abs(dev.x1t - theta_inv(p, -dev.x2t)))
    if min(dists) <= band:
        raise OnBoundary("deviation within band of a region boundary or the x3t kink")
    g = en_gradient_arrays(p, lp, dev.as_array()[None, :])[0]
    return (float(g[0]), float(g[1]), float(g[2]))


def en_grad_dot_f_arrays(p: ModelParams, lp: EnLyapParams, X: np.ndarray,
                         u: float) -> np.ndarray:
    """grad V . f along the deviation dynamics for a batch of deviations."""
    q = model.endemic_eq(p).point
    G = en_gradient_arrays(p, lp, X)
    f1, f2, f3 = model.rhs_arrays(p, q.s + X[:, 0], q.i + X[:, 1], q.r + X[:, 2],
                                  p.b_hat + u)
    return G[:, 0] * f1 + G[:, 1] * f2 + G[:, 2] * f3


def in_H(p: ModelParams, lp: EnLyapParams, dev: Deviation) -> bool:
    """Membership in the Lipschitz domain H (three strict/closed inequalities)."""
    return bool(_h_masks(p, lp, np.array([dev.x1t]), np.array([dev.x2t]), lp.l_bar)[0])


def in_sublevel(p: ModelParams, lp: EnLyapParams, dev: Deviation, L: float) -> bool:
    """Membership in the closed sublevel set {V <= L} within the orthant shift."""
    if not (0.0 <= L <= lp.l_bar * (1.0 + 1e-12)):
        raise DomainError("L must lie in [0, l_bar]")
    x1h, x2h, x3h = _xhat(p)
    if dev.x1t < -x1h or dev.x2t < -x2h or dev.x3t < -x3h:
        return False
    if not in_H(p, lp, dev):
        return False
    return en_value(p, lp, dev) <= L


def in_sublevel_many(p: ModelParams, lp: EnLyapParams, X: np.ndarray, L: float) -> np.ndarray:
    x1h, x2h, x3h = _xhat(p)
    phys = (X[:, 0] >= -x1h) & (X[:, 1] >= -x2h) & (X[:, 2] >= -x3h)
    v = en_value_many(p, lp, X)
    return phys & np.isfinite(v) & (v <= L)


def en_input_range(p: ModelParams, lp: EnLyapParams) -> tuple:
    """Open admissible perturbation interval around the nominal newborn rate."""
    lo = -lp.delta * p.mu * p_fun(p, lp, lp.l_bar) / lp.lambda1
    hi = lp.delta * p.mu * lp.l_bar / lp.lambda1
    return (lo, hi)


def en_eta(p: ModelParams, lp: EnLyapParams, l_total: float,
           rtol: float = 1e-10) -> float:
    """Worst-case split of a level budget between the planar and x3 parts.

    Minimises P(V12) + lambda3*V3/(P^{-1})'(P(V12)) over V12 + V3 = l_total
    by a coarse scan followed by golden-section refinement.
    """
    if l_total < 0.0:
        raise DomainError("l_total must be nonnegative")
    if l_total == 0.0:
        return 0.0

    def obj(t: float) -> float:
        v12 = t * l_total
        pv = p_fun(p, lp, v12)
        return pv + lp.lambda3 * (1.0 - t) * l_total / p_inv_prime(p, lp, pv)

    ts = np.linspace(0.0, 1.0, 33)
    vals = [obj(t) for t in ts]
    j = int(np.argmin(vals))
    lo = ts[max(j - 1, 0)]
    hi = ts[min(j + 1, len(ts) - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = obj(c), obj(d)
    while b - a > rtol * max(1.0, abs(a) + abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = obj(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = obj(d)
    return min(fc, fd, vals[j])


def en_eta_inv(p: ModelParams, lp: EnLyapParams, y: float) -> float:
    """Smallest level with eta(level) >= y; inf when y exceeds sup eta."""
    _, x2h, _ = _xhat(p)
    if y <= 0.0:
        return 0.0
    if y >= lp.lam0 * x2h:
        return math.inf
    lo, hi = 0.0, 1.0
    for _ in range(200):
        if en_eta(p, lp, hi) >= y:
            break
        hi *= 2.0
    else:
        return math.inf
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if en_eta(p, lp, mid) >= y:
            hi = mid
        else:
            lo = mid
    return hi


def feasibility_report(p: ModelParams, lp: EnLyapParams) -> dict:
    """Summary used by the CLI: k0, lambda3 ceiling, (50) margin, input range."""
    res = check_condition_50(p, lp)
    return {
        "k0": k0_bound(p, lp.l_bar, lp.lambda1, lp.lambda2),
        "lambda3_bound": lambda3_bound(p, lp),
        "cond50_margin": res.worst_margin,
        "cond50_argmin_l": res.argmin_l,
        "input_range": list(en_input_range(p, lp)),
    }


class EndemicLyapunov:
    """Bound (model, params) pair with vectorised evaluation helpers."""

    kind = EquilibriumKind.ENDEMIC

    def __init__(self, p: ModelParams, lp: EnLyapParams):
        _require_endemic_regime(p)
        self.p = p
        self.lp = lp
        self.equilibrium = model.endemic_eq(p)

    def value(self, dev: Deviation) -> float:
        return en_value(self.p, self.lp, dev)

    def value_many(self, X: np.ndarray) -> np.ndarray:
        return en_value_many(self.p, self.lp, X)

    def value_of_states(self, S: np.ndarray) -> np.ndarray:
        q = self.equilibrium.point.as_array()
        return self.value_many(S - q[None, :])

    def admissible_u(self) -> tuple:
        return en_input_range(self.p, self.lp)

    def chi_signed(self, u_pos: float, u_neg: float) -> float:
        """Level threshold above which decrease is certified for inputs
        within [-u_neg, u_pos].

        The linear branch handles inputs pushing outward (u > 0) and the
        eta-branch inward ones (u < 0); capped at l_bar, where the
        certificate saturates into plain forward invariance.
        """
        scale = self.lp.lambda1 / (self.lp.delta * self.p.mu)
        level = scale * max(u_pos, 0.0)
        if u_neg > 0.0:
            level = max(level, en_eta_inv(self.p, self.lp, scale * u_neg))
        return min(level, self.lp.l_bar)

    def chi(self, u_mag: float) -> float:
        """Symmetric-range threshold; see chi_signed."""
        return self.chi_signed(abs(u_mag), abs(u_mag))
