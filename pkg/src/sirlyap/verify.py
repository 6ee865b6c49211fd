"""Numerical certification harness.

Every check returns a CheckResult whose `worst_margin` is oriented so that
larger is better and `passed` means worst_margin >= -tolerance for the
check's declared tolerance.  Sampling is driven by an explicit seed, so a
rerun with the same seed and grid reproduces the margins bit for bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import lyap_df, lyap_en, model, ode
from .errors import MismatchedEquilibrium, RangeError, RegimeError
from .lyap_df import DfLyapParams, DiseaseFreeLyapunov
from .lyap_en import EndemicLyapunov, EnLyapParams
from .model import Deviation, EquilibriumKind, ModelParams, State

DEFAULT_SEED = 0x5121  # "SIR1"


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst_margin: float
    worst_location: object = None
    samples: int = 0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "worst_margin": float(self.worst_margin),
            "worst_location": self.worst_location,
            "samples": int(self.samples),
            "details": _jsonable(self.details),
        }


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)

    def add(self, res: CheckResult) -> CheckResult:
        self.checks.append(res)
        return res

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def format_table(self) -> str:
        lines = [f"{'check':<42} {'pass':<6} {'worst margin':<14} location"]
        for c in self.checks:
            loc = "" if c.worst_location is None else str(c.worst_location)
            lines.append(f"{c.name:<42} {str(c.passed):<6} {c.worst_margin:<14.6g} {loc}")
        return "\n".join(lines)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _loc(X_row) -> list:
    return [float(v) for v in X_row]


# ---------------------------------------------------------------------------
# disease-free checks
# ---------------------------------------------------------------------------

def check_df_continuity(lp: DfLyapParams, p: ModelParams, n: int = 1000,
                        seed: int = DEFAULT_SEED, rtol: float = 1e-9) -> CheckResult:
    """One-sided values of adjacent region formulas agree on both boundaries."""
    rng = np.random.default_rng(seed)
    x1h = p.b_hat / p.mu
    half = n // 2
    lam3 = lp.lambda3
    # surface x1t = 0: formula A vs formula B
    x2 = rng.uniform(0.0, 3.0 * x1h, half)
    x3 = rng.uniform(0.0, 3.0 * x1h, half)
    va = 0.0 + x2 + lam3 * x3
    vb = x2 + lam3 * x3
    res1 = np.abs(va - vb) / (1.0 + np.abs(vb))
    # tilted surface: formula B vs formula C
    x2 = rng.uniform(0.0, 3.0 * x1h, n - half)
    x3 = rng.uniform(0.0, 3.0 * x1h, n - half)
    x1 = -(p.beta * x1h / lp.mu0) * (x2 + lam3 * x3)
    vb = x2 + lam3 * x3
    vc = -lp.mu0 * x1 / (p.beta * x1h)
    res2 = np.abs(vb - vc) / (1.0 + np.abs(vb))
    worst = float(max(res1.max(initial=0.0), res2.max(initial=0.0)))
    return CheckResult("df_continuity", worst <= rtol, -worst, None, n,
                       {"rtol": rtol})


def check_df_positive_definite(lp: DfLyapParams, p: ModelParams, n: int = 1000,
                               seed: int = DEFAULT_SEED) -> CheckResult:
    rng = np.random.default_rng(seed)
    x1h = p.b_hat / p.mu
    X = np.column_stack([rng.uniform(-5.0 * x1h, 5.0 * x1h, n),
                         rng.uniform(0.0, 5.0 * x1h, n),
                         rng.uniform(0.0, 5.0 * x1h, n)])
    v, _ = lyap_df.df_value_region_arrays(lp, p, X)
    v0 = lyap_df.df_value(lp, p, Deviation(0.0, 0.0, 0.0))
    worst = float(v.min())
    ok = bool(v0 == 0.0 and np.all(v > 0.0))
    return CheckResult("df_positive_definite", ok, worst, _loc(X[np.argmin(v)]), n,
                       {"value_at_zero": v0})


def check_df_grid_iss(lp: DfLyapParams, p: ModelParams, n: int = 60,
                      u_values: Optional[Sequence[float]] = None,
                      tol: float = 1e-12, csv_path=None) -> CheckResult:
    """Grid certificate of the ISS decrease implication.

    On [-x1h, 3*x1h] x [0, 3*x1h]^2 minus a boundary band, wherever
    V >= chi(|u|) the derivative must not exceed -(1-delta)*(mu-mu0)*V,
    up to -tol per unit scale.
    """
    x1h = p.b_hat / p.mu
    if u_values is None:
        u_values = [-p.b_hat, -p.b_hat / 2.0, 0.0, p.b_hat, 10.0 * p.b_hat]
    ax1 = np.linspace(-x1h, 3.0 * x1h, n)
    ax2 = np.linspace(0.0, 3.0 * x1h, n)
    g = np.meshgrid(ax1, ax2, ax2, indexing="ij")
    X = np.stack([a.ravel() for a in g], axis=1)
    v, codes = lyap_df.df_value_region_arrays(lp, p, X)
    band = 1e-9 * (1.0 + np.linalg.norm(X, axis=1))
    off_band = lyap_df.df_boundary_distance_arrays(lp, p, X) > band
    rate = lyap_df.df_decay_rate(lp, p)
    worst = math.inf
    worst_loc = None
    checked = 0
    for u in u_values:
        hyp = off_band & (v >= lyap_df.df_chi(lp, p, abs(u)))
        if not hyp.any():
            continue
        gf = lyap_df.df_grad_dot_f_arrays(lp, p, X[hyp], u)
        slack = -gf - rate * v[hyp]
        scale = 1.0 + np.abs(gf) + rate * v[hyp]
        norm_margin = slack / scale
        j = int(np.argmin(norm_margin))
        checked += int(hyp.sum())
        if norm_margin[j] < worst:
            worst = float(norm_margin[j])
            worst_loc = _loc(X[hyp][j]) + [float(u)]
        if csv_path is not None and u == 0.0:
            lyap_df.write_grid_csv(csv_path, X[hyp], codes[hyp], v[hyp], slack)
    return CheckResult("df_grid_iss", worst >= -tol, worst, worst_loc, checked,
                       {"grid_n": n, "u_values": list(u_values), "tol": tol})


# ---------------------------------------------------------------------------
# endemic checks
# ---------------------------------------------------------------------------

def check_en_continuity(p: ModelParams, lp: EnLyapParams, n_per_boundary: int = 200,
                        seed: int = DEFAULT_SEED, rtol: float = 1e-9) -> CheckResult:
    """Adjacent region formulas agree on all five internal boundaries."""
    rng = np.random.default_rng(seed)
    q = model.endemic_eq(p).point
    x2h = q.i
    lam0, lam1, lam2, lh2 = lp.lam0, lp.lambda1, lp.lambda2, lp.lambda_hat2
    res = {}

    x2 = rng.uniform(0.0, lp.l_bar / lam0, n_per_boundary)
    x1 = -lp.k * x2
    res["A/B"] = np.abs((lam1 * x1 + lam2 * x2) - lam0 * x2) / (1.0 + lam0 * x2)

    x2 = rng.uniform(0.0, lp.l_bar / lam0, n_per_boundary)
    x1 = lyap_en.nu_fun(p, lp, x2)
    vb = lam0 * x2
    vc = lyap_en.p_inv(p, lp, -lam1 * x1 + lh2 * x2)
    res["B/C"] = np.abs(vb - vc) / (1.0 + np.abs(vb))

    lo2 = -lyap_en.p_fun(p, lp, lp.l_bar) / lam0
    x2 = rng.uniform(lo2, 0.0, n_per_boundary)
    x1 = -lp.k * x2
    vd = lyap_en.p_inv(p, lp, -lam1 * x1 - lam2 * x2)
    ve = lyap_en.p_inv(p, lp, (lp.k * lam1 - lam2) * x2)
    res["D/E"] = np.abs(vd - ve) / (1.0 + np.abs(ve))

    x2 = rng.uniform(lo2, -1e-6 * x2h, n_per_boundary)
    x1 = lyap_en.theta_inv(p, -x2)
    ve = lyap_en.p_inv(p, lp, (lp.k * lam1 - lam2) * x2)
    vf = lam1 * x1 - lh2 * x2
    res["E/F"] = np.abs(ve - vf) / (1.0 + np.abs(vf))

    # along x2t = 0 the upper formulas (A, C) must meet the lower ones (F, D)
    half = n_per_boundary // 2
    x1 = rng.uniform(1e-9, lp.l_bar / lam1, half)
    upper = lam1 * x1 + lam2 * 0.0
    lower = lam1 * x1 - lh2 * 0.0
    x1n = rng.uniform(-(1.0 - lp.k) * x2h * 0.9, -1e-9, n_per_boundary - half)
    upper_n = lyap_en.p_inv(p, lp, -lam1 * x1n + lh2 * 0.0)
    lower_n = lyap_en.p_inv(p, lp, -lam1 * x1n - lam2 * 0.0)
    res["x2=0"] = np.concatenate([np.abs(upper - lower) / (1.0 + np.abs(upper)),
                                  np.abs(upper_n - lower_n) / (1.0 + np.abs(upper_n))])

    worst = float(max(r.max() for r in res.values()))
    which = max(res, key=lambda k: res[k].max())
    return CheckResult("en_continuity", worst <= rtol, -worst, which,
                       5 * n_per_boundary, {"rtol": rtol,
                                            "per_boundary_max": {k: float(v.max()) for k, v in res.items()}})


def sample_sublevel(p: ModelParams, lp: EnLyapParams, n: int,
                    seed: int = DEFAULT_SEED, level_frac: float = 1.0,
                    x3_moderate: bool = False) -> np.ndarray:
    """Rejection-sample deviations from the sublevel set {V <= level_frac*l_bar}.

    Half of the x3t draws are moderate (within a few x3h), half sweep the
    full admissible magnitude range log-uniformly, since lambda3 is small and
    the set is extremely elongated in the x3 direction.
    """
    rng = np.random.default_rng(seed)
    q = model.endemic_eq(p).point
    level = level_frac * lp.l_bar
    pl = lyap_en.p_fun(p, lp, lp.l_bar)
    lo1 = -(pl + lp.lambda_hat2 * q.i) / lp.lambda1 - 1.0
    hi1 = lp.l_bar / lp.lambda1 + 1.0
    lo2 = -lyap_en.p_fun(p, lp, lp.l_bar) / lp.lam0 - 1.0
    hi2 = lp.l_bar / lp.lam0 + 1.0
    out = []
    got = 0
    for _ in range(400):
        m = max(4 * (n - got), 20000)
        X = np.empty((m, 3))
        X[:, 0] = rng.uniform(lo1, hi1, m)
        X[:, 1] = rng.uniform(max(lo2, -q.i * 0.999), hi2, m)
        if x3_moderate:
            X[:, 2] = rng.uniform(-0.8 * q.r, 2.0 * q.r, m)
        else:
            mag = 10.0 ** rng.uniform(-3.0, np.log10(level / lp.lambda3), m)
            sgn = rng.choice([-1.0, 1.0], m)
            half = rng.random(m) < 0.5
            X[:, 2] = np.where(half, rng.uniform(-0.9 * q.r, 3.0 * q.r, m),
                               np.clip(sgn * mag, -0.999 * q.r, None))
        keep = lyap_en.in_sublevel_many(p, lp, X, level)
        X = X[keep]
        out.append(X)
        got += len(X)
        if got >= n:
            break
    if got < n:
        raise RuntimeError("sublevel sampling failed to reach the requested count")
    return np.vstack(out)[:n]


def check_en_sample_decrease(p: ModelParams, lp: EnLyapParams, n: int = 100_000,
                             seed: int = DEFAULT_SEED, tol: float = 1e-10) -> CheckResult:
    """Strict decrease with u = 0 plus the per-region certified rate bounds.

    Rates: -mu*V in A and F, -a_B*V in B, -mu*((Pinv)'*arg + V3) in C and D,
    and -(Pinv)'(z)*k*beta*(x2h - theta(omega^{-1}(l_bar)))*gamma_Ek*z - mu*V3
    in E, where gamma_Ek keeps the absorbed x2t cross term accounted for.
    """
    q = model.endemic_eq(p).point
    X = sample_sublevel(p, lp, n, seed)
    band = 1e-9 * (1.0 + np.linalg.norm(X, axis=1))
    d_nu = np.where(X[:, 1] >= 0.0,
                    np.abs(X[:, 0] - lyap_en.nu_fun(p, lp, np.maximum(X[:, 1], 0.0))),
                    np.abs(X[:, 0] - lyap_en.theta_inv(p, np.minimum(-X[:, 1], q.i * (1 - 1e-15)))))
    off = (np.abs(X[:, 1]) > band) & (np.abs(X[:, 0] + lp.k * X[:, 1]) > band) \
        & (np.abs(X[:, 2]) > band) & (d_nu > band)
    X = X[off]
    v = lyap_en.en_value_many(p, lp, X)
    v3 = lp.lambda3 * np.abs(X[:, 2])
    codes = lyap_en._region_codes(p, lp, X[:, 0], X[:, 1])
    gf = lyap_en.en_grad_dot_f_arrays(p, lp, X, 0.0)

    lam0, lam1, lam2, lh2 = lp.lam0, lp.lambda1, lp.lambda2, lp.lambda_hat2
    dc = lyap_en.derived_constants(p, lp)
    spread = q.i - lyap_en.p_fun(p, lp, lp.l_bar) / lam0
    gamma_ek = 1.0 - lp.lambda3 * p.gamma / (lh2 * lp.k * spread * p.beta)
    arg = np.zeros(len(X))
    arg = np.where(codes == 2, -lam1 * X[:, 0] + lh2 * X[:, 1], arg)
    arg = np.where(codes == 3, -lam1 * X[:, 0] - lam2 * X[:, 1], arg)
    arg = np.where(codes == 4, lam0 * (-X[:, 1]), arg)
    qd = lyap_en.p_inv_prime(p, lp, np.minimum(arg, lam0 * q.i * (1 - 1e-15)))
    rate = np.where(np.isin(codes, [0, 5]), p.mu * v, 0.0)
    rate = np.where(codes == 1, dc.a_b * v, rate)
    rate = np.where(np.isin(codes, [2, 3]), p.mu * (qd * arg + v3), rate)
    if gamma_ek > 0.0:
        rate_e = qd * arg * lp.k * p.beta * spread * gamma_ek + p.mu * v3
    else:
        rate_e = np.zeros(len(X))  # fall back to plain negativity in E
    rate = np.where(codes == 4, rate_e, rate)

    scale = 1.0 + np.abs(gf) + np.abs(rate)
    margin = (-gf - rate) / scale
    j = int(np.argmin(margin))
    strictly_negative = bool(np.all(gf < 0.0))
    ok = strictly_negative and bool(np.all(margin >= -tol))
    details = {
        "tol": tol,
        "strictly_negative": strictly_negative,
        "max_grad_dot_f": float(gf.max()),
        "gamma_ek": float(gamma_ek),
        "region_counts": {r.value: int((codes == i).sum())
                          for i, r in enumerate(lyap_en.EnRegion)},
    }
    return CheckResult("en_sample_decrease", ok, float(margin[j]), _loc(X[j]),
                       len(X), details)


def check_en_iss_pointwise(p: ModelParams, lp: EnLyapParams, n: int = 20_000,
                           n_u: int = 5, seed: int = DEFAULT_SEED,
                           tol: float = 1e-10) -> CheckResult:
    """Pointwise ISS implications under nonzero perturbations.

    In the outer linear regions the hypothesis is u <= delta*mu*V/lambda1;
    in the two inverse-map regions it is the per-state threshold
    -lambda1*u <= delta*mu*(arg + V3/(Pinv)'(arg)), which is weaker than the
    eta-based hypothesis and therefore covers it.  The two flat regions are
    input-independent and certified by the u = 0 check.
    """
    X = sample_sublevel(p, lp, n, seed)
    v = lyap_en.en_value_many(p, lp, X)
    v3 = lp.lambda3 * np.abs(X[:, 2])
    codes = lyap_en._region_codes(p, lp, X[:, 0], X[:, 1])
    lam0, lam1, lam2, lh2 = lp.lam0, lp.lambda1, lp.lambda2, lp.lambda_hat2
    q = model.endemic_eq(p).point
    arg = np.zeros(len(X))
    arg = np.where(codes == 2, -lam1 * X[:, 0] + lh2 * X[:, 1], arg)
    arg = np.where(codes == 3, -lam1 * X[:, 0] - lam2 * X[:, 1], arg)
    qd = lyap_en.p_inv_prime(p, lp, np.minimum(arg, lam0 * q.i * (1 - 1e-15)))
    lo, hi = lyap_en.en_input_range(p, lp)
    worst = math.inf
    worst_loc = None
    checked = 0
    af = np.isin(codes, [0, 5])
    cd = np.isin(codes, [2, 3])
    for u in np.linspace(0.98 * lo, 0.98 * hi, n_u):
        gf = lyap_en.en_grad_dot_f_arrays(p, lp, X, u)
        hyp_af = af & (u <= lp.delta * p.mu * v / lam1)
        rate_af = (1.0 - lp.delta) * p.mu * v
        hyp_cd = cd & (-lam1 * u <= lp.delta * p.mu * (arg + v3 / qd))
        rate_cd = (1.0 - lp.delta) * p.mu * (qd * arg + v3)
        for hyp, rate in ((hyp_af, rate_af), (hyp_cd, rate_cd)):
            if not hyp.any():
                continue
            margin = (-gf[hyp] - rate[hyp]) / (1.0 + np.abs(gf[hyp]) + np.abs(rate[hyp]))
            j = int(np.argmin(margin))
            checked += int(hyp.sum())
            if margin[j] < worst:
                worst = float(margin[j])
                worst_loc = _loc(X[hyp][j]) + [float(u)]
    return CheckResult("en_iss_pointwise", worst >= -tol, worst, worst_loc, checked,
                       {"n_u": n_u, "tol": tol})


# ---------------------------------------------------------------------------
# trajectory checks
# ---------------------------------------------------------------------------

def _lyap_values_of_states(lyap, S: np.ndarray) -> np.ndarray:
    v = lyap.value_of_states(S)
    if np.any(~np.isfinite(v)):
        raise RangeError("trajectory left the domain of the Lyapunov function")
    return v


def check_dini_along_trajectory(lyap, traj: ode.Trajectory, decay_rate: float = 0.0,
                                tol_scale: float = 1e-6, v_stop: float = 0.0) -> CheckResult:
    """Forward-difference derivative estimate along a recorded trajectory.

    With decay_rate == 0 asserts (V(t+h)-V(t))/h <= tol_scale*(1+V); with a
    positive rate asserts the step-wise contraction V(t+h) <= V(t)*exp(-r*h)
    up to the same allowance, which is the valid discrete consequence of the
    continuous bound (a raw difference quotient carries an O(h) bias).
    """
    if traj.anchor is not None and traj.anchor is not lyap.kind:
        raise MismatchedEquilibrium(
            f"trajectory anchored to {traj.anchor}, function to {lyap.kind}")
    v = _lyap_values_of_states(lyap, traj.states)
    h = np.diff(traj.times)
    tol = tol_scale * (1.0 + v[:-1])
    active = v[:-1] > v_stop
    if decay_rate == 0.0:
        quot = np.diff(v) / h
        margin = np.where(active, tol - quot, np.inf)
    else:
        margin = np.where(active, v[:-1] * np.exp(-decay_rate * h) + tol * h - v[1:], np.inf)
    j = int(np.argmin(margin))
    worst = float(margin[j]) if len(margin) else math.inf
    return CheckResult("dini_along_trajectory", worst >= 0.0, worst,
                       float(traj.times[j]), max(len(margin), 1),
                       {"decay_rate": decay_rate, "v_final": float(v[-1])})


def check_trajectory_monotonicity(lyap, n_starts: int = 50, t_end: Optional[float] = None,
                                  dt: float = 0.05, seed: int = DEFAULT_SEED,
                                  v_stop: float = 1e-6, final_tol: float = 1e-3) -> CheckResult:
    """Streaming Dini check over a batch of nominal-input trajectories.

    Asserts V decreases (difference quotient below 1e-6*(1+V)) while
    V > v_stop, and the final state lands within final_tol of the anchor
    in the 1-norm by t_end (default 50 mean lifetimes).
    """
    p = lyap.p
    rng = np.random.default_rng(seed)
    qpt = lyap.equilibrium.point.as_array()
    if t_end is None:
        t_end = 50.0 / p.mu
    if lyap.kind is EquilibriumKind.DISEASE_FREE:
        x1h = qpt[0]
        X0 = np.column_stack([rng.uniform(0.0, 3.0 * x1h, n_starts),
                              rng.uniform(0.0, 2.0 * x1h, n_starts),
                              rng.uniform(0.0, 2.0 * x1h, n_starts)])
    else:
        devs = sample_sublevel(p, lyap.lp, n_starts, seed, level_frac=0.95,
                               x3_moderate=True)
        X0 = devs + qpt[None, :]
    state = {"v": _lyap_values_of_states(lyap, X0), "t": 0.0,
             "worst": math.inf, "worst_t": 0.0, "nonstrict": 0}

    def observer(t, X, b):
        v_new = _lyap_values_of_states(lyap, X)
        h = t - state["t"]
        quot = (v_new - state["v"]) / h
        tol = 1e-6 * (1.0 + state["v"])
        active = state["v"] > v_stop
        if active.any():
            m = float((tol - quot)[active].min())
            if m < state["worst"]:
                state["worst"], state["worst_t"] = m, t
        state["nonstrict"] += int(np.sum((v_new >= state["v"]) & (state["v"] > 1e-9)))
        state["v"] = v_new
        state["t"] = t

    Xf = ode.integrate_batch(p, X0, ode.Constant(p.b_hat), t_end, dt, observer=observer)
    final_dist = np.abs(Xf - qpt[None, :]).sum(axis=1)
    ok = state["worst"] >= 0.0 and bool(np.all(final_dist <= final_tol)) \
        and state["nonstrict"] == 0
    return CheckResult(f"trajectory_monotonicity_{lyap.kind.value}", ok,
                       float(min(state["worst"], float(final_tol - final_dist.max()))),
                       state["worst_t"], n_starts,
                       {"max_final_dist": float(final_dist.max()),
                        "final_tol": final_tol, "t_end": t_end,
                        "nonstrict_steps_above_1e-9": state["nonstrict"]})


def _signal_u_extremes(lyap, sig: ode.InputSignal, t_end: float) -> tuple:
    ts = np.linspace(0.0, t_end, 4097)
    u = np.array([sig.value(t) for t in ts]) - lyap.p.b_hat
    return float(np.maximum(u, 0.0).max()), float(np.maximum(-u, 0.0).max())


def check_iss_bound(lyap, sig: ode.InputSignal, t_end: Optional[float] = None,
                    dt: float = 0.05, x0: Optional[State] = None,
                    tail: float = 0.2, headroom: float = 1e-3) -> CheckResult:
    """limsup of V over the final stretch stays below the gain threshold.

    For the disease-free function the threshold is chi(sup|u|) =
    sup|u|/(delta*(mu-mu0)); for the endemic one it is the eta-derived level
    (capped at l_bar, where the assertion reduces to forward invariance,
    which is checked along the whole horizon).
    """
    p = lyap.p
    if t_end is None:
        t_end = 50.0 / p.mu
    u_pos, u_neg = _signal_u_extremes(lyap, sig, t_end)
    lo, hi = lyap.admissible_u()
    endemic = lyap.kind is EquilibriumKind.ENDEMIC
    # endemic range is open; the disease-free one is closed at u = -b_hat
    bad = (-u_neg <= lo or u_pos >= hi) if endemic else (-u_neg < lo)
    if bad:
        raise RangeError(f"input range [{-u_neg:.6g}, {u_pos:.6g}] outside ({lo:.6g}, {hi:.6g})")
    thr = lyap.chi_signed(u_pos, u_neg) if endemic else lyap.chi(max(u_pos, u_neg))
    if x0 is None:
        x0 = lyap.equilibrium.point
    state = {"vmax_tail": 0.0, "vmax_all": 0.0}
    t_tail = (1.0 - tail) * t_end

    def observer(t, X, b):
        v = float(_lyap_values_of_states(lyap, X)[0])
        state["vmax_all"] = max(state["vmax_all"], v)
        if t >= t_tail:
            state["vmax_tail"] = max(state["vmax_tail"], v)

    ode.integrate_batch(p, x0.as_array()[None, :], sig, t_end, dt, observer=observer)
    limsup = state["vmax_tail"]
    allowance = max(thr * (1.0 + headroom), 1e-6)
    margin = allowance - limsup
    ok = margin >= 0.0
    details = {"limsup_v": limsup, "threshold": thr, "u_pos": u_pos, "u_neg": u_neg}
    if endemic:
        inv_ok = state["vmax_all"] <= lyap.lp.l_bar * (1.0 + 1e-9)
        details["max_v_full_horizon"] = state["vmax_all"]
        details["forward_invariant"] = inv_ok
        ok = ok and inv_ok
    return CheckResult("iss_bound", ok, float(margin), None, 1, details)


def iss_step_suite(lyap, u_steps: Sequence[float], t_end: Optional[float] = None,
                   dt: float = 0.05, tail: float = 0.2,
                   headroom: float = 1e-3) -> CheckResult:
    """Batched version of check_iss_bound for a family of step perturbations.

    Every run starts at the equilibrium under the nominal rate and switches
    to b_hat + u at 20% of the horizon.
    """
    p = lyap.p
    if t_end is None:
        t_end = 50.0 / p.mu
    lo, hi = lyap.admissible_u()
    endemic = lyap.kind is EquilibriumKind.ENDEMIC
    for u in u_steps:
        if (endemic and not (lo < u < hi)) or (not endemic and u < lo):
            raise RangeError(f"step u={u:.6g} outside ({lo:.6g}, {hi:.6g})")
    u_vec = np.asarray(u_steps, dtype=float)
    thr = np.array([lyap.chi_signed(max(u, 0.0), max(-u, 0.0)) if endemic
                    else lyap.chi(abs(u)) for u in u_vec])
    t_switch = 0.2 * t_end
    t_tail = (1.0 - tail) * t_end
    X0 = np.tile(lyap.equilibrium.point.as_array(), (len(u_vec), 1))
    vmax_tail = np.zeros(len(u_vec))
    vmax_all = np.zeros(len(u_vec))
    state = {"t": 0.0}

    def observer(t, X, b):
        v = _lyap_values_of_states(lyap, X)
        np.maximum(vmax_all, v, out=vmax_all)
        if t >= t_tail:
            np.maximum(vmax_tail, v, out=vmax_tail)

    # two aligned spans: nominal input, then the stepped input
    X = ode.integrate_batch(p, X0, ode.Constant(p.b_hat), t_switch, dt)
    bvec = p.b_hat + u_vec
    X = ode._rk4_span(p, X, t_switch, t_end, dt, lambda t: bvec, observer=observer)
    allowance = np.maximum(thr * (1.0 + headroom), 1e-6)
    margins = allowance - vmax_tail
    ok = bool(np.all(margins >= 0.0))
    details = {"u_steps": list(map(float, u_vec)), "limsups": vmax_tail.tolist(),
               "thresholds": thr.tolist()}
    if endemic:
        inv_ok = bool(np.all(vmax_all <= lyap.lp.l_bar * (1.0 + 1e-9)))
        details["forward_invariant"] = inv_ok
        details["max_v_full_horizon"] = vmax_all.tolist()
        ok = ok and inv_ok
    j = int(np.argmin(margins))
    return CheckResult("iss_step_suite", ok, float(margins[j]), float(u_vec[j]),
                       len(u_vec), details)


# ---------------------------------------------------------------------------
# structural checks
# ---------------------------------------------------------------------------

def _formula_steady_state(p: ModelParams, c: float) -> np.ndarray:
    pc = ModelParams(p.beta, p.gamma, p.mu, c)
    if model.r0_hat(pc) <= 1.0:
        return model.disease_free_eq(pc).point.as_array()
    return model.endemic_eq(pc).point.as_array()


def check_bifurcation_continuity(p: ModelParams, c_values: Optional[np.ndarray] = None,
                                 tol: float = 1e-8, t_max: float = 4e4,
                                 dt: float = 0.25, match_tol: float = 5e-2) -> CheckResult:
    """Simulated steady states track the closed-form branches across R0 = 1."""
    c_star = p.mu * (p.gamma + p.mu) / p.beta
    if c_values is None:
        c_values = np.linspace(0.71 * c_star, 1.30 * c_star, 21)
    c_values = np.asarray(c_values, dtype=float)
    X0 = np.column_stack([0.8 * c_values / p.mu,
                          np.full(len(c_values), 10.0),
                          np.full(len(c_values), 5.0)])
    X = ode.steady_state_batch(p, c_values, X0, tol=tol, t_max=t_max, dt=dt)
    F = np.stack([_formula_steady_state(p, c) for c in c_values])
    err = np.abs(X - F).sum(axis=1)
    dx = np.abs(np.diff(X, axis=0)).sum(axis=1)
    dc = np.diff(c_values)
    K = float((dx / dc).max())
    f_left = model.disease_free_eq(ModelParams(p.beta, p.gamma, p.mu, c_star)).point.as_array()
    pe = ModelParams(p.beta, p.gamma, p.mu, c_star * (1.0 + 1e-13))
    f_right = model.endemic_eq(pe).point.as_array()
    lim_gap = float(np.abs(f_left - f_right).sum() / (1.0 + np.abs(f_left).sum()))
    j = int(np.argmax(err))
    ok = bool(np.all(err <= match_tol)) and lim_gap <= 1e-3
    return CheckResult("bifurcation_continuity", ok, float(match_tol - err[j]),
                       float(c_values[j]), len(c_values),
                       {"lipschitz_estimate": K, "limit_gap_at_threshold": lim_gap,
                        "max_formula_error": float(err.max()), "match_tol": match_tol})


def check_sublevel_nesting(p: ModelParams, lp: EnLyapParams,
                           lam_hat2_pairs=((0.005, 0.01),),
                           k_pairs=((0.05, 0.0902),),
                           L_values: Optional[Sequence[float]] = None,
                           n: int = 10_000, seed: int = DEFAULT_SEED) -> CheckResult:
    """Monotonicity of the sublevel sets in lambda_hat2 and (restricted) in k.

    The lambda_hat2 ordering holds pointwise for the full function, so it is
    sampled in all three coordinates.  The k ordering is a property of the
    planar part (its budget argument in the flat region is consumed by any
    positive x3 contribution, for which counterexamples exist), so it is
    sampled on the x3t = 0 slice, restricted to x2t <= L/lambda2.
    """
    if L_values is None:
        L_values = [lp.l_bar, 0.5 * lp.l_bar]
    rng = np.random.default_rng(seed)
    q = model.endemic_eq(p).point
    X = np.empty((n, 3))
    X[:, 0] = rng.uniform(-0.99 * (1.0 - lp.k) * q.i, lp.l_bar, n)
    X[:, 1] = rng.uniform(-0.98 * q.i, lp.l_bar / lp.lam0, n)
    X[:, 2] = rng.uniform(-0.9 * q.r, lp.l_bar / lp.lambda3, n)
    Xp = X.copy()
    Xp[:, 2] = 0.0
    violations = 0
    tested = 0
    for a, b in lam_hat2_pairs:
        lpa, lpb = replace(lp, lambda_hat2=a), replace(lp, lambda_hat2=b)
        for lq in (lpa, lpb):
            if not lyap_en.check_condition_50(p, lq).passed:
                raise RegimeError("condition (50) fails for a nesting parameter set")
        for L in L_values:
            inb = lyap_en.in_sublevel_many(p, lpb, X, L)
            ina = lyap_en.in_sublevel_many(p, lpa, X, L)
            violations += int(np.sum(inb & ~ina))
            tested += int(inb.sum())
    for a, b in k_pairs:
        lpa, lpb = replace(lp, k=a), replace(lp, k=b)
        for lq in (lpa, lpb):
            if not lyap_en.check_condition_50(p, lq).passed:
                raise RegimeError("condition (50) fails for a nesting parameter set")
        for L in L_values:
            cap = Xp[:, 1] <= L / lp.lambda2
            inb = lyap_en.in_sublevel_many(p, lpb, Xp, L) & cap
            ina = lyap_en.in_sublevel_many(p, lpa, Xp, L) & cap
            violations += int(np.sum(inb & ~ina))
            tested += int(inb.sum())
    return CheckResult("sublevel_nesting", violations == 0, -float(violations),
                       None, tested, {"lam_hat2_pairs": list(map(list, lam_hat2_pairs)),
                                      "k_pairs": list(map(list, k_pairs)),
                                      "L_values": list(map(float, L_values))})


def check_w_region(p: ModelParams, lp: EnLyapParams, n_starts: int = 20,
                   t_end: Optional[float] = None, dt: float = 0.05,
                   seed: int = DEFAULT_SEED) -> CheckResult:
    """Exponential decay of W = -x1t - x2t + |x3t| inside the entry wedge,
    and finite entry time into the sublevel set."""
    rng = np.random.default_rng(seed)
    q = model.endemic_eq(p).point
    qpt = q.as_array()
    if t_end is None:
        t_end = 50.0 / p.mu
    x2t0 = rng.uniform(-0.9 * q.i, -0.05 * q.i, n_starts)
    x1t0 = np.array([rng.uniform(-0.9 * q.s, -lp.k * v) for v in x2t0])
    x3t0 = rng.uniform(-0.9 * q.r, 1.5 * q.r, n_starts)
    D0 = np.column_stack([x1t0, x2t0, x3t0])
    D0[0] = 0.0  # include the equilibrium itself: W stays at zero
    X0 = D0 + qpt[None, :]

    def w_of(X):
        D = X - qpt[None, :]
        return -D[:, 0] - D[:, 1] + np.abs(D[:, 2])

    def in_t(X):
        D = X - qpt[None, :]
        return (D[:, 0] <= -lp.k * D[:, 1]) & (D[:, 1] <= 0.0)

    state = {"w": w_of(X0), "int": in_t(X0), "t": 0.0, "worst": math.inf,
             "entry": np.full(n_starts, np.nan)}
    state["entry"][lyap_en.in_sublevel_many(p, lp, D0, lp.l_bar)] = 0.0
    counter = [0]

    def observer(t, X, b):
        h = t - state["t"]
        w_new = w_of(X)
        both = state["int"] & in_t(X)
        if both.any():
            tol = 1e-6 * (1.0 + state["w"])
            m = (state["w"] * math.exp(-p.mu * h) + tol * h - w_new)[both].min()
            state["worst"] = min(state["worst"], float(m))
        counter[0] += 1
        if counter[0] % 5 == 0:
            pending = np.isnan(state["entry"])
            if pending.any():
                inside = lyap_en.in_sublevel_many(p, lp, X[pending] - qpt[None, :], lp.l_bar)
                idx = np.flatnonzero(pending)[inside]
                state["entry"][idx] = t
        state["w"] = w_new
        state["int"] = in_t(X)
        state["t"] = t

    ode.integrate_batch(p, X0, ode.Constant(p.b_hat), t_end, dt, observer=observer)
    entered = ~np.isnan(state["entry"])
    ok = state["worst"] >= 0.0 and bool(entered.all())
    return CheckResult("w_region", ok, float(state["worst"]), None, n_starts,
                       {"max_entry_time": float(np.nanmax(state["entry"])),
                        "all_entered": bool(entered.all())})


def separability_obstruction_demo(p: ModelParams) -> CheckResult:
    """Contradictory sign requirements on dV/dx1t at x1t = 0 for any
    separable candidate whose x3-part increases away from the anchor."""
    q = model.endemic_eq(p).point
    ratio = p.gamma / p.mu
    # class (a): x2 above equilibrium, x3 in (x3h, ratio*x2]
    x2_up = q.i + 60.0
    x3_up = min(q.r + 60.0, ratio * x2_up)
    f_up = model.rhs(p, State(q.s, x2_up, x3_up), p.b_hat)
    # class (b): x2 below equilibrium, x3 in [ratio*x2, x3h)
    x2_dn = q.i - 60.0
    x3_dn = 0.5 * (ratio * x2_dn + q.r)
    f_dn = model.rhs(p, State(q.s, x2_dn, x3_dn), p.b_hat)
    # decrease with dI/dt = 0 and the x3 term nonnegative forces these signs
    sign_up = 1 if f_up[0] < 0.0 and f_up[2] >= 0.0 else 0
    sign_dn = -1 if f_dn[0] > 0.0 and f_dn[2] <= 0.0 else 0
    f_eq = model.rhs(p, State(q.s, q.i, 1234.0), p.b_hat)
    flow_vanishes = abs(f_eq[0]) <= 1e-9 * max(1.0, p.b_hat)
    ok = sign_up == 1 and sign_dn == -1 and flow_vanishes
    margin = min(-f_up[0], f_dn[0])
    return CheckResult("separability_obstruction", ok, float(margin),
                       [q.s, x2_up, x3_up], 2,
                       {"required_sign_upper": sign_up, "required_sign_lower": sign_dn,
                        "dx2dt_on_plane": float(f_up[1]),
                        "anti_parallel_vanishes_at_x2hat": flow_vanishes})


def prohibited_region_demo(p: ModelParams, l_bars=(340.0, 1e3, 3e3, 1e4),
                           start: State = None, t_end: float = 3000.0,
                           dt: float = 0.05) -> CheckResult:
    """The corner wedge along the S-axis stays outside every sublevel set,
    and the infected count keeps falling while x1 < x1h."""
    q = model.endemic_eq(p).point
    xf = model.disease_free_eq(p).point.as_array()
    if start is None:
        start = State(100.0, 0.01, 0.0)
    f0 = model.rhs(p, start, p.b_hat)
    di_negative = f0[1] < 0.0
    # on the axis itself the I-equation is at rest and S grows
    f_axis = model.rhs(p, State(start.s, 0.0, 0.0), p.b_hat)
    axis_ok = f_axis[1] == 0.0 and f_axis[0] > 0.0
    traj = ode.integrate(p, start, ode.Constant(p.b_hat), t_end, dt, record_every=4)
    S, I = traj.states[:, 0], traj.states[:, 1]
    # the derivative sign is exact; the recorded decrease needs a small buffer
    # away from the threshold, where the decrement falls below roundoff
    di = p.beta * I * (S - q.s)
    sign_ok = bool(np.all(di[(S < q.s) & (I > 0.0)] < 0.0))
    below = (S[:-1] < q.s - 0.01) & (S[1:] < q.s - 0.01)
    i_monotone = sign_ok and bool(np.all(I[1:][below] < I[:-1][below]))
    dist_f = np.abs(traj.states - xf[None, :]).sum(axis=1)
    final_dist_e = float(np.abs(traj.states[-1] - q.as_array()).sum())
    dev0 = Deviation(start.s - q.s, start.i - q.i, start.r - q.r)
    excluded = []
    for lb in l_bars:
        lp = lyap_en.select_en_params(p, l_bar=lb)
        excluded.append(not lyap_en.in_sublevel(p, lp, dev0, lb))
    ok = di_negative and axis_ok and i_monotone and all(excluded) and final_dist_e < 1.0
    return CheckResult("prohibited_region", ok,
                       float(min(-f0[1], 1.0 - final_dist_e)),
                       [start.s, start.i, start.r], len(l_bars),
                       {"min_distance_to_disease_free": float(dist_f.min()),
                        "final_distance_to_endemic": final_dist_e,
                        "excluded_for_all_l_bars": all(excluded),
                        "l_bars": list(map(float, l_bars))})


# ---------------------------------------------------------------------------
# composed suites
# ---------------------------------------------------------------------------

def builtin_signal_suite(p: ModelParams, u_mag: float, t_end: float) -> list:
    """Constant, step and clipped-sinusoid perturbations of magnitude u_mag."""
    return [
        ode.Constant(p.b_hat + u_mag),
        ode.Step(0.2 * t_end, p.b_hat, p.b_hat + u_mag),
        ode.Sinusoid(p.b_hat, u_mag, 2.0 * math.pi / (t_end / 8.0)),
    ]


def run_certification(p: ModelParams, kind: EquilibriumKind, lp=None,
                      seed: int = DEFAULT_SEED, grid_n: int = 60,
                      n_samples: int = 100_000, n_traj: int = 50) -> VerificationReport:
    """Full check suite for one equilibrium, as wired into the CLI."""
    rep = VerificationReport()
    t_end = 50.0 / p.mu
    if kind is EquilibriumKind.DISEASE_FREE:
        if lp is None:
            lp = lyap_df.select_df_params(p)
        lyap = DiseaseFreeLyapunov(p, lp)
        rep.add(check_df_continuity(lp, p, seed=seed))
        rep.add(check_df_positive_definite(lp, p, seed=seed))
        rep.add(check_df_grid_iss(lp, p, n=grid_n))
        rep.add(check_trajectory_monotonicity(lyap, n_starts=n_traj, seed=seed,
                                              final_tol=1e-3))
        for sig in builtin_signal_suite(p, p.b_hat / 10.0, t_end):
            rep.add(check_iss_bound(lyap, sig, t_end=t_end))
    else:
        if lp is None:
            lp = lyap_en.select_en_params(p, l_bar=340.0)
        lyap = EndemicLyapunov(p, lp)
        res50 = lyap_en.check_condition_50(p, lp)
        rep.add(CheckResult("condition_50", res50.passed, res50.worst_margin,
                            res50.argmin_l, res50.samples))
        rep.add(check_en_continuity(p, lp, seed=seed))
        rep.add(check_en_sample_decrease(p, lp, n=n_samples, seed=seed))
        rep.add(check_en_iss_pointwise(p, lp, n=min(n_samples, 20_000), seed=seed))
        rep.add(check_trajectory_monotonicity(lyap, n_starts=n_traj, seed=seed,
                                              final_tol=1e-2))
        rep.add(check_sublevel_nesting(p, lp, seed=seed))
        lo, hi = lyap_en.en_input_range(p, lp)
        u_mag = 0.45 * min(-lo, hi)
        for sig in builtin_signal_suite(p, u_mag, t_end):
            rep.add(check_iss_bound(lyap, sig, t_end=t_end))
    return rep
