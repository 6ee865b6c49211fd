"""Fixed-step RK4 integration of the SIR system under time-varying inputs.

Discontinuous (step/piecewise-constant) inputs are handled by aligning the
integration grid with the switch times, which preserves the classical order
of the method across each segment.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, NonFiniteState, NotConverged
from .model import EquilibriumKind, ModelParams, State, rhs_arrays

DEFAULT_DT = 0.01


# ---------------------------------------------------------------------------
# input signals
# ---------------------------------------------------------------------------

class InputSignal:
    """Newborn/immigration rate B(t) >= 0 defined for t >= 0."""

    def value(self, t: float) -> float:
        raise NotImplementedError

    def breakpoints(self, t_end: float) -> list:
        """Interior discontinuity times in (0, t_end)."""
        return []

    #: True when the signal is constant between consecutive breakpoints
    piecewise_constant = False


@dataclass(frozen=True)
class Constant(InputSignal):
    c: float

    piecewise_constant = True

    def __post_init__(self):
        if self.c < 0.0:
            raise ValueError("constant input must be nonnegative")

    def value(self, t: float) -> float:
        return self.c


@dataclass(frozen=True)
class Step(InputSignal):
    t_switch: float
    c_before: float
    c_after: float

    piecewise_constant = True

    def __post_init__(self):
        if min(self.c_before, self.c_after) < 0.0:
            raise ValueError("step levels must be nonnegative")

    def value(self, t: float) -> float:
        return self.c_after if t >= self.t_switch else self.c_before

    def breakpoints(self, t_end: float) -> list:
        return [self.t_switch] if 0.0 < self.t_switch < t_end else []


@dataclass(frozen=True)
class Piecewise(InputSignal):
    """Left-closed segments: level c_i applies on [t_i, t_{i+1})."""

    points: tuple  # ((t_0, c_0), (t_1, c_1), ...) with t_0 <= 0 recommended

    piecewise_constant = True

    def __post_init__(self):
        ts = [t for t, _ in self.points]
        if list(ts) != sorted(ts):
            raise ValueError("piecewise breakpoints must be increasing")
        if any(c < 0.0 for _, c in self.points):
            raise ValueError("piecewise levels must be nonnegative")
        if not self.points:
            raise ValueError("piecewise signal needs at least one segment")

    def value(self, t: float) -> float:
        out = self.points[0][1]
        for ti, ci in self.points:
            if t >= ti:
                out = ci
            else:
                break
        return out

    def breakpoints(self, t_end: float) -> list:
        return [t for t, _ in self.points if 0.0 < t < t_end]


@dataclass(frozen=True)
class Sinusoid(InputSignal):
    """max(0, mean + amplitude*sin(omega*t)); the clip keeps B nonnegative."""

    mean: float
    amplitude: float
    angular_frequency: float

    def value(self, t: float) -> float:
        return max(0.0, self.mean + self.amplitude * math.sin(self.angular_frequency * t))


def sample_input(sig: InputSignal, t: float) -> float:
    """Evaluate B(t); t must be nonnegative."""
    if t < 0.0:
        raise DomainError("signals are defined for t >= 0")
    return sig.value(t)


def signal_from_dict(d: dict) -> InputSignal:
    kinds = {
        "constant": lambda d: Constant(float(d["value"])),
        "step": lambda d: Step(float(d["t_switch"]), float(d["before"]), float(d["after"])),
        "piecewise": lambda d: Piecewise(tuple((float(t), float(c)) for t, c in d["points"])),
        "sinusoid": lambda d: Sinusoid(
            float(d["mean"]), float(d["amplitude"]), float(d["angular_frequency"])
        ),
    }
    kind = d.get("kind")
    if kind not in kinds:
        raise ValueError(f"unknown signal kind {kind!r}")
    return kinds[kind](d)


def signal_to_dict(sig: InputSignal) -> dict:
    if isinstance(sig, Constant):
        return {"kind": "constant", "value": sig.c}
    if isinstance(sig, Step):
        return {"kind": "step", "t_switch": sig.t_switch, "before": sig.c_before, "after": sig.c_after}
    if isinstance(sig, Piecewise):
        return {"kind": "piecewise", "points": [list(pt) for pt in sig.points]}
    if isinstance(sig, Sinusoid):
        return {
            "kind": "sinusoid",
            "mean": sig.mean,
            "amplitude": sig.amplitude,
            "angular_frequency": sig.angular_frequency,
        }
    raise ValueError(f"unsupported signal type {type(sig)!r}")


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Recorded solution: times (n,), states (n, 3), inputs (n,)."""

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    anchor: Optional[EquilibriumKind] = None

    def __post_init__(self):
        if not (len(self.times) == len(self.states) == len(self.inputs)):
            raise ValueError("times, states and inputs must have equal length")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("times must be strictly increasing")

    @property
    def final_state(self) -> State:
        s, i, r = self.states[-1]
        return State(float(s), float(i), float(r))

    def to_csv(self, path, thin: int = 1) -> None:
        """Write `t,S,I,R,B` rows, keeping every `thin`-th record plus the last."""
        if thin < 1:
            raise ValueError("thin must be >= 1")
        idx = list(range(0, len(self.times), thin))
        if idx[-1] != len(self.times) - 1:
            idx.append(len(self.times) - 1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "S", "I", "R", "B"])
            for j in idx:
                s, i, r = self.states[j]
                w.writerow([repr(float(self.times[j])), repr(float(s)), repr(float(i)),
                            repr(float(r)), repr(float(self.inputs[j]))])


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def _segments(sig: InputSignal, t_end: float) -> list:
    cuts = sorted(set(sig.breakpoints(t_end)))
    edges = [0.0] + cuts + [t_end]
    return [(edges[j], edges[j + 1]) for j in range(len(edges) - 1)]


def _check_state(X: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(X)):
        raise NonFiniteState(f"non-finite state at t={t:.6g}; reduce dt")
    n_tot = np.maximum(1.0, X.sum(axis=-1))
    floor = -1e-12 * n_tot
    bad = X < floor[..., None]
    if np.any(bad):
        raise NonFiniteState(f"state component below -1e-12*N at t={t:.6g}; reduce dt")
    np.clip(X, 0.0, None, out=X)


def _rk4_span(p: ModelParams, X: np.ndarray, t0: float, t1: float, dt: float,
              b_of_t, observer=None) -> np.ndarray:
    """Advance the batch X (m, 3) from t0 to t1 with steps of size <= dt."""
    span = t1 - t0
    if span <= 0.0:
        return X
    n = max(1, int(math.ceil(span / dt - 1e-12)))
    h = span / n
    for j in range(n):
        t = t0 + j * h
        t_next = t1 if j == n - 1 else t0 + (j + 1) * h  # land exactly on t1
        b0 = b_of_t(t)
        bm = b_of_t(t + 0.5 * h)
        b1 = b_of_t(t_next)
        s, i, r = X[:, 0], X[:, 1], X[:, 2]
        k1 = np.stack(rhs_arrays(p, s, i, r, b0), axis=1)
        Y = X + 0.5 * h * k1
        k2 = np.stack(rhs_arrays(p, Y[:, 0], Y[:, 1], Y[:, 2], bm), axis=1)
        Y = X + 0.5 * h * k2
        k3 = np.stack(rhs_arrays(p, Y[:, 0], Y[:, 1], Y[:, 2], bm), axis=1)
        Y = X + h * k3
        k4 = np.stack(rhs_arrays(p, Y[:, 0], Y[:, 1], Y[:, 2], b1), axis=1)
        X = X + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        _check_state(X, t_next)
        if observer is not None:
            observer(t_next, X, b1)
    return X


def integrate_batch(p: ModelParams, X0: np.ndarray, sig: InputSignal, t_end: float,
                    dt: float = DEFAULT_DT, observer=None) -> np.ndarray:
    """RK4 for a batch of initial states; returns the final batch.

    `observer(t, X, b)` is invoked after every accepted step.  Pure apart
    from the observer callback; safe to run concurrently on separate data.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if t_end < 0.0:
        raise ValueError("t_end must be nonnegative")
    X = np.array(X0, dtype=float, copy=True)
    if X.ndim != 2 or X.shape[1] != 3:
        raise ValueError("X0 must have shape (m, 3)")
    for a, b in _segments(sig, t_end):
        if sig.piecewise_constant:
            c = sig.value(a)  # left-closed: the level at the segment start governs
            b_of_t = lambda t, c=c: c
        else:
            b_of_t = sig.value
        X = _rk4_span(p, X, a, b, dt, b_of_t, observer=observer)
    return X


def integrate(p: ModelParams, x0: State, sig: InputSignal, t_end: float,
              dt: float = DEFAULT_DT, record_every: int = 1) -> Trajectory:
    """Integrate from x0 and record every `record_every`-th step."""
    times = [0.0]
    states = [x0.as_array()]
    inputs = [sample_input(sig, 0.0)]
    counter = [0]

    def observer(t, X, b):
        counter[0] += 1
        if counter[0] % record_every == 0:
            times.append(t)
            states.append(X[0].copy())
            inputs.append(b)

    Xf = integrate_batch(p, x0.as_array()[None, :], sig, t_end, dt, observer=observer)
    if times[-1] != t_end and t_end > 0.0:
        times.append(t_end)
        states.append(Xf[0].copy())
        inputs.append(sig.value(t_end))
    return Trajectory(np.array(times), np.array(states), np.array(inputs))


def steady_state(p: ModelParams, c: float, x0: State, tol: float = 1e-9,
                 t_max: float = 1e5, dt: float = 0.1) -> State:
    """Integrate under Constant(c) until ||rhs||_1 < tol*(1 + ||x||_1).

    Raises NotConverged when t_max is reached first.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    X = x0.as_array()[None, :]
    sig = Constant(c)
    t = 0.0
    chunk = max(dt, 200.0 * dt)
    while t < t_max:
        step = min(chunk, t_max - t)
        X = integrate_batch(p, X, sig, step, dt)
        t += step
        ds, di, dr = rhs_arrays(p, X[0, 0], X[0, 1], X[0, 2], c)
        resid = abs(ds) + abs(di) + abs(dr)
        if resid < tol * (1.0 + float(np.abs(X).sum())):
            return State(float(X[0, 0]), float(X[0, 1]), float(X[0, 2]))
    raise NotConverged(f"no steady state within t_max={t_max:.6g} (c={c:.6g})")


def steady_state_batch(p: ModelParams, cs: Sequence[float], x0s: np.ndarray,
                       tol: float = 1e-8, t_max: float = 4e4, dt: float = 0.25) -> np.ndarray:
    """Steady states for several constant inputs advanced in lockstep."""
    cs = np.asarray(cs, dtype=float)
    X = np.array(x0s, dtype=float, copy=True)
    t = 0.0
    chunk = 200.0 * dt
    while t < t_max:
        step = min(chunk, t_max - t)
        # all runs share the time grid; input differs per run
        for a, b in [(0.0, step)]:
            X = _rk4_span(p, X, a, b, dt, lambda tt: cs)
        t += step
        ds, di, dr = rhs_arrays(p, X[:, 0], X[:, 1], X[:, 2], cs)
        resid = np.abs(ds) + np.abs(di) + np.abs(dr)
        if np.all(resid < tol * (1.0 + np.abs(X).sum(axis=1))):
            return X
    raise NotConverged(f"steady-state batch did not converge by t_max={t_max:.6g}")
