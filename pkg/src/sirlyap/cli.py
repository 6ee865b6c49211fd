"""Command-line entry point: equilibria | simulate | certify | levelsets | params.

All subcommands read one JSON config (see configs/ in the repo) plus a few
flag overrides; exit codes are 0 success, 1 config error, 2 regime error,
3 check failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import levelset, lyap_df, lyap_en, model, ode, verify
from .errors import ConfigError, RegimeError, SirLyapError
from .model import EquilibriumKind, ModelParams, State

_KNOWN_KEYS = {
    "model", "equilibrium", "lyap", "signal", "x0", "horizon", "dt",
    "levels", "window", "plane", "resolution", "out_dir", "seed",
    "grid_n", "n_samples",
}
_KNOWN_LYAP_KEYS = {
    "mu0", "eps", "delta",                       # disease-free
    "lambda_hat2", "k", "l_bar", "lambda3",      # endemic
}


@dataclass
class RunConfig:
    model: ModelParams
    equilibrium: str = "df"
    lyap: dict = field(default_factory=dict)
    signal: ode.InputSignal = None
    x0: State = None
    horizon: float = 5000.0
    dt: float = 0.01
    levels: list = field(default_factory=list)
    window: list = None
    plane: dict = None
    resolution: list = field(default_factory=lambda: [800, 800])
    out_dir: str = "out"
    seed: int = verify.DEFAULT_SEED
    grid_n: int = 60
    n_samples: int = 100_000

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - _KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "model" not in d:
            raise ConfigError("config requires a 'model' section")
        try:
            p = ModelParams.from_dict(d["model"])
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad model section: {exc}") from exc
        eq = d.get("equilibrium", "df")
        if eq not in ("df", "endemic"):
            raise ConfigError("equilibrium must be 'df' or 'endemic'")
        lyap = d.get("lyap", {})
        bad = set(lyap) - _KNOWN_LYAP_KEYS
        if bad:
            raise ConfigError(f"unknown lyap keys: {sorted(bad)}")
        sig = ode.signal_from_dict(d["signal"]) if "signal" in d else ode.Constant(p.b_hat)
        x0 = State(*map(float, d["x0"])) if "x0" in d else None
        return cls(
            model=p, equilibrium=eq, lyap=dict(lyap), signal=sig, x0=x0,
            horizon=float(d.get("horizon", 5000.0)), dt=float(d.get("dt", 0.01)),
            levels=[float(v) for v in d.get("levels", [])],
            window=d.get("window"), plane=d.get("plane"),
            resolution=[int(v) for v in d.get("resolution", [800, 800])],
            out_dir=d.get("out_dir", "out"), seed=int(d.get("seed", verify.DEFAULT_SEED)),
            grid_n=int(d.get("grid_n", 60)), n_samples=int(d.get("n_samples", 100_000)),
        )

    def to_dict(self) -> dict:
        d = {
            "model": self.model.as_dict(),
            "equilibrium": self.equilibrium,
            "lyap": dict(self.lyap),
            "signal": ode.signal_to_dict(self.signal),
            "horizon": self.horizon,
            "dt": self.dt,
            "levels": list(self.levels),
            "resolution": list(self.resolution),
            "out_dir": self.out_dir,
            "seed": self.seed,
            "grid_n": self.grid_n,
            "n_samples": self.n_samples,
        }
        if self.x0 is not None:
            d["x0"] = [self.x0.s, self.x0.i, self.x0.r]
        if self.window is not None:
            d["window"] = self.window
        if self.plane is not None:
            d["plane"] = self.plane
        return d


def _load_config(args) -> RunConfig:
    with open(args.config) as fh:
        raw = json.load(fh)
    cfg = RunConfig.from_dict(raw)
    if args.out is not None:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.dt is not None:
        cfg.dt = args.dt
    if args.t_end is not None:
        cfg.horizon = args.t_end
    if args.levels is not None:
        cfg.levels = [float(v) for v in args.levels.split(",")]
    if args.equilibrium is not None:
        cfg.equilibrium = args.equilibrium
    return cfg


def _build_lyap(cfg: RunConfig):
    p = cfg.model
    if cfg.equilibrium == "df":
        lp = lyap_df.select_df_params(p, mu0=cfg.lyap.get("mu0"),
                                      eps=cfg.lyap.get("eps"),
                                      delta=cfg.lyap.get("delta"))
        return lyap_df.DiseaseFreeLyapunov(p, lp)
    ly = dict(cfg.lyap)
    if "l_bar" in ly and "lambda_hat2" in ly and "k" in ly:
        lp = lyap_en.en_params_from(p, ly["l_bar"], ly["lambda_hat2"], ly["k"],
                                    lambda3=ly.get("lambda3"),
                                    delta=ly.get("delta", 0.5))
    else:
        lp = lyap_en.select_en_params(p, l_bar=ly.get("l_bar", 340.0),
                                      delta=ly.get("delta", 0.5))
    return lyap_en.EndemicLyapunov(p, lp)


def cmd_equilibria(cfg: RunConfig) -> int:
    p = cfg.model
    out = {
        "r0_hat": model.r0_hat(p),
        "gamma_over_mu_plus_2": p.gamma / p.mu + 2.0,
        "regime": model.classify_regime(p).value,
        "disease_free": list(model.disease_free_eq(p).point.as_array()),
    }
    if model.r0_hat(p) > 1.0:
        out["endemic"] = list(model.endemic_eq(p).point.as_array())
    print(json.dumps(out, indent=2))
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    p = cfg.model
    x0 = cfg.x0 if cfg.x0 is not None else model.disease_free_eq(p).point
    traj = ode.integrate(p, x0, cfg.signal, cfg.horizon, cfg.dt)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "trajectory.csv"
    traj.to_csv(path)
    print(f"wrote {path} ({len(traj.times)} rows)")
    return 0


def cmd_certify(cfg: RunConfig) -> int:
    p = cfg.model
    lyap = _build_lyap(cfg)
    kind = EquilibriumKind.DISEASE_FREE if cfg.equilibrium == "df" else EquilibriumKind.ENDEMIC
    rep = verify.run_certification(p, kind, lyap.lp, seed=cfg.seed,
                                   grid_n=cfg.grid_n, n_samples=cfg.n_samples)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rep.save_json(out_dir / f"certify_{cfg.equilibrium}.json")
    print(rep.format_table())
    return 0 if rep.passed else 3


def cmd_levelsets(cfg: RunConfig) -> int:
    lyap = _build_lyap(cfg)
    levels = cfg.levels
    if not levels:
        levels = [10.0, 30.0, 60.0, 100.0, 180.0, 260.0, 340.0, 420.0, 500.0] \
            if cfg.equilibrium == "df" else [20.0, 100.0, 180.0, 260.0, 340.0]
    plane = ("x3t", 0.0)
    if cfg.plane is not None:
        plane = (cfg.plane["axis"], float(cfg.plane["value"]))
    window = None
    if cfg.window is not None:
        window = ((float(cfg.window[0][0]), float(cfg.window[0][1])),
                  (float(cfg.window[1][0]), float(cfg.window[1][1])))
    contours = levelset.extract_contours(lyap, levels, plane=plane, window=window,
                                         resolution=tuple(cfg.resolution))
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"levelsets_{cfg.equilibrium}.csv"
    levelset.write_contours_csv(path, contours, lyap=lyap)
    n_lines = sum(len(c.polylines) for c in contours)
    print(f"wrote {path} ({len(contours)} levels, {n_lines} polylines)")
    return 0


def cmd_params(cfg: RunConfig) -> int:
    lyap = _build_lyap(cfg)
    out = {"equilibrium": cfg.equilibrium, "params": lyap.lp.as_dict()}
    if cfg.equilibrium == "endemic":
        out["feasibility"] = lyap_en.feasibility_report(cfg.model, lyap.lp)
    else:
        out["chi_slope"] = 1.0 / (lyap.lp.delta * (cfg.model.mu - lyap.lp.mu0))
    print(json.dumps(out, indent=2))
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"params_{cfg.equilibrium}.json", "w") as fh:
        json.dump(out, fh, indent=2)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sirlyap",
                                 description="SIR stability certification toolkit")
    ap.add_argument("command",
                    choices=["equilibria", "simulate", "certify", "levelsets", "params"])
    ap.add_argument("--config", required=True, help="path to the JSON run config")
    ap.add_argument("--out", default=None, help="output directory override")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--dt", type=float, default=None)
    ap.add_argument("--t-end", type=float, default=None)
    ap.add_argument("--levels", default=None, help="comma-separated level list")
    ap.add_argument("--equilibrium", choices=["df", "endemic"], default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except (ConfigError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    handlers = {
        "equilibria": cmd_equilibria,
        "simulate": cmd_simulate,
        "certify": cmd_certify,
        "levelsets": cmd_levelsets,
        "params": cmd_params,
    }
    try:
        return handlers[args.command](cfg)
    except RegimeError as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return 2
    except SirLyapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
