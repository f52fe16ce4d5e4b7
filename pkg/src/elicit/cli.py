"""Command-line entry point: ``elicit {estimate,score,simulate,sweep,reconstruct}``.

Settings come from built-in defaults, then an optional JSON file given with
``--config``, then command-line flags (highest precedence). The master seed
defaults to 42.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .critic import FitConfig
from .estimator import PRODUCT_CAP, estimate_divergence, estimate_mutual_information
from .fdiv import DIVERGENCE_NAMES, AnalyticDensity, get_divergence
from .io import atomic_write_text, read_points
from .mechanism import MechanismConfig, score_peer_prediction, score_with_ground_truth
from .optim import METHODS, NonFiniteObjectiveError, OptimizerConfig
from .reconstruct import ParametricFamily, ScheduleConfig, reconstruct
from .samples import EmpiricalDistribution, PairedSamples
from .simlab import (
    PRESETS,
    GaussianWorld,
    get_world,
    median_abs_error,
    results_to_csv,
    run_convergence_sweep,
    run_score_table,
    sample_world,
    sweep_to_csv,
)

COMMANDS = ("estimate", "score", "simulate", "sweep", "reconstruct")
DEFAULT_SEED = 42


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class RunConfig:
    command: str = "estimate"
    divergence: str = "kl"
    seed: int = DEFAULT_SEED
    n: int = 1000
    repeats: int = 10
    world: list = field(default_factory=lambda: ["exp1"])
    mean: Optional[list] = None
    cov: Optional[list] = None
    a: float = 0.0
    b: float = 1.0
    mi: bool = False
    mechanism: str = "alg2"
    p_file: Optional[str] = None
    q_file: Optional[str] = None
    pairs_file: Optional[str] = None
    dx: Optional[int] = None
    reports_file: Optional[str] = None
    truth_file: Optional[str] = None
    target_file: Optional[str] = None
    n_grid: list = field(default_factory=lambda: [128, 512, 2048])
    rounds: int = 200
    init: str = "standard"
    critic: str = "basis"
    n_centers: int = 128
    bandwidth: Optional[float] = None
    ridge: Optional[float] = None
    ridge_scale: float = 0.2
    optimizer: str = "newton"
    max_iter: int = 5000
    gtol: float = 1e-6
    product_cap: int = PRODUCT_CAP
    out: str = "."

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown config key")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}")
        if self.divergence not in DIVERGENCE_NAMES:
            raise ConfigError("divergence", f"unknown divergence {self.divergence!r}; valid: {', '.join(DIVERGENCE_NAMES)}")
        if self.n < 8:
            raise ConfigError("n", f"n below minimum 8 (got {self.n})")
        if self.command == "simulate" and self.repeats < 2:
            raise ConfigError("repeats", f"repeats below minimum 2 (got {self.repeats})")
        if self.repeats < 1:
            raise ConfigError("repeats", "repeats must be positive")
        if isinstance(self.world, str):
            self.world = [self.world]
        for w in self.world:
            if w not in PRESETS:
                raise ConfigError("world", f"unknown preset {w!r}; valid: {', '.join(PRESETS)}")
        if (self.mean is None) != (self.cov is None):
            raise ConfigError("cov" if self.cov is None else "mean", "inline worlds need both mean and cov")
        if self.mean is not None:
            if len(self.mean) != 2:
                raise ConfigError("mean", "expected 2 entries")
            cov = np.asarray(self.cov, dtype=float)
            if cov.size != 4:
                raise ConfigError("cov", "expected 4 entries (2x2 row-major)")
            self.cov = cov.reshape(2, 2).tolist()
            self.mean = [float(m) for m in self.mean]
            try:
                GaussianWorld(tuple(self.mean), self.cov)
            except ValueError as exc:
                raise ConfigError("cov", str(exc)) from None
        if not self.b > 0:
            raise ConfigError("b", "payment scale b must be positive")
        if self.mechanism not in ("alg1", "alg2"):
            raise ConfigError("mechanism", "must be alg1 or alg2")
        self.n_grid = [int(v) for v in self.n_grid]
        if not self.n_grid or any(v < 8 for v in self.n_grid):
            raise ConfigError("n_grid", "grid points must be at least 8")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid", "grid must be strictly increasing")
        if self.rounds < 1:
            raise ConfigError("rounds", "must be positive")
        if self.init not in ("standard", "moments", "diag"):
            raise ConfigError("init", "must be standard, moments or diag")
        if self.critic not in ("basis", "mlp"):
            raise ConfigError("critic", "must be basis or mlp")
        if self.n_centers < 1:
            raise ConfigError("n_centers", "must be positive")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ConfigError("bandwidth", "must be positive")
        if self.ridge is not None and self.ridge < 0:
            raise ConfigError("ridge", "must be non-negative")
        if self.optimizer not in METHODS:
            raise ConfigError("optimizer", f"must be one of {', '.join(METHODS)}")
        if self.product_cap < 1:
            raise ConfigError("product_cap", "must be positive")

    # -- derived objects ----------------------------------------------------

    def fit_config(self) -> FitConfig:
        opt = OptimizerConfig(method=self.optimizer, max_iter=self.max_iter, gtol=self.gtol)
        return FitConfig(
            critic=self.critic,
            n_centers=self.n_centers,
            bandwidth=self.bandwidth,
            ridge=self.ridge,
            ridge_scale=self.ridge_scale,
            optimizer=opt,
            seed=self.seed,
        )

    def mechanism_config(self) -> MechanismConfig:
        return MechanismConfig(
            a=self.a,
            b=self.b,
            divergence=self.divergence,
            fit=self.fit_config(),
            seed=self.seed,
            product_cap=self.product_cap,
        )

    def worlds(self) -> list[GaussianWorld]:
        if self.mean is not None:
            return [GaussianWorld(tuple(self.mean), self.cov, seed=self.seed, name="custom")]
        return [get_world(w, seed=self.seed) for w in self.world]


# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with RunConfig keys; flags override it")
    p.add_argument("--divergence", choices=DIVERGENCE_NAMES, help="f-divergence (default kl)")
    p.add_argument("--seed", type=int, help=f"master seed (default {DEFAULT_SEED})")
    p.add_argument("--out", help="output directory (default .)")
    p.add_argument("--critic", choices=("basis", "mlp"), help="critic class (default basis)")
    p.add_argument("--n-centers", dest="n_centers", type=int, help="radial-basis centers (default 128)")
    p.add_argument("--bandwidth", type=float, help="kernel bandwidth (default: median distance)")
    p.add_argument("--ridge", type=float, help="fixed L2 penalty (default ridge-scale / n)")
    p.add_argument("--ridge-scale", dest="ridge_scale", type=float, help="default 0.2")
    p.add_argument("--optimizer", choices=METHODS, help="inner optimiser (default newton)")
    p.add_argument("--max-iter", dest="max_iter", type=int, help="default 5000")
    p.add_argument("--gtol", type=float, help="gradient-norm exit tolerance (default 1e-6)")


def _world_flags(p: argparse.ArgumentParser, multiple: bool = False) -> None:
    if multiple:
        p.add_argument("--world", action="append", choices=tuple(PRESETS), help="preset world (repeatable)")
    else:
        p.add_argument("--world", choices=tuple(PRESETS), help="preset world (default exp1)")
    p.add_argument("--mean", type=float, nargs=2, metavar=("MX", "MY"), help="inline world mean")
    p.add_argument("--cov", type=float, nargs=4, metavar=("S11", "S12", "S21", "S22"), help="inline covariance")
    p.add_argument("--n", type=int, help="number of pairs (default 1000)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elicit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate a divergence or f-mutual information")
    _common(p)
    _world_flags(p)
    p.add_argument("--mi", action="store_true", default=None, help="estimate f-MI from pairs")
    p.add_argument("--p-file", dest="p_file", help="CSV of P samples (denominator role)")
    p.add_argument("--q-file", dest="q_file", help="CSV of Q samples (numerator role)")
    p.add_argument("--pairs-file", dest="pairs_file", help="CSV of paired samples, x columns then y columns")
    p.add_argument("--dx", type=int, help="number of x columns in --pairs-file (default half)")
    p.add_argument("--product-cap", dest="product_cap", type=int, help="cross pairs used in the fit")

    p = sub.add_parser("score", help="pay reports with a scoring mechanism")
    _common(p)
    _world_flags(p)
    p.add_argument("--mechanism", choices=("alg1", "alg2"), help="alg1: with ground truth, alg2: peer reports")
    p.add_argument("--a", type=float, help="payment offset (default 0)")
    p.add_argument("--b", type=float, help="payment scale (default 1)")
    p.add_argument("--reports-file", dest="reports_file", help="CSV of reports (alg1)")
    p.add_argument("--truth-file", dest="truth_file", help="CSV of ground-truth samples (alg1, required)")
    p.add_argument("--pairs-file", dest="pairs_file", help="CSV of paired reports (alg2)")
    p.add_argument("--dx", type=int, help="number of group-p columns in --pairs-file (default half)")
    p.add_argument("--product-cap", dest="product_cap", type=int, help="cross pairs used in the fit")

    p = sub.add_parser("simulate", help="score table: truthful vs misreporting strategies")
    _common(p)
    _world_flags(p, multiple=True)
    p.add_argument("--repeats", type=int, help="repeats per world (default 10, minimum 2)")
    p.add_argument("--a", type=float, help="payment offset (default 0)")
    p.add_argument("--b", type=float, help="payment scale (default 1)")
    p.add_argument("--product-cap", dest="product_cap", type=int, help="cross pairs used in the fit")

    p = sub.add_parser("sweep", help="convergence sweep of the f-MI estimate over n")
    _common(p)
    _world_flags(p)
    p.add_argument("--n-grid", dest="n_grid", type=int, nargs="+", help="increasing sample sizes")
    p.add_argument("--repeats", type=int, help="seeds per grid point (default 10)")
    p.add_argument("--product-cap", dest="product_cap", type=int, help="cross pairs used in the fit")

    p = sub.add_parser("reconstruct", help="fit a Gaussian to samples by f-divergence minimisation")
    _common(p)
    _world_flags(p)
    p.add_argument("--target-file", dest="target_file", help="CSV of target samples")
    p.add_argument("--rounds", type=int, help="outer rounds (default 200)")
    p.add_argument("--init", choices=("standard", "moments", "diag"), help="generator initialisation")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config", "top level must be a JSON object")
        data.update(loaded)
    for key, value in vars(args).items():
        if key == "config" or value is None:
            continue
        data[key] = value
    data["command"] = args.command
    return RunConfig.from_dict(data)


def _load(cfg: RunConfig, key: str) -> np.ndarray:
    path = getattr(cfg, key)
    try:
        return read_points(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(key, f"cannot read points from {path}: {exc}") from None


def _pairs(cfg: RunConfig) -> PairedSamples:
    if cfg.pairs_file:
        data = _load(cfg, "pairs_file")
        dx = cfg.dx if cfg.dx is not None else data.shape[1] // 2
        if not 0 < dx < data.shape[1]:
            raise ConfigError("dx", f"must split {data.shape[1]} columns into two non-empty groups")
        if data.shape[0] < 8:
            raise ConfigError("pairs_file", f"n below minimum 8 (got {data.shape[0]})")
        return PairedSamples(data[:, :dx], data[:, dx:])
    return sample_world(cfg.worlds()[0], cfg.n)


def cmd_estimate(cfg: RunConfig) -> float:
    out = Path(cfg.out)
    two_sample = bool(cfg.p_file or cfg.q_file) and not cfg.mi
    if not two_sample:
        # without sample files the estimate is the f-MI of the world (or pairs file)
        est = estimate_mutual_information(cfg.divergence, _pairs(cfg), cfg.fit_config(), cap=cfg.product_cap)
    else:
        if not (cfg.p_file and cfg.q_file):
            raise ConfigError("p_file" if not cfg.p_file else "q_file", "two-sample estimation needs both --p-file and --q-file")
        P, Q = _load(cfg, "p_file"), _load(cfg, "q_file")
        for key, pts in (("p_file", P), ("q_file", Q)):
            if pts.shape[0] < 8:
                raise ConfigError(key, f"n below minimum 8 (got {pts.shape[0]})")
        est = estimate_divergence(cfg.divergence, EmpiricalDistribution(P), EmpiricalDistribution(Q), cfg.fit_config())
    record = est.to_record()
    record["mi"] = not two_sample
    atomic_write_text(out / "estimate.json", json.dumps(record, indent=2, sort_keys=True) + "\n")
    print(repr(est.value))
    return est.value


def cmd_score(cfg: RunConfig) -> float:
    mcfg = cfg.mechanism_config()
    if cfg.mechanism == "alg1":
        if not cfg.truth_file:
            raise ConfigError("truth_file", "alg1 requires a ground-truth CSV (--truth-file)")
        truth = _load(cfg, "truth_file")
        if cfg.reports_file:
            reports = _load(cfg, "reports_file")
        else:
            pairs = sample_world(cfg.worlds()[0], cfg.n)
            reports = pairs.stacked()
        for key, pts in (("reports_file", reports), ("truth_file", truth)):
            if pts.shape[0] < 8:
                raise ConfigError(key, f"n below minimum 8 (got {pts.shape[0]})")
        if reports.shape[1] != truth.shape[1]:
            raise ConfigError("truth_file", "reports and truth have different dimensions")
        sheet = score_with_ground_truth(reports, truth, mcfg)
        mean = sheet.mean_score()
    else:
        pairs = _pairs(cfg)
        sheet = score_peer_prediction(pairs.x, pairs.y, mcfg)
        mean = sheet.mean_score("p")
    atomic_write_text(Path(cfg.out) / "payments.csv", sheet.to_csv())
    print(repr(mean))
    return mean


def cmd_simulate(cfg: RunConfig):
    results = run_score_table(cfg.worlds(), cfg.mechanism_config(), cfg.repeats, cfg.n, master_seed=cfg.seed)
    atomic_write_text(Path(cfg.out) / "results.csv", results_to_csv(results))
    for r in results:
        print(f"{r.world:12s} {r.strategy:14s} {r.mean_score:8.4f} +/- {r.std_score:.4f}  (oracle {r.oracle:.4f})")
    return results


def cmd_sweep(cfg: RunConfig):
    rows = run_convergence_sweep(cfg.worlds()[0], cfg.mechanism_config(), cfg.n_grid, cfg.repeats, master_seed=cfg.seed)
    atomic_write_text(Path(cfg.out) / "sweep.csv", sweep_to_csv(rows))
    for n, err in median_abs_error(rows).items():
        print(f"n={n:6d}  median |error| = {err:.4f}")
    return rows


def cmd_reconstruct(cfg: RunConfig):
    density = None
    if cfg.target_file:
        target = _load(cfg, "target_file")
    else:
        world = cfg.worlds()[0]
        target = sample_world(world, cfg.n).stacked()
        density = world.density
    if target.shape[0] < 64:
        raise ConfigError("n", f"reconstruction needs at least 64 target samples (got {target.shape[0]})")
    d = target.shape[1]
    if cfg.init == "standard":
        family = ParametricFamily.standard(d, seed=cfg.seed)
    else:
        family = ParametricFamily.from_moments(target, seed=cfg.seed, diagonal=cfg.init == "diag")
    schedule = ScheduleConfig(rounds=cfg.rounds, fit=cfg.fit_config())
    report = reconstruct(target, family, cfg.divergence, schedule, target_density=density)
    out = Path(cfg.out)
    atomic_write_text(out / "reconstruction.json", report.to_json() + "\n")
    atomic_write_text(out / "trajectory.csv", report.trajectory_csv())
    print("mean", np.array2string(report.family.mean, precision=4))
    print("cov ", np.array2string(report.family.cov, precision=4).replace("\n", "\n     "))
    return report


HANDLERS = {
    "estimate": cmd_estimate,
    "score": cmd_score,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "reconstruct": cmd_reconstruct,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"elicit {args.command}: config error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, NonFiniteObjectiveError, np.linalg.LinAlgError) as exc:
        print(f"elicit {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
