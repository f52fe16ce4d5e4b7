"""Synthetic 2-D Gaussian worlds, misreporting strategies and the experiment harness.

All randomness is derived from a master seed through ``numpy.random.SeedSequence``
keyed on (world, strategy, repeat), so results do not depend on execution order.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .critic import FixedCritic
from .estimator import estimate_mutual_information
from .fdiv import AnalyticDensity, closed_form_divergence, gaussian_mutual_information, get_divergence
from .mechanism import MechanismConfig, score_peer_prediction
from .samples import PairedSamples

STRATEGY_KINDS = ("truthful", "random_shift", "random_report")
RESULT_COLUMNS = ("world", "strategy", "n", "repeats", "mean_score", "std_score", "oracle")
SWEEP_COLUMNS = ("n", "seed", "estimate", "oracle", "abs_error")


@dataclass(frozen=True)
class GaussianWorld:
    mean: tuple[float, float]
    cov: tuple[tuple[float, float], tuple[float, float]]
    seed: int = 0
    name: str = "custom"

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mean.shape != (2,) or cov.shape != (2, 2):
            raise ValueError("a world needs a 2-vector mean and a 2x2 covariance")
        # raises on a non-PD covariance
        AnalyticDensity(mean, cov)
        object.__setattr__(self, "mean", tuple(float(m) for m in mean))
        object.__setattr__(self, "cov", tuple(tuple(float(c) for c in row) for row in cov))

    @property
    def density(self) -> AnalyticDensity:
        return AnalyticDensity(self.mean, self.cov)

    def marginal(self, axis: int) -> AnalyticDensity:
        return AnalyticDensity([self.mean[axis]], [[self.cov[axis][axis]]])

    def product_density(self) -> AnalyticDensity:
        return AnalyticDensity(self.mean, np.diag(np.diag(np.asarray(self.cov))))

    def mutual_information(self) -> float:
        return gaussian_mutual_information(self.cov)

    def f_mutual_information(self, spec) -> float:
        """Population D_f(joint || product of marginals)."""
        spec = get_divergence(spec)
        if spec.name == "kl":
            return self.mutual_information()
        return closed_form_divergence(spec, self.product_density(), self.density)

    def log_ratio(self, xy: np.ndarray) -> np.ndarray:
        """log joint(x, y) - log (marginal(x) * marginal(y))."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return self.density.logpdf(xy) - self.marginal(0).logpdf(xy[:, :1]) - self.marginal(1).logpdf(xy[:, 1:])


# Means and covariances as printed in the experiment tables (three decimals).
PRESETS = {
    "exp1": GaussianWorld((-2.970, 8.977), ((1.279, 4.392), (4.392, 16.187)), name="exp1"),
    "exp2": GaussianWorld((6.978, 8.385), ((10.545, 16.178), (16.178, 26.431)), name="exp2"),
    "exp3": GaussianWorld((-3.831, 2.173), ((9.545, 9.437), (9.437, 10.081)), name="exp3"),
    "independent": GaussianWorld((0.0, 0.0), ((1.0, 0.0), (0.0, 1.0)), name="independent"),
}


def get_world(name: str, seed: Optional[int] = None) -> GaussianWorld:
    try:
        world = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown world preset {name!r}; valid presets: {', '.join(PRESETS)}") from None
    return world if seed is None else replace(world, seed=seed)


def sample_world(world: GaussianWorld, n: int, seed: Optional[int] = None) -> PairedSamples:
    """n pairs (x_i, y_i): coordinate 0 is the x-stream, coordinate 1 the y-stream."""
    if n < 8:
        raise ValueError(f"n below minimum 8 (got {n})")
    rng = np.random.default_rng(world.seed if seed is None else seed)
    xy = world.density.sample(n, rng)
    return PairedSamples(xy[:, :1], xy[:, 1:])


@dataclass(frozen=True)
class ReportStrategy:
    kind: str = "truthful"
    lo: float = 0.0
    hi: float = 3.0
    scale_mult: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; valid kinds: {', '.join(STRATEGY_KINDS)}")
        if self.hi < self.lo or self.scale_mult <= 0:
            raise ValueError("need lo <= hi and a positive scale_mult")

    def with_seed(self, seed: int) -> "ReportStrategy":
        return replace(self, seed=int(seed))


DEFAULT_STRATEGIES = (
    ReportStrategy("truthful"),
    ReportStrategy("random_shift", lo=0.0, hi=3.0),
    ReportStrategy("random_report", scale_mult=2.0),
)


def apply_strategy(strategy: ReportStrategy, samples) -> np.ndarray:
    """Transform truthful samples into reported ones.

    random_shift adds U(lo, hi) noise to every entry; random_report replaces
    every point with fresh U(0, scale_mult * sd) draws, sd being the
    per-coordinate sample standard deviation of the truthful input.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("no samples to report")
    if strategy.kind == "truthful":
        return x.copy()
    rng = np.random.default_rng(strategy.seed)
    if strategy.kind == "random_shift":
        return x + rng.uniform(strategy.lo, strategy.hi, size=x.shape)
    sd = x.std(axis=0)
    return rng.uniform(0.0, 1.0, size=x.shape) * (strategy.scale_mult * sd)


def derive_seed(*keys: int) -> int:
    """Stable 32-bit seed from integer keys (master seed first)."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


@dataclass
class ExperimentResult:
    world: str
    strategy: str
    n: int
    repeats: int
    mean_score: float
    std_score: float
    oracle: float
    per_repeat: list[float] = field(default_factory=list)

    def row(self) -> dict:
        return {
            "world": self.world,
            "strategy": self.strategy,
            "n": self.n,
            "repeats": self.repeats,
            "mean_score": repr(self.mean_score),
            "std_score": repr(self.std_score),
            "oracle": repr(self.oracle),
        }


def analytic_critic(world: GaussianWorld, spec) -> FixedCritic:
    """Fixed critic whose output is the optimal witness f'(joint / product) of ``world``."""
    spec = get_divergence(spec)

    def raw(xy):
        ratio = np.exp(world.log_ratio(xy))
        return spec.squash_inverse(spec.f_prime(ratio))

    return FixedCritic(raw, spec, dimension=2)


def run_score_table(
    worlds: Sequence[GaussianWorld],
    cfg: MechanismConfig,
    repeats: int = 10,
    n: int = 1000,
    master_seed: int = 42,
    strategies: Sequence[ReportStrategy] = DEFAULT_STRATEGIES,
) -> list[ExperimentResult]:
    """Mean group-p payment of the peer mechanism for every (world, strategy).

    Strategies transform the x-stream only; the y-stream stays truthful. Within
    one repeat every strategy sees the same truthful draw.
    """
    if repeats < 2:
        raise ValueError(f"repeats must be at least 2 (got {repeats})")
    results = []
    for w_idx, world in enumerate(worlds):
        oracle = world.f_mutual_information(cfg.divergence)
        means = {s.kind: [] for s in strategies}
        for rep in range(repeats):
            pairs = sample_world(world, n, seed=derive_seed(master_seed, world.seed, w_idx, rep))
            for s_idx, strategy in enumerate(strategies):
                s = strategy.with_seed(derive_seed(master_seed, world.seed, w_idx, rep, s_idx + 1))
                reported = apply_strategy(s, pairs.x)
                run_cfg = replace(cfg, seed=derive_seed(master_seed, world.seed, w_idx, rep, s_idx + 1, 7))
                sheet = score_peer_prediction(reported, pairs.y, run_cfg)
                means[strategy.kind].append(sheet.mean_score("p"))
        for strategy in strategies:
            vals = np.asarray(means[strategy.kind])
            results.append(
                ExperimentResult(
                    world=world.name,
                    strategy=strategy.kind,
                    n=n,
                    repeats=repeats,
                    mean_score=float(vals.mean()),
                    std_score=float(vals.std(ddof=1)),
                    oracle=float(oracle),
                    per_repeat=[float(v) for v in vals],
                )
            )
    return results


def run_convergence_sweep(
    world: GaussianWorld,
    cfg: MechanismConfig,
    n_grid: Sequence[int],
    repeats: int = 10,
    master_seed: int = 42,
) -> list[dict]:
    """One f-MI estimate per (n, repeat) with its absolute error against the population value."""
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be strictly increasing")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    oracle = world.f_mutual_information(cfg.divergence)
    rows = []
    for n in n_grid:
        for rep in range(repeats):
            seed = derive_seed(master_seed, world.seed, rep)
            pairs = sample_world(world, n, seed=derive_seed(seed, n))
            fit_cfg = replace(cfg.fit_config(), seed=seed)
            est = estimate_mutual_information(cfg.divergence, pairs, fit_cfg, cap=cfg.product_cap)
            rows.append(
                {
                    "n": n,
                    "seed": seed,
                    "estimate": est.value,
                    "oracle": oracle,
                    "abs_error": abs(est.value - oracle),
                }
            )
    return rows


def median_abs_error(rows: Iterable[dict]) -> dict[int, float]:
    by_n: dict[int, list[float]] = {}
    for r in rows:
        by_n.setdefault(int(r["n"]), []).append(float(r["abs_error"]))
    return {n: float(np.median(v)) for n, v in sorted(by_n.items())}


def _csv(rows: Iterable[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items() if k in columns})
    return buf.getvalue()


def results_to_csv(results: Sequence[ExperimentResult]) -> str:
    return _csv((r.row() for r in results), RESULT_COLUMNS)


def sweep_to_csv(rows: Sequence[dict]) -> str:
    return _csv(rows, SWEEP_COLUMNS)
