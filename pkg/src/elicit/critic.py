"""Variational critics t(x) and the inner fit

    t_hat = argmin_t  E_P[f_conj(t(x))] - E_Q[t(x)].

Every critic produces an unconstrained raw value v(x) and reports
``spec.squash(v(x))``, so its output always lies in the conjugate domain.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .fdiv import FDivergenceSpec, get_divergence
from .optim import OptimizerConfig, minimize
from .samples import EmpiricalDistribution

MIN_FIT_SAMPLES = 8


class Critic:
    """Common surface: ``raw``, ``__call__``, a flat parameter vector and its VJP."""

    spec: FDivergenceSpec
    dimension: int

    def raw(self, x) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> np.ndarray:
        return self.spec.squash(self.raw(x))

    @property
    def params(self) -> np.ndarray:
        return np.zeros(0)

    def with_params(self, params: np.ndarray) -> "Critic":
        raise NotImplementedError

    def raw_vjp(self, x: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        """Return sum_i cotangent_i * d raw(x_i) / d params."""
        raise NotImplementedError

    def raw_grad_x(self, x) -> np.ndarray:
        """Gradient of the raw output with respect to the input, shape (n, d)."""
        raise NotImplementedError

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :] if self.dimension > 1 or x.size == 1 else x[:, None]
        if x.shape[-1] != self.dimension:
            raise ValueError(f"critic expects dimension {self.dimension}, got points of dimension {x.shape[-1]}")
        return x


class FeatureBasisCritic(Critic):
    """Gaussian radial-basis critic ``v(x) = sum_k w_k phi_k(x) + w_bias``.

    ``scale`` rescales each input coordinate before distances are taken;
    because the kernel is a product over coordinates the raw output on a grid
    of concatenated pairs factorises (see :meth:`cross_raw`).
    """

    def __init__(self, centers, bandwidth: float, spec, weights=None, scale=None):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        if centers.shape[0] < 1:
            raise ValueError("need at least one center")
        if not bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        self.centers = centers
        self.bandwidth = float(bandwidth)
        self.spec = get_divergence(spec)
        self.dimension = centers.shape[1]
        self.scale = np.ones(self.dimension) if scale is None else np.asarray(scale, dtype=float).copy()
        if self.scale.shape != (self.dimension,) or np.any(self.scale <= 0):
            raise ValueError("scale must be a positive vector with one entry per coordinate")
        m = centers.shape[0]
        self.weights = np.zeros(m + 1) if weights is None else np.asarray(weights, dtype=float).copy()
        if self.weights.shape != (m + 1,):
            raise ValueError(f"expected {m + 1} weights (including bias), got {self.weights.shape}")

    @property
    def n_centers(self) -> int:
        return self.centers.shape[0]

    @property
    def params(self) -> np.ndarray:
        return self.weights.copy()

    def with_params(self, params):
        out = copy.copy(self)
        out.weights = np.asarray(params, dtype=float).copy()
        return out

    def _sqdist(self, x, centers, scale):
        a = x / scale
        c = centers / scale
        d2 = np.sum(a * a, axis=1)[:, None] + np.sum(c * c, axis=1)[None, :] - 2.0 * a @ c.T
        return np.maximum(d2, 0.0)

    def kernel(self, x) -> np.ndarray:
        x = self._check(x)
        return np.exp(-self._sqdist(x, self.centers, self.scale) / (2.0 * self.bandwidth**2))

    def features(self, x) -> np.ndarray:
        k = self.kernel(x)
        return np.hstack([k, np.ones((k.shape[0], 1))])

    def raw(self, x):
        return self.kernel(x) @ self.weights[:-1] + self.weights[-1]

    def raw_vjp(self, x, cotangent):
        k = self.kernel(x)
        return np.append(k.T @ cotangent, np.sum(cotangent))

    def raw_grad_x(self, x):
        x = self._check(x)
        k = self.kernel(x) * self.weights[:-1]
        # d/dx exp(-|(x-c)/s|^2 / 2h^2) = -phi * (x - c) / (s^2 h^2)
        diff_sum = k.sum(axis=1)[:, None] * x - k @ self.centers
        return -diff_sum / (self.scale**2 * self.bandwidth**2)

    def cross_raw(self, x, y) -> np.ndarray:
        """Raw outputs on every concatenated pair (x_i, y_j), shape (len(x), len(y))."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        dx = x.shape[1]
        if dx + y.shape[1] != self.dimension:
            raise ValueError("x and y dimensions do not add up to the critic dimension")
        h2 = 2.0 * self.bandwidth**2
        kx = np.exp(-self._sqdist(x, self.centers[:, :dx], self.scale[:dx]) / h2)
        ky = np.exp(-self._sqdist(y, self.centers[:, dx:], self.scale[dx:]) / h2)
        return (kx * self.weights[:-1]) @ ky.T + self.weights[-1]


class MlpCritic(Critic):
    """Dense ReLU network with every parameter kept in [-weight_cap, weight_cap]."""

    def __init__(self, layer_widths: Sequence[int], spec, weight_cap: float = 5.0, params=None):
        widths = tuple(int(k) for k in layer_widths)
        if len(widths) < 2 or widths[-1] != 1 or min(widths) < 1:
            raise ValueError("layer_widths must be (d, k1, ..., kL, 1) with positive entries")
        if not weight_cap > 0:
            raise ValueError("weight_cap must be positive")
        self.layer_widths = widths
        self.spec = get_divergence(spec)
        self.dimension = widths[0]
        self.weight_cap = float(weight_cap)
        self._shapes = [(widths[i], widths[i + 1]) for i in range(len(widths) - 1)]
        size = sum(a * b + b for a, b in self._shapes)
        self._params = np.zeros(size) if params is None else np.asarray(params, dtype=float).copy()
        if self._params.shape != (size,):
            raise ValueError(f"expected {size} parameters, got {self._params.shape}")

    @classmethod
    def initialise(cls, layer_widths, spec, rng: np.random.Generator, weight_cap: float = 5.0):
        out = cls(layer_widths, spec, weight_cap)
        chunks = []
        for a, b in out._shapes:
            chunks.append(rng.normal(0.0, np.sqrt(2.0 / a), size=a * b))
            chunks.append(np.zeros(b))
        return out.with_params(out.project(np.concatenate(chunks)))

    @property
    def params(self):
        return self._params.copy()

    def with_params(self, params):
        out = copy.copy(self)
        out._params = np.asarray(params, dtype=float).copy()
        return out

    def project(self, params):
        return np.clip(params, -self.weight_cap, self.weight_cap)

    def layers(self, params=None):
        params = self._params if params is None else params
        out, pos = [], 0
        for a, b in self._shapes:
            w = params[pos : pos + a * b].reshape(a, b)
            pos += a * b
            out.append((w, params[pos : pos + b]))
            pos += b
        return out

    def _forward(self, x):
        acts = [x]
        pre = []
        h = x
        layers = self.layers()
        for i, (w, b) in enumerate(layers):
            z = h @ w + b
            pre.append(z)
            h = np.maximum(z, 0.0) if i < len(layers) - 1 else z
            acts.append(h)
        return pre, acts

    def raw(self, x):
        x = self._check(x)
        _, acts = self._forward(x)
        return acts[-1][:, 0]

    def _backward(self, x, cotangent):
        pre, acts = self._forward(x)
        layers = self.layers()
        delta = np.asarray(cotangent, dtype=float)[:, None]
        grads = []
        for i in range(len(layers) - 1, -1, -1):
            w, _ = layers[i]
            grads.append((acts[i].T @ delta, delta.sum(axis=0)))
            delta = delta @ w.T
            if i > 0:
                delta = delta * (pre[i - 1] > 0)
        return grads[::-1], delta

    def raw_vjp(self, x, cotangent):
        x = self._check(x)
        grads, _ = self._backward(x, cotangent)
        return np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])

    def raw_grad_x(self, x):
        x = self._check(x)
        out = np.empty_like(x)
        for i in range(x.shape[0]):
            _, dx = self._backward(x[i : i + 1], np.ones(1))
            out[i] = dx[0]
        return out


class FixedCritic(Critic):
    """Critic built from an externally supplied raw discriminator; nothing is fitted."""

    def __init__(self, raw_fn: Callable[[np.ndarray], np.ndarray], spec, dimension: int):
        self.raw_fn = raw_fn
        self.spec = get_divergence(spec)
        self.dimension = int(dimension)

    def raw(self, x):
        x = self._check(x)
        return np.asarray(self.raw_fn(x), dtype=float).reshape(x.shape[0])

    def with_params(self, params):
        return self


def evaluate(critic: Critic, x) -> np.ndarray:
    """Squashed critic output; a single point returns a scalar."""
    x_arr = np.asarray(x, dtype=float)
    out = critic(x_arr)
    return float(out[0]) if x_arr.ndim <= 1 and critic.dimension == x_arr.size else out


# ---------------------------------------------------------------------------
# The inner objective.


def _check_pair(critic: Critic, P: EmpiricalDistribution, Q: EmpiricalDistribution):
    if P.dimension != Q.dimension:
        raise ValueError(f"P has dimension {P.dimension} but Q has dimension {Q.dimension}")
    if P.dimension != critic.dimension:
        raise ValueError(f"critic has dimension {critic.dimension}, samples have {P.dimension}")


def objective(critic: Critic, spec, P: EmpiricalDistribution, Q: EmpiricalDistribution) -> float:
    """E_P[f_conj(t)] - E_Q[t]; its negative is the variational divergence value."""
    spec = get_divergence(spec)
    _check_pair(critic, P, Q)
    v_p = critic.raw(P.samples)
    v_q = critic.raw(Q.samples)
    return float(P.weights @ spec.conj_of_squash(v_p) - Q.weights @ spec.squash(v_q))


def gradient(critic: Critic, spec, P: EmpiricalDistribution, Q: EmpiricalDistribution) -> np.ndarray:
    """Analytic gradient of :func:`objective` with respect to ``critic.params``."""
    spec = get_divergence(spec)
    _check_pair(critic, P, Q)
    v_p = critic.raw(P.samples)
    v_q = critic.raw(Q.samples)
    return critic.raw_vjp(P.samples, P.weights * spec.conj_of_squash_prime(v_p)) - critic.raw_vjp(
        Q.samples, Q.weights * spec.squash_prime(v_q)
    )


# ---------------------------------------------------------------------------
# Fitting.


@dataclass
class FitConfig:
    """Critic class and optimiser settings for the inner fit."""

    critic: str = "basis"  # "basis" | "mlp"
    n_centers: int = 128
    bandwidth: Optional[float] = None  # None: median pairwise distance
    standardize: bool = True
    hidden: tuple[int, ...] = (32, 32)
    weight_cap: float = 5.0
    # L2 penalty on the basis weights; None scales it as ridge_scale / min(n_P, n_Q)
    ridge: Optional[float] = None
    ridge_scale: float = 0.2
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    seed: int = 0

    def __post_init__(self):
        if self.critic not in ("basis", "mlp"):
            raise ValueError(f"unknown critic class {self.critic!r}")
        if self.n_centers < 1:
            raise ValueError("n_centers must be at least 1")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if (self.ridge is not None and self.ridge < 0) or self.ridge_scale < 0:
            raise ValueError("ridge must be non-negative")
        if isinstance(self.optimizer, dict):
            self.optimizer = OptimizerConfig(**self.optimizer)
        self.hidden = tuple(int(h) for h in self.hidden)

    def resolved_ridge(self, n_p: int, n_q: int) -> float:
        if self.ridge is not None:
            return float(self.ridge)
        return self.ridge_scale / min(n_p, n_q)


@dataclass
class FitReport:
    objective: float
    initial_objective: float
    iterations: int
    grad_norm: float
    seed: int
    status: str
    trace: list[float]


def kmeans_pp_centers(x: np.ndarray, m: int, rng: np.random.Generator, scale=None) -> np.ndarray:
    """k-means++ seeding: pick m rows of x, each new one with probability proportional to D^2."""
    x = np.asarray(x, dtype=float)
    z = x if scale is None else x / scale
    n = z.shape[0]
    m = min(m, n)
    chosen = [int(rng.integers(n))]
    d2 = np.sum((z - z[chosen[0]]) ** 2, axis=1)
    for _ in range(1, m):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((z - z[idx]) ** 2, axis=1))
    return x[chosen]


def median_distance(x: np.ndarray, rng: np.random.Generator, scale=None, max_points: int = 1000) -> float:
    x = np.asarray(x, dtype=float)
    if scale is not None:
        x = x / scale
    if x.shape[0] > max_points:
        x = x[rng.choice(x.shape[0], size=max_points, replace=False)]
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * x @ x.T
    iu = np.triu_indices(x.shape[0], k=1)
    med = float(np.sqrt(np.median(np.maximum(d2[iu], 0.0))))
    return med if med > 0 else 1.0


def init_critic(spec, P: EmpiricalDistribution, Q: EmpiricalDistribution, config: FitConfig) -> Critic:
    """Zero-output critic of the configured class laid out over the pooled sample."""
    spec = get_divergence(spec)
    rng = np.random.default_rng(config.seed)
    pooled = np.vstack([P.samples, Q.samples])
    if config.critic == "mlp":
        widths = (pooled.shape[1], *config.hidden, 1)
        return MlpCritic.initialise(widths, spec, rng, config.weight_cap)
    scale = None
    if config.standardize:
        scale = pooled.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
    m = min(config.n_centers, pooled.shape[0])
    centers = kmeans_pp_centers(pooled, m, rng, scale)
    bandwidth = config.bandwidth or median_distance(pooled, rng, scale)
    return FeatureBasisCritic(centers, bandwidth, spec, scale=scale)


def _basis_problem(critic: FeatureBasisCritic, spec, P, Q, ridge):
    phi_p = critic.features(P.samples)
    phi_q = critic.features(Q.samples)
    wp, wq = P.weights, Q.weights
    mask = np.ones(phi_p.shape[1])
    mask[-1] = 0.0

    def fun(w):
        with np.errstate(over="ignore", invalid="ignore"):
            v_p = phi_p @ w
            v_q = phi_q @ w
            value = wp @ spec.conj_of_squash(v_p) - wq @ spec.squash(v_q) + 0.5 * ridge * np.sum(mask * w * w)
            grad = phi_p.T @ (wp * spec.conj_of_squash_prime(v_p)) - phi_q.T @ (wq * spec.squash_prime(v_q))
        return float(value), grad + ridge * mask * w

    def hess(w):
        with np.errstate(over="ignore", invalid="ignore"):
            cp = wp * spec.conj_of_squash_second(phi_p @ w)
            cq = wq * spec.squash_second(phi_q @ w)
            h = (phi_p * cp[:, None]).T @ phi_p
            if np.any(cq):
                h -= (phi_q * cq[:, None]).T @ phi_q
        return h + ridge * np.diag(mask)

    return fun, hess


def _generic_problem(critic: Critic, spec, P, Q):
    def fun(theta):
        c = critic.with_params(theta)
        with np.errstate(over="ignore", invalid="ignore"):
            return objective(c, spec, P, Q), gradient(c, spec, P, Q)

    return fun


def fit(
    config: FitConfig,
    spec,
    P: EmpiricalDistribution,
    Q: EmpiricalDistribution,
    warm_start: Optional[Critic] = None,
) -> tuple[Critic, FitReport]:
    """Minimise the inner objective; deterministic given ``config.seed``."""
    spec = get_divergence(spec)
    if P.n < MIN_FIT_SAMPLES or Q.n < MIN_FIT_SAMPLES:
        raise ValueError(f"fit needs at least {MIN_FIT_SAMPLES} samples per side (got {P.n} and {Q.n})")
    critic = warm_start if warm_start is not None else init_critic(spec, P, Q, config)
    _check_pair(critic, P, Q)
    project = hess = None
    if isinstance(critic, FeatureBasisCritic):
        fun, hess = _basis_problem(critic, spec, P, Q, config.resolved_ridge(P.n, Q.n))
    else:
        fun = _generic_problem(critic, spec, P, Q)
        if isinstance(critic, MlpCritic):
            project = critic.project
    result = minimize(fun, critic.params, config.optimizer, project=project, hess=hess)
    fitted = critic.with_params(result.x)
    report = FitReport(
        objective=result.value,
        initial_objective=result.trace[0],
        iterations=result.iterations,
        grad_norm=result.grad_norm,
        seed=config.seed,
        status=result.status,
        trace=result.trace,
    )
    return fitted, report
