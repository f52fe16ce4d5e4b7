"""Registry of f-divergences and the analytic oracles used to check them.

Every divergence is stored in the convention

    D_f(q || p) = integral of p(x) f(q(x) / p(x)) dx

together with its Fenchel conjugate ``f_conj`` and the output map ``squash``
that sends an unconstrained critic value onto the domain of ``f_conj``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "DIVERGENCE_NAMES",
    "AnalyticDensity",
    "FDivergenceSpec",
    "Interval",
    "RatioBoundWarning",
    "closed_form_divergence",
    "gaussian_kl",
    "gaussian_mutual_information",
    "get_divergence",
    "lambert_w",
    "lambert_w_exp",
    "numeric_conjugate",
]

ScalarMap = Callable[[np.ndarray], np.ndarray]

LOG2 = math.log(2.0)
DEFAULT_RATIO_BOUNDS = (1e-3, 1e3)
QUADRATURE_POINTS = 401
QUADRATURE_HALF_WIDTH = 6.0


class RatioBoundWarning(UserWarning):
    """The density ratio leaves the assumed [theta0, theta1] range on a non-negligible mass."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = False

    def contains(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        above = u >= self.lo if self.lo_closed else u > self.lo
        below = u <= self.hi if self.hi_closed else u < self.hi
        return above & below

    def closure_contains(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return (u >= self.lo) & (u <= self.hi)

    def __str__(self) -> str:
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo}, {self.hi}{right}"


REALS = Interval(-math.inf, math.inf)


# ---------------------------------------------------------------------------
# Lambert W on the principal branch, for positive arguments only.


def lambert_w_exp(s, tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
    """Return W(exp(s)) without forming exp(s).

    Solves ``w + log(w) = s`` for ``w > 0`` by Halley iteration, which keeps
    arguments such as exp(1000) usable.
    """
    s = np.asarray(s, dtype=float)
    # softplus(s) ~ exp(s) for s << 0 and ~ s for s >> 0
    w = np.logaddexp(0.0, s)
    w = np.where(s > 1.0, s - np.log(np.maximum(s, 1.0)) + 1e-3, w)
    w = np.maximum(w, np.finfo(float).tiny)
    for _ in range(max_iter):
        h = w + np.log(w) - s
        d1 = 1.0 + 1.0 / w
        d2 = -1.0 / (w * w)
        step = 2.0 * h * d1 / (2.0 * d1 * d1 - h * d2)
        w_new = w - step
        # Halley can overshoot below zero from a poor start; bisect toward zero instead
        w_new = np.where(w_new <= 0.0, 0.5 * w, w_new)
        done = np.all(np.abs(w_new - w) <= tol * np.maximum(np.abs(w_new), 1e-300))
        w = w_new
        if done:
            break
    return w


def lambert_w(x, tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
    """Principal-branch Lambert W for x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("lambert_w is only implemented for positive arguments")
    return lambert_w_exp(np.log(x), tol=tol, max_iter=max_iter)


# ---------------------------------------------------------------------------
# The registry.


@dataclass(frozen=True)
class FDivergenceSpec:
    """A named f-divergence.

    ``conj_of_squash`` is ``f_conj(squash(v))`` written in a form that stays
    finite where ``squash`` saturates against the edge of ``conj_domain``.
    """

    name: str
    f: ScalarMap
    f_prime: ScalarMap
    f_conj: ScalarMap
    f_conj_prime: ScalarMap
    conj_domain: Interval
    squash: ScalarMap
    squash_prime: ScalarMap
    conj_of_squash: ScalarMap
    conj_of_squash_prime: ScalarMap
    squash_second: ScalarMap
    conj_of_squash_second: ScalarMap
    squash_inverse: ScalarMap
    ratio_bounds: tuple[float, float] = DEFAULT_RATIO_BOUNDS
    strictly_convex: bool = True
    convex_objective: bool = field(default=True, repr=False)

    def with_ratio_bounds(self, theta0: float, theta1: float) -> "FDivergenceSpec":
        if not 0 < theta0 < 1 < theta1:
            raise ValueError("ratio bounds must satisfy 0 < theta0 < 1 < theta1")
        return _replace(self, ratio_bounds=(float(theta0), float(theta1)))


def _replace(spec: FDivergenceSpec, **changes) -> FDivergenceSpec:
    from dataclasses import replace

    return replace(spec, **changes)


def _outside(domain: Interval, u, values):
    u = np.asarray(u, dtype=float)
    with np.errstate(all="ignore"):
        return np.where(domain.contains(u), values, np.inf)


def _arr(u):
    return np.asarray(u, dtype=float)


def _softplus(v):
    return np.logaddexp(0.0, v)


def _sigmoid(v):
    v = _arr(v)
    return np.exp(-np.logaddexp(0.0, -v))


def _half_tanh_second(v):
    v = np.clip(_arr(v), -350, 350)
    return -np.tanh(v) / np.cosh(v) ** 2


def _xlogx(u):
    u = _arr(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)


def _total_variation() -> FDivergenceSpec:
    dom = Interval(-0.5, 0.5, True, True)
    return FDivergenceSpec(
        name="total_variation",
        f=lambda u: 0.5 * np.abs(_arr(u) - 1.0),
        # subgradient selection 0 at the kink u = 1
        f_prime=lambda u: 0.5 * np.sign(_arr(u) - 1.0),
        f_conj=lambda u: _outside(dom, u, _arr(u)),
        f_conj_prime=lambda u: _outside(dom, u, np.ones_like(_arr(u))),
        squash_inverse=lambda u: np.arctanh(np.clip(2.0 * _arr(u), -1.0 + 1e-15, 1.0 - 1e-15)),
        conj_domain=dom,
        squash=lambda v: 0.5 * np.tanh(v),
        squash_prime=lambda v: 0.5 / np.cosh(np.clip(v, -350, 350)) ** 2,
        conj_of_squash=lambda v: 0.5 * np.tanh(v),
        conj_of_squash_prime=lambda v: 0.5 / np.cosh(np.clip(v, -350, 350)) ** 2,
        squash_second=_half_tanh_second,
        conj_of_squash_second=_half_tanh_second,
        strictly_convex=False,
        convex_objective=False,
    )


def _jensen_shannon() -> FDivergenceSpec:
    dom = Interval(-math.inf, LOG2)

    def f(u):
        u = _arr(u)
        return _xlogx(u) - (u + 1.0) * np.log((u + 1.0) / 2.0)

    def f_conj(u):
        u = _arr(u)
        with np.errstate(all="ignore"):
            return _outside(dom, u, -np.log(2.0 - np.exp(u)))

    def f_conj_prime(u):
        u = _arr(u)
        with np.errstate(all="ignore"):
            e = np.exp(u)
            return _outside(dom, u, e / (2.0 - e))

    return FDivergenceSpec(
        name="jensen_shannon",
        f=f,
        f_prime=lambda u: np.log(2.0 * _arr(u) / (_arr(u) + 1.0)),
        f_conj=f_conj,
        f_conj_prime=f_conj_prime,
        squash_inverse=lambda u: -np.log(2.0 * np.exp(-_arr(u)) - 1.0),
        conj_domain=dom,
        squash=lambda v: LOG2 - _softplus(-_arr(v)),
        squash_prime=lambda v: _sigmoid(-_arr(v)),
        conj_of_squash=lambda v: _softplus(v) - LOG2,
        conj_of_squash_prime=lambda v: _sigmoid(v),
        squash_second=lambda v: -_sigmoid(v) * _sigmoid(-_arr(v)),
        conj_of_squash_second=lambda v: _sigmoid(v) * _sigmoid(-_arr(v)),
    )


def _squared_hellinger() -> FDivergenceSpec:
    dom = Interval(-math.inf, 1.0)

    def f_conj(u):
        u = _arr(u)
        with np.errstate(all="ignore"):
            return _outside(dom, u, u / (1.0 - u))

    def f_conj_prime(u):
        u = _arr(u)
        with np.errstate(all="ignore"):
            return _outside(dom, u, 1.0 / (1.0 - u) ** 2)

    return FDivergenceSpec(
        name="squared_hellinger",
        f=lambda u: (np.sqrt(_arr(u)) - 1.0) ** 2,
        f_prime=lambda u: 1.0 - 1.0 / np.sqrt(_arr(u)),
        f_conj=f_conj,
        f_conj_prime=f_conj_prime,
        squash_inverse=lambda u: np.log1p(-_arr(u)),
        conj_domain=dom,
        squash=lambda v: -np.expm1(v),
        squash_prime=lambda v: -np.exp(v),
        conj_of_squash=lambda v: np.expm1(-_arr(v)),
        conj_of_squash_prime=lambda v: -np.exp(-_arr(v)),
        squash_second=lambda v: -np.exp(v),
        conj_of_squash_second=lambda v: np.exp(-_arr(v)),
    )


def _pearson_chi2() -> FDivergenceSpec:
    return FDivergenceSpec(
        name="pearson_chi2",
        f=lambda u: (_arr(u) - 1.0) ** 2,
        f_prime=lambda u: 2.0 * (_arr(u) - 1.0),
        f_conj=lambda u: 0.25 * _arr(u) ** 2 + _arr(u),
        f_conj_prime=lambda u: 0.5 * _arr(u) + 1.0,
        squash_inverse=lambda u: _arr(u) * 1.0,
        conj_domain=REALS,
        squash=lambda v: _arr(v) * 1.0,
        squash_prime=lambda v: np.ones_like(_arr(v)),
        conj_of_squash=lambda v: 0.25 * _arr(v) ** 2 + _arr(v),
        conj_of_squash_prime=lambda v: 0.5 * _arr(v) + 1.0,
        squash_second=lambda v: np.zeros_like(_arr(v)),
        conj_of_squash_second=lambda v: np.full_like(_arr(v), 0.5),
    )


def _neyman_chi2() -> FDivergenceSpec:
    dom = Interval(-math.inf, 1.0)

    def f_conj(u):
        u = _arr(u)
        with np.errstate(all="ignore"):
            return _outside(dom, u, 2.0 - 2.0 * np.sqrt(1.0 - u))

    def f_conj_prime(u):
        u = _arr(u)
        with np.errstate(all="ignore"):
            return _outside(dom, u, 1.0 / np.sqrt(1.0 - u))

    return FDivergenceSpec(
        name="neyman_chi2",
        f=lambda u: (1.0 - _arr(u)) ** 2 / _arr(u),
        f_prime=lambda u: 1.0 - 1.0 / _arr(u) ** 2,
        f_conj=f_conj,
        f_conj_prime=f_conj_prime,
        squash_inverse=lambda u: np.log1p(-_arr(u)),
        conj_domain=dom,
        squash=lambda v: -np.expm1(v),
        squash_prime=lambda v: -np.exp(v),
        # sqrt(1 - (1 - e^v)) = e^{v/2}
        conj_of_squash=lambda v: 2.0 - 2.0 * np.exp(0.5 * _arr(v)),
        conj_of_squash_prime=lambda v: -np.exp(0.5 * _arr(v)),
        squash_second=lambda v: -np.exp(v),
        conj_of_squash_second=lambda v: -0.5 * np.exp(0.5 * _arr(v)),
        convex_objective=False,
    )


def _kl() -> FDivergenceSpec:
    return FDivergenceSpec(
        name="kl",
        f=_xlogx,
        f_prime=lambda u: np.log(_arr(u)) + 1.0,
        f_conj=lambda u: np.exp(_arr(u) - 1.0),
        f_conj_prime=lambda u: np.exp(_arr(u) - 1.0),
        squash_inverse=lambda u: _arr(u) * 1.0,
        conj_domain=REALS,
        squash=lambda v: _arr(v) * 1.0,
        squash_prime=lambda v: np.ones_like(_arr(v)),
        conj_of_squash=lambda v: np.exp(_arr(v) - 1.0),
        conj_of_squash_prime=lambda v: np.exp(_arr(v) - 1.0),
        squash_second=lambda v: np.zeros_like(_arr(v)),
        conj_of_squash_second=lambda v: np.exp(_arr(v) - 1.0),
    )


def _reverse_kl() -> FDivergenceSpec:
    dom = Interval(-math.inf, 0.0)

    def f_conj(u):
        u = _arr(u)
        with np.errstate(all="ignore"):
            return _outside(dom, u, -1.0 - np.log(-u))

    def f_conj_prime(u):
        u = _arr(u)
        with np.errstate(all="ignore"):
            return _outside(dom, u, -1.0 / u)

    return FDivergenceSpec(
        name="reverse_kl",
        f=lambda u: -np.log(_arr(u)),
        f_prime=lambda u: -1.0 / _arr(u),
        f_conj=f_conj,
        f_conj_prime=f_conj_prime,
        squash_inverse=lambda u: np.log(-_arr(u)),
        conj_domain=dom,
        squash=lambda v: -np.exp(v),
        squash_prime=lambda v: -np.exp(v),
        conj_of_squash=lambda v: -1.0 - _arr(v),
        conj_of_squash_prime=lambda v: -np.ones_like(_arr(v)),
        squash_second=lambda v: -np.exp(v),
        conj_of_squash_second=lambda v: np.zeros_like(_arr(v)),
    )


def _jeffrey() -> FDivergenceSpec:
    def f_conj(u):
        u = _arr(u)
        w = lambert_w_exp(1.0 - u)
        return w + 1.0 / w + u - 2.0

    def f_conj_prime(u):
        # envelope theorem: the maximiser of u v - f(v) is v = 1 / W(e^{1-u})
        return 1.0 / lambert_w_exp(1.0 - _arr(u))

    def f_conj_second(u):
        w = lambert_w_exp(1.0 - _arr(u))
        return 1.0 / (w * (1.0 + w))

    return FDivergenceSpec(
        name="jeffrey",
        f=lambda u: (_arr(u) - 1.0) * np.log(_arr(u)),
        f_prime=lambda u: np.log(_arr(u)) + 1.0 - 1.0 / _arr(u),
        f_conj=f_conj,
        f_conj_prime=f_conj_prime,
        squash_inverse=lambda u: _arr(u) * 1.0,
        conj_domain=REALS,
        squash=lambda v: _arr(v) * 1.0,
        squash_prime=lambda v: np.ones_like(_arr(v)),
        conj_of_squash=f_conj,
        conj_of_squash_prime=f_conj_prime,
        squash_second=lambda v: np.zeros_like(_arr(v)),
        conj_of_squash_second=f_conj_second,
    )


_BUILDERS = {
    "total_variation": _total_variation,
    "jensen_shannon": _jensen_shannon,
    "squared_hellinger": _squared_hellinger,
    "pearson_chi2": _pearson_chi2,
    "neyman_chi2": _neyman_chi2,
    "kl": _kl,
    "reverse_kl": _reverse_kl,
    "jeffrey": _jeffrey,
}
DIVERGENCE_NAMES = tuple(_BUILDERS)
_REGISTRY = {name: build() for name, build in _BUILDERS.items()}


def get_divergence(name: str) -> FDivergenceSpec:
    if isinstance(name, FDivergenceSpec):
        return name
    try:
        return _REGISTRY[name]
    except KeyError:
        valid = ", ".join(DIVERGENCE_NAMES)
        raise KeyError(f"unknown divergence {name!r}; valid names: {valid}") from None


# ---------------------------------------------------------------------------
# Numeric conjugate (oracle for the stored closed forms).

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def numeric_conjugate(
    f: Callable[[float], float],
    u: float,
    search_interval: tuple[float, float] = DEFAULT_RATIO_BOUNDS,
    grid_points: int = 257,
    tol: float = 1e-13,
) -> float:
    """Maximise ``u * v - f(v)`` over ``v`` in ``search_interval``.

    A log-spaced grid brackets the maximiser, then golden-section search in
    log(v) refines it. The objective is concave in v, hence unimodal in log(v).
    """
    lo, hi = map(float, search_interval)
    if not 0.0 < lo < hi:
        raise ValueError("search_interval must lie in (0, inf) with lo < hi")

    def g(log_v: float) -> float:
        v = math.exp(log_v)
        fv = float(f(v))
        if not math.isfinite(fv):
            raise ValueError(f"f is not finite at v={v!r}")
        return u * v - fv

    grid = np.linspace(math.log(lo), math.log(hi), grid_points)
    values = np.array([g(s) for s in grid])
    k = int(np.argmax(values))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, grid_points - 1)]
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol:
        if gc >= gd:
            b, d, gd = d, c, gc
            c = b - _INV_PHI * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + _INV_PHI * (b - a)
            gd = g(d)
    return max(gc, gd, float(values[k]), g(grid[0]), g(grid[-1]))


# ---------------------------------------------------------------------------
# Analytic densities and population-level oracles.


@dataclass(frozen=True)
class AnalyticDensity:
    """A d-dimensional Gaussian N(mean, cov)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of size {mean.size}")
        if not np.allclose(cov, cov.T):
            raise ValueError("covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("covariance must be positive definite") from None
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)

    kind = "gaussian"

    @property
    def dimension(self) -> int:
        return self.mean.size

    @property
    def chol(self) -> np.ndarray:
        return self._chol

    def logpdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.dimension)
        z = np.linalg.solve(self._chol, (x - self.mean).T)
        log_det = 2.0 * np.sum(np.log(np.diag(self._chol)))
        return -0.5 * (np.sum(z * z, axis=0) + log_det + self.dimension * math.log(2 * math.pi))

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((n, self.dimension))
        return self.mean + z @ self._chol.T


def gaussian_kl(q: AnalyticDensity, p: AnalyticDensity) -> float:
    """KL(q || p) = E_q[log q - log p] for two Gaussians."""
    d = q.dimension
    p_inv = np.linalg.inv(p.cov)
    diff = p.mean - q.mean
    _, logdet_p = np.linalg.slogdet(p.cov)
    _, logdet_q = np.linalg.slogdet(q.cov)
    return 0.5 * float(np.trace(p_inv @ q.cov) + diff @ p_inv @ diff - d + logdet_p - logdet_q)


def quadrature_grid(
    densities, points: int = QUADRATURE_POINTS, half_width: float = QUADRATURE_HALF_WIDTH
) -> tuple[np.ndarray, np.ndarray]:
    """Tensor trapezoid grid covering mean +/- half_width * sd of every density.

    Returns (nodes of shape (N, d), weights of shape (N,)).
    """
    d = densities[0].dimension
    if d > 2:
        raise ValueError(f"quadrature oracle supports d <= 2, got d={d}")
    axes, axis_weights = [], []
    for k in range(d):
        lo = min(dens.mean[k] - half_width * math.sqrt(dens.cov[k, k]) for dens in densities)
        hi = max(dens.mean[k] + half_width * math.sqrt(dens.cov[k, k]) for dens in densities)
        nodes = np.linspace(lo, hi, points)
        w = np.full(points, nodes[1] - nodes[0])
        w[0] = w[-1] = 0.5 * (nodes[1] - nodes[0])
        axes.append(nodes)
        axis_weights.append(w)
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    wmesh = np.meshgrid(*axis_weights, indexing="ij")
    weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
    return nodes, weights


def closed_form_divergence(
    spec: FDivergenceSpec | str,
    p: AnalyticDensity,
    q: AnalyticDensity,
    mass_tolerance: float = 1e-3,
) -> float:
    """Population D_f(q || p).

    Exact for KL between Gaussians; otherwise trapezoid quadrature of
    ``p * f(q / p)`` on a tensor grid (d <= 2).
    """
    spec = get_divergence(spec)
    if p.dimension != q.dimension:
        raise ValueError("p and q must share a dimension")
    if spec.name == "kl":
        return gaussian_kl(q, p)
    nodes, weights = quadrature_grid([p, q])
    log_p = p.logpdf(nodes)
    log_q = q.logpdf(nodes)
    ratio = np.exp(log_q - log_p)
    dens_p = np.exp(log_p)
    theta0, theta1 = spec.ratio_bounds
    outside = (ratio < theta0) | (ratio > theta1)
    stray_mass = float(np.sum(weights * (dens_p + np.exp(log_q)) * outside))
    if stray_mass > mass_tolerance:
        warnings.warn(
            f"density ratio leaves [{theta0}, {theta1}] on mass {stray_mass:.3g}",
            RatioBoundWarning,
            stacklevel=2,
        )
    with np.errstate(all="ignore"):
        integrand = dens_p * spec.f(ratio)
    integrand = np.where(dens_p > 0, integrand, 0.0)
    value = float(np.sum(weights * integrand))
    return max(value, 0.0) if value > -1e-9 else value


def gaussian_mutual_information(cov) -> float:
    """Mutual information (nats) between the two coordinates of a bivariate Gaussian."""
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (2, 2):
        raise ValueError("expected a 2x2 covariance matrix")
    if not np.allclose(cov, cov.T):
        raise ValueError("covariance must be symmetric")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ValueError("covariance must be positive definite") from None
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
    return 0.5 * math.log(cov[0, 0] * cov[1, 1] / det)
