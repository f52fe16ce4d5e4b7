"""Deterministic full-batch minimisers with Armijo backtracking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

ObjectiveFn = Callable[[np.ndarray], tuple[float, np.ndarray]]
ProjectFn = Callable[[np.ndarray], np.ndarray]
HessianFn = Callable[[np.ndarray], np.ndarray]

METHODS = ("newton", "lbfgs", "gd")


class NonFiniteObjectiveError(FloatingPointError):
    def __init__(self, iteration: int, value: float):
        super().__init__(f"objective became non-finite ({value}) at iteration {iteration}")
        self.iteration = iteration
        self.value = value


@dataclass
class OptimizerConfig:
    method: str = "newton"
    step_size: float = 1.0
    max_iter: int = 5000
    gtol: float = 1e-6
    armijo_c: float = 1e-4
    shrink: float = 0.5
    memory: int = 10
    max_backtracks: int = 60
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown optimizer method {self.method!r}")
        if self.step_size <= 0 or self.max_iter < 0 or self.gtol <= 0:
            raise ValueError("step_size and gtol must be positive, max_iter non-negative")
        if not 0 < self.armijo_c < 1 or not 0 < self.shrink < 1:
            raise ValueError("armijo_c and shrink must lie in (0, 1)")


@dataclass
class OptimizeResult:
    x: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    trace: list[float] = field(default_factory=list)
    status: str = "max_iter"


def minimize(
    fun: ObjectiveFn,
    x0: np.ndarray,
    config: OptimizerConfig,
    project: Optional[ProjectFn] = None,
    hess: Optional[HessianFn] = None,
) -> OptimizeResult:
    """Minimise ``fun`` from ``x0``.

    ``fun`` returns (value, gradient). ``method="newton"`` needs ``hess`` and
    falls back to L-BFGS without it. With ``project`` given, every iterate is
    mapped back onto the feasible set and the method falls back to projected
    gradient descent (quasi-Newton curvature pairs are not valid there).
    """
    if config.method == "newton" and hess is not None and project is None:
        return _newton(fun, hess, x0, config)
    x = np.array(x0, dtype=float)
    if project is not None:
        x = project(x)
    value, grad = fun(x)
    if not np.isfinite(value):
        raise NonFiniteObjectiveError(0, value)
    trace = [float(value)]
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    use_lbfgs = config.method != "gd" and project is None
    status = "max_iter"
    it = 0
    for it in range(1, config.max_iter + 1):
        gnorm = float(np.linalg.norm(_projected_grad(x, grad, project)))
        if gnorm < config.gtol:
            status = "converged"
            it -= 1
            break
        if use_lbfgs and s_hist:
            direction = -_two_loop(grad, s_hist, y_hist)
            if float(direction @ grad) >= 0.0:
                s_hist.clear()
                y_hist.clear()
                direction = -grad
            step = 1.0
        else:
            direction = -grad
            step = config.step_size if not use_lbfgs else min(1.0, 1.0 / max(gnorm, 1e-12))
        accepted = False
        for _ in range(config.max_backtracks):
            x_new = x + step * direction
            if project is not None:
                x_new = project(x_new)
                decrease = float(grad @ (x_new - x))
            else:
                decrease = step * float(grad @ direction)
            new_value, new_grad = fun(x_new)
            if np.isfinite(new_value) and new_value <= value + config.armijo_c * decrease:
                accepted = True
                break
            step *= config.shrink
        if not accepted:
            if not np.isfinite(new_value) and not np.isfinite(value):
                raise NonFiniteObjectiveError(it, new_value)
            status = "line_search_failed"
            it -= 1
            break
        if use_lbfgs:
            s = x_new - x
            y = new_grad - grad
            if float(s @ y) > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
                s_hist.append(s)
                y_hist.append(y)
                if len(s_hist) > config.memory:
                    s_hist.pop(0)
                    y_hist.pop(0)
        x, value, grad = x_new, new_value, new_grad
        trace.append(float(value))
    gnorm = float(np.linalg.norm(_projected_grad(x, grad, project)))
    return OptimizeResult(x=x, value=float(value), grad_norm=gnorm, iterations=it, trace=trace, status=status)


def _projected_grad(x, grad, project):
    if project is None:
        return grad
    # gradient mapping with unit step
    return x - project(x - grad)


def _two_loop(grad, s_hist, y_hist):
    q = grad.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ q)
        alphas.append((rho, a))
        q -= a * y
    s, y = s_hist[-1], y_hist[-1]
    q *= float(s @ y) / float(y @ y)
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q


def _newton(fun, hess, x0, config):
    x = np.array(x0, dtype=float)
    value, grad = fun(x)
    if not np.isfinite(value):
        raise NonFiniteObjectiveError(0, value)
    trace = [float(value)]
    status = "max_iter"
    it = 0
    eye = np.eye(x.size)
    for it in range(1, config.max_iter + 1):
        if float(np.linalg.norm(grad)) < config.gtol:
            status = "converged"
            it -= 1
            break
        direction = _damped_newton_direction(hess(x), grad, eye)
        step = 1.0
        accepted = False
        slope = float(grad @ direction)
        for _ in range(config.max_backtracks):
            x_new = x + step * direction
            new_value, new_grad = fun(x_new)
            if np.isfinite(new_value) and new_value <= value + config.armijo_c * step * slope:
                accepted = True
                break
            step *= config.shrink
        if not accepted:
            status = "line_search_failed"
            it -= 1
            break
        x, value, grad = x_new, new_value, new_grad
        trace.append(float(value))
    return OptimizeResult(
        x=x, value=float(value), grad_norm=float(np.linalg.norm(grad)), iterations=it, trace=trace, status=status
    )


def _damped_newton_direction(h, grad, eye):
    h = 0.5 * (h + h.T)
    damping = 0.0
    floor = 1e-10 * max(float(np.max(np.abs(np.diag(h)))), 1.0)
    for _ in range(60):
        try:
            chol = np.linalg.cholesky(h + damping * eye)
        except np.linalg.LinAlgError:
            damping = max(2.0 * damping, floor)
            continue
        d = -np.linalg.solve(chol.T, np.linalg.solve(chol, grad))
        if np.all(np.isfinite(d)) and float(d @ grad) < 0.0:
            return d
        damping = max(2.0 * damping, floor)
    return -grad
