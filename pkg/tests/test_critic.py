import numpy as np
import pytest

from elicit.critic import (
    FeatureBasisCritic,
    FitConfig,
    FixedCritic,
    MlpCritic,
    evaluate,
    fit,
    gradient,
    init_critic,
    kmeans_pp_centers,
    median_distance,
    objective,
)
from elicit.fdiv import DIVERGENCE_NAMES, get_divergence
from elicit.optim import NonFiniteObjectiveError, OptimizerConfig, minimize
from elicit.samples import EmpiricalDistribution, PairedSamples


def gaussian_pair(n=300, shift=1.0, d=1, seed=0):
    rng = np.random.default_rng(seed)
    P = EmpiricalDistribution(rng.normal(size=(n, d)))
    Q = EmpiricalDistribution(rng.normal(size=(n, d)) + shift)
    return P, Q


def central_fd(fun, theta, h=1e-6):
    g = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = h
        g[k] = (fun(theta + e) - fun(theta - e)) / (2 * h)
    return g


@pytest.mark.parametrize("name", DIVERGENCE_NAMES)
def test_basis_gradient_matches_finite_difference(name):
    spec = get_divergence(name)
    P, Q = gaussian_pair(n=60, d=2)
    rng = np.random.default_rng(1)
    critic = init_critic(spec, P, Q, FitConfig(n_centers=12, seed=3))
    for _ in range(3):
        theta = rng.normal(scale=0.5, size=critic.params.size)
        c = critic.with_params(theta)
        fd = central_fd(lambda t: objective(critic.with_params(t), spec, P, Q), theta)
        an = gradient(c, spec, P, Q)
        assert np.linalg.norm(an - fd) / max(np.linalg.norm(fd), 1e-12) < 1e-6


@pytest.mark.parametrize("name", ["kl", "jensen_shannon", "squared_hellinger"])
def test_mlp_gradient_matches_finite_difference(name):
    spec = get_divergence(name)
    P, Q = gaussian_pair(n=40, d=2)
    rng = np.random.default_rng(2)
    critic = MlpCritic.initialise((2, 6, 5, 1), spec, rng)
    for _ in range(3):
        theta = critic.project(rng.normal(scale=0.6, size=critic.params.size))
        fd = central_fd(lambda t: objective(critic.with_params(t), spec, P, Q), theta)
        an = gradient(critic.with_params(theta), spec, P, Q)
        assert np.linalg.norm(an - fd) / max(np.linalg.norm(fd), 1e-12) < 1e-5


def test_input_gradients_by_finite_difference():
    spec = get_divergence("kl")
    rng = np.random.default_rng(4)
    x = rng.normal(size=(7, 2))
    basis = FeatureBasisCritic(rng.normal(size=(5, 2)), 0.9, spec, rng.normal(size=6), scale=[1.3, 0.7])
    mlp = MlpCritic.initialise((2, 4, 1), spec, rng)
    for critic in (basis, mlp):
        g = critic.raw_grad_x(x)
        for k in range(2):
            e = np.zeros(2)
            e[k] = 1e-6
            fd = (critic.raw(x + e) - critic.raw(x - e)) / 2e-6
            np.testing.assert_allclose(g[:, k], fd, rtol=1e-5, atol=1e-7)


def test_cross_raw_equals_concatenated_evaluation():
    spec = get_divergence("kl")
    rng = np.random.default_rng(5)
    c = FeatureBasisCritic(rng.normal(size=(9, 2)), 1.1, spec, rng.normal(size=10), scale=[2.0, 0.5])
    x, y = rng.normal(size=(4, 1)), rng.normal(size=(6, 1))
    grid = np.array([[xi[0], yj[0]] for xi in x for yj in y])
    np.testing.assert_allclose(c.cross_raw(x, y).ravel(), c.raw(grid), atol=1e-12)


def test_critic_output_always_in_conjugate_domain():
    for name in DIVERGENCE_NAMES:
        spec = get_divergence(name)
        rng = np.random.default_rng(0)
        c = FeatureBasisCritic(rng.normal(size=(4, 1)), 0.5, spec, 30 * rng.normal(size=5))
        out = c(np.linspace(-5, 5, 101)[:, None])
        assert np.all(spec.conj_domain.closure_contains(out))


def test_dimension_mismatch_raises():
    c = FeatureBasisCritic(np.zeros((3, 2)), 1.0, "kl")
    with pytest.raises(ValueError, match="dimension"):
        c.raw(np.zeros((5, 3)))


def test_evaluate_single_point_returns_scalar():
    c = FixedCritic(lambda x: x[:, 0] - x[:, 1], "pearson_chi2", dimension=2)
    assert evaluate(c, [3.0, 1.0]) == pytest.approx(2.0)
    assert evaluate(c, np.ones((4, 2))).shape == (4,)


def test_kmeans_pp_picks_distinct_rows_and_is_seeded():
    x = np.random.default_rng(0).normal(size=(200, 2))
    a = kmeans_pp_centers(x, 20, np.random.default_rng(9))
    b = kmeans_pp_centers(x, 20, np.random.default_rng(9))
    assert np.array_equal(a, b)
    assert len({tuple(r) for r in a}) == 20


def test_median_distance_of_unit_square_corners():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    # six distances: four of 1, two of sqrt(2)
    assert median_distance(x, np.random.default_rng(0)) == pytest.approx(1.0)


def test_fit_is_deterministic_for_a_seed():
    P, Q = gaussian_pair(n=200)
    cfg = FitConfig(seed=11)
    c1, r1 = fit(cfg, "kl", P, Q)
    c2, r2 = fit(cfg, "kl", P, Q)
    assert np.array_equal(c1.params, c2.params)
    assert r1.iterations == r2.iterations


def test_fit_lowers_objective_and_converges():
    P, Q = gaussian_pair(n=400)
    _, report = fit(FitConfig(seed=1), "kl", P, Q)
    assert report.objective < report.initial_objective
    assert report.status == "converged"
    assert report.grad_norm < 1e-6


@pytest.mark.parametrize("method", ["lbfgs", "gd"])
def test_other_optimizers_reach_the_newton_optimum(method):
    P, Q = gaussian_pair(n=150)
    base, ref = fit(FitConfig(seed=2, n_centers=16), "kl", P, Q)
    opt = OptimizerConfig(method=method, max_iter=20000, gtol=1e-6)
    _, rep = fit(FitConfig(seed=2, n_centers=16, optimizer=opt), "kl", P, Q)
    assert rep.objective == pytest.approx(ref.objective, abs=1e-5)


def test_mlp_fit_respects_weight_cap():
    P, Q = gaussian_pair(n=120)
    opt = OptimizerConfig(method="gd", step_size=0.5, max_iter=300)
    critic, report = fit(FitConfig(critic="mlp", hidden=(8,), weight_cap=0.5, optimizer=opt, seed=0), "kl", P, Q)
    assert np.all(np.abs(critic.params) <= 0.5)
    assert report.objective < report.initial_objective


def test_fit_rejects_tiny_samples():
    P, Q = gaussian_pair(n=5)
    with pytest.raises(ValueError, match="at least 8"):
        fit(FitConfig(), "kl", P, Q)


def test_minimize_on_quadratic():
    a = np.diag([1.0, 10.0])
    res = minimize(lambda x: (0.5 * x @ a @ x, a @ x), np.array([3.0, -2.0]), OptimizerConfig(method="lbfgs"))
    assert res.status == "converged"
    np.testing.assert_allclose(res.x, 0.0, atol=1e-6)


def test_minimize_reports_non_finite_objective():
    with pytest.raises(NonFiniteObjectiveError):
        minimize(lambda x: (float("nan"), np.ones_like(x)), np.zeros(2), OptimizerConfig(method="gd"))


def test_paired_samples_validation():
    with pytest.raises(ValueError, match="unequal"):
        PairedSamples(np.zeros((3, 1)), np.zeros((4, 1)))
    with pytest.raises(ValueError):
        EmpiricalDistribution(np.zeros((3, 1)), weights=[0.5, 0.5, 0.5])
