import numpy as np
import pytest

from elicit.critic import FitConfig
from elicit.mechanism import MechanismConfig
from elicit.simlab import (
    PRESETS,
    GaussianWorld,
    ReportStrategy,
    apply_strategy,
    derive_seed,
    get_world,
    median_abs_error,
    results_to_csv,
    run_convergence_sweep,
    run_score_table,
    sample_world,
    sweep_to_csv,
)


def quick_cfg():
    return MechanismConfig(fit=FitConfig(n_centers=24), product_cap=3000)


def test_presets_are_valid_worlds():
    for name, world in PRESETS.items():
        assert world.name == name
        assert world.mutual_information() >= 0.0
    assert get_world("independent").mutual_information() == pytest.approx(0.0, abs=1e-15)


def test_unknown_preset_lists_choices():
    with pytest.raises(KeyError, match="exp1"):
        get_world("exp9")


def test_world_rejects_non_pd_covariance():
    with pytest.raises(ValueError):
        GaussianWorld((0.0, 0.0), ((1.0, 2.0), (2.0, 1.0)))


def test_sample_moments_match_world():
    world = get_world("exp3")
    xy = sample_world(world, 20000, seed=0).stacked()
    np.testing.assert_allclose(xy.mean(axis=0), world.mean, atol=0.1)
    np.testing.assert_allclose(np.cov(xy, rowvar=False), world.cov, rtol=0.05)


def test_sample_world_minimum():
    with pytest.raises(ValueError, match="n below minimum 8"):
        sample_world(get_world("exp1"), 7)


def test_log_ratio_integrates_to_mutual_information():
    world = get_world("exp1")
    xy = sample_world(world, 200000, seed=1).stacked()
    assert world.log_ratio(xy).mean() == pytest.approx(world.mutual_information(), abs=0.01)


def test_f_mutual_information_for_non_kl_uses_quadrature():
    world = GaussianWorld((0.0, 0.0), ((1.0, 0.5), (0.5, 1.0)))
    # chi-square MI of a bivariate normal: 1 / (1 - rho^2) - 1
    assert world.f_mutual_information("pearson_chi2") == pytest.approx(1 / 0.75 - 1, abs=1e-5)


def test_strategies():
    x = np.random.default_rng(0).normal(size=(500, 1)) + 3.0
    assert np.array_equal(apply_strategy(ReportStrategy("truthful"), x), x)
    shifted = apply_strategy(ReportStrategy("random_shift", lo=0.0, hi=3.0, seed=1), x)
    d = shifted - x
    assert d.min() >= 0.0 and d.max() <= 3.0 and len(np.unique(d)) == 500
    fake = apply_strategy(ReportStrategy("random_report", scale_mult=2.0, seed=1), x)
    assert fake.min() >= 0.0 and fake.max() <= 2.0 * x.std()
    with pytest.raises(ValueError):
        ReportStrategy("copy_peer")


def test_derive_seed_is_stable_and_key_sensitive():
    assert derive_seed(42, 1, 2) == derive_seed(42, 1, 2)
    assert derive_seed(42, 1, 2) != derive_seed(42, 2, 1)


def test_score_table_rows_and_determinism():
    worlds = [get_world("exp1")]
    a = run_score_table(worlds, quick_cfg(), repeats=2, n=120, master_seed=5)
    b = run_score_table(worlds, quick_cfg(), repeats=2, n=120, master_seed=5)
    assert [r.strategy for r in a] == ["truthful", "random_shift", "random_report"]
    assert results_to_csv(a) == results_to_csv(b)
    assert results_to_csv(a).splitlines()[0] == "world,strategy,n,repeats,mean_score,std_score,oracle"
    assert a[0].std_score == pytest.approx(np.std(a[0].per_repeat, ddof=1))


def test_score_table_needs_two_repeats():
    with pytest.raises(ValueError, match="at least 2"):
        run_score_table([get_world("exp1")], quick_cfg(), repeats=1)


def test_sweep_rows_and_median():
    rows = run_convergence_sweep(get_world("exp1"), quick_cfg(), [32, 64], repeats=2, master_seed=1)
    assert len(rows) == 4
    assert all(r["abs_error"] == pytest.approx(abs(r["estimate"] - r["oracle"])) for r in rows)
    assert set(median_abs_error(rows)) == {32, 64}
    assert sweep_to_csv(rows).splitlines()[0] == "n,seed,estimate,oracle,abs_error"
    with pytest.raises(ValueError, match="increasing"):
        run_convergence_sweep(get_world("exp1"), quick_cfg(), [64, 32], repeats=1)
