import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrorder.errors import DegenerateOrderError, InvalidInputError, UndefinedNuisanceError
from lrorder.estimators import TwoSample
from lrorder.simulation import (
    MIXED_X_ATOMS,
    MIXED_Y_ATOMS,
    StudySettings,
    asymptotic_sd,
    exponential_scenario,
    kde_ratio_estimator,
    make_scenario,
    mixed_scenario,
    parse_config,
    poisson_scenario,
    run_study,
    sample_scenario,
    true_theta,
)


def test_mixed_masses_sum_to_one():
    assert sum(MIXED_Y_ATOMS.values()) + 2 / 3 == pytest.approx(1.0)
    assert sum(MIXED_X_ATOMS.values()) + 2 / 3 == pytest.approx(1.0)
    # the continuous part of X has density 0.5 + x on [0, 1]
    grid = np.linspace(0, 1, 10_001)
    assert np.trapezoid(0.5 + grid, grid) == pytest.approx(1.0)


def test_true_theta_values():
    m, e, p = mixed_scenario(), exponential_scenario(), poisson_scenario()
    assert true_theta(m, 0.5) == pytest.approx(1.0)
    assert true_theta(m, 0.0) == pytest.approx(0.5)
    assert true_theta(m, 1.0) == pytest.approx(1.5)
    assert true_theta(m, 0.3) == pytest.approx(0.8)
    assert true_theta(e, 0.0) == pytest.approx(0.5)
    assert true_theta(e, 1.0) == pytest.approx(math.e / 2)
    for z in range(10):
        assert true_theta(p, z + 1) / true_theta(p, z) == pytest.approx(1.5)


def test_true_theta_outside_support():
    with pytest.raises(InvalidInputError):
        true_theta(mixed_scenario(), 1.5)
    with pytest.raises(InvalidInputError):
        true_theta(poisson_scenario(), 2.5)
    with pytest.raises(InvalidInputError):
        true_theta(exponential_scenario(), -1.0)


def test_grids():
    assert len(mixed_scenario().eval_grid) == 21
    assert exponential_scenario().eval_grid[-1] == 2.0
    assert poisson_scenario().eval_grid == tuple(float(z) for z in range(11))
    assert mixed_scenario().boundary == (0.0, 1.0)


def test_scenario_validation():
    with pytest.raises(InvalidInputError):
        make_scenario("gaussian")
    with pytest.raises(InvalidInputError):
        poisson_scenario(pi0=1.0)
    with pytest.raises(InvalidInputError):
        exponential_scenario(rate_x=3.0, rate_y=1.0)


def test_poisson_draws_are_integers():
    ts = sample_scenario(poisson_scenario(), 500, 1)
    both = np.concatenate([ts.x, ts.y])
    assert np.all(both >= 0) and np.all(both == np.round(both))


def test_poisson_mean():
    ts = sample_scenario(poisson_scenario(pi0=0.5), 100_000, 2)
    se = math.sqrt(6 / ts.n1)
    assert abs(ts.x.mean() - 6) < 3 * se


def test_mixed_sampler_frequencies():
    s = mixed_scenario(pi0=0.5)
    ts = sample_scenario(s, 200_000, 3)
    for atoms, sample in ((MIXED_X_ATOMS, ts.x), (MIXED_Y_ATOMS, ts.y)):
        for a, p in atoms.items():
            freq = np.mean(sample == a)
            assert abs(freq - p) < 4 * math.sqrt(p * (1 - p) / len(sample))
    cont = ts.x[~np.isin(ts.x, list(MIXED_X_ATOMS))]
    # density 0.5 + x on [0, 1] has mean 7/12
    assert abs(cont.mean() - 7 / 12) < 0.01
    assert cont.min() >= 0 and cont.max() <= 1


def test_sampling_deterministic():
    a = sample_scenario(exponential_scenario(), 300, 5)
    b = sample_scenario(exponential_scenario(), 300, 5)
    np.testing.assert_array_equal(a.x, b.x)
    with pytest.raises(InvalidInputError):
        sample_scenario(exponential_scenario(), 1, 5)


def test_sampling_retries_are_bounded():
    with pytest.raises(DegenerateOrderError):
        sample_scenario(poisson_scenario(pi0=1e-9), 2, 0)


def test_kde_ratio_identical_samples():
    x = np.random.default_rng(0).normal(size=100)
    np.testing.assert_allclose(kde_ratio_estimator(TwoSample(x, x.copy()), [-1.0, 0.0, 2.0]), 1.0)
    with pytest.raises(UndefinedNuisanceError):
        kde_ratio_estimator(TwoSample([1.0], [2.0, 3.0]), 0.0)


def test_kde_ratio_not_monotone_witness():
    ts = TwoSample([0.0, 0.2, 3.0], [1.0, 1.1, 4.0])
    r = kde_ratio_estimator(ts, np.linspace(0, 4, 41))
    assert np.any(np.diff(r) < 0)


@pytest.mark.slow
def test_kde_ratio_median_exponential():
    s = exponential_scenario()
    vals = [kde_ratio_estimator(sample_scenario(s, 10_000, 100 + i), 1.0) for i in range(40)]
    assert np.median(vals) == pytest.approx(math.e / 2, rel=0.2)


def test_asymptotic_sd():
    m = mixed_scenario()
    assert asymptotic_sd(m, 0.0) is None
    rate, sd = asymptotic_sd(m, 0.5)
    assert rate == 0.5 and sd == pytest.approx(math.sqrt((1 / 9 - 1 / 81) / (0.24 / 81)))
    rate, _ = asymptotic_sd(m, 0.25)
    assert rate == pytest.approx(1 / 3)


def test_report_single_replication_flags_sd():
    s = replace(exponential_scenario(), eval_grid=(0.5, 1.0))
    r = run_study(s, StudySettings((200,), 1, ("mle", "lrt", "kde"), seed=1))
    assert math.isnan(r.metric(200, 1.0, "mle", "sd"))
    assert math.isfinite(r.metric(200, 1.0, "mle", "mean"))
    assert r.metric(200, 1.0, "lrt", "n_valid") + r.metric(200, 1.0, "lrt", "n_failed") == 1


def test_failures_are_counted():
    s = replace(poisson_scenario(), eval_grid=(0.0, 3.0))
    r = run_study(s, StudySettings((200,), 4, ("lrt",), seed=1))
    # z = 0 is the smallest pooled value, where the LRT gives no interval
    assert r.metric(200, 0.0, "lrt", "n_failed") >= 1
    assert r.metric(200, 0.0, "mle", "boundary") == 1.0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["discrete-poisson", "mixed"]))
def test_report_cells_in_range(seed, kind):
    s = make_scenario(kind)
    s = replace(s, eval_grid=s.eval_grid[::4])
    r = run_study(s, StudySettings((150,), 3, ("mle", "lrt", "split"), seed=seed % 1000))
    for (n, z, method), cell in r.cells.items():
        if "coverage" in cell and not math.isnan(cell["coverage"]):
            assert 0.0 <= cell["coverage"] <= 1.0
        if "mean_width" in cell and not math.isnan(cell["mean_width"]):
            assert cell["mean_width"] >= 0


def test_report_is_reproducible_and_parallel_safe():
    s = replace(mixed_scenario(), eval_grid=(0.25, 0.5))
    st_ = StudySettings((100, 200), 6, ("mle", "split", "lrt"), seed=9)
    a = run_study(s, st_, threads=1)
    b = run_study(s, st_, threads=2)
    assert a.to_csv() == b.to_csv()
    assert a.summary() == b.summary()
    assert a.to_csv().splitlines()[0] == "scenario,n,z,method,metric,value"


def test_fstar_equals_fn_fraction_grows():
    s = replace(poisson_scenario(), eval_grid=(3.0,))
    fr = []
    for n in (100, 2000, 40_000):
        r = run_study(s, StudySettings((n,), 20, ("mle",), seed=3))
        fr.append(r.run_metrics[(n, "frac_fstar_equals_fn")])
    assert fr[0] <= fr[1] <= fr[2] and fr[2] > fr[0]


def test_parse_config():
    text = """
    # poisson study
    kind = discrete-poisson
    rate_x = 6
    rate_y = 4
    n = 100, 200
    replications = 3
    methods = mle, lrt
    seed = 12
    """
    s, st_ = parse_config(text)
    assert s.kind == "discrete-poisson" and s.rate_x == 6
    assert st_.n_list == (100, 200) and st_.methods == ("mle", "lrt") and st_.seed == 12


@pytest.mark.parametrize("text", [
    "kind = gaussian",
    "n = 5",
    "kind = mixed\nfoo = 1",
    "kind = mixed\nmethods = magic",
    "kind = mixed\nreplications = 0",
    "kind = mixed\nlevel = 1.5",
    "kind mixed",
])
def test_parse_config_errors(text):
    with pytest.raises(InvalidInputError):
        parse_config(text)
