import io
import math

import numpy as np
import pytest
from scipy import stats

import oracles as O
from hawkescorr import simulate as S
from hawkescorr.errors import HorizonError, UnsupportedKernelError
from hawkescorr.kernel import ExponentialKernel, ModelParams, PowerLawKernel, TabulatedKernel


def test_same_seed_same_path(exp_params):
    a = S.simulate_hawkes(exp_params, 5.0, seed=11, path_index=3)
    b = S.simulate_hawkes(exp_params, 5.0, seed=11, path_index=3)
    np.testing.assert_array_equal(a.events, b.events)
    c = S.simulate_hawkes(exp_params, 5.0, seed=11, path_index=4)
    assert not np.array_equal(a.events, c.events)


def test_paths_are_sorted_and_inside_horizon(exp_params):
    for i in range(50):
        p = S.simulate_hawkes(exp_params, 3.0, 2, i)
        assert np.all(np.diff(p.events) >= 0)
        assert p.events.size == 0 or (p.events[0] >= 0 and p.events[-1] <= 3.0)


def test_zero_baseline_gives_empty_path(exp_kernel):
    rng = S.path_rng(0, 0)
    assert S._branching(0.0, exp_kernel, 10.0, rng).size == 0


def test_worker_count_does_not_change_results(exp_params, monkeypatch):
    monkeypatch.setenv("HAWKES_THREADS", "1")
    one = S.sample_observables(exp_params, 2.0, [1.0, 2.0], 600, seed=5)
    monkeypatch.setenv("HAWKES_THREADS", "3")
    three = S.sample_observables(exp_params, 2.0, [1.0, 2.0], 600, seed=5)
    np.testing.assert_array_equal(one, three)


def test_observables_match_single_path_api(exp_params):
    rows = S.sample_observables(exp_params, 2.0, [0.5, 2.0], 5, seed=9)
    for i, row in enumerate(rows):
        p = S.simulate_hawkes(exp_params, 2.0, 9, i)
        assert row[0] == p.count(0.5) and row[1] == p.count(2.0)
        assert row[3] == pytest.approx(S.intensity_on_path(p, exp_params, 2.0), rel=1e-14)


def test_intensity_is_predictable(exp_params):
    path = S.SimulatedPath(np.array([0.5]), 1.0)
    assert S.intensity_on_path(path, exp_params, 0.5) == 1.0
    assert S.intensity_on_path(path, exp_params, 0.6) == pytest.approx(1 + math.exp(-0.2))
    assert path.count(0.5) == 1
    with pytest.raises(HorizonError):
        S.intensity_on_path(path, exp_params, 1.5)


def test_branching_and_thinning_agree_in_distribution(exp_params):
    n = 10_000
    a = S.sample_observables(exp_params, 2.0, [2.0], n, seed=21)
    b = S.sample_observables(exp_params, 2.0, [2.0], n, seed=22, method="thinning")
    # H_2 is discrete; compare the intensity (continuous) and the count moments
    assert stats.ks_2samp(a[:, 1], b[:, 1]).pvalue > 1e-3
    for col in (0, 1):
        ea, eb = S.mc_mean(a[:, col]), S.mc_mean(b[:, col])
        assert abs(ea.value - eb.value) <= 4 * math.hypot(ea.std_error, eb.std_error)


def test_first_event_time_is_exponential(exp_params):
    # before the first event the intensity is mu, so T_1 ~ Exp(mu) censored at T
    firsts = [S.simulate_hawkes(exp_params, 50.0, 4, i).events[0] for i in range(3000)]
    assert stats.kstest(firsts, "expon").pvalue > 1e-3


def test_thinning_majorant_holds(exp_params):
    for i in range(30):
        S.simulate_thinning(exp_params, 5.0, 1, i, debug=True)


def test_thinning_rejects_rising_kernel():
    params = ModelParams(1.0, TabulatedKernel(0.5, (0.1, 0.5, 0.0)))
    with pytest.raises(UnsupportedKernelError):
        S.simulate_thinning(params, 1.0, 0)


def test_cluster_size_mean_is_one_over_one_minus_norm(power_kernel):
    for kernel in (ExponentialKernel(1.0, 2.0), power_kernel):
        sizes = S.cluster_sizes(kernel, 20_000, seed=8, horizon=1e4)
        se = sizes.std(ddof=1) / math.sqrt(sizes.size)
        assert abs(sizes.mean() - 1 / (1 - kernel.l1_norm)) < 4 * se


def test_standard_error_scales_as_inverse_sqrt_n(exp_params):
    small = S.mc_moment_estimates(exp_params, 1.0, 1.0, 1.0, 2_000, seed=1)["cov_count"]
    large = S.mc_moment_estimates(exp_params, 1.0, 1.0, 1.0, 8_000, seed=1)["cov_count"]
    assert large.std_error / small.std_error == pytest.approx(0.5, rel=0.15)


def test_powerlaw_moments_match_closed_form(power_kernel):
    from hawkescorr import moments as M
    from hawkescorr.resolvent import Grid, resolvent
    params = ModelParams(1.5, power_kernel)
    res = resolvent(power_kernel, Grid.covering(2.0, 1e-3))
    est = S.mc_moment_estimates(params, 2.0, 1.0, 2.0, 20_000, seed=3)
    for q, e in est.items():
        target = M.evaluate(M.MomentRequest(params, 1.0, 2.0, q), res)
        assert e.z_score(target) < 4, q


def test_shifted_paths_keep_the_base_path(exp_params):
    base = S.simulate_hawkes(exp_params, 2.0, 6, 1)
    shifted = S.simulate_shifted(exp_params, 2.0, [0.5], 6, 1)
    assert shifted.forced.sum() == 1
    assert shifted.forced_times().tolist() == [0.5]
    assert set(base.events) <= set(shifted.events)


def test_shifted_mean_intensity(exp_params):
    x = S.sample_observables(exp_params, 1.0, [1.0], 20_000, seed=17, forced=[0.5])
    lam, count = S.mc_mean(x[:, 1]), S.mc_mean(x[:, 0])
    assert lam.z_score(O.SHIFTED_INTENSITY) < 4
    assert count.z_score(O.SHIFTED_COUNT) < 4


@pytest.mark.parametrize("forced", [[0.5, 0.5], [0.0], [1.5], [0.7, 0.3]])
def test_shifted_rejects_bad_forced_times(exp_params, forced):
    with pytest.raises(ValueError):
        S.simulate_shifted(exp_params, 1.0, forced, 0)


def test_estimator_edge_cases():
    with pytest.raises(ValueError):
        S.mc_mean(np.array([1.0]))
    est = S.mc_covariance(np.ones(10), np.arange(10.0))
    assert est.value == 0.0 and est.z_score(0.0) == 0.0
    assert math.isinf(est.z_score(1.0))


def test_covariance_estimator_is_unbiased_sample_covariance():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=50), rng.normal(size=50)
    assert S.mc_covariance(x, y).value == pytest.approx(np.cov(x, y)[0, 1], rel=1e-12)


def test_csv_writers(tmp_path, exp_params):
    paths = [S.simulate_shifted(exp_params, 1.0, [0.5], 1, i) for i in range(2)]
    out = tmp_path / "paths.csv"
    S.write_paths_csv(paths, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "path_id,event_time,forced"
    assert sum(line.endswith(",1") for line in lines[1:]) == 2
    buf = io.StringIO()
    S.write_estimates_csv([("cov_count", 1.0, 2.0, 0.1, 0.01, 0.1, 0.0)], buf)
    assert buf.getvalue() == "quantity,s,t,mc_value,std_error,analytic,abs_z\ncov_count,1,2,0.10000000000000001,0.01,0.10000000000000001,0\n"
