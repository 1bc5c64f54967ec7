"""Monte Carlo link simulation: SINR assembly, reproducibility, baselines."""

import numpy as np
import pytest

from noma_lab.analytic import avg_log_term
from noma_lab.beamforming import zf_beams
from noma_lab.channel import SystemGeometry, draw_channels
from noma_lab.linksim import PowerPlan, monte_carlo_rates, sinr, tdma_mrt_baseline


def test_power_plan_validation():
    plan = PowerPlan(p=np.array([[2.0, 1.0], [3.0, 4.0]]), total_budget=10.0)
    np.testing.assert_allclose(plan.cluster_totals(), [3.0, 7.0])
    with pytest.raises(ValueError):
        PowerPlan(p=np.array([[2.0, 0.0]]), total_budget=10.0)  # zero power
    with pytest.raises(ValueError):
        PowerPlan(p=np.array([[6.0, 5.0]]), total_budget=10.0)  # over budget
    with pytest.raises(ValueError):
        PowerPlan(p=np.array([1.0, 2.0]), total_budget=10.0)  # not 2-D
    # an exact spend is fine (tolerance absorbs rounding)
    PowerPlan(p=np.array([[5.0, 5.0]]), total_budget=10.0)


def test_sinr_matches_manual_assembly(ref_geometry, ref_accuracy):
    draw = draw_channels(ref_geometry, ref_accuracy, 21)
    beams = zf_beams(draw.h_hat, ref_geometry)
    plan = PowerPlan(p=np.full((3, 2), 10.0 / 6.0), total_budget=10.0)
    for n in range(3):
        for k in range(2):
            got = sinr(n, k, draw, beams, plan, ref_geometry)
            a = ref_geometry.alpha[n, k]
            own = abs(np.vdot(draw.h[n, k], beams.w[n])) ** 2
            num = a * own * plan.p[n, k]
            intra = a * own * plan.p[n, :k].sum()
            inter = 0.0
            for i in range(3):
                if i == n:
                    continue
                inter += a * abs(np.vdot(draw.h[n, k], beams.w[i])) ** 2 * plan.p[i].sum()
            assert got == pytest.approx(num / (intra + inter + 1.0), rel=1e-12)


def test_sinr_model_residual_variant(ref_geometry, ref_accuracy):
    draw = draw_channels(ref_geometry, ref_accuracy, 22)
    beams = zf_beams(draw.h_hat, ref_geometry)
    plan = PowerPlan(p=np.full((3, 2), 1.0), total_budget=6.0)
    with pytest.raises(ValueError):
        sinr(0, 0, draw, beams, plan, ref_geometry, model_residual=True)
    # nulling the estimates makes the actual foreign leakage exactly the
    # scaled error leakage, so both paths agree on a common draw ...
    g_actual = sinr(0, 0, draw, beams, plan, ref_geometry)
    g_model = sinr(0, 0, draw, beams, plan, ref_geometry, ref_accuracy,
                   model_residual=True)
    assert g_model == pytest.approx(g_actual, rel=1e-9)
    # ... and an inflated error weight visibly lowers the SINR
    g_wrong = sinr(0, 0, draw, beams, plan, ref_geometry, ref_accuracy / 2.0,
                   model_residual=True)
    assert g_wrong < g_model


def test_monte_carlo_deterministic(small_geometry):
    plan = PowerPlan(p=np.full((2, 2), 2.5), total_budget=10.0)
    a = monte_carlo_rates(small_geometry, 0.8, plan, trials=500, seed=3)
    b = monte_carlo_rates(small_geometry, 0.8, plan, trials=500, seed=3)
    np.testing.assert_array_equal(a.rate, b.rate)
    np.testing.assert_array_equal(a.stderr, b.stderr)
    assert a.sum_rate == b.sum_rate
    c = monte_carlo_rates(small_geometry, 0.8, plan, trials=500, seed=4)
    assert not np.array_equal(a.rate, c.rate)


def test_monte_carlo_report_fields(small_geometry):
    plan = PowerPlan(p=np.full((2, 2), 2.5), total_budget=10.0)
    rep = monte_carlo_rates(small_geometry, 0.8, plan, trials=400, seed=5)
    assert rep.rate.shape == (2, 2)
    assert rep.source == "monte-carlo"
    assert rep.trials == 400
    assert rep.sum_rate == pytest.approx(rep.rate.sum(), rel=1e-12)
    assert np.all(rep.rate > 0.0)
    assert np.all(rep.stderr > 0.0)
    assert 0.0 <= rep.order_violation_frac <= 1.0
    with pytest.raises(ValueError):
        monte_carlo_rates(small_geometry, 0.8, plan, trials=0, seed=5)
    bad_plan = PowerPlan(p=np.full((1, 2), 1.0), total_budget=10.0)
    with pytest.raises(ValueError):
        monte_carlo_rates(small_geometry, 0.8, bad_plan, trials=10, seed=5)


def test_order_violations_reported():
    # nearly equal gains with poor CSI: effective ordering flips sometimes
    g = SystemGeometry(M=4, N=2, K=2, alpha=np.array([[1.0, 0.99], [1.0, 0.99]]))
    plan = PowerPlan(p=np.full((2, 2), 1.0), total_budget=4.0)
    rep = monte_carlo_rates(g, 0.5, plan, trials=2000, seed=16)
    assert rep.order_violation_frac > 0.2
    # a single user per cluster has no intra-cluster order to violate
    g1 = SystemGeometry(M=4, N=2, K=1, alpha=np.array([[1.0], [0.9]]))
    plan1 = PowerPlan(p=np.full((2, 1), 2.0), total_budget=4.0)
    rep1 = monte_carlo_rates(g1, 0.5, plan1, trials=500, seed=16)
    assert rep1.order_violation_frac == 0.0


def test_stderr_shrinks_with_trials(small_geometry):
    plan = PowerPlan(p=np.full((2, 2), 2.5), total_budget=10.0)
    small = monte_carlo_rates(small_geometry, 0.8, plan, trials=2000, seed=8)
    big = monte_carlo_rates(small_geometry, 0.8, plan, trials=8000, seed=8)
    ratio = big.stderr.mean() / small.stderr.mean()
    assert ratio == pytest.approx(0.5, rel=0.2)


def test_tdma_mrt_single_user_matches_mixture():
    # one user, perfect CSI: the matched-filter gain is a sum of M unit
    # exponentials, so the average rate is the M-fold tied mixture value
    g = SystemGeometry(M=4, N=1, K=1, alpha=np.array([[1.0]]))
    rep = tdma_mrt_baseline(g, 1.0, total_power=5.0, trials=40000, seed=17)
    expected = avg_log_term([5.0, 5.0, 5.0, 5.0])
    assert rep.sum_rate == pytest.approx(expected, rel=0.01)


def test_tdma_mrt_time_share(ref_geometry):
    rep = tdma_mrt_baseline(ref_geometry, 1.0, total_power=10.0, trials=2000, seed=9)
    assert rep.rate.shape == (3, 2)
    # six users share time equally: each rate carries the 1/6 prefactor,
    # so even the strongest user's rate stays below log2(1+P*alpha*M)/6 + slack
    assert rep.rate[0, 0] < np.log2(1.0 + 10.0 * 6.0) / 6.0 + 0.5
    with pytest.raises(ValueError):
        tdma_mrt_baseline(ref_geometry, 1.0, total_power=0.0, trials=10, seed=9)
    with pytest.raises(ValueError):
        tdma_mrt_baseline(ref_geometry, 1.0, total_power=1.0, trials=0, seed=9)


def test_rates_scale_with_accuracy(small_geometry):
    # better CSI can only help on average (same seed, common draws)
    plan = PowerPlan(p=np.full((2, 2), 5.0), total_budget=20.0)
    lo = monte_carlo_rates(small_geometry, 0.3, plan, trials=4000, seed=10)
    hi = monte_carlo_rates(small_geometry, 0.95, plan, trials=4000, seed=10)
    assert hi.sum_rate > lo.sum_rate
