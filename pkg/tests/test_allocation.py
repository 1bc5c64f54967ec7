"""Power shares, feedback-bit splits, and transmission-mode selection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noma_lab.allocation import (
    FeedbackPlan,
    TransmissionMode,
    brute_force_feedback,
    brute_force_power,
    deal_companion,
    deal_gains,
    enumerate_modes,
    equal_power,
    evaluate_modes,
    feedback_allocation,
    feedback_bound,
    feedback_objective,
    feedback_weights,
    fixed_ratio_power,
    inter_cluster_objective,
    interference_coefficient,
    joint_optimize,
    power_allocation,
    relaxed_feedback_allocation,
    select_mode,
)
from noma_lab.channel import SystemGeometry, csi_accuracy_fdd
from noma_lab.errors import ConfigError

TABLE_GAINS = np.array([1.00, 0.10, 0.95, 0.20, 0.90, 0.15])


# ------------------------------------------------------------ cluster power

def test_interference_coefficients_reference_system(ref_geometry, ref_accuracy):
    coefs = [
        interference_coefficient(ref_geometry, ref_accuracy, i) for i in range(3)
    ]
    np.testing.assert_allclose(coefs, [0.4025, 0.34, 0.3225], atol=1e-12)


def test_interference_coefficient_ignores_own_cluster(ref_geometry, ref_accuracy):
    base = interference_coefficient(ref_geometry, ref_accuracy, 0)
    tweaked = ref_accuracy.copy()
    tweaked[0] = [0.1, 0.1]  # only cluster 0's own sensitivities move
    assert interference_coefficient(ref_geometry, tweaked, 0) == pytest.approx(base)
    assert interference_coefficient(ref_geometry, tweaked, 1) != pytest.approx(
        interference_coefficient(ref_geometry, ref_accuracy, 1)
    )


def test_interference_coefficient_single_cluster():
    g = SystemGeometry(M=2, N=1, K=2, alpha=np.array([[1.0, 0.5]]))
    assert interference_coefficient(g, 0.5, 0) == 0.0


def test_power_allocation_reference_shares(ref_geometry, ref_accuracy):
    plan = power_allocation(ref_geometry, ref_accuracy, 10.0)
    shares = plan.cluster_totals() / 10.0
    np.testing.assert_allclose(
        shares, [0.29138501, 0.34494843, 0.36366656], atol=1e-7
    )
    # equal split inside each cluster
    np.testing.assert_allclose(plan.p[:, 0], plan.p[:, 1])
    assert plan.p.sum() == pytest.approx(10.0, rel=1e-12)


def test_power_allocation_degenerate_rules(ref_geometry):
    # perfect CSI everywhere: all coefficients zero, equal split
    plan = power_allocation(ref_geometry, 1.0, 12.0)
    np.testing.assert_allclose(plan.p, 2.0)
    # single cluster: coefficient zero, full budget on the one cluster
    g = SystemGeometry(M=2, N=1, K=2, alpha=np.array([[1.0, 0.5]]))
    plan = power_allocation(g, 0.5, 8.0)
    np.testing.assert_allclose(plan.p, 4.0)
    with pytest.raises(ValueError):
        power_allocation(ref_geometry, 0.5, 0.0)


@settings(max_examples=30)
@given(
    p_tot=st.floats(0.5, 100.0),
    rho=st.lists(st.floats(0.0, 0.999), min_size=6, max_size=6),
)
def test_power_allocation_conserves_budget(p_tot, rho):
    geometry = SystemGeometry(
        M=6, N=3, K=2,
        alpha=np.array([[1.00, 0.10], [0.95, 0.20], [0.90, 0.15]]),
    )
    table = np.asarray(rho).reshape(3, 2)
    plan = power_allocation(geometry, table, p_tot)
    assert plan.p.sum() == pytest.approx(p_tot, rel=1e-9)
    assert np.all(plan.p > 0.0)


def test_equal_and_fixed_ratio_power(ref_geometry):
    plan = equal_power(ref_geometry, 12.0)
    np.testing.assert_allclose(plan.p, 2.0)
    g = SystemGeometry(M=2, N=1, K=2, alpha=np.array([[1.0, 0.5]]))
    plan = fixed_ratio_power(g, 10.0)
    np.testing.assert_allclose(plan.p, [[2.0, 8.0]])  # 1:4, big part later-decoded
    plan = fixed_ratio_power(ref_geometry, 9.0, ratio=(1.0, 2.0))
    np.testing.assert_allclose(plan.p, np.tile([1.0, 2.0], (3, 1)))
    with pytest.raises(ValueError):
        fixed_ratio_power(g, 10.0, ratio=(4.0, 1.0))
    g1 = SystemGeometry(M=2, N=1, K=1, alpha=np.array([[1.0]]))
    with pytest.raises(ValueError):
        fixed_ratio_power(g1, 10.0)


def test_brute_force_power_beats_equal(ref_geometry, ref_accuracy):
    plan, val = brute_force_power(ref_geometry, ref_accuracy, 10.0, steps=12)
    assert plan.p.sum() == pytest.approx(10.0, rel=1e-9)
    from noma_lab.analytic import closed_form_rates

    eq_val = closed_form_rates(ref_geometry, ref_accuracy, equal_power(ref_geometry, 10.0)).sum()
    assert val >= eq_val - 1e-12  # the grid contains the equal split


# ---------------------------------------------------------- feedback split

def test_feedback_plan_validation():
    plan = FeedbackPlan(bits=np.array([[3, 2]]), total=5)
    np.testing.assert_allclose(plan.accuracy(6).ravel(), csi_accuracy_fdd([3, 2], 6))
    with pytest.raises(ValueError):
        FeedbackPlan(bits=np.array([[3, -1]]), total=5)
    with pytest.raises(ValueError):
        FeedbackPlan(bits=np.array([[3, 3]]), total=5)


def test_feedback_weights_reference(ref_geometry):
    w = feedback_weights(ref_geometry, equal_power(ref_geometry, 6.0))
    np.testing.assert_allclose(
        w, [[4.0, 0.4], [3.8, 0.8], [3.6, 0.6]], atol=1e-12
    )
    with pytest.raises(ValueError):
        feedback_weights(ref_geometry, [1.0, 2.0])  # one total per cluster


def test_relaxed_split_hand_checks():
    bits, active = relaxed_feedback_allocation(np.array([4.0, 1.0]), 10, 6)
    np.testing.assert_allclose(bits, [10.0, 0.0], atol=1e-12)
    assert active.all()
    # the relaxed optimum equalizes the weighted terms on the active set
    terms = np.array([4.0, 1.0]) * np.exp2(-bits / 5.0)
    assert terms[0] == pytest.approx(terms[1], rel=1e-12)
    # a dominated user is dropped rather than driven negative
    bits, active = relaxed_feedback_allocation(np.array([8.0, 1.0]), 5, 6)
    np.testing.assert_allclose(bits, [5.0, 0.0], atol=1e-12)
    assert active.tolist() == [True, False]
    with pytest.raises(ValueError):
        relaxed_feedback_allocation(np.array([1.0, -1.0]), 5, 6)
    with pytest.raises(ValueError):
        relaxed_feedback_allocation(np.array([1.0, 1.0]), -1, 6)
    with pytest.raises(ValueError):
        relaxed_feedback_allocation(np.array([1.0, 1.0]), 5, 1)


def test_feedback_bound_is_support_optimum():
    w = np.array([4.0, 1.0])
    bits, active = relaxed_feedback_allocation(w, 10, 6)
    bound = feedback_bound(w, active, 10, 6)
    assert feedback_objective(w, bits, 6) == pytest.approx(bound, rel=1e-12)
    # any other split on the same support can only be worse
    for other in ([5.0, 5.0], [8.0, 2.0], [10.0, 0.0]):
        assert feedback_objective(w, other, 6) >= bound - 1e-12
    assert feedback_bound(w, [False, False], 10, 6) == pytest.approx(5.0)


def test_integer_split_budget_and_shape(ref_geometry):
    plan = feedback_allocation(ref_geometry, equal_power(ref_geometry, 6.0), 12)
    assert plan.bits.shape == (3, 2)
    assert plan.bits.sum() == 12
    assert plan.total == 12
    # fractional budgets spend the integer part only
    plan = feedback_allocation(ref_geometry, equal_power(ref_geometry, 6.0), 7.5)
    assert plan.bits.sum() == 7
    assert plan.total == pytest.approx(7.5)
    with pytest.raises(ValueError):
        feedback_allocation(ref_geometry, equal_power(ref_geometry, 6.0), -1)


def test_integer_split_matches_exhaustive_search():
    rng = np.random.default_rng(0)
    for _ in range(10):
        alpha = np.sort(rng.uniform(0.1, 1.0, (2, 2)), axis=1)[:, ::-1]
        geom = SystemGeometry(M=6, N=2, K=2, alpha=alpha)
        powers = rng.uniform(0.5, 5.0, 2)
        budget = int(rng.integers(0, 13))
        plan = feedback_allocation(geom, powers, budget)
        w = feedback_weights(geom, powers).ravel()
        mine = feedback_objective(w, plan.bits.ravel(), 6)
        _, best = brute_force_feedback(w, budget, 6)
        assert plan.bits.sum() <= budget
        assert mine <= best + 1e-12


def test_integer_split_deterministic_ties():
    g = SystemGeometry(M=6, N=2, K=2, alpha=np.ones((2, 2)))
    plan = feedback_allocation(g, [2.0, 2.0], 2)
    # equal weights: leftover bits go to the lowest flat indices
    np.testing.assert_array_equal(plan.bits.ravel(), [1, 1, 0, 0])


def test_single_cluster_equal_bit_split():
    g = SystemGeometry(M=4, N=1, K=2, alpha=np.array([[1.0, 0.5]]))
    plan = feedback_allocation(g, [4.0], 5)
    np.testing.assert_array_equal(plan.bits, [[3, 2]])


def test_inter_cluster_objective_consistency(ref_geometry):
    power = equal_power(ref_geometry, 6.0)
    plan = feedback_allocation(ref_geometry, power, 12)
    w = feedback_weights(ref_geometry, power)
    direct = feedback_objective(w, plan.bits, 6)
    assert inter_cluster_objective(plan, ref_geometry, power) == pytest.approx(direct)


def test_brute_force_feedback_guard():
    with pytest.raises(ValueError):
        brute_force_feedback(np.ones(5), 25, 6)


@settings(max_examples=25, deadline=None)
@given(
    budget=st.integers(0, 10),
    raw=st.lists(st.floats(0.1, 5.0), min_size=4, max_size=4),
)
def test_integer_split_never_beats_relaxed_bound(budget, raw):
    w = np.asarray(raw)
    bits_real, active = relaxed_feedback_allocation(w, budget, 6)
    bound = feedback_bound(w, active, budget, 6)
    g = SystemGeometry(M=6, N=2, K=2,
                       alpha=np.sort(w.reshape(2, 2), axis=1)[:, ::-1])
    plan = feedback_allocation(g, [1.0, 1.0], budget)
    w_geom = feedback_weights(g, [1.0, 1.0]).ravel()
    val = feedback_objective(w_geom, plan.bits.ravel(), 6)
    own_bound = feedback_bound(
        w_geom, relaxed_feedback_allocation(w_geom, budget, 6)[1], budget, 6
    )
    assert val >= own_bound - 1e-9
    assert feedback_objective(w, bits_real, 6) == pytest.approx(bound, rel=1e-9)


# ------------------------------------------------------------- mode choice

def test_enumerate_modes():
    modes = enumerate_modes(6, 6)
    assert [(m.N, m.K) for m in modes] == [(1, 6), (2, 3), (3, 2), (6, 1)]
    modes = enumerate_modes(4, 6)
    assert [(m.N, m.K) for m in modes] == [(1, 6), (2, 3)]
    assert TransmissionMode(N=2, K=3).total_users == 6
    with pytest.raises(ValueError):
        enumerate_modes(6, 0)


def test_deal_gains_round_robin():
    geom = deal_gains([0.5, 1.0, 0.8, 0.9, 0.6, 0.7], TransmissionMode(N=3, K=2), 6)
    np.testing.assert_allclose(
        geom.alpha, [[1.0, 0.7], [0.9, 0.6], [0.8, 0.5]]
    )
    assert (geom.M, geom.N, geom.K) == (6, 3, 2)
    with pytest.raises(ValueError):
        deal_gains([1.0, 0.5], TransmissionMode(N=3, K=2), 6)


def test_deal_companion_follows_gains():
    gains = np.array([0.5, 1.0, 0.8, 0.9, 0.6, 0.7])
    values = gains * 10.0
    mode = TransmissionMode(N=3, K=2)
    table = deal_companion(gains, values, mode)
    np.testing.assert_allclose(table, deal_gains(gains, mode, 6).alpha * 10.0)
    with pytest.raises(ValueError):
        deal_companion(gains, values[:4], mode)


def test_mode_extremes_and_middle():
    # perfect CSI: every cluster is isolated, more beams always win
    best = select_mode(TABLE_GAINS, 6, 1.0, 10.0)
    assert (best.mode.N, best.mode.K) == (6, 1)
    # useless CSI: beams cannot separate clusters, a single cluster wins
    best = select_mode(TABLE_GAINS, 6, 0.0, 10.0)
    assert (best.mode.N, best.mode.K) == (1, 6)
    # intermediate accuracy favours the balanced arrangement
    best = select_mode(TABLE_GAINS, 6, 0.85, 10.0)
    assert (best.mode.N, best.mode.K) == (3, 2)
    assert best.sum_rate == pytest.approx(2.9591, abs=2e-4)


def test_evaluate_modes_structure():
    evals = evaluate_modes(TABLE_GAINS, 6, 0.85, 10.0)
    assert len(evals) == 4
    for ev in evals:
        assert ev.rates.shape == (ev.mode.N, ev.mode.K)
        assert ev.sum_rate == pytest.approx(ev.rates.sum())
        assert ev.plan.p.sum() == pytest.approx(10.0, rel=1e-9)
    # accuracy may be a callable on the built geometry
    evals = evaluate_modes(
        TABLE_GAINS, 6, lambda geom: np.full((geom.N, geom.K), 0.7), 10.0
    )
    assert all(np.allclose(ev.rho, 0.7) for ev in evals)


def test_select_mode_tie_breaks_toward_fewer_users_per_cluster():
    flat = lambda geom, rho, plan: np.zeros((geom.N, geom.K))
    best = select_mode(TABLE_GAINS, 6, 0.85, 10.0, rate_fn=flat)
    assert best.mode.K == 1  # all modes tie at zero; least cancellation wins


def test_joint_optimize_requires_exactly_one_csi_input():
    with pytest.raises(ConfigError):
        joint_optimize(TABLE_GAINS, 6, 10.0)
    with pytest.raises(ConfigError):
        joint_optimize(TABLE_GAINS, 6, 10.0, b_tot=12.0, rho=0.8)


def test_joint_optimize_with_bit_budget():
    res = joint_optimize(TABLE_GAINS, 6, 10.0, b_tot=12.0)
    assert len(res.per_mode) == 4
    assert res.best.sum_rate == pytest.approx(
        max(ev.sum_rate for ev in res.per_mode)
    )
    for ev in res.per_mode:
        assert ev.feedback is not None
        assert ev.feedback.bits.sum() <= 12
        np.testing.assert_allclose(ev.rho, csi_accuracy_fdd(ev.feedback.bits, 6))
        assert ev.plan.p.sum() == pytest.approx(10.0, rel=1e-9)


def test_joint_optimize_with_fixed_accuracy():
    res = joint_optimize(TABLE_GAINS, 6, 10.0, rho=0.85)
    assert all(ev.feedback is None for ev in res.per_mode)
    assert res.best.sum_rate >= max(ev.sum_rate for ev in res.per_mode) - 1e-12
