"""Power, feedback and mode selection built on the closed-form rates.

Three knobs are optimized separately and then chained:

* cluster powers — damped by how much each cluster's power hurts every
  other cluster through estimation error (inverse-coefficient rule);
* feedback bits — water-filling-like split that equalizes the weighted
  residual-interference terms, then rounded with a greedy integer repair;
* transmission mode — exhaustive scan over cluster/user factorizations of
  the population, scored by the closed-form sum rate.

The joint path runs one forward pass per feasible mode (powers from an
equal-feedback accuracy, bits from those powers) and keeps the best.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import closed_form_rates
from .channel import SystemGeometry, csi_accuracy_fdd
from .errors import ConfigError
from .linksim import PowerPlan


def interference_coefficient(geometry: SystemGeometry, rho, i: int) -> float:
    """Total damage cluster i's transmit power does to every other cluster.

    Each foreign user (n, k) receives a residual with scale
    alpha[n,k] * (1 - rho[n,k]) per unit of cluster-i power; this sums
    those sensitivities.  Zero when there is a single cluster.
    """
    rho = np.broadcast_to(np.asarray(rho, dtype=float),
                          (geometry.N, geometry.K))
    sens = geometry.alpha * (1.0 - rho)
    return float(sens.sum() - sens[i].sum())


def power_allocation(geometry: SystemGeometry, rho, p_tot: float) -> PowerPlan:
    """Cluster shares inversely proportional to the interference coefficient,
    split equally inside each cluster.

    Clusters with a zero coefficient are capped at the equal share
    p_tot / N (their inverse is unbounded); the rest of the budget is
    divided among the remaining clusters by their reciprocals.  All-zero
    coefficients degrade to the plain equal split.
    """
    p_tot = float(p_tot)
    if p_tot <= 0.0:
        raise ValueError("total power must be positive.")
    coef = np.array([interference_coefficient(geometry, rho, i)
                     for i in range(geometry.N)])
    shares = np.empty(geometry.N)
    zero = coef <= 0.0
    if zero.all():
        shares[:] = p_tot / geometry.N
    else:
        shares[zero] = p_tot / geometry.N
        inv = 1.0 / coef[~zero]
        shares[~zero] = (p_tot - shares[zero].sum()) * inv / inv.sum()
    p = np.repeat(shares[:, None] / geometry.K, geometry.K, axis=1)
    return PowerPlan(p=p, total_budget=p_tot)


def equal_power(geometry: SystemGeometry, p_tot: float) -> PowerPlan:
    p_tot = float(p_tot)
    p = np.full((geometry.N, geometry.K), p_tot / geometry.users)
    return PowerPlan(p=p, total_budget=p_tot)


def fixed_ratio_power(geometry: SystemGeometry, p_tot: float,
                      ratio: tuple[float, float] = (1.0, 4.0)) -> PowerPlan:
    """Static two-user split: equal cluster shares, fixed intra-cluster ratio
    with the larger part on the weaker (later-decoded) user."""
    if geometry.K != 2:
        raise ValueError("the fixed-ratio split is defined for two users per cluster.")
    lo, hi = float(ratio[0]), float(ratio[1])
    if lo <= 0.0 or hi <= 0.0 or hi < lo:
        raise ValueError("ratio must be positive with the larger part second.")
    share = float(p_tot) / geometry.N
    p = np.tile(np.array([lo, hi]) / (lo + hi) * share, (geometry.N, 1))
    return PowerPlan(p=p, total_budget=float(p_tot))


@dataclass
class FeedbackPlan:
    """Integer feedback-bit split across users, kept within its budget."""

    bits: np.ndarray  # (N, K) non-negative ints
    total: float  # budget the split was computed for (may be fractional)

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=int)
        if np.any(self.bits < 0):
            raise ValueError("bit counts cannot be negative.")
        if float(self.bits.sum()) > float(self.total) + 1e-9:
            raise ValueError("bit counts exceed the budget.")

    def accuracy(self, M: int) -> np.ndarray:
        return csi_accuracy_fdd(self.bits, M)


def _cluster_powers(power) -> np.ndarray:
    if isinstance(power, PowerPlan):
        return power.cluster_totals()
    return np.asarray(power, dtype=float).ravel()


def feedback_weights(geometry: SystemGeometry, power) -> np.ndarray:
    """Sensitivity of each user's residual interference to its own accuracy:
    alpha[n,k] times the total power transmitted by the other clusters.
    ``power`` is a PowerPlan or the per-cluster totals."""
    cluster = _cluster_powers(power)
    if cluster.size != geometry.N:
        raise ValueError("need one power total per cluster.")
    foreign = cluster.sum() - cluster  # (N,)
    return geometry.alpha * foreign[:, None]


def feedback_objective(weights, bits, M: int) -> float:
    """Total weighted residual interference for a bit split."""
    w = np.asarray(weights, dtype=float)
    b = np.asarray(bits, dtype=float)
    return float(np.sum(w * np.exp2(-b / (M - 1))))


def inter_cluster_objective(plan: FeedbackPlan, geometry: SystemGeometry,
                            power) -> float:
    """Residual inter-cluster interference left by a bit split: each user
    contributes alpha[n,k] * (foreign power) * 2^(-bits/(M-1))."""
    w = feedback_weights(geometry, power)
    return feedback_objective(w, plan.bits, geometry.M)


def feedback_bound(weights, active, b_tot: int, M: int) -> float:
    """Value of the relaxed optimum on a given support.

    Inactive users keep their full weight; the active ones share the
    budget so every weighted term is equal, which by the AM-GM equality
    condition is the smallest the sum can get on that support.
    """
    w = np.asarray(weights, dtype=float).ravel()
    act = np.asarray(active, dtype=bool).ravel()
    q = int(act.sum())
    if q == 0:
        return float(w.sum())
    gm = math.exp(np.log(w[act]).mean())
    return float(w[~act].sum()) + q * gm * 2.0 ** (-b_tot / ((M - 1) * q))


def relaxed_feedback_allocation(weights, b_tot: int, M: int):
    """Real-valued bit split minimizing the weighted residual sum.

    Active-set iteration on the stationarity condition
    b_i = B/|S| + (M-1) (log2 w_i - mean_S log2 w); users driven negative
    are dropped (all at once) and the split recomputed.  Returns the bit
    array and the active mask.
    """
    w = np.asarray(weights, dtype=float).ravel()
    if np.any(w < 0.0):
        raise ValueError("weights must be non-negative.")
    if b_tot < 0:
        raise ValueError("bit budget cannot be negative.")
    if M < 2:
        raise ValueError("the bit/accuracy law needs at least two antennas.")
    bits = np.zeros(w.size)
    active = w > 0.0
    while active.any():
        logw = np.log2(w[active])
        cand = b_tot / active.sum() + (M - 1) * (logw - logw.mean())
        if np.all(cand >= 0.0):
            bits[:] = 0.0
            bits[active] = cand
            return bits, active
        keep = cand >= 0.0
        idx = np.flatnonzero(active)
        active[idx[~keep]] = False
    return bits, active


def feedback_allocation(geometry: SystemGeometry, power,
                        b_tot) -> FeedbackPlan:
    """Integer feedback split: floor of the relaxed optimum, then leftover
    bits handed out greedily to whichever user's term drops the most.

    ``power`` is a PowerPlan or per-cluster totals; ``b_tot`` may be
    fractional (budgets derived from an accuracy target), in which case
    only its integer part is spendable.  Greedy ties go to the lowest
    flat user index, which makes the result deterministic.  A single
    cluster (all weights zero) degrades to the plain equal split.
    """
    b_tot = float(b_tot)
    if b_tot < 0:
        raise ValueError("bit budget cannot be negative.")
    spend = int(math.floor(b_tot + 1e-9))
    M = geometry.M
    w = feedback_weights(geometry, power).ravel()
    if np.all(w <= 0.0):
        base = np.full(w.size, spend // w.size, dtype=int)
        base[: spend % w.size] += 1
        return FeedbackPlan(bits=base.reshape(geometry.alpha.shape), total=b_tot)
    relaxed, _ = relaxed_feedback_allocation(w, spend, M)
    bits = np.floor(relaxed).astype(int)
    shrink = 1.0 - 2.0 ** (-1.0 / (M - 1))
    for _ in range(spend - int(bits.sum())):
        gain = w * np.exp2(-bits / (M - 1)) * shrink
        bits[int(np.argmax(gain))] += 1
    return FeedbackPlan(bits=bits.reshape(geometry.alpha.shape), total=b_tot)


def brute_force_feedback(weights, b_tot: int, M: int):
    """Exhaustive search over integer splits (small problems only)."""
    w = np.asarray(weights, dtype=float).ravel()
    if w.size > 4 and b_tot > 24:
        raise ValueError("exhaustive split search is intended for small instances.")
    best, best_val = None, np.inf
    for combo in itertools.product(range(b_tot + 1), repeat=w.size - 1):
        head = np.array(combo)
        used = int(head.sum())
        if used > b_tot:
            continue
        bits = np.append(head, b_tot - used)
        val = feedback_objective(w, bits, M)
        if val < best_val - 1e-15:
            best, best_val = bits, val
    return best, best_val


def brute_force_power(geometry: SystemGeometry, rho, p_tot: float,
                      steps: int = 20):
    """Grid search over cluster shares (equal split inside each cluster),
    scored by the closed-form sum rate.  Test oracle, not a fast path."""
    best_plan, best_val = None, -np.inf
    n = geometry.N
    for combo in itertools.product(range(1, steps), repeat=n - 1):
        head = np.array(combo)
        rest = steps - int(head.sum())
        if rest < 1:
            continue
        shares = np.append(head, rest) / steps * p_tot
        p = np.repeat(shares[:, None] / geometry.K, geometry.K, axis=1)
        plan = PowerPlan(p=p, total_budget=p_tot)
        val = float(closed_form_rates(geometry, rho, plan).sum())
        if val > best_val:
            best_plan, best_val = plan, val
    return best_plan, best_val


@dataclass(frozen=True)
class TransmissionMode:
    """A factorization of the user population into clusters."""

    N: int
    K: int

    @property
    def total_users(self) -> int:
        return self.N * self.K


def enumerate_modes(M: int, total_users: int) -> list[TransmissionMode]:
    """All (clusters, users-per-cluster) factorizations the antenna count
    can serve, in increasing cluster order."""
    if total_users < 1:
        raise ValueError("need at least one user.")
    modes = []
    for n in range(1, total_users + 1):
        if total_users % n:
            continue
        k = total_users // n
        if M >= (n - 1) * k + 1:
            modes.append(TransmissionMode(N=n, K=k))
    if not modes:
        raise ValueError("no feasible cluster arrangement for this antenna count.")
    return modes


def deal_gains(alpha_flat, mode: TransmissionMode, M: int) -> SystemGeometry:
    """Geometry for one mode by round-robin dealing of the sorted gains.

    Gains are sorted in decreasing order and dealt one per cluster in
    turn, so each cluster's k-th user holds the (k*N + n)-th strongest
    gain and intra-cluster order comes out non-increasing by construction.
    """
    a = np.sort(np.asarray(alpha_flat, dtype=float).ravel())[::-1]
    if a.size != mode.total_users:
        raise ValueError("gain count must match the mode's user population.")
    table = a.reshape(mode.K, mode.N).T.copy()
    return SystemGeometry(M=M, N=mode.N, K=mode.K, alpha=table)


def deal_companion(alpha_flat, values, mode: TransmissionMode) -> np.ndarray:
    """Re-cluster a per-user companion table (accuracies, budgets) with the
    same sorted round-robin dealing that deal_gains applies to the gains,
    so each user keeps its own companion value in the new arrangement."""
    a = np.asarray(alpha_flat, dtype=float).ravel()
    v = np.asarray(values, dtype=float).ravel()
    if a.size != v.size or a.size != mode.total_users:
        raise ValueError("companion values must cover the same user population.")
    order = np.argsort(-a, kind="stable")
    return v[order].reshape(mode.K, mode.N).T.copy()


@dataclass
class ModeEvaluation:
    mode: TransmissionMode
    geometry: SystemGeometry
    plan: PowerPlan
    rho: np.ndarray
    rates: np.ndarray
    sum_rate: float
    feedback: FeedbackPlan | None = None


def _resolve_mode_rho(rho, geometry: SystemGeometry) -> np.ndarray:
    if callable(rho):
        rho = rho(geometry)
    return np.broadcast_to(np.asarray(rho, dtype=float),
                           (geometry.N, geometry.K)).copy()


def _mode_builder(alpha_flat, M: int, builder):
    """Default geometry builder: round-robin dealing of the given gains."""
    if builder is not None:
        return builder
    a = np.asarray(alpha_flat, dtype=float).ravel()
    return lambda mode: deal_gains(a, mode, M)


def evaluate_modes(alpha_flat, M: int, rho, p_tot: float, rate_fn=None,
                   builder=None) -> list[ModeEvaluation]:
    """Score every feasible mode under equal power and a common accuracy.

    ``rho`` may be a scalar, a flat per-user value, or a callable taking
    the built geometry (for accuracies that depend on the arrangement).
    ``rate_fn(geometry, rho, plan)`` defaults to the closed-form rates;
    ``builder(mode)`` defaults to round-robin dealing of ``alpha_flat``.
    """
    if rate_fn is None:
        rate_fn = closed_form_rates
    a = np.asarray(alpha_flat, dtype=float).ravel()
    build = _mode_builder(a, M, builder)
    out = []
    for mode in enumerate_modes(M, a.size):
        geom = build(mode)
        r = _resolve_mode_rho(rho, geom)
        plan = equal_power(geom, p_tot)
        rates = np.asarray(rate_fn(geom, r, plan), dtype=float)
        out.append(ModeEvaluation(mode=mode, geometry=geom, plan=plan, rho=r,
                                  rates=rates, sum_rate=float(rates.sum())))
    return out


def select_mode(alpha_flat, M: int, rho, p_tot: float, rate_fn=None,
                builder=None) -> ModeEvaluation:
    """Best mode by sum rate; exact ties resolved toward fewer users per
    cluster (less cancellation work at the receivers)."""
    evals = evaluate_modes(alpha_flat, M, rho, p_tot, rate_fn=rate_fn,
                           builder=builder)
    return max(evals, key=lambda ev: (ev.sum_rate, -ev.mode.K))


@dataclass
class JointResult:
    best: ModeEvaluation
    per_mode: list[ModeEvaluation] = field(default_factory=list)


def joint_optimize(alpha_flat, M: int, p_tot: float, *, b_tot=None,
                   rho=None, builder=None) -> JointResult:
    """One forward pass per feasible mode, best sum rate wins.

    With a bit budget: powers come from the equal-split accuracy, the bit
    split from those powers, and the mode is scored at the accuracy of
    the integer bit split.  With a fixed accuracy the feedback stage is
    skipped and powers adapt to that accuracy directly.
    """
    if (b_tot is None) == (rho is None):
        raise ConfigError("provide exactly one of a bit budget or an accuracy.")
    a = np.asarray(alpha_flat, dtype=float).ravel()
    build = _mode_builder(a, M, builder)
    evals = []
    for mode in enumerate_modes(M, a.size):
        geom = build(mode)
        if b_tot is not None:
            r_eq = csi_accuracy_fdd(float(b_tot) / a.size, M)
            plan = power_allocation(geom, r_eq, p_tot)
            fb = feedback_allocation(geom, plan, b_tot)
            r = fb.accuracy(M)
        else:
            r = _resolve_mode_rho(rho, geom)
            plan = power_allocation(geom, r, p_tot)
            fb = None
        rates = closed_form_rates(geom, r, plan)
        evals.append(ModeEvaluation(mode=mode, geometry=geom, plan=plan, rho=r,
                                    rates=rates, sum_rate=float(rates.sum()),
                                    feedback=fb))
    best = max(evals, key=lambda ev: (ev.sum_rate, -ev.mode.K))
    return JointResult(best=best, per_mode=evals)
