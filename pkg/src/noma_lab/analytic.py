r"""Closed-form average rates and their asymptotic limits.

Conditioned on the beams, every gain that enters a decoding SINR is an
independent unit exponential scaled by a known constant.  Numerator and
denominator of each rate term are therefore weighted sums of independent
exponentials, whose density is a signed mixture of the component
exponentials.  The average of log2(1 + x) against one exponential has a
closed form through the exponential integral Ei, which gives every average
rate as a finite difference of mixture sums:

    E[log2(1 + W)] = -(1/ln 2) * sum_i Xi_i * exp(1/eta_i) * Ei(-1/eta_i)

with W = sum_i eta_i X_i, X_i iid Exp(1), and partial-fraction weights
Xi_i = prod_{j != i} eta_i / (eta_i - eta_j).

The weights blow up as scales coalesce even though the value itself stays
finite, so repeated scales are handled by a deterministic minimal-gap
perturbation plus, past a conditioning threshold, an extended-precision
evaluation of the same formula.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import SystemGeometry
from .linksim import PowerPlan, RateReport

LN2 = math.log(2.0)
EULER_GAMMA = 0.5772156649015328606

# scales below this are exact zeros of the physical model, not components
SCALE_FLOOR = 1e-12
# inputs with a relative gap under this get the tie warning
TIE_WARN_REL = 1e-6
# relative spacing enforced between coalescing scales before weights
TIE_GAP = 1e-7
# a pair of scales separated by the minimal gap yields weights near 1e7 and
# still sums accurately in doubles (absolute error ~1e-8); weights beyond
# this come from >= 3 coalescing scales, where doubles lose everything, so
# the sum switches to the extended-precision evaluator
CONDITION_LIMIT = 1e7
_SERIES_CUTOFF = 1.0


class MixtureConditioningWarning(RuntimeWarning):
    """Signals nearly coincident mixture scales (ill-conditioned weights)."""


def _ei_series(x: float) -> float:
    # Ei(x) = gamma + ln|x| + sum_k x^k / (k * k!), fast for |x| < 1
    total = EULER_GAMMA + math.log(-x)
    term = 1.0
    acc = 0.0
    for k in range(1, 200):
        term *= x / k
        contrib = term / k
        acc += contrib
        if abs(contrib) <= 1e-18 * (abs(total + acc) + 1e-30):
            break
    return total + acc


def _e1_cf_factor(t: float) -> float:
    # E1(t) = exp(-t) * F(t); F by modified Lentz continued fraction, t >= 1
    tiny = 1e-300
    b = t + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        a = -float(i * i)
        b += 2.0
        d = a * d + b
        if d == 0.0:
            d = tiny
        c = b + a / c
        if c == 0.0:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise ArithmeticError(f"continued fraction failed to converge at t={t}.")


def expint_ei(x):
    """Exponential integral Ei(x) for negative arguments.

    Series below |x| = 1, continued fraction above; relative accuracy is
    well inside 1e-10 over [-50, -1e-4].  Raises for x >= 0 (the principal
    value branch is not needed anywhere in this model).
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr >= 0.0):
        raise ValueError("expint_ei is only defined here for x < 0.")
    if arr.ndim == 0:
        return _ei_scalar(float(arr))
    return np.array([_ei_scalar(float(v)) for v in arr.ravel()]).reshape(arr.shape)


def _ei_scalar(x: float) -> float:
    t = -x
    if t < _SERIES_CUTOFF:
        return _ei_series(x)
    return -math.exp(-t) * _e1_cf_factor(t)


def exp_ei_product(y: float) -> float:
    """exp(y) * Ei(-y) for y > 0, safe against exp overflow.

    For y >= 1 the exponential factor cancels inside the continued
    fraction, so arbitrarily small mixture scales stay representable.
    """
    y = float(y)
    if y <= 0.0:
        raise ValueError("exp_ei_product needs y > 0.")
    if y < _SERIES_CUTOFF:
        return math.exp(y) * _ei_series(-y)
    return -_e1_cf_factor(y)


def _relative_gaps(scales: np.ndarray) -> float:
    s = np.sort(scales)
    gaps = (s[1:] - s[:-1]) / s[1:]
    return float(gaps.min()) if gaps.size else np.inf


def _resolve_ties(scales: np.ndarray) -> np.ndarray:
    """Enforce a minimal relative spacing, preserving input order."""
    order = np.argsort(scales, kind="stable")
    t = scales[order].astype(float).copy()
    for i in range(1, t.size):
        floor_val = t[i - 1] * (1.0 + TIE_GAP)
        if t[i] <= floor_val:
            t[i] = floor_val
    out = np.empty_like(t)
    out[order] = t
    return out


def mixture_weights(scales) -> np.ndarray:
    """Signed mixture weights of a sum of independent scaled exponentials.

    For distinct positive scales eta, weight i is
    prod_{j != i} eta_i / (eta_i - eta_j); the weights sum to 1 and the
    density of the sum is sum_i (w_i / eta_i) exp(-x / eta_i).  Nearly
    coincident scales are spread apart by a relative 1e-7 bump first and
    flagged with MixtureConditioningWarning.
    """
    s = np.asarray(scales, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("need at least one scale.")
    if np.any(s <= 0.0):
        raise ValueError("mixture scales must be strictly positive.")
    if s.size == 1:
        return np.ones(1)
    if _relative_gaps(s) < TIE_WARN_REL:
        warnings.warn(
            "mixture scales are nearly coincident; weights are ill-conditioned "
            "and were computed from minimally separated scales.",
            MixtureConditioningWarning,
            stacklevel=2,
        )
    r = _resolve_ties(s)
    diff = r[:, None] - r[None, :]
    np.fill_diagonal(diff, 1.0)
    ratios = r[:, None] / diff
    np.fill_diagonal(ratios, 1.0)
    return np.prod(ratios, axis=1)


@dataclass
class ErlangMixture:
    """Signed exponential mixture representing a sum of scaled exponentials."""

    scales: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_scales(cls, scales) -> "ErlangMixture":
        s = np.asarray(scales, dtype=float).ravel()
        w = mixture_weights(s)
        return cls(scales=_resolve_ties(s), weights=w)

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        terms = self.weights / self.scales * np.exp(-x[..., None] / self.scales)
        return terms.sum(axis=-1)

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        terms = self.weights * (1.0 - np.exp(-x[..., None] / self.scales))
        return terms.sum(axis=-1)

    def mean(self) -> float:
        return float(self.scales.sum())


def _mp_weighted_sum(scales, fn_name: str) -> float:
    """Evaluate sum_i Xi_i * f(eta_i) in extended precision.

    fn_name selects the integrand: "log_rate" for the Ei-based average of
    log2(1 + W), "ln" for the expected-log weight sum.  The scales are
    separated by a relative 1e-10 bump; precision grows with the list size
    so the enforced gap never dominates the result.
    """
    import mpmath as mp

    q = len(scales)
    with mp.workdps(40 + 12 * q):
        s = sorted(mp.mpf(float(v)) for v in scales)
        gap = mp.mpf("1e-10")
        for i in range(1, q):
            floor_val = s[i - 1] * (1 + gap)
            if s[i] <= floor_val:
                s[i] = floor_val
        total = mp.mpf(0)
        ln2 = mp.log(2)
        for i in range(q):
            w = mp.mpf(1)
            for j in range(q):
                if j != i:
                    w *= s[i] / (s[i] - s[j])
            if fn_name == "log_rate":
                y = 1 / s[i]
                val = -mp.exp(y) * mp.ei(-y) / ln2
            elif fn_name == "ln":
                val = mp.log(s[i])
            else:
                val = mp.mpf(1)
            total += w * val
        return float(total)


def _clean_scales(scales) -> np.ndarray:
    s = np.asarray(scales, dtype=float).ravel()
    if np.any(s < 0.0):
        raise ValueError("mixture scales must be non-negative.")
    return s[s > SCALE_FLOOR]


def avg_log_term(scales) -> float:
    """E[log2(1 + W)] for W a sum of independent Exp(1) variables scaled
    by the given list.  Zero scales (below 1e-12) contribute nothing; an
    empty list means W = 0 and the value is 0.
    """
    s = _clean_scales(scales)
    if s.size == 0:
        return 0.0
    # weights and per-scale terms must come from one and the same resolved
    # list, or the huge near-tie weights multiply unmatched values
    r = _resolve_ties(s)
    w = mixture_weights(r)
    if np.max(np.abs(w)) > CONDITION_LIMIT:
        val = _mp_weighted_sum(s, "log_rate")  # raw scales: finer mp bump
    else:
        terms = np.array([exp_ei_product(1.0 / v) for v in r])
        val = -float(np.dot(w, terms)) / LN2
    if val < 0.0:
        if val < -1e-6:
            raise ArithmeticError(f"mixture average collapsed to {val}; scales {s}.")
        val = 0.0
    return val


def mixture_expected_ln(scales) -> float:
    """sum_i Xi_i * ln(eta_i) over the non-zero scales (= E[ln W] + gamma)."""
    s = _clean_scales(scales)
    if s.size == 0:
        raise ValueError("expected-log weight sum needs at least one scale.")
    r = _resolve_ties(s)
    w = mixture_weights(r)
    if np.max(np.abs(w)) > CONDITION_LIMIT:
        return _mp_weighted_sum(s, "ln")
    return float(np.dot(w, np.log(r)))


@dataclass
class RateParams:
    """Everything the closed-form rate of one user depends on."""

    geometry: SystemGeometry
    rho: np.ndarray  # (N, K) CSI accuracy
    theta: np.ndarray  # (N, K) power fractions, positive, summing to 1
    p_tot: float

    def __post_init__(self):
        shape = (self.geometry.N, self.geometry.K)
        self.rho = np.broadcast_to(np.asarray(self.rho, dtype=float), shape).copy()
        self.theta = np.array(self.theta, dtype=float)
        self.p_tot = float(self.p_tot)
        if self.theta.shape != shape:
            raise ValueError(f"theta must have shape {shape}.")
        if np.any(self.theta <= 0.0):
            raise ValueError("power fractions must be strictly positive.")
        if abs(self.theta.sum() - 1.0) > 1e-9:
            raise ValueError("power fractions must sum to 1.")
        if np.any(self.rho < 0.0) or np.any(self.rho > 1.0):
            raise ValueError("CSI accuracy must lie in [0, 1].")
        if self.p_tot <= 0.0:
            raise ValueError("total power must be positive.")

    @classmethod
    def from_plan(cls, geometry: SystemGeometry, rho, plan: PowerPlan) -> "RateParams":
        spent = float(plan.p.sum())
        return cls(geometry=geometry, rho=rho, theta=plan.p / spent, p_tot=spent)

    def powers(self) -> np.ndarray:
        return self.theta * self.p_tot


def eta_params(n: int, k: int, params: RateParams) -> np.ndarray:
    """Scales of the pre-cancellation sum W for user (n, k), one entry per
    cluster: own-cluster entry uses the powers of users up to and
    including k, every other cluster leaks its full power through the
    estimation error."""
    p = params.powers()
    a = params.geometry.alpha[n, k]
    r = params.rho[n, k]
    cluster = p.sum(axis=1)
    out = a * (1.0 - r) * cluster
    out[n] = a * p[n, : k + 1].sum()
    return out


def beta_params(n: int, k: int, params: RateParams) -> np.ndarray:
    """Scales of the residual-interference sum V for user (n, k).

    Same branches as eta_params with the own-cluster entry summing the
    powers of users decoded after (n, k) only.  For the first user the own
    entry vanishes and the list has N - 1 entries (clusters != n, in
    ascending order).
    """
    p = params.powers()
    a = params.geometry.alpha[n, k]
    r = params.rho[n, k]
    cluster = p.sum(axis=1)
    if k == 0:
        return a * (1.0 - r) * np.delete(cluster, n)
    out = a * (1.0 - r) * cluster
    out[n] = a * p[n, :k].sum()
    return out


def avg_rate(n: int, k: int, params: RateParams) -> float:
    """Exact average decoding rate of user (n, k) in bit/s/Hz."""
    value = avg_log_term(eta_params(n, k, params)) - avg_log_term(beta_params(n, k, params))
    return max(value, 0.0)


def closed_form_rates(geometry: SystemGeometry, rho, plan: PowerPlan) -> np.ndarray:
    """Average rate of every user under the given accuracy and powers."""
    params = RateParams.from_plan(geometry, rho, plan)
    out = np.empty((geometry.N, geometry.K))
    for n in range(geometry.N):
        for k in range(geometry.K):
            out[n, k] = avg_rate(n, k, params)
    return out


def closed_form_report(geometry: SystemGeometry, rho, plan: PowerPlan) -> RateReport:
    rates = closed_form_rates(geometry, rho, plan)
    return RateReport(
        rate=rates, sum_rate=float(rates.sum()), source="closed-form", trials=0
    )


def asymptotic_rate_interference_limited(n: int, k: int, params: RateParams) -> float:
    """Interference-limited rate ceiling as total power grows.

    Depends only on the power fractions, gains and accuracies; any
    component whose scale is exactly zero drops out.  Raises if the user
    sees no residual interference at all (the rate then grows without
    bound and has no ceiling).
    """
    unit = RateParams(
        geometry=params.geometry, rho=params.rho, theta=params.theta, p_tot=1.0
    )
    omega = _clean_scales(eta_params(n, k, unit))
    psi = _clean_scales(beta_params(n, k, unit))
    if psi.size == 0:
        raise ValueError(
            "user sees no residual interference; the rate has no finite ceiling."
        )
    return (mixture_expected_ln(omega) - mixture_expected_ln(psi)) / LN2


def ideal_rate_first(n: int, params: RateParams) -> float:
    """Perfect-CSI average rate of a cluster's first user at high power."""
    a = params.geometry.alpha[n, 0]
    return math.log2(a * params.p_tot * params.theta[n, 0]) - EULER_GAMMA / LN2


def rate_loss_first(n: int, params: RateParams) -> float:
    """High-power rate loss of a cluster's first user due to imperfect CSI."""
    if params.geometry.N < 2:
        raise ValueError("a single cluster leaks no inter-cluster interference.")
    r = params.rho[n, 0]
    if r >= 1.0:
        raise ValueError("perfect CSI has no residual interference to lose rate to.")
    a = params.geometry.alpha[n, 0]
    mu = np.delete(params.theta.sum(axis=1), n)
    expected = mixture_expected_ln(mu)
    return math.log2(a * (1.0 - r) * params.p_tot) - (EULER_GAMMA - expected) / LN2


def approx_rate_first(n: int, params: RateParams) -> float:
    """High-accuracy approximation of the first user's ceiling.

    Equals ideal_rate_first minus rate_loss_first identically; kept as a
    separate form because it isolates how the ceiling moves with the
    accuracy (and with feedback bits through it).
    """
    if params.geometry.N < 2:
        raise ValueError("a single cluster leaks no inter-cluster interference.")
    r = params.rho[n, 0]
    if r >= 1.0:
        raise ValueError("the high-accuracy expansion needs rho < 1.")
    mu = np.delete(params.theta.sum(axis=1), n)
    return (
        -math.log2(1.0 - r)
        + math.log2(params.theta[n, 0])
        - mixture_expected_ln(mu) / LN2
    )


def noise_limited_rate(power: float, alpha: float) -> float:
    """Average rate when interference is negligible next to noise.

    Single-exponential special case: R = -(1/ln 2) e^(1/(p a)) Ei(-1/(p a)).
    """
    power = float(power)
    alpha = float(alpha)
    if power <= 0.0 or alpha <= 0.0:
        raise ValueError("power and alpha must be positive.")
    return -exp_ei_product(1.0 / (power * alpha)) / LN2


@dataclass
class CsiScaling:
    pilot_power: float
    feedback_bits: float


def csi_scaling_for_constant_gap(epsilon: float, p_tot: float, alpha: float,
                                 tau: float, M: int) -> CsiScaling:
    """CSI resources keeping the rate gap to perfect CSI bounded as power grows.

    Choosing pilot power (P/eps - 1)/(alpha tau), or (M-1) log2(P/eps)
    feedback bits, pins the residual-interference scale (1 - rho) * P at
    eps for every total power P.
    """
    epsilon = float(epsilon)
    p_tot = float(p_tot)
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive.")
    if p_tot <= epsilon:
        raise ValueError("total power must exceed the target residual epsilon.")
    if float(alpha) <= 0.0 or float(tau) <= 0.0:
        raise ValueError("alpha and tau must be positive.")
    if int(M) < 2:
        raise ValueError("feedback scaling needs M >= 2.")
    pilot = (p_tot / epsilon - 1.0) / (float(alpha) * float(tau))
    bits = (int(M) - 1) * math.log2(p_tot / epsilon)
    return CsiScaling(pilot_power=pilot, feedback_bits=bits)
