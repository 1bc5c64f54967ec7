r"""Monte Carlo link-level simulation of the beamformed NOMA downlink.

Per draw: estimated channels feed the zero-forcing beams, each cluster
superposes its users' signals at the allocated powers, and every user
decodes with successive interference cancellation in gain order.  The
decoding SINR of user (n, k) sees three terms: its own signal, the
intra-cluster signals not yet cancelled (users j < k), and the residual
inter-cluster leakage through the actual channels.  Noise variance is 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channel as chan
from .beamforming import zf_beam_batch, zf_beams
from .channel import SystemGeometry

_POWER_TOL = 1e-9


@dataclass
class PowerPlan:
    """Per-user transmit powers (N, K) under a total budget."""

    p: np.ndarray
    total_budget: float

    def __post_init__(self):
        self.p = np.array(self.p, dtype=float)
        self.total_budget = float(self.total_budget)
        if self.p.ndim != 2:
            raise ValueError("powers must form an (N, K) array.")
        if np.any(self.p <= 0.0):
            raise ValueError("every user must receive strictly positive power.")
        if self.p.sum() > self.total_budget * (1.0 + _POWER_TOL):
            raise ValueError(
                f"allocated power {self.p.sum():.6g} exceeds budget {self.total_budget:.6g}."
            )

    def cluster_totals(self) -> np.ndarray:
        return self.p.sum(axis=1)


@dataclass
class RateReport:
    """Average per-user rates in bit/s/Hz plus bookkeeping."""

    rate: np.ndarray  # (N, K)
    sum_rate: float
    source: str  # "monte-carlo" | "closed-form" | "asymptotic"
    trials: int
    stderr: np.ndarray | None = None
    order_violation_frac: float | None = None


def sinr(n, k, draw, beams, plan: PowerPlan, geometry: SystemGeometry,
         rho=None, *, model_residual: bool = False) -> float:
    """Decoding SINR of user (n, k) for one channel draw.

    The inter-cluster term uses the actual leakage h^H w_i, which keeps the
    simulator an independent check on the closed-form statistics; with
    model_residual=True it uses sqrt(1 - rho) * e^H w_i instead, i.e. the
    idealised error-only leakage (requires rho).
    """
    a = geometry.alpha[n, k]
    p = plan.p
    w = beams.w if hasattr(beams, "w") else np.asarray(beams)
    if model_residual:
        if rho is None:
            raise ValueError("model_residual SINR needs the accuracy rho.")
        r = np.broadcast_to(np.asarray(rho, dtype=float), (geometry.N, geometry.K))[n, k]
        leak = np.sqrt(1.0 - r) * (w @ draw.e[n, k].conj())
    else:
        leak = w @ draw.h[n, k].conj()
    gains = np.abs(leak) ** 2  # |h^H w_i|^2 for every cluster beam i
    own = np.abs(draw.h[n, k].conj() @ w[n]) ** 2
    signal = a * own * p[n, k]
    intra = a * own * p[n, :k].sum()
    inter = a * float(np.sum(np.delete(gains * p.sum(axis=1), n)))
    return float(signal / (intra + inter + 1.0))


def _accumulate(partials):
    """Sum per-block partial results in block order (deterministic)."""
    return np.sum(np.stack(partials, axis=0), axis=0)


def monte_carlo_rates(geometry: SystemGeometry, csi, plan: PowerPlan,
                      trials: int, seed: int) -> RateReport:
    """Estimate per-user average rates by simulating the full chain.

    csi may be any CSI descriptor accepted by channel.resolve_accuracy
    or a bare accuracy array.  Draws are generated in fixed blocks from
    per-user substreams of the master seed, so the result is reproducible
    bit for bit regardless of how the blocks would be scheduled.
    """
    rho = chan.resolve_accuracy(csi, geometry)
    trials = int(trials)
    if trials < 1:
        raise ValueError("trials must be positive.")
    N, K = geometry.N, geometry.K
    alpha = geometry.alpha
    p = plan.p
    if p.shape != (N, K):
        raise ValueError("power plan does not match the geometry.")
    cluster_power = p.sum(axis=1)
    prior = np.cumsum(p, axis=1) - p  # power of users decoded after (n, k)

    sums, squares, viol = [], [], []
    done = 0
    block_idx = 0
    while done < trials:
        cnt = min(chan.BLOCK, trials - done)
        h, h_hat, _ = _draw_block(geometry, rho, seed, block_idx, cnt)
        w = zf_beam_batch(h_hat)
        G = np.abs(np.einsum("tnkm,tim->tnki", h.conj(), w)) ** 2
        own = np.einsum("tnkn->tnk", G)
        eff = alpha[None] * own
        total_leak = np.einsum("tnki,i->tnk", G, cluster_power)
        inter = alpha[None] * (total_leak - own * cluster_power[None, :, None])
        gamma = eff * p[None] / (eff * prior[None] + inter + 1.0)
        rates = np.log2(1.0 + gamma)
        sums.append(rates.sum(axis=0))
        squares.append((rates**2).sum(axis=0))
        if K > 1:
            bad = np.any(eff[:, :, 1:] > eff[:, :, :-1], axis=(1, 2))
            viol.append(int(np.count_nonzero(bad)))
        else:
            viol.append(0)
        done += cnt
        block_idx += 1

    total = _accumulate(sums)
    total_sq = _accumulate(squares)
    mean = total / trials
    var = np.maximum(total_sq / trials - mean**2, 0.0)
    stderr = np.sqrt(var / max(trials - 1, 1))
    return RateReport(
        rate=mean,
        sum_rate=float(mean.sum()),
        source="monte-carlo",
        trials=trials,
        stderr=stderr,
        order_violation_frac=float(sum(viol)) / trials,
    )


def _draw_block(geometry, rho, seed, block_idx, cnt):
    """Draws for one fixed block of trials, via the per-user substreams."""
    N, K, M = geometry.N, geometry.K, geometry.M
    h_hat = np.empty((cnt, N, K, M), dtype=complex)
    err = np.empty((cnt, N, K, M), dtype=complex)
    for u in range(N * K):
        n, k = divmod(u, K)
        rng = chan._stream(seed, u, block_idx)
        h_hat[:, n, k] = chan._crandn(rng, chan.BLOCK, M)[:cnt]
        err[:, n, k] = chan._crandn(rng, chan.BLOCK, M)[:cnt]
    w_est = np.sqrt(rho)[None, :, :, None]
    w_err = np.sqrt(1.0 - rho)[None, :, :, None]
    return w_est * h_hat + w_err * err, h_hat, err


def tdma_mrt_baseline(geometry: SystemGeometry, csi, total_power: float,
                      trials: int, seed: int) -> RateReport:
    """Orthogonal baseline: one user at a time, matched-filter beam.

    Each user holds the channel for a 1/(N*K) time fraction and gets the
    full power budget during its slot; the beam is h_hat / ||h_hat||, the
    best single-user choice given the available estimate.
    """
    rho = chan.resolve_accuracy(csi, geometry)
    total_power = float(total_power)
    if total_power <= 0:
        raise ValueError("total power must be positive.")
    trials = int(trials)
    if trials < 1:
        raise ValueError("trials must be positive.")
    N, K = geometry.N, geometry.K
    share = 1.0 / (N * K)

    sums, squares = [], []
    done = 0
    block_idx = 0
    while done < trials:
        cnt = min(chan.BLOCK, trials - done)
        h, h_hat, _ = _draw_block(geometry, rho, seed, block_idx, cnt)
        w = h_hat / np.linalg.norm(h_hat, axis=3, keepdims=True)
        gain = np.abs(np.einsum("tnkm,tnkm->tnk", h.conj(), w)) ** 2
        rates = share * np.log2(1.0 + total_power * geometry.alpha[None] * gain)
        sums.append(rates.sum(axis=0))
        squares.append((rates**2).sum(axis=0))
        done += cnt
        block_idx += 1

    total = _accumulate(sums)
    total_sq = _accumulate(squares)
    mean = total / trials
    var = np.maximum(total_sq / trials - mean**2, 0.0)
    return RateReport(
        rate=mean,
        sum_rate=float(mean.sum()),
        source="monte-carlo",
        trials=trials,
        stderr=np.sqrt(var / max(trials - 1, 1)),
    )
