r"""System geometry and imperfect-CSI channel generation.

A base station with M antennas serves N clusters of K single-antenna users.
User (n, k) has large-scale gain alpha[n, k]; within a cluster the gains are
indexed in descending order, which fixes the successive-decoding order.

Channel state information is never perfect.  Every acquisition mechanism is
summarised by a single accuracy rho in [0, 1] through the decomposition

    h = sqrt(rho) * h_hat + sqrt(1 - rho) * e,

where h_hat is the (unit-variance, normalised) estimate available at the
transmitter and e is an independent error term.  rho = 1 recovers perfect
CSI, rho = 0 means the estimate carries no information.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleGeometryError

# Trials are generated in fixed blocks so that results are bit-reproducible
# no matter how a caller batches or distributes the work: block b of stream s
# always produces the same numbers for a given master seed.
BLOCK = 4096

# Stream ids 0 .. N*K-1 belong to the per-user channel draws.
_PILOT_NOISE_STREAM = 10**6
_RVQ_STREAM = 10**6 + 1


@dataclass
class SystemGeometry:
    """Cluster layout and large-scale gains.

    Parameters
    ----------
    M : int
        Transmit antennas at the base station.
    N : int
        Number of user clusters (one beam each).
    K : int
        Users per cluster, superposed on the cluster beam.
    alpha : array_like, shape (N, K)
        Large-scale channel gains, strictly positive and non-increasing
        along each row (user 1 is the strongest and is decoded last).
    """

    M: int
    N: int
    K: int
    alpha: np.ndarray

    def __post_init__(self):
        self.M = int(self.M)
        self.N = int(self.N)
        self.K = int(self.K)
        if self.M < 1 or self.N < 1 or self.K < 1:
            raise ValueError("M, N and K must be positive integers.")
        self.alpha = np.array(self.alpha, dtype=float)
        if self.alpha.shape != (self.N, self.K):
            raise ValueError(
                f"alpha must have shape {(self.N, self.K)}, got {self.alpha.shape}."
            )
        if np.any(self.alpha <= 0.0):
            raise ValueError("large-scale gains must be strictly positive.")
        if np.any(np.diff(self.alpha, axis=1) > 0.0):
            raise ValueError("alpha rows must be non-increasing (decoding order).")
        # one spatial dimension must survive the zero-forcing constraints
        if self.M < (self.N - 1) * self.K + 1:
            raise InfeasibleGeometryError(
                f"M={self.M} antennas cannot null {(self.N - 1) * self.K} "
                f"out-of-cluster users; need M >= {(self.N - 1) * self.K + 1}."
            )

    @property
    def users(self) -> int:
        return self.N * self.K

    def user_index(self, n: int, k: int) -> int:
        """Flat index of user (n, k), row-major."""
        return n * self.K + k


@dataclass
class TddCsi:
    """Uplink pilot training: tau symbols, per-user pilot powers (N, K)."""

    tau: int
    pilot_power: np.ndarray


@dataclass
class FddCsi:
    """Quantised feedback: per-user feedback bits (N, K)."""

    bits: np.ndarray


@dataclass
class DirectCsi:
    """Accuracy given directly, per user (N, K)."""

    rho: np.ndarray


def csi_accuracy_tdd(tau, pilot_power, alpha):
    """Estimation accuracy of MMSE pilot training.

    rho = tau * P * alpha / (1 + tau * P * alpha), elementwise.  tau and
    alpha must be positive, pilot powers non-negative.
    """
    tau = np.asarray(tau, dtype=float)
    pilot_power = np.asarray(pilot_power, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("pilot length tau must be positive.")
    if np.any(alpha <= 0):
        raise ValueError("alpha must be positive.")
    if np.any(pilot_power < 0):
        raise ValueError("pilot power must be non-negative.")
    snr = tau * pilot_power * alpha
    out = snr / (1.0 + snr)
    return float(out) if out.ndim == 0 else out


def csi_accuracy_fdd(bits, M):
    """Accuracy equivalent of B-bit quantised feedback on M antennas.

    rho = 1 - 2**(-B / (M - 1)), elementwise.  Needs M >= 2; one antenna
    leaves no direction to quantise.
    """
    bits = np.asarray(bits, dtype=float)
    if int(M) < 2:
        raise ValueError("feedback accuracy needs M >= 2 antennas.")
    if np.any(bits < 0):
        raise ValueError("feedback bits must be non-negative.")
    out = 1.0 - np.exp2(-bits / (int(M) - 1))
    return float(out) if out.ndim == 0 else out


def resolve_accuracy(csi, geometry: SystemGeometry) -> np.ndarray:
    """Map any CSI descriptor to a per-user accuracy array (N, K)."""
    shape = (geometry.N, geometry.K)
    if isinstance(csi, DirectCsi):
        rho = np.broadcast_to(np.asarray(csi.rho, dtype=float), shape).copy()
    elif isinstance(csi, TddCsi):
        if int(csi.tau) <= geometry.users:
            raise ValueError(
                f"tau={csi.tau} leaves no room for {geometry.users} orthogonal pilots."
            )
        power = np.broadcast_to(np.asarray(csi.pilot_power, dtype=float), shape)
        rho = csi_accuracy_tdd(csi.tau, power, geometry.alpha)
    elif isinstance(csi, FddCsi):
        bits = np.broadcast_to(np.asarray(csi.bits, dtype=float), shape)
        rho = np.asarray(csi_accuracy_fdd(bits, geometry.M))
    else:
        rho = np.broadcast_to(np.asarray(csi, dtype=float), shape).copy()
    if np.any(rho < 0.0) or np.any(rho > 1.0):
        raise ValueError("CSI accuracy must lie in [0, 1].")
    return np.asarray(rho, dtype=float)


@dataclass
class ChannelDraw:
    """One realisation of all user channels: h, h_hat, e of shape (N, K, M)."""

    h: np.ndarray
    h_hat: np.ndarray
    e: np.ndarray


def _stream(seed: int, stream: int, block: int) -> np.random.Generator:
    """Counter-style substream: (master seed, stream id, block index)."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((int(seed), int(stream), int(block))))
    )


def _crandn(rng: np.random.Generator, *shape) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _check_rho(rho, geometry: SystemGeometry) -> np.ndarray:
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (geometry.N, geometry.K))
    if np.any(rho < 0.0) or np.any(rho > 1.0):
        raise ValueError("CSI accuracy must lie in [0, 1]; refusing to clamp.")
    return rho


def draw_channel_batch(geometry: SystemGeometry, rho, trials: int, seed: int):
    """Draw many independent channel realisations.

    Returns (h, h_hat, e), each of shape (trials, N, K, M).  Trial t of user
    u always comes from substream (seed, u, t // BLOCK) at a fixed offset,
    so adding trials or users never disturbs existing draws.
    """
    rho = _check_rho(rho, geometry)
    trials = int(trials)
    if trials < 1:
        raise ValueError("trials must be positive.")
    N, K, M = geometry.N, geometry.K, geometry.M
    h_hat = np.empty((trials, N, K, M), dtype=complex)
    err = np.empty((trials, N, K, M), dtype=complex)
    n_blocks = (trials + BLOCK - 1) // BLOCK
    for b in range(n_blocks):
        lo = b * BLOCK
        hi = min(lo + BLOCK, trials)
        for u in range(N * K):
            n, k = divmod(u, K)
            rng = _stream(seed, u, b)
            est = _crandn(rng, BLOCK, M)
            noise = _crandn(rng, BLOCK, M)
            h_hat[lo:hi, n, k] = est[: hi - lo]
            err[lo:hi, n, k] = noise[: hi - lo]
    w_est = np.sqrt(rho)[None, :, :, None]
    w_err = np.sqrt(1.0 - rho)[None, :, :, None]
    h = w_est * h_hat + w_err * err
    return h, h_hat, err


def draw_channels(geometry: SystemGeometry, rho, rng) -> ChannelDraw:
    """Draw a single joint channel realisation for every user.

    rng may be an integer master seed (reproducible substream scheme) or a
    numpy Generator (draws consumed sequentially, user by user).
    """
    rho = _check_rho(rho, geometry)
    N, K, M = geometry.N, geometry.K, geometry.M
    if isinstance(rng, (int, np.integer)):
        h, h_hat, e = draw_channel_batch(geometry, rho, 1, int(rng))
        return ChannelDraw(h=h[0], h_hat=h_hat[0], e=e[0])
    h_hat = np.empty((N, K, M), dtype=complex)
    e = np.empty((N, K, M), dtype=complex)
    for n in range(N):
        for k in range(K):
            h_hat[n, k] = _crandn(rng, M)
            e[n, k] = _crandn(rng, M)
    h = np.sqrt(rho)[:, :, None] * h_hat + np.sqrt(1.0 - rho)[:, :, None] * e
    return ChannelDraw(h=h, h_hat=h_hat, e=e)


def pilot_matrix(n_users: int, tau: int) -> np.ndarray:
    """Orthonormal pilot rows, one per user.

    Rows of the tau x tau identity: exactly orthonormal, and de-spreading
    reduces to picking a column of the received block.  Any unitary design
    would do; this one keeps the orthogonality error identically zero.
    """
    if tau <= n_users:
        raise ValueError(f"tau={tau} must exceed the user count {n_users}.")
    return np.eye(tau, dtype=complex)[:n_users]


@dataclass
class PilotEstimate:
    """Output of the pilot-training simulation."""

    h_hat: np.ndarray  # (N, K, M), last simulated slot
    empirical_rho: np.ndarray  # (N, K), squared correlation over all trials
    trials: int


def simulate_pilot_estimation(
    geometry: SystemGeometry, tau: int, pilot_power, *, trials: int = 1, seed: int = 0
) -> PilotEstimate:
    """Run the uplink training slot end to end and MMSE-estimate each channel.

    Every user transmits its orthogonal pilot at its own power; the base
    station de-spreads and scales the observation to a unit-variance
    estimate.  The empirical squared correlation between true channels and
    estimates (accumulated over all trials and antennas) is returned next
    to the estimates so the accuracy model can be validated against it.
    """
    tau = int(tau)
    if tau <= geometry.users:
        raise ValueError(f"tau={tau} must exceed the user count {geometry.users}.")
    power = np.broadcast_to(np.asarray(pilot_power, dtype=float), (geometry.N, geometry.K))
    if np.any(power < 0):
        raise ValueError("pilot power must be non-negative.")
    trials = int(trials)
    if trials < 1:
        raise ValueError("trials must be positive.")

    N, K, M = geometry.N, geometry.K, geometry.M
    # de-spread gain sqrt(tau * P * alpha) per user, estimate variance 1 + tau*P*alpha
    gain = np.sqrt(tau * power * geometry.alpha)
    scale = np.sqrt(1.0 + tau * power * geometry.alpha)

    cross = np.zeros((N, K), dtype=complex)
    pow_h = np.zeros((N, K))
    pow_est = np.zeros((N, K))
    last = None
    n_blocks = (trials + BLOCK - 1) // BLOCK
    for b in range(n_blocks):
        lo = b * BLOCK
        cnt = min(BLOCK, trials - lo)
        noise_rng = _stream(seed, _PILOT_NOISE_STREAM, b)
        # only the NK pilot-bearing columns of the received block matter
        noise = _crandn(noise_rng, BLOCK, M, N * K)[:cnt]
        est = np.empty((cnt, N, K, M), dtype=complex)
        h = np.empty((cnt, N, K, M), dtype=complex)
        for u in range(N * K):
            n, k = divmod(u, K)
            rng = _stream(seed, u, b)
            h[:, n, k] = _crandn(rng, BLOCK, M)[:cnt]
            despread = gain[n, k] * h[:, n, k] + noise[:, :, u]
            est[:, n, k] = despread / scale[n, k]
        cross += np.einsum("tnkm,tnkm->nk", h.conj(), est)
        pow_h += np.einsum("tnkm,tnkm->nk", h.conj(), h).real
        pow_est += np.einsum("tnkm,tnkm->nk", est.conj(), est).real
        last = est[-1]

    denom = pow_h * pow_est
    empirical = np.where(denom > 0, np.abs(cross) ** 2 / np.where(denom > 0, denom, 1.0), 0.0)
    return PilotEstimate(h_hat=last, empirical_rho=empirical, trials=trials)


def rvq_codebook(bits: int, M: int, rng: np.random.Generator) -> np.ndarray:
    """Random vector-quantisation codebook of 2**bits unit-norm rows."""
    bits = int(bits)
    if bits < 0:
        raise ValueError("bits must be non-negative.")
    if bits > 16:
        raise ValueError("codebook of 2**%d entries exceeds the 2**16 guard." % bits)
    size = 1 << bits
    book = _crandn(rng, size, M)
    return book / np.linalg.norm(book, axis=1, keepdims=True)


def rvq_quantize(h: np.ndarray, codebook: np.ndarray):
    """Pick the codeword best aligned with h.

    Returns (index, codeword) maximising |h^H c|^2; ties resolve to the
    lowest index.  Codebook rows must be unit norm.
    """
    h = np.asarray(h)
    codebook = np.asarray(codebook)
    if codebook.ndim != 2 or codebook.shape[0] < 1:
        raise ValueError("codebook must be a non-empty 2-D array of rows.")
    if h.shape != (codebook.shape[1],):
        raise ValueError("h and codebook dimensions do not match.")
    norms = np.linalg.norm(codebook, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise ValueError("codebook rows must have unit norm.")
    if np.linalg.norm(h) == 0:
        raise ValueError("cannot quantise a zero channel vector.")
    metric = np.abs(codebook @ h.conj()) ** 2
    idx = int(np.argmax(metric))  # argmax returns the first maximiser
    return idx, codebook[idx]


def rvq_model_gap(bits: int, M: int, trials: int, seed: int):
    """Compare actual RVQ quantisation error with the 2**(-B/(M-1)) model.

    Draws a fresh random codebook per trial, quantises a fresh channel
    direction, and averages 1 - |<h_dir, c>|^2.  Returns
    (empirical_error, model_error); the model is an upper-bound style
    approximation, so expect agreement only to within ~15 percent.
    """
    bits = int(bits)
    if bits < 1:
        raise ValueError("need at least one feedback bit.")
    if bits > 16:
        raise ValueError("codebook of 2**%d entries exceeds the 2**16 guard." % bits)
    size = 1 << bits
    total = 0.0
    done = 0
    block = max(1, min(4096, (1 << 22) // (size * M)))
    b = 0
    while done < trials:
        cnt = min(block, trials - done)
        rng = _stream(seed, _RVQ_STREAM, b)
        h = _crandn(rng, cnt, M)
        h /= np.linalg.norm(h, axis=1, keepdims=True)
        book = _crandn(rng, cnt, size, M)
        book /= np.linalg.norm(book, axis=2, keepdims=True)
        corr = np.abs(np.einsum("tm,tjm->tj", h.conj(), book)) ** 2
        total += float(np.sum(1.0 - corr.max(axis=1)))
        done += cnt
        b += 1
    model = float(2.0 ** (-bits / (M - 1)))
    return total / trials, model
