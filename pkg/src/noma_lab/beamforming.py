r"""Zero-forcing beams from estimated channels.

Each cluster's beam is chosen in the null space of every other cluster's
estimated channels, so that (up to estimation error) a cluster only hears
its own superposed signals.  The beam direction inside the null space is a
fixed positive combination of the basis vectors.  Per-user statistics are
invariant to that choice, but the clusters' null-space problems share
input rows, so bases computed by the same factorization routine come out
systematically aligned ACROSS clusters, which would make identically
combined beams more parallel than generic null-space directions.  The
basis is therefore canonicalized with a fixed per-cluster phase table
before combining, restoring generic relative geometry between beams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import SystemGeometry
from .errors import InfeasibleGeometryError

# singular values at or below RELATIVE_NULL_TOL * sigma_max count as zero
RELATIVE_NULL_TOL = 1e-9


@dataclass
class BeamSet:
    """Unit-norm beams, one row per cluster, plus the null-space dimension."""

    w: np.ndarray  # (N, M)
    null_dim: int


def complementary_matrix(estimates: np.ndarray, i: int) -> np.ndarray:
    """Stack the estimated channels of every user outside cluster i.

    estimates has shape (N, K, M); the result has shape ((N-1)*K, M) with
    rows h_hat^H ordered by (cluster, user), clusters in ascending order
    with cluster i removed.  For N = 1 the matrix is empty (0, M).
    """
    estimates = np.asarray(estimates)
    N, K, M = estimates.shape
    if not 0 <= i < N:
        raise ValueError(f"cluster index {i} out of range for N={N}.")
    others = np.delete(estimates, i, axis=0)
    return others.reshape((N - 1) * K, M).conj()


def null_space_basis(A: np.ndarray, tol: float = RELATIVE_NULL_TOL) -> np.ndarray:
    """Orthonormal basis of the right null space of A, as rows.

    The rank is the number of singular values above tol * sigma_max.  An
    empty A (zero rows) returns the standard basis of the full space.
    Raises if the null space is empty, since no beam could be built.
    """
    A = np.asarray(A)
    if A.ndim != 2:
        raise ValueError("A must be a 2-D matrix.")
    rows, M = A.shape
    if rows == 0:
        return np.eye(M, dtype=complex)
    _, s, vh = np.linalg.svd(A)
    rank = int(np.sum(s > tol * s[0]))
    if rank >= M:
        raise InfeasibleGeometryError(
            f"matrix of rank {rank} leaves no null space in dimension {M}."
        )
    return vh[rank:].conj()


def cluster_basis_phases(i: int, dim: int, n_clusters: int) -> np.ndarray:
    """Unit phase factors canonicalizing cluster i's null-space basis.

    A null-space basis is only defined up to a phase per vector; basis
    vector j of cluster i gets phase 2*pi*i*j/N so that the uniform
    combinations of different clusters do not inherit the factorization
    routine's common orientation convention.
    """
    j = np.arange(dim)
    return np.exp(2j * np.pi * i * j / n_clusters)


def build_beam(basis: np.ndarray, weights) -> np.ndarray:
    """Combine null-space basis vectors into one unit-norm beam.

    weights must be positive and sum to 1 (a point on the simplex); the
    combination is renormalised, so only the direction matters.
    """
    basis = np.asarray(basis)
    if basis.ndim != 2 or basis.shape[0] == 0:
        raise InfeasibleGeometryError("cannot build a beam from an empty basis.")
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (basis.shape[0],):
        raise ValueError("need exactly one weight per basis vector.")
    if np.any(weights <= 0.0):
        raise ValueError("beam weights must be strictly positive.")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("beam weights must sum to 1.")
    v = weights @ basis
    return v / np.linalg.norm(v)


def zf_beams(estimates: np.ndarray, geometry: SystemGeometry, weights=None) -> BeamSet:
    """Zero-forcing beam for every cluster from the estimated channels.

    weights selects the in-null-space combination: None means uniform
    1/null_dim on each basis vector, otherwise a positive simplex vector
    applied to every cluster.
    """
    estimates = np.asarray(estimates)
    N, K, M = estimates.shape
    if (N, K, M) != (geometry.N, geometry.K, geometry.M):
        raise ValueError("estimate array does not match the geometry.")
    w = np.empty((N, M), dtype=complex)
    null_dim = None
    for i in range(N):
        basis = null_space_basis(complementary_matrix(estimates, i))
        dim = basis.shape[0]
        basis = basis * cluster_basis_phases(i, dim, N)[:, None]
        null_dim = dim if null_dim is None else min(null_dim, dim)
        theta = np.full(dim, 1.0 / dim) if weights is None else np.asarray(weights, float)
        w[i] = build_beam(basis, theta)
    return BeamSet(w=w, null_dim=int(null_dim))


def zf_beam_batch(estimates: np.ndarray) -> np.ndarray:
    """Vectorised uniform-weight zero-forcing beams for a batch of draws.

    estimates has shape (T, N, K, M); returns beams of shape (T, N, M).
    Assumes the generic full-rank case (Gaussian estimates give rank
    (N-1)*K almost surely) and falls back to the per-draw path for any
    trial where that fails.
    """
    estimates = np.asarray(estimates)
    T, N, K, M = estimates.shape
    if N == 1:
        # unconstrained beam; any fixed unit vector has the same statistics
        w = np.full((T, 1, M), 1.0 / np.sqrt(M), dtype=complex)
        return w
    rows = (N - 1) * K
    if M <= rows:
        raise InfeasibleGeometryError(
            f"M={M} antennas cannot null {rows} out-of-cluster users."
        )
    w = np.empty((T, N, M), dtype=complex)
    for i in range(N):
        comp = np.delete(estimates, i, axis=1).reshape(T, rows, M).conj()
        _, s, vh = np.linalg.svd(comp)
        bad = s[:, -1] <= RELATIVE_NULL_TOL * s[:, 0]
        phases = cluster_basis_phases(i, M - rows, N)
        basis = vh[:, rows:, :].conj() * phases[None, :, None]
        combo = basis.mean(axis=1)
        w[:, i, :] = combo / np.linalg.norm(combo, axis=1, keepdims=True)
        if np.any(bad):
            for t in np.nonzero(bad)[0]:
                b = null_space_basis(comp[t])
                b = b * cluster_basis_phases(i, b.shape[0], N)[:, None]
                theta = np.full(b.shape[0], 1.0 / b.shape[0])
                w[t, i, :] = build_beam(b, theta)
    return w
