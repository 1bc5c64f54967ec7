"""Zero-forcing beam construction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noma_lab.beamforming import (
    BeamSet,
    build_beam,
    cluster_basis_phases,
    complementary_matrix,
    null_space_basis,
    zf_beam_batch,
    zf_beams,
)
from noma_lab.channel import SystemGeometry, draw_channel_batch, draw_channels
from noma_lab.errors import InfeasibleGeometryError


def _estimates(geometry, seed):
    d = draw_channels(geometry, 0.8, seed)
    return d.h_hat


def test_complementary_matrix_shape_and_rows(ref_geometry):
    est = _estimates(ref_geometry, 1)
    comp = complementary_matrix(est, 1)
    assert comp.shape == (4, 6)
    np.testing.assert_array_equal(comp[0], est[0, 0].conj())
    np.testing.assert_array_equal(comp[3], est[2, 1].conj())
    with pytest.raises(ValueError):
        complementary_matrix(est, 3)


def test_null_space_basis_orthonormal_and_annihilating(ref_geometry):
    comp = complementary_matrix(_estimates(ref_geometry, 2), 0)
    basis = null_space_basis(comp)
    assert basis.shape == (2, 6)  # 6 antennas minus 4 constraints
    np.testing.assert_allclose(basis @ basis.conj().T, np.eye(2), atol=1e-10)
    np.testing.assert_allclose(comp @ basis.T, 0.0, atol=1e-9)


def test_null_space_basis_edge_cases():
    assert null_space_basis(np.zeros((0, 4))).shape == (4, 4)
    full = np.eye(3, dtype=complex)
    with pytest.raises(InfeasibleGeometryError):
        null_space_basis(full)  # rank 3 in dimension 3: nothing left
    with pytest.raises(ValueError):
        null_space_basis(np.zeros(4))


def test_build_beam_validation():
    basis = np.eye(3, dtype=complex)[:2]
    beam = build_beam(basis, [0.5, 0.5])
    assert np.linalg.norm(beam) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        build_beam(basis, [0.7, 0.2])  # weights must sum to 1
    with pytest.raises(ValueError):
        build_beam(basis, [1.0, 0.0])  # strictly positive
    with pytest.raises(ValueError):
        build_beam(basis, [1.0])  # one weight per vector
    with pytest.raises(InfeasibleGeometryError):
        build_beam(np.zeros((0, 3)), [])


def test_cluster_basis_phases_properties():
    ph = cluster_basis_phases(0, 5, 3)
    np.testing.assert_allclose(ph, 1.0)  # cluster 0 untouched
    ph = cluster_basis_phases(2, 4, 3)
    np.testing.assert_allclose(np.abs(ph), 1.0, atol=1e-15)
    assert ph[0] == 1.0 + 0.0j  # first basis vector never rotated
    assert cluster_basis_phases(1, 3, 3)[1] == pytest.approx(
        np.exp(2j * np.pi / 3), abs=1e-15
    )


def test_zf_beams_zero_forcing(ref_geometry):
    est = _estimates(ref_geometry, 3)
    beams = zf_beams(est, ref_geometry)
    assert isinstance(beams, BeamSet)
    assert beams.w.shape == (3, 6)
    assert beams.null_dim == 2
    np.testing.assert_allclose(np.linalg.norm(beams.w, axis=1), 1.0, atol=1e-12)
    for i in range(3):
        for n in range(3):
            if n == i:
                continue
            for k in range(2):
                leak = est[n, k].conj() @ beams.w[i]
                assert abs(leak) < 1e-9


def test_zf_beams_single_cluster():
    g = SystemGeometry(M=4, N=1, K=3, alpha=np.array([[1.0, 0.6, 0.2]]))
    beams = zf_beams(_estimates(g, 4), g)
    # no constraints: full space, uniform combination of the standard basis
    assert beams.null_dim == 4
    np.testing.assert_allclose(beams.w[0], np.full(4, 0.5), atol=1e-12)


def test_zf_beams_custom_weights(ref_geometry):
    est = _estimates(ref_geometry, 5)
    beams = zf_beams(est, ref_geometry, weights=[0.9, 0.1])
    comp = complementary_matrix(est, 0)
    assert np.max(np.abs(comp @ beams.w[0])) < 1e-9


def test_batch_matches_single(ref_geometry):
    h, h_hat, _ = draw_channel_batch(ref_geometry, 0.8, 6, seed=6)
    batch = zf_beam_batch(h_hat)
    assert batch.shape == (6, 3, 6)
    for t in range(6):
        single = zf_beams(h_hat[t], ref_geometry)
        np.testing.assert_allclose(batch[t], single.w, atol=1e-9)


def test_batch_zero_forcing_residual(ref_geometry):
    h, h_hat, _ = draw_channel_batch(ref_geometry, 0.7, 256, seed=14)
    w = zf_beam_batch(h_hat)
    leak = np.einsum("tnkm,tim->tnki", h_hat.conj(), w)
    for i in range(3):
        leak[:, i, :, i] = 0.0  # own-cluster response is not constrained
    assert np.max(np.abs(leak)) < 1e-9
    np.testing.assert_allclose(np.linalg.norm(w, axis=2), 1.0, atol=1e-12)


def test_batch_single_cluster_constant_beam():
    g = SystemGeometry(M=3, N=1, K=2, alpha=np.array([[1.0, 0.4]]))
    h, h_hat, _ = draw_channel_batch(g, 0.9, 5, seed=7)
    w = zf_beam_batch(h_hat)
    np.testing.assert_allclose(w, 1.0 / np.sqrt(3.0), atol=1e-15)


def test_batch_infeasible():
    with pytest.raises(InfeasibleGeometryError):
        zf_beam_batch(np.zeros((2, 2, 2, 2), dtype=complex))


def test_error_leakage_is_unit_exponential(ref_geometry):
    # |e^H w|^2 with e independent of the estimates: unit-mean exponential
    h, h_hat, e = draw_channel_batch(ref_geometry, 0.8, 4096, seed=15)
    w = zf_beam_batch(h_hat)
    leak = np.abs(np.einsum("tm,tm->t", e[:, 0, 0].conj(), w[:, 1])) ** 2
    assert np.mean(leak) == pytest.approx(1.0, rel=0.05)
    assert np.var(leak) == pytest.approx(1.0, rel=0.12)


def test_cross_beam_alignment_is_generic(ref_geometry):
    # the canonicalized beams should look like independent null-space picks:
    # E|w_i^H w_j|^2 well below the aligned-basis value observed without
    # the phase table (~0.30 for this layout)
    h, h_hat, _ = draw_channel_batch(ref_geometry, 0.8, 2048, seed=16)
    w = zf_beam_batch(h_hat)
    pairs = [(0, 1), (0, 2), (1, 2)]
    overlaps = [
        np.mean(np.abs(np.einsum("tm,tm->t", w[:, i].conj(), w[:, j])) ** 2)
        for i, j in pairs
    ]
    assert max(overlaps) < 0.27


@settings(deadline=None, max_examples=25)
@given(
    n=st.integers(2, 3),
    k=st.integers(1, 2),
    extra=st.integers(1, 3),
    seed=st.integers(0, 10**6),
)
def test_zero_forcing_holds_for_any_geometry(n, k, extra, seed):
    m = (n - 1) * k + extra
    alpha = np.tile(np.linspace(1.0, 0.4, k), (n, 1))
    g = SystemGeometry(M=m, N=n, K=k, alpha=alpha)
    est = _estimates(g, seed)
    beams = zf_beams(est, g)
    assert beams.null_dim == extra
    for i in range(n):
        comp = complementary_matrix(est, i)
        assert np.max(np.abs(comp @ beams.w[i])) < 1e-9
