"""Shared fixtures: the reference six-user system used across the suite."""

import numpy as np
import pytest

from noma_lab.channel import SystemGeometry


@pytest.fixture
def ref_geometry() -> SystemGeometry:
    """Three clusters of two users on six antennas, near/far gain pairs."""
    return SystemGeometry(
        M=6, N=3, K=2,
        alpha=np.array([[1.00, 0.10], [0.95, 0.20], [0.90, 0.15]]),
    )


@pytest.fixture
def ref_accuracy() -> np.ndarray:
    """Per-user CSI accuracy table matching the reference geometry."""
    return np.array([[0.90, 0.70], [0.85, 0.75], [0.80, 0.80]])


@pytest.fixture
def small_geometry() -> SystemGeometry:
    """Two clusters of two users on four antennas (cheap for simulation)."""
    return SystemGeometry(
        M=4, N=2, K=2,
        alpha=np.array([[1.0, 0.3], [0.8, 0.25]]),
    )
