# tests/conftest.py
"""Shared fixtures: seeded generators, clean singletons."""

import numpy as np
import pytest

from tests.helpers import random_tripartite


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def psi_abr(rng):
    return random_tripartite(rng)


@pytest.fixture(autouse=True)
def _fresh_singletons():
    """Solver/simulator singletons and metrics start clean in every test."""
    from analysis.merging import reset_merging_simulator
    from utils.qcore.qcore_metrics import get_metrics
    from utils.qcore.qcore_sdp import reset_sdp_solver

    reset_sdp_solver()
    reset_merging_simulator()
    get_metrics().reset()
    yield
