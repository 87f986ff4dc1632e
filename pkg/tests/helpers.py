# tests/helpers.py
"""Random instance builders shared by the test modules."""

import numpy as np

from utils.qcore.qcore_ops import random_density, random_pure
from utils.qcore.qcore_types import DensityOperator, PureState, SystemLayout


def tripartite_layout(d_a: int = 2, d_b: int = 2, d_r: int = 2) -> SystemLayout:
    return SystemLayout.of(("A", d_a), ("B", d_b), ("R", d_r))


def random_tripartite(rng: np.random.Generator, d_a: int = 2, d_b: int = 2, d_r: int = 2) -> PureState:
    return random_pure(tripartite_layout(d_a, d_b, d_r), rng)


def random_ab(rng: np.random.Generator, d_a: int = 2, d_b: int = 2, rank=None) -> DensityOperator:
    return random_density(SystemLayout.of(("A", d_a), ("B", d_b)), rng, rank)


def diagonal_state(layout: SystemLayout, probabilities) -> DensityOperator:
    return DensityOperator(layout, np.diag(np.asarray(probabilities, dtype=complex)))
