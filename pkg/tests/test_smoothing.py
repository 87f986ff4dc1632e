# tests/test_smoothing.py
import numpy as np
import pytest

from analysis.entropies import h_max_rel, h_min_cond, h_min_rel
from analysis.smoothing import (
    SmoothingBall,
    classical_smooth_h_min,
    convergence_point,
    convergence_series,
    h_max_smooth_rel,
    h_min_smooth_cond,
    h_min_smooth_cond_bisect,
    h_min_smooth_rel,
    h_min_smooth_rel_bisect,
)
from tests.helpers import diagonal_state, random_ab
from utils.qcore.qcore_exceptions import DimensionError, InvalidParameterError
from utils.qcore.qcore_ops import partial_trace, random_density, tensor, trace_distance
from utils.qcore.qcore_types import SystemLayout
from utils.qcore.qcore_utils import builtin_state

PROBS = [0.5, 0.3, 0.15, 0.05]


def _classical_ab():
    # B tek boyutlu: koşullu değer = koşulsuz değer
    return diagonal_state(SystemLayout.of(("A", 4), ("B", 1)), PROBS)


# -------------------------
# Reductions and monotonicity
# -------------------------
def test_zero_radius_reduces_to_non_smooth(rng):
    rho = random_ab(rng, 2, 2)
    sigma = random_density(SystemLayout.of(("B", 2)), rng)
    assert h_min_smooth_cond(rho, "B", 0.0).bits == h_min_cond(rho, "B").bits
    assert h_min_smooth_rel(rho, sigma, 0.0).bits == h_min_rel(rho, sigma).bits
    assert h_max_smooth_rel(rho, sigma, 0.0)[0] == h_max_rel(rho, sigma)


def test_smooth_min_entropy_grows_with_radius(rng):
    rho = random_ab(rng, 2, 2)
    values = [h_min_smooth_cond(rho, "B", eps).bits for eps in (0.0, 0.05, 0.1, 0.2)]
    for low, high in zip(values, values[1:]):
        assert high >= low - 1e-6


@pytest.mark.parametrize("eps", [-0.1, 1.0, 1.5])
def test_radius_outside_unit_interval(rng, eps):
    with pytest.raises(InvalidParameterError):
        h_min_smooth_cond(random_ab(rng), "B", eps)


# -------------------------
# Classical oracle
# -------------------------
def test_classical_water_filling():
    assert abs(classical_smooth_h_min(PROBS, 0.0) - 1.0) < 1e-12
    assert abs(classical_smooth_h_min(PROBS, 0.1) + np.log2(0.4)) < 1e-9
    # seviye 1/d altına inemez
    assert abs(classical_smooth_h_min(PROBS, 0.45) - 2.0) < 1e-12
    with pytest.raises(InvalidParameterError):
        classical_smooth_h_min([0.5, 0.6], 0.1)


@pytest.mark.parametrize("eps", [0.1, 0.45])
def test_sdp_matches_classical_oracle(eps):
    value = h_min_smooth_cond(_classical_ab(), "B", eps)
    assert abs(value.bits - classical_smooth_h_min(PROBS, eps)) < 1e-5


# -------------------------
# Witness and ball
# -------------------------
def test_witness_lies_in_ball(rng):
    rho = random_ab(rng, 2, 2)
    value = h_min_smooth_cond(rho, "B", 0.1)
    assert value.witness is not None
    ball = SmoothingBall(rho, 0.1)
    assert ball.contains(value.witness)
    assert abs(np.trace(value.witness).real - 1.0) < 1e-9


def test_ball_membership_and_projection(rng):
    rho = random_ab(rng, 2, 2)
    ball = SmoothingBall(rho, 0.05)
    assert ball.contains(rho.matrix)
    far = np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex)
    if trace_distance(rho.matrix, far) > 0.05:
        assert not ball.contains(far)
        pulled = ball.project_witness(far)
        assert ball.contains(pulled)
    assert not ball.contains(np.diag([1.2, -0.2, 0.0, 0.0]))
    with pytest.raises(InvalidParameterError):
        SmoothingBall(rho, 1.0)


# -------------------------
# Bisection oracles
# -------------------------
def test_cond_bisection_agrees_with_joint_sdp(rng):
    rho = random_ab(rng, 2, 2)
    sdp = h_min_smooth_cond(rho, "B", 0.1)
    bisect = h_min_smooth_cond_bisect(rho, "B", 0.1)
    assert bisect.method == "bisection"
    assert abs(sdp.bits - bisect.bits) < 1e-4


def test_rel_bisection_agrees_with_joint_sdp(rng):
    rho = random_ab(rng, 2, 2)
    sigma = random_density(SystemLayout.of(("B", 2)), rng)
    sdp = h_min_smooth_rel(rho, sigma, 0.1)
    bisect = h_min_smooth_rel_bisect(rho, sigma, 0.1)
    assert abs(sdp.bits - bisect.bits) < 1e-4
    # σ sabit: koşullu değer üst sınır
    assert sdp.bits <= h_min_smooth_cond(rho, "B", 0.1).bits + 1e-5


def test_rel_ball_missing_support_is_unbounded():
    rho = diagonal_state(SystemLayout.of(("A", 2), ("B", 2)), [0.25] * 4)
    sigma = diagonal_state(SystemLayout.of(("B", 2)), [1.0, 0.0])
    value = h_min_smooth_rel(rho, sigma, 0.1)
    assert value.unbounded


# -------------------------
# Smooth max-entropy heuristic
# -------------------------
def test_h_max_heuristic_is_labelled_and_monotone(rng):
    rho = random_ab(rng, 2, 2)
    sigma = random_density(SystemLayout.of(("B", 2)), rng)
    previous = h_max_rel(rho, sigma)
    for eps in (0.05, 0.2, 0.5):
        value, method = h_max_smooth_rel(rho, sigma, eps)
        assert method == "heuristic"
        assert value <= previous + 1e-12
        previous = value


# -------------------------
# Chain rules under smoothing
# -------------------------
ABR = SystemLayout.of(("A", 2), ("B", 2), ("R", 2))


def test_smoothing_solves_are_certified(rng):
    for _ in range(3):
        rho = random_ab(rng, 2, 2)
        sigma = random_density(SystemLayout.of(("B", 2)), rng)
        for value in (h_min_smooth_cond(rho, "B", 0.1), h_min_smooth_rel(rho, sigma, 0.1)):
            assert value.status == "optimal"
            assert abs(value.gap) <= 1e-8


@pytest.mark.parametrize("eps,eps2", [(0.05, 0.05), (0.1, 0.2)])
def test_smooth_superadditivity(rng, eps, eps2):
    rho = random_ab(rng, 2, 2)
    sigma = random_density(SystemLayout.of(("B", 2)), rng)
    other = random_ab(rng, 2, 2).relabel({"A": "A2", "B": "B2"})
    sigma2 = random_density(SystemLayout.of(("B2", 2)), rng)
    joint = h_min_smooth_rel(tensor(rho, other), tensor(sigma, sigma2), eps + eps2).bits
    parts = h_min_smooth_rel(rho, sigma, eps).bits + h_min_smooth_rel(other, sigma2, eps2).bits
    assert joint >= parts - 1e-6


@pytest.mark.parametrize("eps", [0.05, 0.2])
def test_smooth_strong_subadditivity(rng, eps):
    rho_abr = random_density(ABR, rng)
    sigma_br = random_density(SystemLayout.of(("B", 2), ("R", 2)), rng)
    rho_ab = partial_trace(rho_abr, ["A", "B"])
    sigma_b = partial_trace(sigma_br, "B")
    assert h_min_smooth_rel(rho_abr, sigma_br, eps).bits <= h_min_smooth_rel(rho_ab, sigma_b, eps).bits + 1e-6


@pytest.mark.parametrize("eps", [0.05, 0.2])
def test_smooth_dimension_bound(rng, eps):
    rho_abr = random_density(ABR, rng)
    rho_ar = partial_trace(rho_abr, ["A", "R"])
    bound = h_min_smooth_cond(rho_ar, "R", eps).bits + np.log2(ABR.dim("B"))
    assert h_min_smooth_cond(rho_abr, "R", eps).bits <= bound + 1e-6


@pytest.mark.slow
def test_smooth_chain_rule_sweep():
    rng = np.random.default_rng(41)
    for _ in range(10):
        rho_abr = random_density(ABR, rng)
        sigma_br = random_density(SystemLayout.of(("B", 2), ("R", 2)), rng)
        rho_ab, sigma_b = partial_trace(rho_abr, ["A", "B"]), partial_trace(sigma_br, "B")
        rho_ar = partial_trace(rho_abr, ["A", "R"])
        for eps in (0.05, 0.1, 0.2):
            assert h_min_smooth_rel(rho_abr, sigma_br, eps).bits <= h_min_smooth_rel(rho_ab, sigma_b, eps).bits + 1e-6
            assert h_min_smooth_cond(rho_abr, "R", eps).bits <= h_min_smooth_cond(rho_ar, "R", eps).bits + 1.0 + 1e-6


@pytest.mark.slow
def test_radius_monotonicity_sweep():
    rng = np.random.default_rng(42)
    for _ in range(50):
        rho = random_ab(rng, 2, 2)
        values = [h_min_smooth_cond(rho, "B", eps).bits for eps in (0.0, 0.05, 0.1, 0.2)]
        assert all(high >= low - 1e-6 for low, high in zip(values, values[1:]))


# -------------------------
# Convergence
# -------------------------
def test_convergence_of_product_state():
    psi = builtin_state("product")
    eps = 0.1
    for point in convergence_series(psi, eps, 2):
        assert point.target_bits == pytest.approx(0.0, abs=1e-9)
        assert abs(point.value_bits_per_copy) <= -np.log2(1 - eps) / point.n + 1e-5


def test_convergence_gap_shrinks_for_bell():
    series = convergence_series(builtin_state("bell"), 0.1, 2)
    assert [p.n for p in series] == [1, 2]
    assert series[0].target_bits == pytest.approx(1.0, abs=1e-9)
    for point in series:
        assert point.gap >= -1e-5
    assert series[1].gap <= series[0].gap + 1e-5


def test_convergence_refuses_large_copies():
    psi = builtin_state("bell")
    with pytest.raises(DimensionError):
        convergence_series(psi, 0.1, 5)
    with pytest.raises(DimensionError):
        convergence_point(psi, 0.1, 2, max_dim=8)
    with pytest.raises(InvalidParameterError):
        convergence_series(psi, 0.1, 0)


@pytest.mark.slow
def test_convergence_three_copies():
    series = convergence_series(builtin_state("bell"), 0.1, 3)
    gaps = [p.gap for p in series]
    assert all(b <= a + 1e-5 for a, b in zip(gaps, gaps[1:]))
