# tests/test_entropies.py
import numpy as np
import pytest

from analysis.entropies import (
    EntropyValue,
    cond_von_neumann,
    duality_gap,
    duality_terms,
    h2_rel,
    h_max,
    h_max_cond,
    h_max_rel,
    h_min,
    h_min_cond,
    h_min_cond_witness_check,
    h_min_rel,
    h_min_rel_best,
    h_min_rel_bisect,
    min_entropy_problem,
    support_violation,
    von_neumann,
)
from tests.helpers import diagonal_state, random_ab, random_tripartite
from utils.qcore.qcore_exceptions import InvalidParameterError, LayoutError
from utils.qcore.qcore_ops import haar_unitary, max_entangled, partial_trace, random_density, tensor
from utils.qcore.qcore_types import PureState, SystemLayout
from utils.qcore.qcore_utils import builtin_state

AB = SystemLayout.of(("A", 2), ("B", 2))


def schmidt_rank_state(rng, d_a: int, d_b: int, rank: int) -> PureState:
    coeffs = rng.random(rank) + 0.1
    coeffs = np.sqrt(coeffs / coeffs.sum())
    u = haar_unitary(d_a, rng)[:, :rank]
    v = haar_unitary(d_b, rng)[:, :rank]
    vec = ((u * coeffs) @ v.T).reshape(-1)
    return PureState(SystemLayout.of(("A", d_a), ("B", d_b)), vec)


# -------------------------
# Unconditional
# -------------------------
def test_unconditional_entropies_of_diagonal_state():
    rho = diagonal_state(SystemLayout.of(("A", 4)), [0.5, 0.25, 0.25, 0.0])
    assert abs(h_min(rho) - 1.0) < 1e-12
    assert abs(h_max(rho) - np.log2(3)) < 1e-12
    assert abs(von_neumann(rho) - 1.5) < 1e-12
    assert h_min(rho) <= von_neumann(rho) <= h_max(rho)


def test_cond_von_neumann_of_bell_is_minus_one():
    assert abs(cond_von_neumann(max_entangled(2, ("A", "B")).density(), "B") + 1.0) < 1e-12


# -------------------------
# Conditional min-entropy SDP
# -------------------------
def test_h_min_cond_bell():
    rho = max_entangled(2, ("A", "B")).density()
    value = h_min_cond(rho, "B")
    assert value.method == "sdp"
    assert abs(value.bits + 1.0) < 1e-6
    assert abs(value.gap) < 1e-6


def test_h_min_cond_classically_correlated():
    rho = diagonal_state(AB, [0.5, 0.0, 0.0, 0.5])
    value = h_min_cond(rho, "B")
    assert abs(value.bits) < 1e-6
    assert value.status == "optimal"


def test_h_min_cond_product_equals_marginal(rng):
    rho_a = random_density(SystemLayout.of(("A", 2)), rng)
    rho_b = random_density(SystemLayout.of(("B", 3)), rng)
    value = h_min_cond(tensor(rho_a, rho_b), "B")
    assert abs(value.bits - h_min(rho_a)) < 1e-6


def test_h_min_cond_witness_reproduces_value(rng):
    rho = random_ab(rng, 2, 2)
    value = h_min_cond(rho, "B")
    assert value.witness is not None
    assert abs(np.trace(value.witness).real - 1.0) < 1e-9
    assert h_min_cond_witness_check(value, rho, "B") < 1e-5


def test_h_min_cond_bounds(rng):
    rho = random_ab(rng, 2, 3)
    low = h_min_cond(rho, "B").bits
    assert low <= cond_von_neumann(rho, "B") + 1e-6
    assert cond_von_neumann(rho, "B") <= h_max_cond(rho, "B") + 1e-9
    assert h_min_rel(rho, partial_trace(rho, "B")).bits <= low + 1e-6


def test_min_entropy_problem_blocks():
    rho = max_entangled(2, ("A", "B")).density()
    p = min_entropy_problem(rho, "B")
    assert p.block_names == ("X", "S")
    assert p.block_dims == (2, 4)
    assert p.n_constraints == 16


def test_conditioning_must_be_proper(rng):
    rho = random_ab(rng)
    with pytest.raises(LayoutError):
        h_min_cond(rho, ["A", "B"])


def test_superadditive_on_products(rng):
    rho = random_ab(rng, 2, 2)
    other = random_ab(rng, 2, 2).relabel({"A": "A2", "B": "B2"})
    joint = h_min_cond(tensor(rho, other), ["B", "B2"]).bits
    assert joint >= h_min_cond(rho, "B").bits + h_min_cond(other, "B2").bits - 1e-5


def test_strong_subadditivity(rng):
    psi = random_tripartite(rng, 2, 2, 2)
    rho_abr = psi.density()
    rho_ab = partial_trace(psi, ["A", "B"])
    assert h_min_cond(rho_abr, ["B", "R"]).bits <= h_min_cond(rho_ab, "B").bits + 1e-6


# -------------------------
# Chain rules and ordering
# -------------------------
ABR = SystemLayout.of(("A", 2), ("B", 2), ("R", 2))


def _check_additivity(rng) -> None:
    rho = random_ab(rng, 2, 2, rank=2)
    other = random_ab(rng, 2, 3, rank=3).relabel({"A": "A2", "B": "B2"})
    sigma = random_density(SystemLayout.of(("B", 2)), rng)
    sigma2 = random_density(SystemLayout.of(("B2", 3)), rng)
    joint, joint_sigma = tensor(rho, other), tensor(sigma, sigma2)
    expected = h_min_rel(rho, sigma).bits + h_min_rel(other, sigma2).bits
    assert abs(h_min_rel(joint, joint_sigma).bits - expected) < 1e-7
    expected = h_max_rel(rho, sigma) + h_max_rel(other, sigma2)
    assert abs(h_max_rel(joint, joint_sigma) - expected) < 1e-7


def test_relative_entropies_are_additive(rng):
    for _ in range(5):
        _check_additivity(rng)


@pytest.mark.slow
def test_additivity_sweep():
    rng = np.random.default_rng(200)
    for _ in range(200):
        _check_additivity(rng)


def test_relative_strong_subadditivity(rng):
    for _ in range(5):
        rho_abr = random_density(ABR, rng)
        sigma_br = random_density(SystemLayout.of(("B", 2), ("R", 2)), rng)
        rho_ab = partial_trace(rho_abr, ["A", "B"])
        sigma_b = partial_trace(sigma_br, "B")
        assert h_min_rel(rho_abr, sigma_br).bits <= h_min_rel(rho_ab, sigma_b).bits + 1e-7
        assert h_max_rel(rho_abr, sigma_br) <= h_max_rel(rho_ab, sigma_b) + 1e-7


def test_relative_strong_subadditivity_pure(rng):
    # saf ρ_ABR: destek projektörü rank 1
    psi = random_tripartite(rng, 2, 2, 2)
    sigma_br = random_density(SystemLayout.of(("B", 2), ("R", 2)), rng)
    rho_ab = partial_trace(psi, ["A", "B"])
    sigma_b = partial_trace(sigma_br, "B")
    assert h_max_rel(psi.density(), sigma_br) <= h_max_rel(rho_ab, sigma_b) + 1e-7


def test_dimension_bound(rng):
    for _ in range(3):
        rho_abr = random_density(ABR, rng)
        rho_ar = partial_trace(rho_abr, ["A", "R"])
        bound = h_min_cond(rho_ar, "R").bits + np.log2(ABR.dim("B"))
        assert h_min_cond(rho_abr, "R").bits <= bound + 1e-7


@pytest.mark.parametrize("d_a,d_b", [(2, 2), (2, 3), (3, 2)])
def test_min_le_von_neumann_le_max(rng, d_a, d_b):
    for _ in range(5):
        rho = random_ab(rng, d_a, d_b)
        low = h_min_cond(rho, "B")
        assert low.status == "optimal"
        assert low.bits <= cond_von_neumann(rho, "B") + 1e-7
        assert cond_von_neumann(rho, "B") <= h_max_cond(rho, "B") + 1e-9


def test_entropy_value_rejects_unknown_labels():
    with pytest.raises(InvalidParameterError):
        EntropyValue(0.0, method="guess")
    with pytest.raises(InvalidParameterError):
        EntropyValue(0.0, status="optimal_inaccurate")


# -------------------------
# Relative entropies
# -------------------------
@pytest.mark.parametrize("d_a,d_b,rank", [(2, 2, 1), (2, 2, 2), (2, 3, 2), (3, 3, 3), (4, 2, 2)])
def test_schmidt_rank_formula(rng, d_a, d_b, rank):
    psi = schmidt_rank_state(rng, d_a, d_b, rank)
    rho = psi.density()
    value = h_min_rel(rho, partial_trace(psi, "B"))
    assert abs(value.bits + np.log2(rank)) < 1e-6


def test_bisection_agrees_with_eigen_formula(rng):
    rho = random_ab(rng, 2, 3)
    sigma = random_density(SystemLayout.of(("B", 3)), rng)
    eigen = h_min_rel(rho, sigma)
    bisect = h_min_rel_bisect(rho, sigma)
    assert bisect.method == "bisection"
    assert abs(eigen.bits - bisect.bits) < 1e-6


def test_unsupported_sigma_is_unbounded(rng):
    rho = random_ab(rng)
    sigma = diagonal_state(SystemLayout.of(("B", 2)), [1.0, 0.0])
    assert support_violation(rho, sigma) > 0
    value = h_min_rel(rho, sigma)
    assert value.unbounded
    assert value.status == "unbounded"
    assert h2_rel(rho, sigma).unbounded


def test_collision_entropy_dominates_min_entropy(rng):
    rho = random_ab(rng, 2, 2)
    sigma = random_density(SystemLayout.of(("B", 2)), rng)
    assert h2_rel(rho, sigma).bits >= h_min_rel(rho, sigma).bits - 1e-9


def test_h_max_cond_is_sup_of_relative(rng):
    rho = random_ab(rng, 2, 2, rank=2)
    for _ in range(5):
        sigma = random_density(SystemLayout.of(("B", 2)), rng)
        assert h_max_rel(rho, sigma) <= h_max_cond(rho, "B") + 1e-9


def test_best_candidate_skips_unsupported(rng):
    rho = random_ab(rng)
    bad = diagonal_state(SystemLayout.of(("B", 2)), [1.0, 0.0])
    mixed = diagonal_state(SystemLayout.of(("B", 2)), [0.5, 0.5])
    marginal = partial_trace(rho, "B")
    value, idx = h_min_rel_best(rho, [bad, marginal, mixed])
    assert idx in (1, 2)
    assert value.bits >= h_min_rel(rho, marginal).bits - 1e-12
    assert value.bits >= h_min_rel(rho, mixed).bits - 1e-12
    none, none_idx = h_min_rel_best(rho, [bad])
    assert none_idx == -1 and none.unbounded


def test_sigma_order_must_follow_rho(rng):
    rho = random_tripartite(rng).density()
    sigma = random_density(SystemLayout.of(("R", 2), ("B", 2)), rng)
    with pytest.raises(LayoutError):
        h_min_rel(rho, sigma)


# -------------------------
# Duality
# -------------------------
@pytest.mark.parametrize("dims", [(2, 2, 2), (2, 3, 4), (3, 2, 4)])
def test_duality_on_random_states(rng, dims):
    for _ in range(10):
        psi = random_tripartite(rng, *dims)
        assert duality_gap(psi) <= 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("dims", [(2, 2, 2), (2, 3, 4), (3, 2, 4)])
def test_duality_acceptance_sweep(dims):
    rng = np.random.default_rng(sum(dims))
    for _ in range(100):
        assert duality_gap(random_tripartite(rng, *dims)) <= 1e-6


def test_duality_ghz():
    terms = duality_terms(builtin_state("ghz"))
    assert abs(terms.h_min_ar_given_rho_r) < 1e-9
    assert terms.gap <= 1e-7


@pytest.mark.slow
def test_schmidt_rank_acceptance_sweep():
    rng = np.random.default_rng(8)
    for _ in range(100):
        d_a, d_b = rng.integers(2, 9, size=2)
        rank = int(rng.integers(1, min(d_a, d_b) + 1))
        psi = schmidt_rank_state(rng, int(d_a), int(d_b), rank)
        value = h_min_rel(psi.density(), partial_trace(psi, "B"))
        assert abs(value.bits + np.log2(rank)) < 1e-6

