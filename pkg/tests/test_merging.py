# tests/test_merging.py
import math

import numpy as np
import pytest

from analysis.decoupling import build_measurement, decoupling_trial
from analysis.entropies import h_max_cond
from analysis.merging import (
    CostPlan,
    MergeTask,
    MergingSimulator,
    cost_window,
    eps_error_bound,
    error_for_cost,
    merge_sweep,
    merging_condition,
    monotonicity_witness,
    plan_cost,
    run_protocol,
    uhlmann_isometry,
    zero_error_bound,
)
from tests.helpers import random_tripartite
from utils.qcore.qcore_exceptions import DimensionError, InvalidParameterError
from utils.qcore.qcore_metrics import get_metrics
from utils.qcore.qcore_ops import fidelity, partial_trace, random_channel, random_density, random_pure, tensor
from utils.qcore.qcore_types import DensityOperator, Instrument, PureState, SystemLayout
from utils.qcore.qcore_utils import builtin_state


def _ar(psi: PureState) -> DensityOperator:
    return partial_trace(psi, ["A", "R"])


# -------------------------
# Cost planning
# -------------------------
def test_nonsmooth_plan_for_bell():
    plan = plan_cost(_ar(builtin_state("bell")), 0.25)
    # −H_min = 1, 2 log(1/ε) = 4
    assert plan.cost_bits == 5
    assert (plan.K, plan.L) == (32, 1)
    assert plan.guarantee == pytest.approx(2 * math.sqrt(0.5))
    assert plan.eps_prime == 0.0


def test_negative_cost_uses_output_entanglement(rng):
    tau = DensityOperator(SystemLayout.of(("A", 4)), np.eye(4, dtype=complex) / 4)
    rho = tensor(tau, random_density(SystemLayout.of(("R", 2)), rng))
    plan = plan_cost(rho, 0.9)
    assert plan.target_bits == pytest.approx(-2 + 2 * math.log2(1 / 0.9), abs=1e-6)
    assert plan.cost_bits == -1
    assert (plan.K, plan.L) == (1, 2)


def test_smooth_and_corollary_modes():
    rho = _ar(builtin_state("bell"))
    smooth = plan_cost(rho, 0.1, "smooth")
    assert smooth.guarantee == pytest.approx(8 * math.sqrt(0.1))
    assert smooth.eps_prime == 0.1
    corollary = plan_cost(rho, 0.1, "corollary")
    assert corollary.eps_prime == pytest.approx(0.01 / 64)
    assert corollary.guarantee == 0.1
    assert corollary.target_bits == pytest.approx(-corollary.entropy.bits + 4 * math.log2(10) + 12)
    assert corollary.cost_bits >= corollary.target_bits - 1e-6
    assert smooth.cost_bits <= plan_cost(rho, 0.1, "nonsmooth").cost_bits


@pytest.mark.parametrize("eps,mode", [(0.0, "nonsmooth"), (1.0, "nonsmooth"), (0.1, "greedy")])
def test_plan_rejects_bad_arguments(eps, mode):
    with pytest.raises(InvalidParameterError):
        plan_cost(_ar(builtin_state("bell")), eps, mode)


def test_error_for_cost_inverts_the_plan():
    rho = _ar(builtin_state("bell"))
    eps, guarantee = error_for_cost(rho, 5)
    assert eps == pytest.approx(0.25, abs=1e-6)
    assert guarantee == pytest.approx(2 * math.sqrt(0.5), abs=1e-5)
    eps, guarantee = error_for_cost(rho, 0)
    assert eps == 1.0
    assert guarantee == 2.0


# -------------------------
# Uhlmann isometry
# -------------------------
def test_uhlmann_attains_marginal_fidelity(rng):
    source = random_tripartite(rng, 2, 2, 2)
    target = random_tripartite(rng, 2, 2, 2)
    iso = uhlmann_isometry(source, target, ["A", "R"])
    expected = fidelity(partial_trace(source, ["A", "R"]), partial_trace(target, ["A", "R"]))
    assert iso.fidelity == pytest.approx(expected, abs=1e-8)

    s_mat = source.vector.reshape(2, 2, 2).transpose(0, 2, 1).reshape(4, 2)
    t_mat = target.vector.reshape(2, 2, 2).transpose(0, 2, 1).reshape(4, 2)
    overlap = abs(np.vdot(t_mat, iso.apply(s_mat))) ** 2
    assert overlap == pytest.approx(expected, abs=1e-8)
    assert iso.isometry_error() < 1e-10


def test_uhlmann_with_junk_register(rng):
    # kaynak tamamlayıcısı (4) hedefinkinden (2) büyük, rank ≤ 2
    source = random_pure(SystemLayout.of(("A", 2), ("C", 4)), rng)
    target = random_pure(SystemLayout.of(("A", 2), ("D", 2)), rng)
    iso = uhlmann_isometry(source, target, "A")
    assert iso.junk_dim == 2
    assert iso.matrix().shape == (4, 4)
    assert iso.isometry_error() < 1e-10
    expected = fidelity(partial_trace(source, "A"), partial_trace(target, "A"))
    assert iso.fidelity == pytest.approx(expected, abs=1e-8)


def test_uhlmann_maps_phi_plus_to_psi_plus():
    layout = SystemLayout.of(("A", 2), ("B", 2))
    phi = PureState(layout, np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2))
    psi = PureState(layout, np.array([0.0, 1.0, 1.0, 0.0]) / np.sqrt(2))
    iso = uhlmann_isometry(phi, psi, "A")
    assert iso.fidelity == pytest.approx(1.0, abs=1e-10)
    # B üzerinde bit-flip
    assert np.allclose(iso.matrix(), [[0.0, 1.0], [1.0, 0.0]], atol=1e-10)
    assert np.allclose(iso.apply(phi.vector.reshape(2, 2)), psi.vector.reshape(2, 2), atol=1e-10)


def test_uhlmann_between_purifications_of_diagonal_states():
    layout = SystemLayout.of(("A", 2), ("B", 2))
    source = PureState(layout, np.sqrt([0.9, 0.0, 0.0, 0.1]))
    target = PureState(layout, np.sqrt([0.8, 0.0, 0.0, 0.2]))
    iso = uhlmann_isometry(source, target, "A")
    # (√0.72 + √0.02)² = 0.98
    assert iso.fidelity == pytest.approx(0.98, abs=1e-8)
    assert iso.fidelity == pytest.approx(fidelity(partial_trace(source, "A"), partial_trace(target, "A")), abs=1e-8)


def test_uhlmann_refuses_small_target(rng):
    source = random_pure(SystemLayout.of(("A", 2), ("C", 2)), rng)
    target = PureState(SystemLayout.of(("A", 2), ("D", 1)), np.array([1.0, 0.0]))
    with pytest.raises(DimensionError):
        uhlmann_isometry(source, target, "A")


# -------------------------
# Merging condition
# -------------------------
def test_merging_condition_vanishes_on_decoupled_input(rng):
    tau = DensityOperator(SystemLayout.of(("A", 4)), np.eye(4, dtype=complex) / 4)
    rho_r = random_density(SystemLayout.of(("R", 2)), rng)
    outcomes = decoupling_trial(tensor(tau, rho_r), build_measurement(4, 2, rng))
    assert merging_condition(outcomes, rho_r, 2) < 1e-10


def test_merging_condition_is_weighted_trace_distance(rng):
    rho = random_density(SystemLayout.of(("A", 4), ("R", 2)), rng)
    rho_r = partial_trace(rho, "R")
    outcomes = decoupling_trial(rho, build_measurement(4, 2, rng))
    product = np.kron(np.eye(2) / 2, rho_r.matrix)
    expected = sum(o.probability * np.abs(np.linalg.eigvalsh(o.state.matrix - product)).sum() for o in outcomes)
    value = merging_condition(outcomes, rho_r, 2)
    assert value == pytest.approx(expected, abs=1e-10)
    assert 0.0 <= value <= 2.0
    with pytest.raises(DimensionError):
        merging_condition(outcomes, rho_r, 4)


# -------------------------
# Protocol
# -------------------------
def test_protocol_run_on_random_state(rng):
    psi = random_tripartite(rng, 2, 2, 2)
    outcome = run_protocol(MergeTask(psi, K=4, L=2, eps_design=0.1, seed=11))
    assert abs(outcome.probabilities.sum() - 1.0) < 1e-10
    assert outcome.final_state.layout.labels == ["A1", "B1", "Bp", "B", "R"]
    assert abs(np.trace(outcome.final_state.matrix).real - 1.0) < 1e-10
    assert outcome.cost == pytest.approx(1.0)
    assert outcome.chain_ok
    assert 0.0 <= outcome.error <= 2.0 + 1e-9
    for iso in outcome.isometries:
        assert 0.0 <= iso.fidelity <= 1.0


def test_protocol_is_deterministic_per_seed(rng):
    psi = random_tripartite(rng, 2, 2, 2)
    first = run_protocol(MergeTask(psi, 2, 1, 0.1, seed=5))
    second = run_protocol(MergeTask(psi, 2, 1, 0.1, seed=5))
    assert first.error == second.error
    assert first.condition_value == second.condition_value


def test_bell_meets_its_guarantee():
    psi = builtin_state("bell")
    plan = plan_cost(_ar(psi), 0.1)
    record = MergingSimulator().merge_record("bell", psi, plan, seed=7)
    assert record.cost_bits == 8
    assert record.chain_ok
    assert record.converse_ok
    assert record.error <= plan.guarantee
    assert get_metrics().get_metrics()["runs"]["protocol_runs"] == 1


def test_fractional_cost_is_kept():
    psi = builtin_state("bell")
    cost = math.log2(3)
    eps, guarantee = error_for_cost(_ar(psi), cost)
    plan = CostPlan("fixed", eps, 0.0, 3, 1, cost, cost, guarantee)
    record = MergingSimulator().merge_record("bell", psi, plan, seed=2)
    assert isinstance(record.cost_bits, float)
    assert record.cost_bits == pytest.approx(math.log2(3))
    assert record.to_row()["cost_bits"] == pytest.approx(math.log2(3))
    assert record.chain_ok


def test_protocol_size_cap(rng):
    psi = random_tripartite(rng, 2, 2, 2)
    with pytest.raises(DimensionError):
        MergingSimulator(max_protocol_dim=16).run_protocol(MergeTask(psi, 4, 1, 0.1, seed=1))


def test_task_rejects_non_positive_dimensions(rng):
    with pytest.raises(InvalidParameterError):
        MergeTask(random_tripartite(rng), 0, 1, 0.1)


def test_merge_sweep_orders_records():
    records = merge_sweep({"bell": builtin_state("bell"), "product": builtin_state("product")}, [1, 2], 0.25)
    assert [(r.state_id, r.seed) for r in records] == [("bell", 1), ("bell", 2), ("product", 1), ("product", 2)]
    assert all(r.converse_ok for r in records)
    assert list(records[0].to_row())[-1] == "slack"


# -------------------------
# Converse bounds
# -------------------------
def test_zero_error_bound_of_bell():
    assert zero_error_bound(builtin_state("bell")) == pytest.approx(1.0, abs=1e-6)


def test_eps_error_bound_edges():
    psi = builtin_state("bell")
    assert eps_error_bound(psi, 0.0) == pytest.approx(1.0, abs=1e-6)
    assert eps_error_bound(psi, 1.0) == -1.0
    assert eps_error_bound(psi, 3.0) == -1.0
    assert eps_error_bound(psi, 0.04) <= 1.0 + 1e-6
    with pytest.raises(InvalidParameterError):
        eps_error_bound(psi, -0.1)


def test_cost_window_is_ordered():
    window = cost_window(builtin_state("bell"), 0.1)
    assert window.lower <= window.upper
    assert window.eps_prime_range == pytest.approx((0.01 / 64, math.sqrt(0.1)))


def _random_instrument(rng) -> Instrument:
    ch = random_channel(2, rng, n_kraus=3)
    return Instrument(tuple((op,) for op in ch.operators))


def test_monotonicity_under_local_instruments(rng):
    rho = random_density(SystemLayout.of(("A", 2), ("R", 2)), rng)
    sigma = partial_trace(rho, "R")
    projective = Instrument.projective([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    assert monotonicity_witness(rho, sigma, projective).holds
    assert monotonicity_witness(rho, sigma, _random_instrument(rng)).holds


def test_zero_error_bound_matches_max_entropy_form(rng):
    for _ in range(10):
        psi = random_tripartite(rng)
        assert zero_error_bound(psi) == pytest.approx(h_max_cond(partial_trace(psi, ["A", "B"]), "B"), abs=1e-6)


@pytest.mark.slow
def test_zero_error_bound_sweep():
    rng = np.random.default_rng(100)
    for _ in range(100):
        psi = random_tripartite(rng)
        assert zero_error_bound(psi) == pytest.approx(h_max_cond(partial_trace(psi, ["A", "B"]), "B"), abs=1e-6)


@pytest.mark.slow
def test_monotonicity_sweep():
    rng = np.random.default_rng(201)
    for _ in range(200):
        rho = random_density(SystemLayout.of(("A", 2), ("R", 2)), rng)
        sigma = random_density(SystemLayout.of(("R", 2)), rng)
        assert monotonicity_witness(rho, sigma, _random_instrument(rng)).holds


@pytest.mark.slow
def test_achievability_sweep():
    rng = np.random.default_rng(2024)
    states = {"bell": builtin_state("bell")}
    states.update({f"random{k}": random_tripartite(rng) for k in range(20)})
    records = merge_sweep(states, list(range(100)), 0.1)
    assert all(r.chain_ok and r.converse_ok for r in records)
    assert records[0].guarantee == pytest.approx(2 * math.sqrt(0.2))
    for state_id in states:
        runs = [r for r in records if r.state_id == state_id]
        assert len(runs) == 100
        assert sum(r.within_guarantee for r in runs) >= 95, state_id
