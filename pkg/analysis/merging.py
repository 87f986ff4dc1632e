# analysis/merging.py
"""
Single-shot state merging: cost planning, the measure-and-decode protocol and converse bounds.

Protokol:
1. Alice and Bob share Φ_K on A0 B0 next to ψ_ABR.
2. Alice measures A A0 with a random block measurement of block size L (decoupling module).
3. For every outcome Bob applies the Uhlmann isometry that maps his systems B B0 onto
   B1 B′ B of the target Φ_L ⊗ ψ_{B′BR}.
4. The error is ‖ρ_final − Φ_L ⊗ ψ_{B′BR}‖₁; the cost is log K − log L bits.

Kullanım:
    simulator = get_merging_simulator_sync()
    plan = plan_cost(rho_ar, 0.1, "nonsmooth")
    outcome = simulator.run_protocol(MergeTask(psi, plan.K, plan.L, 0.1, seed=7))
"""

import asyncio
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from analysis.decoupling import BlockOutcome, build_measurement
from analysis.entropies import EntropyValue, duality_terms, h_min_cond, h_min_rel
from analysis.smoothing import h_min_smooth_cond
from config import get_config_sync
from utils.qcore.qcore_constants import COST_SNAP, DEFAULT_SPLIT, PLAN_MODES, ZERO_PROBABILITY
from utils.qcore.qcore_exceptions import DimensionError, InvalidParameterError, LayoutError
from utils.qcore.qcore_metrics import get_metrics
from utils.qcore.qcore_ops import (
    apply_instrument,
    embed,
    hermitize,
    partial_trace,
    permute,
    tensor,
    trace_norm,
)
from utils.qcore.qcore_types import DensityOperator, Instrument, LabelSet, PureState, SystemLayout

logger = logging.getLogger(__name__)

CHAIN_SLACK = 1e-6
CONVERSE_SLACK = 1e-6


# -------------------------
# Records
# -------------------------
@dataclass(frozen=True, eq=False)
class MergeTask:
    psi_abr: PureState
    K: int
    L: int
    eps_design: float
    seed: Optional[int] = None
    split: Tuple[str, str, str] = tuple(DEFAULT_SPLIT)

    def __post_init__(self):
        if self.K < 1 or self.L < 1:
            raise InvalidParameterError(f"K and L must be >= 1, got K={self.K}, L={self.L}")

    @property
    def cost(self) -> float:
        return float(np.log2(self.K) - np.log2(self.L))


@dataclass(frozen=True)
class CostPlan:
    mode: str
    eps: float
    eps_prime: float
    K: int
    L: int
    cost_bits: float             # log K − log L; integral for planned costs
    target_bits: float
    guarantee: float
    entropy: Optional[EntropyValue] = None


@dataclass(frozen=True, eq=False)
class UhlmannIsometry:
    """
    Isometry on the complement, stored as its action on the source support plus the data
    needed to complete it: V = Z W† B_s† on supp, null-space completion elsewhere.

    When the target complement is smaller than the source complement, the output carries a
    junk factor of dimension `junk_dim` (minor index) that is traced out afterwards.
    """
    support_map: np.ndarray      # c_t × c_s, equals Z W† B_s†
    support_basis: np.ndarray    # c_s × r
    range_basis: np.ndarray      # c_t × r, equals Z
    d_source: int
    d_target: int
    junk_dim: int
    fidelity: float

    def apply(self, source: np.ndarray) -> np.ndarray:
        """(id ⊗ V)|S⟩ for S given as a fixed × complement matrix (junk component 0)."""
        return source @ self.support_map.T

    def matrix(self) -> np.ndarray:
        """Full isometry (d_target·junk_dim) × d_source."""
        j = self.junk_dim
        lifted_range = np.kron(self.range_basis, np.eye(j)[:, :1])
        on_support = np.kron(self.support_map, np.eye(j)[:, :1])
        rank = self.support_basis.shape[1]
        extra = self.d_source - rank
        if extra == 0:
            return on_support
        src_null = scipy.linalg.null_space(self.support_basis.conj().T) if rank else np.eye(self.d_source)
        tgt_null = (scipy.linalg.null_space(lifted_range.conj().T) if rank
                    else np.eye(self.d_target * j))
        return on_support + tgt_null[:, :extra] @ src_null.conj().T

    def isometry_error(self) -> float:
        v = self.matrix()
        return float(np.max(np.abs(v.conj().T @ v - np.eye(self.d_source))))


@dataclass(frozen=True, eq=False)
class MergeOutcome:
    task: MergeTask
    probabilities: np.ndarray
    isometries: Tuple[UhlmannIsometry, ...]
    final_state: DensityOperator
    target: PureState
    error: float
    condition_value: float

    @property
    def cost(self) -> float:
        return self.task.cost

    @property
    def chain_ok(self) -> bool:
        return self.error <= 2.0 * math.sqrt(max(self.condition_value, 0.0)) + CHAIN_SLACK


@dataclass(frozen=True)
class MergeRecord:
    state_id: str
    seed: Optional[int]
    K: int
    L: int
    cost_bits: float
    design_eps: float
    condition_value: float
    error: float
    guarantee: float
    lower_bound_at_error: float

    @property
    def slack(self) -> float:
        return self.cost_bits - self.lower_bound_at_error

    @property
    def chain_ok(self) -> bool:
        return self.error <= 2.0 * math.sqrt(max(self.condition_value, 0.0)) + CHAIN_SLACK

    @property
    def converse_ok(self) -> bool:
        return self.cost_bits >= self.lower_bound_at_error - CONVERSE_SLACK

    @property
    def within_guarantee(self) -> bool:
        return self.error <= self.guarantee

    def to_row(self) -> Dict[str, Any]:
        return {
            "state_id": self.state_id,
            "seed": self.seed,
            "K": self.K,
            "L": self.L,
            "cost_bits": self.cost_bits,
            "design_eps": self.design_eps,
            "condition_value": self.condition_value,
            "error": self.error,
            "guarantee": self.guarantee,
            "lower_bound_at_error": self.lower_bound_at_error,
            "slack": self.slack,
        }


# -------------------------
# Cost planning
# -------------------------
def _check_open_eps(eps: float) -> float:
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise InvalidParameterError(f"eps must lie in (0, 1), got {eps}")
    return eps


def _ceil_bits(target: float) -> int:
    nearest = round(target)
    if abs(target - nearest) <= COST_SNAP:
        return int(nearest)
    return int(math.ceil(target))


def plan_cost(rho_ar: DensityOperator, eps: float, mode: str = "nonsmooth", cond: LabelSet = "R") -> CostPlan:
    """
    Smallest integer cost in bits at or above the achievability formula of the chosen mode.

    nonsmooth:  −H_min(A|R) + 2 log(1/ε),            guarantee 2√(2ε)
    smooth:     −H_min^ε(A|R) + 2 log(1/ε),          guarantee 8√ε
    corollary:  −H_min^{ε²/64}(A|R) + 4 log(1/ε) + 12, guarantee ε
    """
    eps = _check_open_eps(eps)
    if mode not in PLAN_MODES:
        raise InvalidParameterError(f"mode must be one of {PLAN_MODES}, got '{mode}'")
    log_inv = float(np.log2(1.0 / eps))
    if mode == "nonsmooth":
        entropy = h_min_cond(rho_ar, cond)
        eps_prime, target, guarantee = 0.0, -entropy.bits + 2.0 * log_inv, 2.0 * math.sqrt(2.0 * eps)
    elif mode == "smooth":
        entropy = h_min_smooth_cond(rho_ar, cond, eps)
        eps_prime, target, guarantee = eps, -entropy.bits + 2.0 * log_inv, 8.0 * math.sqrt(eps)
    else:
        eps_prime = eps * eps / 64.0
        entropy = h_min_smooth_cond(rho_ar, cond, eps_prime)
        target, guarantee = -entropy.bits + 4.0 * log_inv + 12.0, eps
    cost = _ceil_bits(target)
    plan = CostPlan(mode, eps, eps_prime, 2 ** max(cost, 0), 2 ** max(-cost, 0), cost, target, guarantee, entropy)
    logger.debug(f"📊 plan_cost {mode}: target {target:.6f} → {cost} bits (K={plan.K}, L={plan.L})")
    return plan


def error_for_cost(rho_ar: DensityOperator, cost_bits: float, cond: LabelSet = "R") -> Tuple[float, float]:
    """Design ε that the nonsmooth formula assigns to a fixed cost, with its guarantee (capped at 2)."""
    h = h_min_cond(rho_ar, cond).bits
    eps = min(float(2.0 ** (-(cost_bits + h) / 2.0)), 1.0)
    return eps, min(2.0 * math.sqrt(2.0 * eps), 2.0)


# -------------------------
# Uhlmann isometry
# -------------------------
def _uhlmann_from_matrices(source: np.ndarray, target: np.ndarray) -> UhlmannIsometry:
    """Both arguments are fixed × complement matrices of normalized vectors."""
    c_s, c_t = source.shape[1], target.shape[1]
    _, s_vals, vh = np.linalg.svd(source, full_matrices=False)
    top = float(s_vals[0]) if s_vals.size else 0.0
    rank = int(np.sum(s_vals > 1e-10 * top)) if top > 0 else 0
    if rank > c_t:
        raise DimensionError("target complement too small for the source support", rank, c_t)
    junk = max(1, -(-c_s // c_t))
    if rank == 0:
        empty = np.zeros((c_s, 0), dtype=complex)
        return UhlmannIsometry(np.zeros((c_t, c_s), dtype=complex), empty, np.zeros((c_t, 0), dtype=complex),
                               c_s, c_t, junk, 0.0)
    b_s = vh[:rank].T                                   # supp of the complement marginal
    overlap = b_s.conj().T @ (source.T @ target.conj())  # r × c_t
    w, sing, zh = np.linalg.svd(overlap, full_matrices=False)
    z = zh.conj().T                                     # c_t × r
    support_map = z @ w.conj().T @ b_s.conj().T
    fid = float(min(np.sum(sing) ** 2, 1.0))
    return UhlmannIsometry(support_map, b_s, z, c_s, c_t, junk, fid)


def _as_fixed_matrix(psi: PureState, fixed: Sequence[str]) -> Tuple[np.ndarray, List[str]]:
    rest = psi.layout.complement(fixed)
    ordered = permute(psi, list(fixed) + rest)
    return ordered.vector.reshape(psi.layout.dim_of(fixed), -1), rest


def uhlmann_isometry(source: PureState, target: PureState, fixed: LabelSet) -> UhlmannIsometry:
    """
    Isometry V on the complement of `fixed` maximizing |⟨target|(id⊗V)|source⟩|.

    The achieved fidelity equals F(ρ^src_fixed, ρ^tgt_fixed).
    """
    src_fixed = source.layout.check_labels(fixed)
    tgt_fixed = target.layout.check_labels(fixed)
    if [source.layout.dim(x) for x in src_fixed] != [target.layout.dim(x) for x in src_fixed] or src_fixed != tgt_fixed:
        raise LayoutError("fixed factors must have equal dimensions in source and target", src_fixed)
    s_mat, _ = _as_fixed_matrix(source, src_fixed)
    t_mat, _ = _as_fixed_matrix(target, src_fixed)
    return _uhlmann_from_matrices(s_mat, t_mat)


# -------------------------
# Merging condition
# -------------------------
def merging_condition(outcomes: Sequence[BlockOutcome], rho_r: DensityOperator, L: int,
                      a1_label: str = "A1") -> float:
    """Σ_j p_j ‖ρ^j_{A1R} − τ_{A1} ⊗ ρ_R‖₁ over outcomes above the zero cutoff."""
    total = 0.0
    for o in outcomes:
        if o.probability <= ZERO_PROBABILITY or o.state is None:
            continue
        layout = o.state.layout
        if layout.dim(a1_label) != L:
            raise DimensionError(f"outcome factor '{a1_label}' has dim {layout.dim(a1_label)}, expected {L}")
        product = embed(rho_r.matrix, rho_r.layout.labels, layout) / L
        total += o.probability * trace_norm(o.state.matrix - product, hermitian=True)
    return float(total)


# -------------------------
# Converse bounds
# -------------------------
def zero_error_bound(psi_abr: PureState, split: Tuple[str, str, str] = tuple(DEFAULT_SPLIT)) -> float:
    """−H_min(ρ_AR|ρ_R); the max-entropy form H_max(ρ_AB|B) must agree."""
    terms = duality_terms(psi_abr, split)
    if terms.gap > 1e-6:
        logger.warning(f"⚠️ zero_error_bound forms disagree by {terms.gap:.3e}")
    return 0.0 - terms.h_min_ar_given_rho_r


def eps_error_bound(psi_abr: PureState, error: float, split: Tuple[str, str, str] = tuple(DEFAULT_SPLIT)) -> float:
    """−H_min^{√e}(ρ_AR|R); for √e ≥ 1 the whole state space is allowed and the bound is −log d_A."""
    if error < 0:
        raise InvalidParameterError(f"error must be >= 0, got {error}")
    a, _, r = split
    radius = math.sqrt(error)
    if radius >= 1.0:
        return float(-np.log2(psi_abr.layout.dim(a)))
    rho_ar = partial_trace(psi_abr, [a, r])
    return 0.0 - h_min_smooth_cond(rho_ar, [r], radius).bits


@dataclass(frozen=True)
class MonotonicityWitness:
    before: float
    after: float

    @property
    def holds(self) -> bool:
        return self.before >= self.after - 1e-7


def monotonicity_witness(rho_ar: DensityOperator, sigma_r: DensityOperator, instrument: Instrument,
                         a: str = "A", flag_label: str = "X") -> MonotonicityWitness:
    """h_min_rel(ρ_AR|σ_R) before and h_min_rel(ρ′_ARX|σ_R ⊗ ρ_X) after a local instrument on A."""
    before = h_min_rel(rho_ar, sigma_r).bits
    result = apply_instrument(instrument, rho_ar, a, flag_label)
    after = h_min_rel(result.state, tensor(sigma_r, result.flag)).bits
    witness = MonotonicityWitness(before, after)
    if not witness.holds:
        logger.warning(f"⚠️ Monotonicity violated: before {before:.9f} < after {after:.9f}")
    return witness


@dataclass(frozen=True)
class CostWindow:
    lower: float
    upper: float
    eps_prime_range: Tuple[float, float]


def cost_window(psi_abr: PureState, eps: float, split: Tuple[str, str, str] = tuple(DEFAULT_SPLIT)) -> CostWindow:
    """Converse at error ε next to the corollary cost at ε; ε′ ranges over [ε²/64, √ε]."""
    eps = _check_open_eps(eps)
    a, _, r = split
    rho_ar = partial_trace(psi_abr, [a, r])
    upper = plan_cost(rho_ar, eps, "corollary", [r]).target_bits
    return CostWindow(eps_error_bound(psi_abr, eps, split), upper, (eps * eps / 64.0, math.sqrt(eps)))


# -------------------------
# Protocol simulation
# -------------------------
def _merge_target(psi: np.ndarray, L: int) -> np.ndarray:
    """Φ_L ⊗ ψ_{B′BR} as a (A1 R) × (B1 B′ B) matrix."""
    d_a, d_b, d_r = psi.shape
    phi = np.eye(L, dtype=complex) / math.sqrt(L)
    t = np.einsum("xy,pbr->xrypb", phi, psi)
    return t.reshape(L * d_r, L * d_a * d_b)


class MergingSimulator:
    """
    Runs the protocol on dense tensors; one run is sequential.
    """

    def __init__(self, max_protocol_dim: Optional[int] = None):
        if max_protocol_dim is None:
            max_protocol_dim = get_config_sync().PROTOCOL.MAX_PROTOCOL_DIM
        self.max_protocol_dim = int(max_protocol_dim)
        logger.debug(f"MergingSimulator initialized (max dim {self.max_protocol_dim})")

    def protocol_dim(self, task: MergeTask) -> int:
        a, b, r = task.split
        layout = task.psi_abr.layout
        d_alice = layout.dim(a) * task.K
        n_blocks = -(-d_alice // task.L)
        return n_blocks * task.L * layout.dim(b) * task.K * layout.dim(r)

    def run_protocol(self, task: MergeTask) -> MergeOutcome:
        """
        Executes one seeded run.

        Returns:
            MergeOutcome with the final state on (A1, B1, B′, B, R), the error and the
            merging-condition value of the same run
        """
        a, b, r = task.split
        layout = task.psi_abr.layout
        size = self.protocol_dim(task)
        if size > self.max_protocol_dim:
            logger.warning(f"⚠️ Protocol refused: {size} amplitudes > {self.max_protocol_dim}")
            raise DimensionError("post-measurement tensor too large", size, self.max_protocol_dim)

        d_a, d_b, d_r = layout.dim(a), layout.dim(b), layout.dim(r)
        K, L = task.K, task.L
        psi = permute(task.psi_abr, [a, b, r]).vector.reshape(d_a, d_b, d_r)

        rng = np.random.default_rng(task.seed)
        m = build_measurement(d_a * K, L, rng, task.seed)
        ops = m.stacked().reshape(m.N, L, d_a, K)
        # (j, A1, B, B0, R)
        branches = np.einsum("jlak,abr->jlbkr", ops, psi) / math.sqrt(K)
        probs = np.real(np.einsum("jlbkr,jlbkr->j", branches, branches.conj()))

        target = _merge_target(psi, L)
        c_t = target.shape[1]
        final = np.zeros((L * d_r * c_t, L * d_r * c_t), dtype=complex)
        isometries = []
        outcomes = []
        a1r_layout = SystemLayout.of(("A1", L), (r, d_r))
        for j in range(m.N):
            p = float(probs[j])
            if p <= ZERO_PROBABILITY:
                isometries.append(_uhlmann_from_matrices(np.zeros((L * d_r, d_b * K), dtype=complex), target))
                outcomes.append(BlockOutcome(p, None, np.zeros((L * d_r, L * d_r), dtype=complex), a1r_layout))
                continue
            # fixed (A1, R) × complement (B, B0)
            s_mat = branches[j].transpose(0, 3, 1, 2).reshape(L * d_r, d_b * K) / math.sqrt(p)
            iso = _uhlmann_from_matrices(s_mat, target)
            isometries.append(iso)
            out = iso.apply(s_mat).reshape(-1)
            final += p * np.outer(out, out.conj())
            reduced = hermitize(s_mat @ s_mat.conj().T)
            outcomes.append(BlockOutcome(p, DensityOperator(a1r_layout, reduced), p * reduced, a1r_layout))

        t_vec = target.reshape(-1)
        error = trace_norm(hermitize(final) - np.outer(t_vec, t_vec.conj()), hermitian=True)
        rho_r = partial_trace(task.psi_abr, [r])
        condition = merging_condition(outcomes, rho_r, L)

        out_layout = SystemLayout.of(("A1", L), (r, d_r), ("B1", L), ("Bp", d_a), (b, d_b))
        final_state = permute(DensityOperator(out_layout, hermitize(final) / np.real(np.trace(final))),
                              ["A1", "B1", "Bp", b, r])
        target_state = permute(PureState(out_layout, t_vec), ["A1", "B1", "Bp", b, r])

        outcome = MergeOutcome(task, probs, tuple(isometries), final_state, target_state, float(error), condition)
        get_metrics().record_protocol_run(chain_ok=outcome.chain_ok)
        if not outcome.chain_ok:
            logger.warning(f"⚠️ Chain check failed: error {error:.6f}, condition {condition:.6f}")
        logger.debug(f"🔄 Protocol run seed={task.seed}: error {error:.6f}, condition {condition:.6f}")
        return outcome

    def merge_record(self, state_id: str, psi_abr: PureState, plan: CostPlan, seed: int,
                     split: Tuple[str, str, str] = tuple(DEFAULT_SPLIT)) -> MergeRecord:
        """One run plus the converse bound at its achieved error."""
        outcome = self.run_protocol(MergeTask(psi_abr, plan.K, plan.L, plan.eps, seed, split))
        lower = eps_error_bound(psi_abr, outcome.error, split)
        record = MergeRecord(state_id, seed, plan.K, plan.L, float(plan.cost_bits), plan.eps,
                             outcome.condition_value, outcome.error, plan.guarantee, lower)
        if not record.converse_ok:
            get_metrics().record_converse_violation()
            logger.error(f"❌ Converse violated for {state_id} seed {seed}: cost {record.cost_bits} < {lower:.6f}")
        return record

    def merge_sweep(self, states: Mapping[str, PureState], seeds: Sequence[int], eps: float,
                    mode: str = "nonsmooth", split: Tuple[str, str, str] = tuple(DEFAULT_SPLIT)) -> List[MergeRecord]:
        """Plans once per state, then runs every seed in order."""
        a, _, r = split
        records = []
        for state_id, psi in states.items():
            plan = plan_cost(partial_trace(psi, [a, r]), eps, mode, [r])
            for seed in seeds:
                records.append(self.merge_record(state_id, psi, plan, seed, split))
        ok = sum(rec.within_guarantee for rec in records)
        logger.info(f"📊 merge_sweep: {ok}/{len(records)} runs within guarantee")
        return records


# Global instance
_merging_simulator_instance: Optional[MergingSimulator] = None
_simulator_lock = asyncio.Lock()


def get_merging_simulator_sync() -> MergingSimulator:
    global _merging_simulator_instance
    if _merging_simulator_instance is None:
        _merging_simulator_instance = MergingSimulator()
        logger.info("✅ MergingSimulator created")
    return _merging_simulator_instance


async def get_merging_simulator() -> MergingSimulator:
    """Get or create the global simulator (async)."""
    async with _simulator_lock:
        return get_merging_simulator_sync()


def reset_merging_simulator() -> None:
    global _merging_simulator_instance
    _merging_simulator_instance = None


def run_protocol(task: MergeTask) -> MergeOutcome:
    return get_merging_simulator_sync().run_protocol(task)


def merge_sweep(states: Mapping[str, PureState], seeds: Sequence[int], eps: float,
                mode: str = "nonsmooth", split: Tuple[str, str, str] = tuple(DEFAULT_SPLIT)) -> List[MergeRecord]:
    return get_merging_simulator_sync().merge_sweep(states, seeds, eps, mode, split)
