# analysis/entropies.py
"""
Non-smooth entropy measures (bits): min-, max-, collision and von Neumann
entropies, relative to a fixed σ_B and conditional (optimized over σ_B).

Conditioning labels always name the conditioned-on subsystem (the "B" side);
the complement of the conditioning labels is the "A" side.

Metodlar:
- h_min_rel   - eigenvalue formula with the generalized inverse, plus a bisection path
- h_min_cond  - SDP: minimize tr X s.t. id_A ⊗ X ⪰ ρ_AB
- h_max_cond  - closed form log λ_max(tr_A ρ⁰)
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from utils.qcore.qcore_constants import (
    BISECTION_MAX_STEPS,
    BISECTION_TOL,
    METHODS,
    RANK_CUTOFF,
    SDP_STATUSES,
    TOL_PSD,
)
from utils.qcore.qcore_exceptions import DimensionError, InvalidParameterError, LayoutError
from utils.qcore.qcore_ops import (
    embed,
    generalized_inverse_power,
    hermitize,
    partial_trace,
    partial_trace_matrix,
    support_basis,
    support_projector,
)
from utils.qcore.qcore_sdp import SdpBuilder, SdpProblem, solve
from utils.qcore.qcore_types import DensityOperator, LabelSet, PureState, as_label_list
from utils.qcore.qcore_utils import hermitian_basis, partial_trace_superop, vec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EntropyValue:
    """Entropy in bits plus the optimizer that attains it (σ_B for min-entropies)."""
    bits: float
    witness: Optional[np.ndarray] = None
    method: str = "eigen"
    gap: float = 0.0
    status: str = "optimal"
    diagnostic: str = ""

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParameterError(f"unknown entropy method '{self.method}', expected one of {METHODS}")
        if self.status not in SDP_STATUSES and self.status != "unbounded":
            raise InvalidParameterError(f"unknown entropy status '{self.status}'")

    @property
    def unbounded(self) -> bool:
        return bool(np.isneginf(self.bits))


def _unbounded(diagnostic: str) -> EntropyValue:
    logger.warning(f"⚠️ Unbounded entropy: {diagnostic}")
    return EntropyValue(float("-inf"), None, "unbounded", 0.0, "unbounded", diagnostic)


def _positive_eigs(matrix: np.ndarray) -> np.ndarray:
    vals = np.linalg.eigvalsh(hermitize(matrix))
    top = max(float(vals[-1]), 0.0)
    return vals[vals > RANK_CUTOFF * top] if top > 0 else np.zeros(0)


# -------------------------
# Unconditional
# -------------------------
def h_min(rho: DensityOperator) -> float:
    """−log λ_max(ρ)."""
    return float(-np.log2(np.linalg.eigvalsh(rho.matrix)[-1]))


def h_max(rho: DensityOperator) -> float:
    """log rank(ρ) with the global cutoff."""
    return float(np.log2(len(_positive_eigs(rho.matrix))))


def von_neumann(rho: DensityOperator) -> float:
    vals = _positive_eigs(rho.matrix)
    return float(-np.sum(vals * np.log2(vals)))


def cond_von_neumann(rho_ab: DensityOperator, cond: LabelSet) -> float:
    """S(AB) − S(B)."""
    return von_neumann(rho_ab) - von_neumann(partial_trace(rho_ab, cond))


# -------------------------
# Relative to σ_B
# -------------------------
def _sigma_labels(rho: DensityOperator, sigma: DensityOperator) -> List[str]:
    labels = rho.layout.check_labels(sigma.layout.labels)
    if labels != sigma.layout.labels:
        raise LayoutError("σ factors must appear in the same order as in ρ", sigma.layout.labels)
    if rho.layout.subset(labels).dims != sigma.layout.dims:
        raise DimensionError("σ dimensions do not match the conditioning factors of ρ")
    if len(labels) == len(rho.layout):
        raise LayoutError("conditioning must leave a nonempty A side", labels)
    return labels


def support_violation(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Weight of ρ_B outside supp(σ_B); zero means supp ρ_B ⊆ supp σ_B."""
    labels = _sigma_labels(rho, sigma)
    rho_b = partial_trace(rho, labels).matrix
    outside = np.eye(sigma.dim) - support_projector(sigma.matrix)
    return float(np.real(np.trace(outside @ rho_b)))


def _supported(rho: DensityOperator, sigma: DensityOperator) -> bool:
    return support_violation(rho, sigma) <= RANK_CUTOFF * 10


def h_min_rel(rho_ab: DensityOperator, sigma_b: DensityOperator) -> EntropyValue:
    """
    −log λ_max((id⊗σ^{−1/2}) ρ (id⊗σ^{−1/2})) with the generalized inverse.

    Args:
        rho_ab: State on A ⊗ B (any factor order)
        sigma_b: Density operator on the conditioning factors

    Returns:
        EntropyValue; −∞ (status "unbounded") when supp ρ_B ⊄ supp σ_B
    """
    labels = _sigma_labels(rho_ab, sigma_b)
    if not _supported(rho_ab, sigma_b):
        return _unbounded("supp(rho_B) is not contained in supp(sigma_B)")
    w = embed(generalized_inverse_power(sigma_b, -0.5), labels, rho_ab.layout)
    lam = float(np.linalg.eigvalsh(hermitize(w @ rho_ab.matrix @ w))[-1])
    return EntropyValue(float(-np.log2(lam)), sigma_b.matrix, "eigen")


def h_min_rel_bisect(rho_ab: DensityOperator, sigma_b: DensityOperator,
                     tol: float = BISECTION_TOL) -> EntropyValue:
    """Smallest λ with λ·id⊗σ − ρ ⪰ 0 on supp(id⊗σ), by bisection on λ."""
    labels = _sigma_labels(rho_ab, sigma_b)
    if not _supported(rho_ab, sigma_b):
        return _unbounded("supp(rho_B) is not contained in supp(sigma_B)")
    big = embed(sigma_b.matrix, labels, rho_ab.layout)
    v = support_basis(big)
    e_r = v.conj().T @ big @ v
    rho_r = v.conj().T @ rho_ab.matrix @ v

    def feasible(lam: float) -> bool:
        return float(np.linalg.eigvalsh(hermitize(lam * e_r - rho_r))[0]) >= -TOL_PSD * 1e-3

    hi = max(float(np.linalg.eigvalsh(rho_r)[-1]), 1e-300) / float(np.linalg.eigvalsh(hermitize(e_r))[0])
    while not feasible(hi):
        hi *= 2.0
    lo = 0.0
    steps = 0
    # Aralığı daralt
    while hi - lo > tol * hi and steps < BISECTION_MAX_STEPS:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
        steps += 1
    return EntropyValue(float(-np.log2(hi)), sigma_b.matrix, "bisection", gap=float(np.log2(hi / lo)) if lo > 0 else float("inf"))


def h_max_rel(rho_ab: DensityOperator, sigma_b: DensityOperator) -> float:
    """log tr((id⊗σ_B) ρ⁰)."""
    labels = _sigma_labels(rho_ab, sigma_b)
    proj = support_projector(rho_ab.matrix)
    value = float(np.real(np.trace(embed(sigma_b.matrix, labels, rho_ab.layout) @ proj)))
    return float(np.log2(value)) if value > 0 else float("-inf")


def h2_rel(rho_ab: DensityOperator, sigma_b: DensityOperator) -> EntropyValue:
    """Collision entropy −log tr(((id⊗σ^{−1/4}) ρ (id⊗σ^{−1/4}))²)."""
    labels = _sigma_labels(rho_ab, sigma_b)
    if not _supported(rho_ab, sigma_b):
        return _unbounded("supp(rho_B) is not contained in supp(sigma_B)")
    w = embed(generalized_inverse_power(sigma_b, -0.25), labels, rho_ab.layout)
    m = hermitize(w @ rho_ab.matrix @ w)
    purity = float(np.real(np.vdot(m, m)))
    return EntropyValue(float(-np.log2(purity)), sigma_b.matrix, "closed-form")


# -------------------------
# Conditional (optimized over σ_B)
# -------------------------
def min_entropy_problem(rho_ab: DensityOperator, cond: LabelSet) -> SdpProblem:
    """
    Standard form of: minimize tr X s.t. id_A ⊗ X − S = ρ, X, S ⪰ 0.

    Slater: X = c·id, S = c·id − ρ ≻ 0 for c > λ_max(ρ); dual Y = id/(2 d_A) is interior.
    """
    layout = rho_ab.layout
    kept = layout.check_labels(cond)
    if not kept or len(kept) == len(layout):
        raise LayoutError("conditioning must be a proper nonempty label set", as_label_list(cond))
    keep_idx = [layout.index(label) for label in kept]
    d, d_b = layout.total_dim, layout.dim_of(kept)
    basis = hermitian_basis(d)
    trace_a = partial_trace_superop(layout.dims, keep_idx)
    rhs = np.real(basis.conj() @ vec(rho_ab.matrix))
    builder = SdpBuilder()
    builder.add_block("X", d_b, cost=np.eye(d_b))
    builder.add_block("S", d)
    builder.add_rows({"X": basis @ trace_a.T, "S": -basis}, rhs)
    return builder.build()


def h_min_cond(rho_ab: DensityOperator, cond: LabelSet) -> EntropyValue:
    """
    H_min(A|B) = −log min{tr X : id_A ⊗ X ⪰ ρ_AB}; witness σ_B = X / tr X.

    Non-optimal solves still return the best available bound with the status attached.
    """
    problem = min_entropy_problem(rho_ab, cond)
    sol = solve(problem)
    if not sol.primal:
        logger.error(f"❌ h_min_cond SDP failed: {sol.status}")
        return EntropyValue(float("nan"), None, "sdp", float("nan"), sol.status, "no primal iterate")
    x = sol.block("X")
    tr_x = float(np.real(np.trace(x)))
    return EntropyValue(float(-np.log2(tr_x)), x / tr_x, "sdp", sol.gap, sol.status)


def h_max_cond(rho_ab: DensityOperator, cond: LabelSet) -> float:
    """log λ_max(tr_A ρ⁰); the supremum of a linear functional over density σ_B."""
    layout = rho_ab.layout
    kept = layout.check_labels(cond)
    proj = support_projector(rho_ab.matrix)
    reduced = partial_trace_matrix(proj, layout.dims, [layout.index(label) for label in kept])
    return float(np.log2(np.linalg.eigvalsh(hermitize(reduced))[-1]))


def h_min_rel_best(rho_ab: DensityOperator, candidates: Sequence[DensityOperator]) -> Tuple[EntropyValue, int]:
    """Best h_min_rel over candidate σ_B; candidates without supp ρ_B ⊆ supp σ_B are skipped."""
    best: Optional[EntropyValue] = None
    best_idx = -1
    for idx, sigma in enumerate(candidates):
        if not _supported(rho_ab, sigma):
            logger.debug(f"Candidate {idx} skipped (support)")
            continue
        value = h_min_rel(rho_ab, sigma)
        if best is None or value.bits > best.bits:
            best, best_idx = value, idx
    if best is None:
        return _unbounded("no candidate contains supp(rho_B)"), -1
    return best, best_idx


def h_min_cond_witness_check(value: EntropyValue, rho_ab: DensityOperator, cond: LabelSet) -> float:
    """|h_min_rel(ρ | witness) − value| for the σ_B returned by h_min_cond."""
    if value.witness is None:
        return float("nan")
    kept = rho_ab.layout.check_labels(cond)
    sigma = DensityOperator(rho_ab.layout.subset(kept), hermitize(value.witness))
    return abs(h_min_rel(rho_ab, sigma).bits - value.bits)


# -------------------------
# Duality for tripartite pure states
# -------------------------
@dataclass(frozen=True)
class DualityTerms:
    h_min_ar_given_rho_r: float
    h_max_ab_given_b: float

    @property
    def gap(self) -> float:
        return abs(self.h_min_ar_given_rho_r + self.h_max_ab_given_b)


def duality_terms(psi_abr: PureState, split: Tuple[str, str, str] = ("A", "B", "R")) -> DualityTerms:
    """H_min(ρ_AR|ρ_R) and H_max(ρ_AB|B) computed by independent code paths."""
    a, b, r = split
    rho_ar = partial_trace(psi_abr, [a, r])
    rho_r = partial_trace(psi_abr, [r])
    rho_ab = partial_trace(psi_abr, [a, b])
    return DualityTerms(h_min_rel(rho_ar, rho_r).bits, h_max_cond(rho_ab, [b]))


def duality_gap(psi_abr: PureState, split: Tuple[str, str, str] = ("A", "B", "R")) -> float:
    """|H_min(ρ_AR|ρ_R) + H_max(ρ_AB|B)|."""
    return duality_terms(psi_abr, split).gap
