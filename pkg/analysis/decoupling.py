# analysis/decoupling.py
"""
Random block measurements and the empirical decoupling check.

Bir ölçüm: Haar U on A, then N orthogonal blocks of dimension L (the last one may be
smaller, L′ = d_A − (N−1)L), each mapped onto a fresh L-dimensional factor A1.
The estimate compares the Haar average of ‖(d_A/L)·ω^j − τ_A1 ⊗ ρ_R‖₁ with
2^{−½(H₂(ρ_AR|σ_R) − log L)}.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from analysis.entropies import h2_rel, h_min_rel, support_violation
from utils.qcore.qcore_constants import MEAN_STATE_CONSTANT, RANK_CUTOFF, STDERR_GATE, ZERO_PROBABILITY
from utils.qcore.qcore_exceptions import DimensionError, InvalidParameterError
from utils.qcore.qcore_metrics import get_metrics
from utils.qcore.qcore_ops import apply_local_matrix, embed, haar_unitary, hermitize, partial_trace, trace_norm
from utils.qcore.qcore_types import DensityOperator, Instrument, SystemLayout

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BlockMeasurement:
    """P_j = Q_j U, each an L × d_A matrix; the residual block is zero-padded into A1."""
    d_A: int
    L: int
    N: int
    residual: int
    unitary: np.ndarray
    operators: Tuple[np.ndarray, ...]
    seed: Optional[int] = None

    @property
    def exact(self) -> bool:
        return self.residual == self.L

    def completeness_error(self) -> float:
        total = sum(p.conj().T @ p for p in self.operators)
        return float(np.max(np.abs(total - np.eye(self.d_A))))

    def stacked(self) -> np.ndarray:
        """(N, L, d_A) array of all block operators."""
        return np.stack(self.operators)

    def as_instrument(self) -> Instrument:
        return Instrument(tuple((p,) for p in self.operators))


@dataclass(frozen=True, eq=False)
class BlockOutcome:
    """One measurement outcome: p_j, the normalized state (None below the zero cutoff) and ω^j."""
    probability: float
    state: Optional[DensityOperator]
    unnormalized: np.ndarray
    layout: SystemLayout


@dataclass(frozen=True)
class DecouplingReport:
    d_A: int
    L: int
    N: int
    samples: int
    mean: float
    stderr: float
    block_sum_mean: float
    bound_h2: float
    bound_hmin: float
    mean_state_error: float
    exact: bool
    supported: bool = True

    @property
    def margin(self) -> float:
        return self.bound_h2 - self.mean

    def within_bound(self, gate: float = STDERR_GATE) -> bool:
        return self.mean <= self.bound_h2 + gate * self.stderr

    @property
    def mean_state_converged(self) -> bool:
        """Sample mean of ω^0 within C/√samples of (L/d_A)·τ⊗ρ_R."""
        return self.mean_state_error <= MEAN_STATE_CONSTANT / np.sqrt(self.samples)

    def to_row(self, state_id: str) -> Dict[str, Any]:
        return {
            "d_A": self.d_A,
            "L": self.L,
            "N": self.N,
            "state_id": state_id,
            "samples": self.samples,
            "mean": self.mean,
            "stderr": self.stderr,
            "bound_h2": self.bound_h2,
            "bound_hmin": self.bound_hmin,
            "margin": self.margin,
        }


# -------------------------
# Measurement
# -------------------------
def build_measurement(d_A: int, L: int, rng: np.random.Generator, seed: Optional[int] = None) -> BlockMeasurement:
    """
    Haar U followed by the blocks span{|jL⟩, …, |jL + L_j − 1⟩}.

    Args:
        d_A: Dimension of the measured system
        L: Block size, 1 ≤ L ≤ d_A
        rng: Source of the Haar unitary

    Returns:
        BlockMeasurement with N = ⌈d_A/L⌉ blocks
    """
    if d_A < 1 or not 1 <= L <= d_A:
        raise InvalidParameterError(f"need 1 <= L <= d_A, got d_A={d_A}, L={L}")
    n_blocks = -(-d_A // L)
    residual = d_A - (n_blocks - 1) * L
    u = haar_unitary(d_A, rng)
    operators = []
    for j in range(n_blocks):
        size = L if j < n_blocks - 1 else residual
        # Q_j U: rows jL … jL + size − 1 of U, zero rows for the padding
        op = np.zeros((L, d_A), dtype=complex)
        op[:size] = u[j * L:j * L + size]
        operators.append(op)
    if residual != L:
        logger.debug(f"Residual block: d_A={d_A}, L={L}, L'={residual}")
    return BlockMeasurement(d_A, L, n_blocks, residual, u, tuple(operators), seed)


def decoupling_trial(rho_ar: DensityOperator, m: BlockMeasurement, a: str = "A",
                     a1_label: str = "A1") -> List[BlockOutcome]:
    """Applies every P_j on factor `a`; A is replaced by A1 in the output layout."""
    axis = rho_ar.layout.index(a)
    if rho_ar.layout.dims[axis] != m.d_A:
        raise DimensionError(f"measurement built for d_A={m.d_A}, factor '{a}' has dim {rho_ar.layout.dims[axis]}")
    factors = list(rho_ar.layout.factors)
    factors[axis] = (a1_label, m.L)
    layout = SystemLayout(tuple(factors))
    outcomes = []
    for p in m.operators:
        omega = hermitize(apply_local_matrix(p, rho_ar.matrix, rho_ar.layout.dims, axis))
        prob = float(np.real(np.trace(omega)))
        state = DensityOperator(layout, hermitize(omega / prob)) if prob > ZERO_PROBABILITY else None
        outcomes.append(BlockOutcome(prob, state, omega, layout))
    return outcomes


def _product_target(layout: SystemLayout, a1_label: str, rho_rest: DensityOperator) -> np.ndarray:
    """τ_A1 ⊗ ρ_rest arranged in the outcome layout."""
    l_dim = layout.dim(a1_label)
    return embed(rho_rest.matrix, rho_rest.layout.labels, layout) / l_dim


# -------------------------
# Monte Carlo estimate
# -------------------------
def estimate_decoupling(rho_ar: DensityOperator, sigma_r: DensityOperator, L: int, samples: int,
                        rng: np.random.Generator, a: str = "A") -> DecouplingReport:
    """
    Average over Haar U of the per-block distance ‖(d_A/L)ω^j − τ⊗ρ_R‖₁.

    Samples use independent child streams of `rng`; results are accumulated in sample order.
    The bound is asserted only when L divides d_A.
    """
    if samples < 2:
        raise InvalidParameterError(f"samples must be >= 2, got {samples}")
    rest = rho_ar.layout.complement([a])
    rho_r = partial_trace(rho_ar, rest)
    d_A = rho_ar.layout.dim(a)

    supported = support_violation(rho_ar, sigma_r) <= RANK_CUTOFF * 10
    if not supported:
        logger.warning("⚠️ supp(rho_R) is not contained in supp(sigma_R); bound is vacuous")
    h2 = h2_rel(rho_ar, sigma_r).bits
    hmin = h_min_rel(rho_ar, sigma_r).bits
    log_l = float(np.log2(L))
    bound_h2 = float(2.0 ** (-0.5 * (h2 - log_l)))
    bound_hmin = float(2.0 ** (-0.5 * (hmin - log_l)))

    per_block = np.zeros(samples)
    block_sum = np.zeros(samples)
    mean_state = None
    target = None
    scale = d_A / L
    for idx, child in enumerate(rng.spawn(samples)):
        m = build_measurement(d_A, L, child)
        outcomes = decoupling_trial(rho_ar, m, a)
        if target is None:
            target = _product_target(outcomes[0].layout, "A1", rho_r)
        dists = [trace_norm(scale * o.unnormalized - target, hermitian=True) for o in outcomes]
        per_block[idx] = float(np.mean(dists))
        block_sum[idx] = float(np.sum(dists))
        first = outcomes[0].unnormalized
        mean_state = first.copy() if mean_state is None else mean_state + first

    mean_state = mean_state / samples
    mean_state_error = trace_norm(mean_state - target / scale, hermitian=True)
    mean = float(per_block.mean())
    stderr = float(per_block.std(ddof=1) / np.sqrt(samples))
    get_metrics().record_samples(samples)

    n_blocks = -(-d_A // L)
    report = DecouplingReport(
        d_A=d_A, L=L, N=n_blocks, samples=samples, mean=mean, stderr=stderr,
        block_sum_mean=float(block_sum.mean()), bound_h2=bound_h2, bound_hmin=bound_hmin,
        mean_state_error=mean_state_error, exact=(d_A % L == 0), supported=supported,
    )
    if not report.mean_state_converged:
        logger.warning(f"⚠️ Mean outcome state still {mean_state_error:.4f} away after {samples} samples")
    if report.exact and not report.within_bound():
        logger.warning(f"⚠️ Decoupling bound exceeded: d_A={d_A}, L={L}, mean {mean:.4f} > {bound_h2:.4f}")
    else:
        logger.debug(f"📊 Decoupling d_A={d_A}, L={L}: mean {mean:.4f} ± {stderr:.4f}, bound {bound_h2:.4f}")
    return report
