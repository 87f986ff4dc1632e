# analysis/smoothing.py
"""
ε-smooth min- and max-entropies over the half-trace-distance ball of normalized states.

The ball ½‖ρ̄ − ρ‖₁ ≤ ε is encoded with split variables ρ̄ − ρ = P − Q, P, Q ⪰ 0,
tr P + tr Q ≤ 2ε. Conditional smoothing is one joint SDP in (X, ρ̄, P, Q); the relative
version optimizes λ with λ·id⊗σ ⪰ ρ̄. Both have bisection oracles with a feasibility SDP.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize
import scipy.sparse as sp

from analysis.entropies import (
    EntropyValue,
    _sigma_labels,
    cond_von_neumann,
    h_max_rel,
    h_min_cond,
    h_min_rel,
)
from utils.qcore.qcore_constants import (
    BISECTION_MAX_STEPS,
    DEFAULT_CONVERGENCE_MAX_DIM,
    TOL_BALL,
)
from utils.qcore.qcore_exceptions import DimensionError, InvalidParameterError, LayoutError, StateValidationError
from utils.qcore.qcore_ops import (
    embed,
    hermitize,
    partial_trace,
    support_basis,
    tensor_all,
    trace_distance,
)
from utils.qcore.qcore_sdp import SdpBuilder, SdpSolution, solve
from utils.qcore.qcore_types import DensityOperator, LabelSet, PureState, as_label_list, check_density_matrix
from utils.qcore.qcore_utils import hermitian_basis, partial_trace_superop, vec

logger = logging.getLogger(__name__)

# Bisection oracles için varsayılan göreli tolerans
ORACLE_TOL = 1e-6
ORACLE_SLACK = 1e-9


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0.0 <= eps < 1.0:
        raise InvalidParameterError(f"eps must lie in [0, 1), got {eps}")
    return eps


@dataclass(frozen=True)
class SmoothingBall:
    """Normalized states within half trace distance ε of the center."""
    center: DensityOperator
    epsilon: float

    def __post_init__(self):
        _check_eps(self.epsilon)

    def distance(self, rho_bar: np.ndarray) -> float:
        return trace_distance(self.center.matrix, rho_bar)

    def contains(self, rho_bar: np.ndarray) -> bool:
        try:
            check_density_matrix(np.asarray(rho_bar, dtype=complex), "smoothed state")
        except StateValidationError:
            return False
        return self.distance(rho_bar) <= self.epsilon + TOL_BALL

    def project_witness(self, rho_bar: np.ndarray) -> np.ndarray:
        """Clips to a density operator and pulls it back toward the center if it left the ball."""
        vals, vecs = np.linalg.eigh(hermitize(np.asarray(rho_bar, dtype=complex)))
        vals = np.clip(vals, 0.0, None)
        fixed = hermitize((vecs * (vals / vals.sum())) @ vecs.conj().T)
        dist = self.distance(fixed)
        if dist > self.epsilon:
            logger.debug(f"Witness pulled back into the ball (distance {dist:.3e})")
            center = self.center.matrix
            fixed = hermitize(center + (fixed - center) * (self.epsilon / dist))
        return fixed


# -------------------------
# SDP assembly
# -------------------------
def _ball_rows(builder: SdpBuilder, rho: DensityOperator, basis: sp.csr_matrix,
               lift: Optional[sp.csr_matrix], n_bar: int) -> None:
    """ρ̄ − P + Q = ρ (ρ̄ possibly lifted from a support subspace) and tr ρ̄ = 1."""
    bar_rows = basis if lift is None else basis @ lift
    rhs = np.real(basis.conj() @ vec(rho.matrix))
    builder.add_rows({"rho_bar": bar_rows, "P": -basis, "Q": basis}, rhs)
    builder.add_row({"rho_bar": np.eye(n_bar)}, 1.0)


def _slack_row(builder: SdpBuilder, d: int, eps: float) -> None:
    builder.add_row({"P": np.eye(d), "Q": np.eye(d), "s": np.ones((1, 1))}, 2.0 * eps)


def _cond_data(rho: DensityOperator, cond: LabelSet):
    layout = rho.layout
    kept = layout.check_labels(cond)
    if not kept or len(kept) == len(layout):
        raise LayoutError("conditioning must be a proper nonempty label set", as_label_list(cond))
    keep_idx = [layout.index(label) for label in kept]
    return kept, layout.dim_of(kept), partial_trace_superop(layout.dims, keep_idx)


def _rel_data(rho: DensityOperator, sigma: DensityOperator):
    """Support isometry W of id⊗σ, the compressed E = W†(id⊗σ)W and the lift W ⊗ W̄."""
    labels = _sigma_labels(rho, sigma)
    big = embed(sigma.matrix, labels, rho.layout)
    w = support_basis(big)
    e_c = hermitize(w.conj().T @ big @ w)
    lift = sp.csr_matrix(np.kron(w, w.conj()))
    return w, e_c, lift


def _witness(ball: SmoothingBall, sol: SdpSolution, w: Optional[np.ndarray] = None) -> np.ndarray:
    rho_bar = sol.block("rho_bar")
    if w is not None:
        rho_bar = w @ rho_bar @ w.conj().T
    fixed = ball.project_witness(rho_bar)
    if not ball.contains(fixed):
        logger.error("❌ Smoothed witness failed the ball check")
    return fixed


# -------------------------
# Smooth min-entropy
# -------------------------
def h_min_smooth_cond(rho_ab: DensityOperator, cond: LabelSet, eps: float) -> EntropyValue:
    """
    sup over the ε-ball of H_min(A|B) as one SDP:
    minimize tr X s.t. id⊗X − S − ρ̄ = 0, ρ̄ − P + Q = ρ, tr ρ̄ = 1, tr P + tr Q + s = 2ε.

    Args:
        rho_ab: State on A ⊗ B
        cond: Conditioning labels (the B side)
        eps: Smoothing radius in [0, 1)

    Returns:
        EntropyValue whose witness is the optimal smoothed state ρ̄
    """
    eps = _check_eps(eps)
    if eps == 0.0:
        return h_min_cond(rho_ab, cond)
    _, d_b, trace_a = _cond_data(rho_ab, cond)
    d = rho_ab.dim
    basis = hermitian_basis(d)

    builder = SdpBuilder()
    builder.add_block("X", d_b, cost=np.eye(d_b))
    builder.add_block("S", d)
    builder.add_block("rho_bar", d)
    builder.add_block("P", d)
    builder.add_block("Q", d)
    builder.add_block("s", 1)
    builder.add_rows({"X": basis @ trace_a.T, "S": -basis, "rho_bar": -basis}, np.zeros(d * d))
    _ball_rows(builder, rho_ab, basis, None, d)
    _slack_row(builder, d, eps)

    sol = solve(builder.build())
    if not sol.primal:
        logger.error(f"❌ h_min_smooth_cond SDP failed: {sol.status}")
        return EntropyValue(float("nan"), None, "sdp", float("nan"), sol.status, "no primal iterate")
    tr_x = float(np.real(np.trace(sol.block("X"))))
    witness = _witness(SmoothingBall(rho_ab, eps), sol)
    return EntropyValue(float(-np.log2(tr_x)), witness, "sdp", sol.gap, sol.status)


def h_min_smooth_rel(rho_ab: DensityOperator, sigma_b: DensityOperator, eps: float) -> EntropyValue:
    """
    sup over the ε-ball of H_min(ρ̄|σ_B); minimize λ s.t. λ·id⊗σ − S − ρ̄ = 0 and the ball rows.

    ρ̄ is restricted to supp(id⊗σ); when no state of the ball fits there the value is −∞.
    """
    eps = _check_eps(eps)
    if eps == 0.0:
        return h_min_rel(rho_ab, sigma_b)
    w, e_c, lift = _rel_data(rho_ab, sigma_b)
    d, d_c = rho_ab.dim, w.shape[1]
    basis = hermitian_basis(d)
    basis_c = hermitian_basis(d_c)

    builder = SdpBuilder()
    builder.add_block("lam", 1, cost=np.ones((1, 1)))
    builder.add_block("S", d_c)
    builder.add_block("rho_bar", d_c)
    builder.add_block("P", d)
    builder.add_block("Q", d)
    builder.add_block("s", 1)
    lam_col = np.real(basis_c.conj() @ vec(e_c)).reshape(-1, 1)
    builder.add_rows({"lam": lam_col, "S": -basis_c, "rho_bar": -basis_c}, np.zeros(d_c * d_c))
    _ball_rows(builder, rho_ab, basis, lift, d_c)
    _slack_row(builder, d, eps)

    sol = solve(builder.build())
    if sol.status == "infeasible":
        logger.warning("⚠️ No smoothed state fits supp(id⊗σ); value is -inf")
        return EntropyValue(float("-inf"), None, "unbounded", 0.0, "unbounded", "ball misses supp(id⊗σ)")
    if not sol.primal:
        return EntropyValue(float("nan"), None, "sdp", float("nan"), sol.status, "no primal iterate")
    lam = float(np.real(sol.block("lam")[0, 0]))
    witness = _witness(SmoothingBall(rho_ab, eps), sol, w)
    return EntropyValue(float(-np.log2(lam)), witness, "sdp", sol.gap, sol.status)


# -------------------------
# Bisection oracles
# -------------------------
def _min_ball_distance_rel(rho_ab: DensityOperator, w: np.ndarray, e_c: np.ndarray,
                           lift: sp.csr_matrix, lam: float) -> float:
    """min tr(P+Q) over ρ̄ with λ·E ⪰ ρ̄; infeasible counts as +∞."""
    d, d_c = rho_ab.dim, w.shape[1]
    basis = hermitian_basis(d)
    basis_c = hermitian_basis(d_c)
    builder = SdpBuilder()
    builder.add_block("S", d_c)
    builder.add_block("rho_bar", d_c)
    builder.add_block("P", d, cost=np.eye(d))
    builder.add_block("Q", d, cost=np.eye(d))
    builder.add_rows({"S": -basis_c, "rho_bar": -basis_c}, -lam * np.real(basis_c.conj() @ vec(e_c)))
    _ball_rows(builder, rho_ab, basis, lift, d_c)
    sol = solve(builder.build())
    return sol.primal_objective if sol.primal else float("inf")


def _min_ball_distance_cond(rho_ab: DensityOperator, d_b: int, trace_a: sp.csr_matrix, t: float) -> float:
    """min tr(P+Q) over ρ̄ with id⊗X ⪰ ρ̄, tr X = t."""
    d = rho_ab.dim
    basis = hermitian_basis(d)
    builder = SdpBuilder()
    builder.add_block("X", d_b)
    builder.add_block("S", d)
    builder.add_block("rho_bar", d)
    builder.add_block("P", d, cost=np.eye(d))
    builder.add_block("Q", d, cost=np.eye(d))
    builder.add_rows({"X": basis @ trace_a.T, "S": -basis, "rho_bar": -basis}, np.zeros(d * d))
    builder.add_row({"X": np.eye(d_b)}, t)
    _ball_rows(builder, rho_ab, basis, None, d)
    sol = solve(builder.build())
    return sol.primal_objective if sol.primal else float("inf")


def _bisect(feasible, lo: float, hi: float, tol: float) -> Tuple[float, float, int]:
    steps = 0
    while hi - lo > tol * hi and steps < BISECTION_MAX_STEPS:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
        steps += 1
    return lo, hi, steps


def h_min_smooth_rel_bisect(rho_ab: DensityOperator, sigma_b: DensityOperator, eps: float,
                            tol: float = ORACLE_TOL) -> EntropyValue:
    """Bisection on λ; λ is feasible iff the nearest ρ̄ with λ·id⊗σ ⪰ ρ̄ is within ε."""
    eps = _check_eps(eps)
    if eps == 0.0:
        return h_min_rel(rho_ab, sigma_b)
    w, e_c, lift = _rel_data(rho_ab, sigma_b)

    def feasible(lam: float) -> bool:
        return _min_ball_distance_rel(rho_ab, w, e_c, lift, lam) <= 2.0 * eps + ORACLE_SLACK

    base = h_min_rel(rho_ab, sigma_b)
    hi = 2.0 ** (-base.bits) if not base.unbounded else 1.0
    doublings = 0
    while not feasible(hi):
        hi *= 2.0
        doublings += 1
        if doublings > 60:
            return EntropyValue(float("-inf"), None, "unbounded", 0.0, "unbounded", "ball misses supp(id⊗σ)")
    lo = 1.0 / rho_ab.layout.dim_of(rho_ab.layout.complement(sigma_b.layout.labels))
    if hi <= lo:
        return EntropyValue(float(-np.log2(hi)), None, "bisection", 0.0)
    lo, hi, steps = _bisect(feasible, lo, hi, tol)
    logger.debug(f"🔄 smooth rel bisection: {steps} steps, λ ∈ [{lo:.10f}, {hi:.10f}]")
    return EntropyValue(float(-np.log2(hi)), None, "bisection", float(np.log2(hi / lo)))


def h_min_smooth_cond_bisect(rho_ab: DensityOperator, cond: LabelSet, eps: float,
                             tol: float = ORACLE_TOL) -> EntropyValue:
    """Bisection on t = tr X between 1/d_A and the non-smooth optimum."""
    eps = _check_eps(eps)
    kept, d_b, trace_a = _cond_data(rho_ab, cond)
    if eps == 0.0:
        return h_min_cond(rho_ab, kept)
    hi = 2.0 ** (-h_min_cond(rho_ab, kept).bits)
    lo = 1.0 / rho_ab.layout.dim_of(rho_ab.layout.complement(kept))

    def feasible(t: float) -> bool:
        return _min_ball_distance_cond(rho_ab, d_b, trace_a, t) <= 2.0 * eps + ORACLE_SLACK

    if hi <= lo:
        return EntropyValue(float(-np.log2(hi)), None, "bisection", 0.0)
    lo, hi, steps = _bisect(feasible, lo, hi, tol)
    logger.debug(f"🔄 smooth cond bisection: {steps} steps, tr X ∈ [{lo:.10f}, {hi:.10f}]")
    return EntropyValue(float(-np.log2(hi)), None, "bisection", float(np.log2(hi / lo)))


def classical_smooth_h_min(probabilities: Sequence[float], eps: float) -> float:
    """
    Smooth min-entropy of a distribution: cut the top of the histogram down to the level μ
    with Σ (p_i − μ)₊ = ε and pour the mass below; the level never drops under 1/d.
    """
    eps = _check_eps(eps)
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or p.size == 0 or abs(p.sum() - 1.0) > 1e-9 or (p < -1e-12).any():
        raise InvalidParameterError("probabilities must form a distribution")
    top = float(p.max())
    if eps == 0.0:
        mu = top
    else:
        mu = scipy.optimize.brentq(lambda m: float(np.clip(p - m, 0.0, None).sum()) - eps, 0.0, top, xtol=1e-15)
    return float(-np.log2(max(mu, 1.0 / p.size)))


# -------------------------
# Smooth max-entropy (heuristic)
# -------------------------
def h_max_smooth_rel(rho_ab: DensityOperator, sigma_b: DensityOperator, eps: float) -> Tuple[float, str]:
    """
    Upper bound on the smooth max-entropy: drop the smallest eigenvalues of ρ with total
    weight ≤ ε (renormalizing keeps the result at distance = dropped weight) and evaluate h_max_rel.
    """
    eps = _check_eps(eps)
    vals, vecs = np.linalg.eigh(rho_ab.matrix)
    dropped = np.cumsum(vals) <= eps + 1e-12
    keep = ~dropped
    kept_vals = np.clip(vals[keep], 0.0, None)
    truncated = (vecs[:, keep] * (kept_vals / kept_vals.sum())) @ vecs[:, keep].conj().T
    rho_bar = DensityOperator(rho_ab.layout, hermitize(truncated))
    if dropped.any():
        logger.debug(f"h_max truncation dropped {int(dropped.sum())} eigenvalues (weight {vals[dropped].sum():.3e})")
    return h_max_rel(rho_bar, sigma_b), "heuristic"


# -------------------------
# Convergence toward the conditional von Neumann entropy
# -------------------------
@dataclass(frozen=True)
class ConvergencePoint:
    n: int
    eps: float
    value_bits_per_copy: float
    target_bits: float

    @property
    def gap(self) -> float:
        return self.target_bits - self.value_bits_per_copy


def _copies(rho_ar: DensityOperator, a: str, r: str, n: int) -> Tuple[DensityOperator, List[str]]:
    copies = [rho_ar.relabel({a: f"{a}{i}", r: f"{r}{i}"}) for i in range(1, n + 1)]
    return tensor_all(copies), [f"{r}{i}" for i in range(1, n + 1)]


def convergence_point(psi_abr: PureState, eps: float, n: int,
                      split: Tuple[str, str, str] = ("A", "B", "R"),
                      max_dim: int = DEFAULT_CONVERGENCE_MAX_DIM) -> ConvergencePoint:
    """−H_min^ε(A^n|R^n)/n for the n-fold ρ_AR (the per-copy merging cost) next to S(A|B)."""
    a, _, r = split
    rho_ar = partial_trace(psi_abr, [a, r])
    dim = rho_ar.dim ** n
    if dim > max_dim:
        logger.warning(f"⚠️ Convergence point n={n} refused: dim {dim} > {max_dim}")
        raise DimensionError(f"n-fold state too large for n={n}", dim, max_dim)
    target = -cond_von_neumann(rho_ar, [r])
    rho_n, cond = _copies(rho_ar, a, r, n)
    value = h_min_smooth_cond(rho_n, cond, eps)
    return ConvergencePoint(n, float(eps), -value.bits / n, target)


def convergence_series(psi_abr: PureState, eps: float, n_max: int,
                       split: Tuple[str, str, str] = ("A", "B", "R"),
                       max_dim: int = DEFAULT_CONVERGENCE_MAX_DIM) -> List[ConvergencePoint]:
    """Points n = 1..n_max; the whole series is refused up front if n_max is too large."""
    if n_max < 1:
        raise InvalidParameterError(f"n_max must be >= 1, got {n_max}")
    a, _, r = split
    d_ar = psi_abr.layout.dim_of([a, r])
    if d_ar ** n_max > max_dim:
        raise DimensionError(f"(d_A d_R)^n_max too large for n_max={n_max}", d_ar ** n_max, max_dim)
    return [convergence_point(psi_abr, eps, n, split, max_dim) for n in range(1, n_max + 1)]
