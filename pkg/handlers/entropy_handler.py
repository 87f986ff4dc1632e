"""
entropy_handler.py
------------------
Entropy komutları (rapor: entropies.csv).
Komutlar:
- entropy  → H_min / H_max / von Neumann, conditioned on B and on R
- smooth   → smooth H_min(A|R) and the heuristic smooth H_max for every eps
- duality  → H_min(ρ_AR|ρ_R) + H_max(ρ_AB|B) with the gap row
"""

import logging
from typing import Any, Callable, Dict, List, Tuple

from analysis.entropies import (
    cond_von_neumann,
    duality_terms,
    h_max_cond,
    h_min_cond,
)
from analysis.smoothing import h_max_smooth_rel, h_min_smooth_cond
from utils.handler_loader import CommandResult, CommandRouter, ExperimentContext, run_parallel
from utils.qcore.qcore_constants import ENTROPY_COLUMNS, REPORT_FILES
from utils.qcore.qcore_exceptions import InvalidParameterError
from utils.qcore.qcore_ops import partial_trace
from utils.qcore.qcore_types import DensityOperator, PureState

logger = logging.getLogger(__name__)

router = CommandRouter("entropy")

Row = Dict[str, Any]


# ---------------------------------------------------------------------
# Helper functions
# ---------------------------------------------------------------------
def _row(state_id: str, quantity: str, conditioning: str, bits: float, method: str, gap: float = 0.0) -> Row:
    return {
        "state_id": state_id,
        "quantity": quantity,
        "conditioning": conditioning,
        "value_bits": float(bits),
        "method": method,
        "gap": float(gap),
    }


def _bipartite_views(ctx: ExperimentContext) -> List[Tuple[DensityOperator, str, List[str]]]:
    """(ρ, "A|C", cond labels) pairs: A|B and A|R for a tripartite pure state, A|rest otherwise."""
    a, b, r = ctx.split
    state = ctx.state
    if isinstance(state, PureState) and set(ctx.split) <= set(state.layout.labels):
        return [(partial_trace(state, [a, c]), f"{a}|{c}", [c]) for c in (b, r)]
    rho = state.density() if isinstance(state, PureState) else state
    if a not in rho.layout.labels:
        raise InvalidParameterError(f"state has no factor '{a}' (layout {rho.layout.labels})")
    cond = rho.layout.complement([a])
    if not cond:
        raise InvalidParameterError("conditional entropies need at least one conditioning factor")
    return [(rho, f"{a}|{''.join(cond)}", cond)]


def _ar_view(ctx: ExperimentContext) -> Tuple[DensityOperator, str, List[str]]:
    """ρ_AR with R as conditioning; the last view of _bipartite_views."""
    return _bipartite_views(ctx)[-1]


def _entropy_rows(state_id: str, rho: DensityOperator, label: str, cond: List[str]) -> List[Row]:
    value = h_min_cond(rho, cond)
    if value.status != "optimal":
        logger.warning(f"⚠️ h_min_cond {label}: status {value.status}")
    return [
        _row(state_id, "h_min", label, value.bits, "sdp", value.gap),
        _row(state_id, "h_max", label, h_max_cond(rho, cond), "closed-form"),
        _row(state_id, "h_vn", label, cond_von_neumann(rho, cond), "eigen"),
    ]


def _smooth_rows(state_id: str, rho: DensityOperator, label: str, cond: List[str], eps: float) -> List[Row]:
    value = h_min_smooth_cond(rho, cond, eps)
    sigma = partial_trace(rho, cond)
    h_max_bits, h_max_method = h_max_smooth_rel(rho, sigma, eps)
    return [
        _row(state_id, f"h_min_smooth[eps={eps:g}]", label, value.bits, value.method, value.gap),
        _row(state_id, f"h_max_smooth_rel[eps={eps:g}]", f"{label}|rho", h_max_bits, h_max_method),
    ]


def _flatten(chunks: List[List[Row]]) -> List[Row]:
    return [row for chunk in chunks for row in chunk]


# ---------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------
@router.command("entropy")
async def entropy_command(ctx: ExperimentContext) -> CommandResult:
    """Non-smooth entropies of every bipartite view of the state."""
    jobs: List[Callable[[], List[Row]]] = [
        (lambda rho=rho, label=label, cond=cond: _entropy_rows(ctx.state_id, rho, label, cond))
        for rho, label, cond in _bipartite_views(ctx)
    ]
    rows = _flatten(await run_parallel(jobs, ctx.toolkit.MAX_WORKERS))
    logger.info(f"📊 entropy: {len(rows)} satır ({ctx.state_id})")
    return CommandResult(REPORT_FILES["entropy"], ENTROPY_COLUMNS, rows)


@router.command("smooth")
async def smooth_command(ctx: ExperimentContext) -> CommandResult:
    """Smooth entropies of ρ_AR given R, one pair of rows per eps."""
    rho, label, cond = _ar_view(ctx)
    jobs = [
        (lambda eps=eps: _smooth_rows(ctx.state_id, rho, label, cond, eps))
        for eps in ctx.config.eps_list
    ]
    rows = _flatten(await run_parallel(jobs, ctx.toolkit.MAX_WORKERS))
    logger.info(f"📊 smooth: {len(ctx.config.eps_list)} eps değeri ({ctx.state_id})")
    return CommandResult(REPORT_FILES["smooth"], ENTROPY_COLUMNS, rows)


@router.command("duality")
async def duality_command(ctx: ExperimentContext) -> CommandResult:
    """Both sides of the min/max duality and their gap."""
    psi = ctx.pure_state()
    a, b, r = ctx.split
    terms = (await run_parallel([lambda: duality_terms(psi, ctx.split)], 1))[0]
    rows = [
        _row(ctx.state_id, "h_min_rel", f"{a}{r}|rho_{r}", terms.h_min_ar_given_rho_r, "eigen"),
        _row(ctx.state_id, "h_max", f"{a}|{b}", terms.h_max_ab_given_b, "closed-form"),
        _row(ctx.state_id, "duality", f"{a}{r}|rho_{r} + {a}|{b}", terms.gap, "closed-form", terms.gap),
    ]
    if terms.gap > 1e-6:
        logger.warning(f"⚠️ Duality gap {terms.gap:.3e} for {ctx.state_id}")
    else:
        logger.info(f"✅ Duality gap {terms.gap:.3e} ({ctx.state_id})")
    return CommandResult(REPORT_FILES["duality"], ENTROPY_COLUMNS, rows)
