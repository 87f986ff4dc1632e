"""
experiment_handler.py
---------------------
Monte Carlo ve asimptotik deney komutları.
Komutlar:
- decouple     → Haar block-measurement average vs. the collision-entropy bound (decoupling.csv)
                 over a grid of random states, or over the configured state
- convergence  → per-copy smooth min-entropy for n = 1..n_max next to S(A|B) (convergence.csv)
"""

import logging
from typing import Any, Dict, List, Tuple

import numpy as np

from analysis.decoupling import estimate_decoupling
from analysis.smoothing import convergence_point
from utils.handler_loader import CommandResult, CommandRouter, ExperimentContext, run_parallel
from utils.qcore.qcore_constants import CONVERGENCE_COLUMNS, DECOUPLING_COLUMNS, REPORT_FILES
from utils.qcore.qcore_exceptions import DimensionError, InvalidParameterError
from utils.qcore.qcore_ops import partial_trace, random_density
from utils.qcore.qcore_types import DensityOperator, PureState, SystemLayout

logger = logging.getLogger(__name__)

router = CommandRouter("experiment")

# grid defaults
GRID_D_A = [2, 4, 8]
GRID_STATES = 5
GRID_D_R = 2


# ---------------------------------------------------------------------
# Helper functions
# ---------------------------------------------------------------------
def _divisors(n: int) -> List[int]:
    return [k for k in range(1, n + 1) if n % k == 0]


def _block_sizes(d_a: int, requested: List[int]) -> List[int]:
    """Requested L values that fit d_A; all divisors of d_A when none are requested."""
    if not requested:
        return _divisors(d_a)
    return [L for L in requested if 1 <= L <= d_a]


def _ar_state(ctx: ExperimentContext) -> Tuple[DensityOperator, str]:
    a, _, r = ctx.split
    state = ctx.state
    if isinstance(state, PureState) and set(ctx.split) <= set(state.layout.labels):
        return partial_trace(state, [a, r]), a
    rho = state.density() if isinstance(state, PureState) else state
    if a not in rho.layout.labels or len(rho.layout.labels) < 2:
        raise InvalidParameterError(f"decouple needs a state with factor '{a}' and a reference factor")
    return rho, a


def _grid_cells(ctx: ExperimentContext) -> List[Tuple[str, DensityOperator, int]]:
    """(state_id, ρ_AR, L) cells of the random-state grid, states drawn from the seed's children."""
    grid: Dict[str, Any] = ctx.config.grid or {}
    d_values = [int(d) for d in grid.get("d_A", GRID_D_A)]
    n_states = int(grid.get("states", GRID_STATES))
    d_r = int(grid.get("d_R", GRID_D_R))
    if n_states < 1 or d_r < 1 or any(d < 1 for d in d_values):
        raise InvalidParameterError(f"invalid decoupling grid: {grid}")

    state_seeds = np.random.SeedSequence(ctx.config.seed).spawn(len(d_values) * n_states)
    cells = []
    for i, d_a in enumerate(d_values):
        layout = SystemLayout.of(("A", d_a), ("R", d_r))
        for k in range(n_states):
            rho = random_density(layout, np.random.default_rng(state_seeds[i * n_states + k]))
            for L in _block_sizes(d_a, ctx.config.l_list):
                cells.append((f"random{k}", rho, L))
    return cells


# ---------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------
@router.command("decouple")
async def decouple_command(ctx: ExperimentContext) -> CommandResult:
    """One row per (d_A, L, state); σ_R is the reference marginal of each state."""
    if ctx.config.grid:
        cells = _grid_cells(ctx)
        a = "A"
    else:
        rho, a = _ar_state(ctx)
        d_a = rho.layout.dim(a)
        cells = [(ctx.state_id, rho, L) for L in _block_sizes(d_a, ctx.config.l_list)]
    if not cells:
        raise InvalidParameterError("decouple: no admissible (d_A, L) cell")

    samples = ctx.samples
    cell_seeds = np.random.SeedSequence([int(ctx.config.seed), len(cells)]).spawn(len(cells))

    def job(state_id: str, rho: DensityOperator, L: int, seq: np.random.SeedSequence):
        sigma_r = partial_trace(rho, rho.layout.complement([a]))
        report = estimate_decoupling(rho, sigma_r, L, samples, np.random.default_rng(seq), a)
        return report.to_row(state_id), report

    results = await run_parallel(
        [(lambda c=c, s=s: job(*c, s)) for c, s in zip(cells, cell_seeds)],
        ctx.toolkit.MAX_WORKERS,
    )
    failed = [rep for _, rep in results if rep.exact and not rep.within_bound()]
    if failed:
        logger.error(f"❌ decouple: {len(failed)}/{len(results)} exact cells above bound + 3·stderr")
    else:
        logger.info(f"✅ decouple: {len(results)} cells, all exact cells within bound ({samples} samples)")
    return CommandResult(
        REPORT_FILES["decouple"], DECOUPLING_COLUMNS, [row for row, _ in results],
        notes={"cells": len(results), "failed_cells": len(failed)},
    )


@router.command("convergence")
async def convergence_command(ctx: ExperimentContext) -> CommandResult:
    """Rows for n = 1..n_max and every eps; the size cap is checked before any solve."""
    psi = ctx.pure_state()
    a, _, r = ctx.split
    max_dim = ctx.toolkit.PROTOCOL.CONVERGENCE_MAX_DIM
    d_ar = psi.layout.dim_of([a, r])
    if d_ar ** ctx.config.n_max > max_dim:
        logger.warning(f"⚠️ convergence refused: (d_A d_R)^{ctx.config.n_max} > {max_dim}")
        raise DimensionError(f"(d_A d_R)^n_max too large for n_max={ctx.config.n_max}",
                             d_ar ** ctx.config.n_max, max_dim)

    jobs = [
        (lambda eps=eps, n=n: convergence_point(psi, eps, n, ctx.split, max_dim))
        for eps in ctx.config.eps_list
        for n in range(1, ctx.config.n_max + 1)
    ]
    points = await run_parallel(jobs, ctx.toolkit.MAX_WORKERS)
    rows = [
        {
            "n": p.n,
            "eps": p.eps,
            "value_bits_per_copy": p.value_bits_per_copy,
            "target_bits": p.target_bits,
            "gap": p.gap,
        }
        for p in points
    ]
    for p in points:
        if p.n == ctx.config.n_max:
            logger.info(f"📊 convergence eps={p.eps:g}: n={p.n} gap {p.gap:.6f}")
    return CommandResult(REPORT_FILES["convergence"], CONVERGENCE_COLUMNS, rows)
