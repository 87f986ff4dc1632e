"""
merge_handler.py
----------------
Merging protokolü komutları (rapor: merge_runs.csv).
Komutlar:
- merge     → plan the cost for every eps (or take K/L from the config), then `runs` seeded runs
- converse  → fix the cost, read off the design eps, run and compare with the converse bound
Her satır: cost, achieved error, merging-condition value and −H_min^{√e}(A|R) at that error.
"""

import logging
import math
from typing import List

from analysis.merging import CostPlan, error_for_cost, get_merging_simulator, plan_cost
from utils.handler_loader import CommandResult, CommandRouter, ExperimentContext, run_parallel
from utils.qcore.qcore_constants import MERGE_COLUMNS, REPORT_FILES
from utils.qcore.qcore_exceptions import InvalidParameterError
from utils.qcore.qcore_ops import partial_trace
from utils.qcore.qcore_types import PureState

logger = logging.getLogger(__name__)

router = CommandRouter("merge")


# ---------------------------------------------------------------------
# Helper functions
# ---------------------------------------------------------------------
def _fixed_plan(rho_ar, r: str, K: int, L: int) -> CostPlan:
    """Plan for an explicit (K, L) pair; ε and the guarantee come from the nonsmooth formula."""
    if K < 1 or L < 1:
        raise InvalidParameterError(f"K and L must be >= 1, got K={K}, L={L}")
    cost = math.log2(K) - math.log2(L)
    eps, guarantee = error_for_cost(rho_ar, cost, [r])
    return CostPlan("fixed", eps, 0.0, K, L, cost, cost, guarantee)


def _plan_for_cost(rho_ar, r: str, cost_bits: int) -> CostPlan:
    cost = int(cost_bits)
    return _fixed_plan(rho_ar, r, 2 ** max(cost, 0), 2 ** max(-cost, 0))


async def _run_plans(ctx: ExperimentContext, psi: PureState, plans: List[CostPlan]) -> List[dict]:
    simulator = await get_merging_simulator()
    seeds = [int(ctx.config.seed) + i for i in range(ctx.config.runs)]
    jobs = [
        (lambda plan=plan, seed=seed: simulator.merge_record(ctx.state_id, psi, plan, seed, ctx.split))
        for plan in plans
        for seed in seeds
    ]
    records = await run_parallel(jobs, ctx.toolkit.MAX_WORKERS)

    within = sum(rec.within_guarantee for rec in records)
    chain = sum(rec.chain_ok for rec in records)
    converse = sum(rec.converse_ok for rec in records)
    logger.info(
        f"📊 {ctx.config.command}: {len(records)} run, {within} guarantee içinde, "
        f"chain {chain}/{len(records)}, converse {converse}/{len(records)}"
    )
    if chain < len(records) or converse < len(records):
        logger.error(f"❌ {ctx.config.command}: bound check failures in {ctx.state_id}")
    return [rec.to_row() for rec in records]


# ---------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------
@router.command("merge")
async def merge_command(ctx: ExperimentContext) -> CommandResult:
    """Achievability runs: planned cost per eps, seeds seed, seed+1, …"""
    psi = ctx.pure_state()
    a, _, r = ctx.split
    rho_ar = partial_trace(psi, [a, r])
    config = ctx.config

    if config.K is not None or config.L is not None:
        K = int(config.K or 1)
        plans = [_fixed_plan(rho_ar, r, K, L) for L in (config.l_list or [1])]
        logger.info(f"🔄 merge: fixed K={K}, L ∈ {[plan.L for plan in plans]}")
    else:
        jobs = [(lambda eps=eps: plan_cost(rho_ar, eps, config.mode, [r])) for eps in config.eps_list]
        plans = await run_parallel(jobs, ctx.toolkit.MAX_WORKERS)
        for plan in plans:
            logger.info(f"🔄 merge plan ({plan.mode}, eps={plan.eps:g}): {plan.cost_bits} bit, K={plan.K}, L={plan.L}")

    rows = await _run_plans(ctx, psi, plans)
    return CommandResult(REPORT_FILES["merge"], MERGE_COLUMNS, rows)


@router.command("converse")
async def converse_command(ctx: ExperimentContext) -> CommandResult:
    """Fixed-cost runs; each row carries the converse bound at its achieved error."""
    psi = ctx.pure_state()
    a, _, r = ctx.split
    rho_ar = partial_trace(psi, [a, r])
    costs = ctx.config.costs
    if not costs:
        raise InvalidParameterError("converse needs a non-empty 'costs' list")
    plans = [_plan_for_cost(rho_ar, r, c) for c in costs]
    rows = await _run_plans(ctx, psi, plans)
    return CommandResult(REPORT_FILES["converse"], MERGE_COLUMNS, rows)
