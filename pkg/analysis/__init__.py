# analysis modülü
# analysis/__init__.py
from .decoupling import BlockMeasurement, DecouplingReport, build_measurement, estimate_decoupling
from .entropies import EntropyValue, duality_gap, h_max_cond, h_min_cond, h_min_rel
from .merging import CostPlan, MergeRecord, MergingSimulator, get_merging_simulator, plan_cost
from .smoothing import SmoothingBall, convergence_series, h_min_smooth_cond, h_min_smooth_rel

__all__ = [
    'BlockMeasurement',
    'CostPlan',
    'DecouplingReport',
    'EntropyValue',
    'MergeRecord',
    'MergingSimulator',
    'SmoothingBall',
    'build_measurement',
    'convergence_series',
    'duality_gap',
    'estimate_decoupling',
    'h_max_cond',
    'h_min_cond',
    'h_min_rel',
    'h_min_smooth_cond',
    'h_min_smooth_rel',
    'plan_cost',
    # Factory functions
    'get_merging_simulator',
]
