"""
utils/qcore/qcore_metrics.py
Thread-safe solver and run metrics; a snapshot goes into every run manifest.
"""

import logging
import time
from collections import deque
from dataclasses import dataclass, field
from threading import Lock
from typing import Any, Dict, Optional

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class SolveMetrics:
    """Counters for SDP solves."""
    total_solves: int = 0
    status_counts: Dict[str, int] = field(default_factory=dict)
    solver_counts: Dict[str, int] = field(default_factory=dict)
    fallbacks: int = 0
    total_solve_time: float = 0.0
    solve_times: deque = field(default_factory=lambda: deque(maxlen=1000))
    max_gap: float = 0.0
    max_block_dim: int = 0
    iteration_limits: int = 0
    accuracy_misses: int = 0


@dataclass
class RunMetrics:
    """Counters for protocol runs and Monte Carlo samples."""
    protocol_runs: int = 0
    decoupling_samples: int = 0
    chain_violations: int = 0
    converse_violations: int = 0


class ToolkitMetrics:
    """
    Thread-safe metrics collection (singleton).
    """

    _instance: Optional["ToolkitMetrics"] = None
    _lock: Lock = Lock()

    def __new__(cls) -> "ToolkitMetrics":
        with cls._lock:
            if cls._instance is None:
                cls._instance = super().__new__(cls)
                cls._instance._initialize()
            return cls._instance

    def _initialize(self) -> None:
        self.solve_metrics = SolveMetrics()
        self.run_metrics = RunMetrics()
        self.start_time = time.time()
        self._data_lock = Lock()
        logger.debug("✅ ToolkitMetrics initialized")

    def record_solve(self, status: str, solver: str, seconds: float, gap: float,
                     max_block_dim: int, fallback: bool = False, reason: str = "") -> None:
        """
        Record one SDP solve.

        Args:
            status: Reported solution status
            solver: Backend that produced the solution
            seconds: Wall time of the solve (retries included)
            gap: Reported duality gap
            max_block_dim: Largest block of the problem
            fallback: Whether the fallback backend was used
            reason: Why a solve with an iterate is not optimal ("iteration-limit" or "accuracy")
        """
        with self._data_lock:
            m = self.solve_metrics
            m.total_solves += 1
            m.status_counts[status] = m.status_counts.get(status, 0) + 1
            m.solver_counts[solver] = m.solver_counts.get(solver, 0) + 1
            m.total_solve_time += seconds
            m.solve_times.append(seconds)
            if np.isfinite(gap):
                m.max_gap = max(m.max_gap, abs(gap))
            m.max_block_dim = max(m.max_block_dim, max_block_dim)
            if fallback:
                m.fallbacks += 1
            if reason == "iteration-limit":
                m.iteration_limits += 1
            elif reason == "accuracy":
                m.accuracy_misses += 1

    def record_protocol_run(self, chain_ok: bool = True) -> None:
        with self._data_lock:
            self.run_metrics.protocol_runs += 1
            if not chain_ok:
                self.run_metrics.chain_violations += 1

    def record_converse_violation(self) -> None:
        with self._data_lock:
            self.run_metrics.converse_violations += 1

    def record_samples(self, count: int) -> None:
        with self._data_lock:
            self.run_metrics.decoupling_samples += count

    def get_metrics(self) -> Dict[str, Any]:
        """Snapshot for the run manifest."""
        with self._data_lock:
            m = self.solve_metrics
            times = list(m.solve_times)
            return {
                "uptime": time.time() - self.start_time,
                "solves": {
                    "total": m.total_solves,
                    "by_status": dict(m.status_counts),
                    "by_solver": dict(m.solver_counts),
                    "fallbacks": m.fallbacks,
                    "iteration_limits": m.iteration_limits,
                    "accuracy_misses": m.accuracy_misses,
                    "total_time": m.total_solve_time,
                    "mean_time": float(np.mean(times)) if times else 0.0,
                    "p95_time": float(np.percentile(times, 95)) if times else 0.0,
                    "max_gap": m.max_gap,
                    "max_block_dim": m.max_block_dim,
                },
                "runs": {
                    "protocol_runs": self.run_metrics.protocol_runs,
                    "decoupling_samples": self.run_metrics.decoupling_samples,
                    "chain_violations": self.run_metrics.chain_violations,
                    "converse_violations": self.run_metrics.converse_violations,
                },
            }

    def reset(self) -> None:
        with self._data_lock:
            self.solve_metrics = SolveMetrics()
            self.run_metrics = RunMetrics()
            self.start_time = time.time()
        logger.info("🔄 Metrics reset")


def get_metrics() -> ToolkitMetrics:
    return ToolkitMetrics()
