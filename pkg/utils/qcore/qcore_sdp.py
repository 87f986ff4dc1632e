"""
utils/qcore/qcore_sdp.py
Standard-form semidefinite programs over Hermitian blocks.

    minimize   Σ_k ⟨C_k, X_k⟩
    subject to Σ_k ⟨A_ik, X_k⟩ = b_i,   X_k ⪰ 0

Constraint data is stored per block as a sparse (m, n_k²) matrix whose row i is
vec(A_ik) in column-major order, so ⟨A_ik, X_k⟩ = Re(conj(row_i) · vec(X_k)).
The primal is solved once with an interior-point backend (Clarabel by default); the
dual vector y of (maximize bᵀy s.t. C_k − Σ_i y_i A_ik ⪰ 0) is the equality multiplier
of that same run, and every answer is certified from scratch before it is labelled optimal.
"""

import logging
import time
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import cvxpy as cp
import numpy as np
import scipy.sparse as sp

from .qcore_constants import (
    SDP_BACKEND_TOL_FLOOR,
    SDP_DEFAULT_MAX_ITER,
    SDP_DEFAULT_TOL,
    SDP_SOLVERS,
    SDP_STATUSES,
)
from .qcore_exceptions import DimensionError, SdpError, StateValidationError
from .qcore_metrics import get_metrics
from .qcore_utils import complex_to_pairs, unvec, vec

logger = logging.getLogger(__name__)

RowData = Union[sp.spmatrix, np.ndarray]

_INFEASIBLE = {cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE, cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE}
_SOLVED = {cp.OPTIMAL, cp.OPTIMAL_INACCURATE}


def _transpose_perm(n: int) -> np.ndarray:
    idx = np.arange(n * n)
    return (idx // n) + (idx % n) * n


# -------------------------
# Problem
# -------------------------
@dataclass(frozen=True, eq=False)
class SdpProblem:
    """Standard-form SDP; see module docstring for the data layout."""
    block_names: Tuple[str, ...]
    block_dims: Tuple[int, ...]
    objective: Tuple[np.ndarray, ...]
    constraints: Tuple[sp.csr_matrix, ...]
    rhs: np.ndarray

    def __post_init__(self):
        if not (len(self.block_names) == len(self.block_dims) == len(self.objective) == len(self.constraints)):
            raise DimensionError("block names, dims, objective and constraints must have one entry per block")
        m = int(self.rhs.shape[0])
        for name, n, c, a in zip(self.block_names, self.block_dims, self.objective, self.constraints):
            if c.shape != (n, n):
                raise DimensionError(f"objective block '{name}' has shape {c.shape}, expected {(n, n)}")
            if float(np.max(np.abs(c - c.conj().T), initial=0.0)) > 1e-12:
                raise StateValidationError(f"objective block '{name}' is not Hermitian", "hermitian")
            if a.shape != (m, n * n):
                raise DimensionError(f"constraint block '{name}' has shape {a.shape}, expected {(m, n * n)}")
            dev = abs(a - a[:, _transpose_perm(n)].conj())
            if dev.nnz and float(dev.max()) > 1e-12:
                raise StateValidationError(f"constraint block '{name}' is not Hermitian", "hermitian")

    @property
    def n_constraints(self) -> int:
        return int(self.rhs.shape[0])

    def constraint_matrix(self, i: int) -> List[np.ndarray]:
        """Dense blocks of A_i."""
        return [unvec(a.getrow(i).toarray().reshape(-1), n) for a, n in zip(self.constraints, self.block_dims)]

    def scaled(self, factor: float) -> "SdpProblem":
        """Same feasible set, objective multiplied by `factor`."""
        return SdpProblem(self.block_names, self.block_dims,
                          tuple(factor * c for c in self.objective), self.constraints, self.rhs)

    def to_dict(self) -> Dict[str, Any]:
        """JSON snapshot (dense constraint blocks; meant for small regression cases)."""
        return {
            "blocks": [{"name": n, "dim": d} for n, d in zip(self.block_names, self.block_dims)],
            "objective": [complex_to_pairs(c) for c in self.objective],
            "constraints": [
                {"rhs": float(self.rhs[i]), "blocks": [complex_to_pairs(b) for b in self.constraint_matrix(i)]}
                for i in range(self.n_constraints)
            ],
        }


class SdpBuilder:
    """Assembles an SdpProblem from named blocks and groups of constraint rows."""

    def __init__(self):
        self._names: List[str] = []
        self._dims: Dict[str, int] = {}
        self._costs: Dict[str, np.ndarray] = {}
        self._rows: List[Tuple[Dict[str, sp.csr_matrix], np.ndarray]] = []

    def add_block(self, name: str, dim: int, cost: Optional[np.ndarray] = None) -> "SdpBuilder":
        if name in self._dims:
            raise DimensionError(f"block '{name}' already defined")
        self._names.append(name)
        self._dims[name] = int(dim)
        self._costs[name] = np.zeros((dim, dim), dtype=complex) if cost is None else np.asarray(cost, dtype=complex)
        return self

    def add_rows(self, terms: Mapping[str, RowData], rhs: Union[float, Sequence[float], np.ndarray]) -> "SdpBuilder":
        """Adds a group of rows; each term is a (rows, n²) matrix of vec(A) rows for one block."""
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        group: Dict[str, sp.csr_matrix] = {}
        for name, data in terms.items():
            n = self._dims[name]
            mat = sp.csr_matrix(data, dtype=complex)
            if mat.shape != (rhs.shape[0], n * n):
                raise DimensionError(f"rows for block '{name}' have shape {mat.shape}, expected {(rhs.shape[0], n * n)}")
            group[name] = mat
        self._rows.append((group, rhs))
        return self

    def add_row(self, terms: Mapping[str, np.ndarray], rhs: float) -> "SdpBuilder":
        """Single constraint Σ ⟨A_k, X_k⟩ = rhs with dense Hermitian A_k."""
        return self.add_rows({name: vec(np.asarray(a, dtype=complex)).reshape(1, -1) for name, a in terms.items()}, [rhs])

    def build(self) -> SdpProblem:
        m = sum(rhs.shape[0] for _, rhs in self._rows)
        blocks = []
        for name in self._names:
            n = self._dims[name]
            parts = [group.get(name, sp.csr_matrix((rhs.shape[0], n * n), dtype=complex)) for group, rhs in self._rows]
            blocks.append(sp.vstack(parts, format="csr") if parts else sp.csr_matrix((0, n * n), dtype=complex))
        rhs = np.concatenate([r for _, r in self._rows]) if self._rows else np.zeros(0)
        return SdpProblem(tuple(self._names), tuple(self._dims[n] for n in self._names),
                          tuple(self._costs[n] for n in self._names), tuple(blocks), rhs)


# -------------------------
# Solution + certificate
# -------------------------
@dataclass(frozen=True)
class CertificateReport:
    """Residuals recomputed from the returned point, independent of the backend."""
    primal_residual: float
    primal_psd_violation: float
    dual_psd_violation: float
    complementarity: float
    primal_objective: float
    dual_objective: float
    gap: float

    def passes(self, tol: float, rhs_scale: float = 1.0) -> bool:
        return (
            self.primal_residual <= tol * (1.0 + rhs_scale)
            and self.primal_psd_violation <= tol
            and self.dual_psd_violation <= tol
            and abs(self.gap) <= tol
        )

    def to_dict(self) -> Dict[str, float]:
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class SdpSolution:
    """
    Primal blocks, dual vector and objectives; the gap is always reported.

    `reason` tells the two non-optimal cases with an iterate apart:
    "iteration-limit" (backend ran out of iterations) and "accuracy"
    (backend stopped but the certificate misses tol).
    """
    primal: Tuple[np.ndarray, ...]
    dual: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    status: str
    block_names: Tuple[str, ...] = ()
    solver: str = ""
    solve_time: float = 0.0
    certificate: Optional[CertificateReport] = None
    reason: str = ""
    iterations: Optional[int] = None

    def __post_init__(self):
        if self.status not in SDP_STATUSES:
            raise SdpError(f"unknown SDP status '{self.status}', expected one of {SDP_STATUSES}", self.solver)

    def block(self, name: str) -> np.ndarray:
        return self.primal[self.block_names.index(name)]

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": self.status,
            "reason": self.reason,
            "solver": self.solver,
            "iterations": self.iterations,
            "primal_objective": self.primal_objective,
            "dual_objective": self.dual_objective,
            "gap": self.gap,
            "blocks": [{"name": n, "dim": int(x.shape[0]), "entries": complex_to_pairs(x)}
                       for n, x in zip(self.block_names, self.primal)],
            "dual": [float(v) for v in self.dual],
        }


def _dual_slacks(p: SdpProblem, y: np.ndarray) -> List[np.ndarray]:
    slacks = []
    for c, a, n in zip(p.objective, p.constraints, p.block_dims):
        z = c - unvec(a.T @ y, n) if p.n_constraints else c.copy()
        slacks.append((z + z.conj().T) / 2)
    return slacks


def _min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0]) if m.size else 0.0


def certify(s: SdpSolution, p: SdpProblem) -> CertificateReport:
    """Recomputes primal feasibility, dual feasibility, complementarity and the gap."""
    if not s.primal:
        nan = float("nan")
        return CertificateReport(nan, nan, nan, nan, nan, nan, nan)
    lhs = np.zeros(p.n_constraints)
    for a, x in zip(p.constraints, s.primal):
        if p.n_constraints:
            lhs += np.real(a.conj() @ vec(x))
    residual = float(np.max(np.abs(lhs - p.rhs), initial=0.0))
    psd_viol = max([max(0.0, -_min_eig(x)) for x in s.primal], default=0.0)
    y = s.dual if s.dual.shape[0] == p.n_constraints else np.zeros(p.n_constraints)
    slacks = _dual_slacks(p, y)
    dual_viol = max([max(0.0, -_min_eig(z)) for z in slacks], default=0.0)
    compl = float(sum(np.real(np.vdot(x, z)) for x, z in zip(s.primal, slacks)))
    primal_obj = float(sum(np.real(np.vdot(c, x)) for c, x in zip(p.objective, s.primal)))
    dual_obj = float(p.rhs @ y) if p.n_constraints else 0.0
    return CertificateReport(residual, psd_viol, dual_viol, compl, primal_obj, dual_obj, primal_obj - dual_obj)


# -------------------------
# Solver
# -------------------------
@dataclass(frozen=True, eq=False)
class _BackendRun:
    """Raw outcome of one backend call, before certification."""
    backend: str
    status: str
    blocks: Tuple[np.ndarray, ...]
    dual: np.ndarray
    iterations: Optional[int]


class SdpSolver:
    """
    cvxpy-backed interior-point solver for SdpProblem.
    Instances are stateless apart from settings; one solve is sequential.
    """

    def __init__(self, solver: str = "CLARABEL", fallback: Optional[str] = "SCS",
                 tol: float = SDP_DEFAULT_TOL, max_iter: int = SDP_DEFAULT_MAX_ITER, verbose: bool = False):
        if solver not in SDP_SOLVERS:
            raise SdpError(f"unsupported backend, choose from {SDP_SOLVERS}", solver)
        self.solver = solver
        self.fallback = fallback if fallback and fallback != solver else None
        self.tol = tol
        self.max_iter = max_iter
        self.verbose = verbose
        logger.debug(f"SdpSolver initialized ({solver}, tol={tol}, max_iter={max_iter})")

    # Backend ayarları: certificate tol'ün onda biri, ama backend'in ulaşabileceği tabanın altına inmez
    def _options(self, backend: str, tol: float, max_iter: int) -> Dict[str, Any]:
        inner = max(tol * 0.1, SDP_BACKEND_TOL_FLOOR)
        if backend == "CLARABEL":
            return {"max_iter": max_iter, "tol_gap_abs": inner, "tol_gap_rel": inner, "tol_feas": inner}
        return {"max_iters": max_iter * 100, "eps_abs": inner, "eps_rel": inner}

    @staticmethod
    def _primal_problem(p: SdpProblem) -> Tuple[cp.Problem, List[cp.Variable], Optional[cp.Constraint]]:
        xs = [cp.Variable((n, n), hermitian=True) for n in p.block_dims]
        objective = 0
        lhs = 0
        for c, a, x in zip(p.objective, p.constraints, xs):
            xr = cp.vec(cp.real(x), order="F")
            xi = cp.vec(cp.imag(x), order="F")
            cv = vec(c)
            objective = objective + xr @ np.real(cv) + xi @ np.imag(cv)
            if a.nnz:
                lhs = lhs + cp.Constant(sp.csr_matrix(a.real)) @ xr + cp.Constant(sp.csr_matrix(a.imag)) @ xi
        cons: List[cp.Constraint] = [x >> 0 for x in xs]
        equality = None
        if p.n_constraints and isinstance(lhs, cp.Expression):
            equality = lhs == p.rhs
            cons.append(equality)
        return cp.Problem(cp.Minimize(objective), cons), xs, equality

    def _run(self, p: SdpProblem, backend: str, tol: float, max_iter: int) -> _BackendRun:
        """
        One primal solve; y comes from the equality multiplier of the same run.

        cvxpy's Lagrangian is f + νᵀ(lhs − rhs), so the dual of the standard form
        (C − Σ y_i A_i ⪰ 0) is y = −ν.
        """
        problem, xs, equality = self._primal_problem(p)
        problem.solve(solver=backend, verbose=self.verbose, **self._options(backend, tol, max_iter))
        stats = problem.solver_stats
        iterations = stats.num_iters if stats is not None else None
        if problem.status in _INFEASIBLE or any(x.value is None for x in xs):
            return _BackendRun(backend, problem.status, (), np.zeros(0), iterations)
        blocks = tuple((x.value + x.value.conj().T) / 2 for x in xs)
        if equality is not None and equality.dual_value is not None:
            y = -np.asarray(equality.dual_value, dtype=float).reshape(-1)
        else:
            y = np.zeros(p.n_constraints)
        return _BackendRun(backend, problem.status, blocks, y, iterations)

    def _label(self, p: SdpProblem, run: _BackendRun, tol: float) -> SdpSolution:
        """Certifies a backend run and picks the status."""
        if run.status in _INFEASIBLE:
            logger.warning(f"⚠️ SDP infeasible or unbounded ({run.backend}: {run.status})")
            return SdpSolution((), np.zeros(0), float("nan"), float("nan"), float("nan"), "infeasible",
                               p.block_names, run.backend, reason="infeasible", iterations=run.iterations)
        limit_hit = run.status == cp.USER_LIMIT
        if not run.blocks:
            # İterasyon limiti: en iyi nokta yok
            logger.warning(f"⚠️ SDP returned no iterate ({run.backend}: {run.status})")
            return SdpSolution((), np.zeros(0), float("nan"), float("nan"), float("nan"), "max-iterations",
                               p.block_names, run.backend, reason="iteration-limit" if limit_hit else "accuracy",
                               iterations=run.iterations)

        draft = SdpSolution(run.blocks, run.dual, 0.0, 0.0, 0.0, "max-iterations", p.block_names, run.backend)
        report = certify(draft, p)
        rhs_scale = float(np.max(np.abs(p.rhs), initial=0.0))
        if run.status in _SOLVED and report.passes(tol, rhs_scale):
            status, reason = "optimal", ""
        else:
            status, reason = "max-iterations", "iteration-limit" if limit_hit else "accuracy"
            if limit_hit:
                logger.warning(f"⚠️ SDP hit the iteration limit ({run.backend}, {run.iterations} iterations, gap {report.gap:.2e})")
            else:
                logger.warning(
                    f"⚠️ SDP certificate misses tol {tol:.1e} ({run.backend}: {run.status}, "
                    f"gap {report.gap:.2e}, residual {report.primal_residual:.2e}, "
                    f"dual psd {report.dual_psd_violation:.2e})"
                )
        return SdpSolution(run.blocks, run.dual, report.primal_objective, report.dual_objective,
                           report.gap, status, p.block_names, run.backend, 0.0, report, reason, run.iterations)

    def solve(self, p: SdpProblem, tol: Optional[float] = None, max_iter: Optional[int] = None) -> SdpSolution:
        """
        Solve the primal, read the dual from the same run, then certify.

        Args:
            p: Problem in standard form
            tol: Gap / residual tolerance for the optimal label
            max_iter: Interior-point iteration limit

        Returns:
            SdpSolution with status optimal, max-iterations or infeasible
        """
        tol = self.tol if tol is None else tol
        max_iter = self.max_iter if max_iter is None else max_iter
        started = time.perf_counter()

        used_fallback = False
        try:
            solution = self._label(p, self._run(p, self.solver, tol, max_iter), tol)
        except cp.error.SolverError as exc:
            if self.fallback is None:
                raise SdpError(str(exc), self.solver) from exc
            logger.warning(f"⚠️ {self.solver} failed ({exc}); retrying with {self.fallback}")
            used_fallback = True
            try:
                solution = self._label(p, self._run(p, self.fallback, tol, max_iter), tol)
            except cp.error.SolverError as exc2:
                raise SdpError(str(exc2), self.fallback) from exc2

        if solution.reason == "accuracy" and self.fallback is not None and not used_fallback:
            logger.info(f"🔄 Retrying with {self.fallback} after an accuracy miss on {self.solver}")
            try:
                retry = self._label(p, self._run(p, self.fallback, tol, max_iter), tol)
            except cp.error.SolverError as exc:
                logger.warning(f"⚠️ {self.fallback} retry failed ({exc}); keeping the {self.solver} iterate")
                retry = None
            if retry is not None and retry.is_optimal:
                solution, used_fallback = retry, True

        elapsed = time.perf_counter() - started
        solution = replace(solution, solve_time=elapsed)
        get_metrics().record_solve(solution.status, solution.solver, elapsed, solution.gap,
                                   max(p.block_dims, default=0), used_fallback, solution.reason)
        logger.debug(f"📊 SDP {solution.status}: obj {solution.primal_objective:.10f}, gap {solution.gap:.2e}, {elapsed:.3f}s")
        return solution


# Global instance
_sdp_solver_instance: Optional[SdpSolver] = None


def get_sdp_solver() -> SdpSolver:
    """Get or create the global SdpSolver configured from the toolkit config."""
    global _sdp_solver_instance
    if _sdp_solver_instance is None:
        from config import get_solver_config

        settings = get_solver_config()
        _sdp_solver_instance = SdpSolver(
            solver=settings["solver"],
            fallback=settings["fallback"],
            tol=settings["tol"],
            max_iter=settings["max_iter"],
            verbose=settings["verbose"],
        )
        logger.info(f"✅ SdpSolver created ({settings['solver']})")
    return _sdp_solver_instance


def reset_sdp_solver() -> None:
    """Drops the cached solver (after reload_config)."""
    global _sdp_solver_instance
    _sdp_solver_instance = None


def solve(p: SdpProblem, tol: Optional[float] = None, max_iter: Optional[int] = None) -> SdpSolution:
    return get_sdp_solver().solve(p, tol, max_iter)
