"""
utils/qcore/qcore_types.py
Value types of the quantum core: layouts, states, Schmidt forms and channels.

Tüm tipler immutable; numpy dizileri kopyalanıp salt-okunur işaretlenir.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from .qcore_constants import (
    TOL_COMPLETENESS,
    TOL_HERMITIAN,
    TOL_NORM,
    TOL_PSD,
    TOL_TRACE,
)
from .qcore_exceptions import DimensionError, LayoutError, StateValidationError

logger = logging.getLogger(__name__)

LabelSet = Union[str, Iterable[str]]


def _frozen_array(values, dtype=complex) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def as_label_list(labels: LabelSet) -> List[str]:
    """Accepts a single label or an iterable of labels."""
    if isinstance(labels, str):
        return [labels]
    return list(labels)


@dataclass(frozen=True)
class SystemLayout:
    """Ordered tensor factors; the leftmost factor is the most significant index."""
    factors: Tuple[Tuple[str, int], ...]

    def __post_init__(self):
        factors = tuple((str(label), int(dim)) for label, dim in self.factors)
        object.__setattr__(self, "factors", factors)
        labels = [label for label, _ in factors]
        if len(set(labels)) != len(labels):
            raise LayoutError("duplicate labels", labels)
        bad = [label for label, dim in factors if dim < 1]
        if bad:
            raise LayoutError("dimensions must be >= 1", bad)

    @classmethod
    def of(cls, *pairs: Tuple[str, int]) -> "SystemLayout":
        return cls(tuple(pairs))

    @property
    def labels(self) -> List[str]:
        return [label for label, _ in self.factors]

    @property
    def dims(self) -> List[int]:
        return [dim for _, dim in self.factors]

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.factors else 1

    def __len__(self) -> int:
        return len(self.factors)

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown label '{label}'", self.labels) from None

    def dim(self, label: str) -> int:
        return self.factors[self.index(label)][1]

    def check_labels(self, labels: LabelSet) -> List[str]:
        """Validates a label set against the layout and returns it in layout order."""
        wanted = as_label_list(labels)
        unknown = [label for label in wanted if label not in self.labels]
        if unknown:
            raise LayoutError("unknown labels", unknown)
        if len(set(wanted)) != len(wanted):
            raise LayoutError("repeated labels", wanted)
        return [label for label in self.labels if label in wanted]

    def subset(self, labels: LabelSet) -> "SystemLayout":
        kept = self.check_labels(labels)
        return SystemLayout(tuple(f for f in self.factors if f[0] in kept))

    def complement(self, labels: LabelSet) -> List[str]:
        kept = self.check_labels(labels)
        return [label for label in self.labels if label not in kept]

    def dim_of(self, labels: LabelSet) -> int:
        return self.subset(labels).total_dim if as_label_list(labels) else 1

    def concat(self, other: "SystemLayout") -> "SystemLayout":
        clash = sorted(set(self.labels) & set(other.labels))
        if clash:
            raise LayoutError("label collision in tensor product", clash)
        return SystemLayout(self.factors + other.factors)

    def relabel(self, mapping: Dict[str, str]) -> "SystemLayout":
        return SystemLayout(tuple((mapping.get(label, label), dim) for label, dim in self.factors))

    def reorder(self, order: Sequence[str]) -> "SystemLayout":
        order = list(order)
        if sorted(order) != sorted(self.labels):
            raise LayoutError("order must be a permutation of the layout labels", order)
        return SystemLayout(tuple((label, self.dim(label)) for label in order))

    def to_list(self) -> List[Dict[str, Union[str, int]]]:
        return [{"label": label, "dim": dim} for label, dim in self.factors]


def check_density_matrix(matrix: np.ndarray, name: str = "density operator") -> None:
    """Raises StateValidationError naming the first violated invariant."""
    herm_dev = float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0
    if herm_dev > TOL_HERMITIAN:
        raise StateValidationError(f"{name} is not Hermitian", "hermitian", herm_dev)
    hmat = (matrix + matrix.conj().T) / 2
    min_eig = float(np.linalg.eigvalsh(hmat)[0]) if matrix.size else 0.0
    if min_eig < -TOL_PSD:
        raise StateValidationError(f"{name} has a negative eigenvalue", "psd", -min_eig)
    trace_dev = abs(float(np.real(np.trace(matrix))) - 1.0)
    if trace_dev > TOL_TRACE:
        raise StateValidationError(f"{name} does not have unit trace", "trace", trace_dev)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian PSD unit-trace matrix over a SystemLayout."""
    layout: SystemLayout
    matrix: np.ndarray

    def __post_init__(self):
        matrix = _frozen_array(self.matrix)
        dim = self.layout.total_dim
        if matrix.shape != (dim, dim):
            raise DimensionError(f"matrix shape {matrix.shape} does not match layout dim {dim}")
        check_density_matrix(matrix)
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def relabel(self, mapping: Dict[str, str]) -> "DensityOperator":
        return DensityOperator(self.layout.relabel(mapping), self.matrix)


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit state vector over a SystemLayout."""
    layout: SystemLayout
    vector: np.ndarray

    def __post_init__(self):
        vector = _frozen_array(self.vector).reshape(-1)
        dim = self.layout.total_dim
        if vector.shape != (dim,):
            raise DimensionError(f"vector length {vector.shape[0]} does not match layout dim {dim}")
        norm_dev = abs(float(np.linalg.norm(vector)) - 1.0)
        if norm_dev > TOL_NORM:
            raise StateValidationError("state vector is not normalized", "norm", norm_dev)
        object.__setattr__(self, "vector", vector)

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def tensor_view(self) -> np.ndarray:
        return self.vector.reshape(self.layout.dims)

    def density(self) -> DensityOperator:
        proj = np.outer(self.vector, self.vector.conj())
        return DensityOperator(self.layout, (proj + proj.conj().T) / 2)

    def relabel(self, mapping: Dict[str, str]) -> "PureState":
        return PureState(self.layout.relabel(mapping), self.vector)


@dataclass(frozen=True, eq=False)
class SchmidtForm:
    """Σ √λ_i |l_i⟩|r_i⟩ with coefficients λ_i descending and summing to one."""
    coefficients: np.ndarray
    left: np.ndarray           # columns are left basis vectors
    right: np.ndarray          # columns are right basis vectors
    rank: int
    left_layout: SystemLayout
    right_layout: SystemLayout

    def reconstruct(self) -> np.ndarray:
        """Vector in (left ⊗ right) order."""
        amp = np.sqrt(np.clip(self.coefficients, 0.0, None))
        return np.einsum("i,ai,bi->ab", amp, self.left, self.right).reshape(-1)


def _check_completeness(ops: Sequence[np.ndarray], d_in: int, what: str) -> None:
    total = sum(op.conj().T @ op for op in ops)
    dev = float(np.max(np.abs(total - np.eye(d_in))))
    if dev > TOL_COMPLETENESS:
        raise StateValidationError(f"{what} operators do not sum to identity", "completeness", dev)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Completely positive trace-preserving map Σ E_k ρ E_k†."""
    operators: Tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(_frozen_array(op) for op in self.operators)
        if not ops:
            raise StateValidationError("channel needs at least one Kraus operator", "completeness")
        shapes = {op.shape for op in ops}
        if len(shapes) != 1 or len(next(iter(shapes))) != 2:
            raise DimensionError(f"Kraus operators must share one 2-d shape, got {sorted(shapes)}")
        _check_completeness(ops, ops[0].shape[1], "Kraus")
        object.__setattr__(self, "operators", ops)

    @property
    def d_in(self) -> int:
        return self.operators[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.operators[0].shape[0]


@dataclass(frozen=True, eq=False)
class Instrument:
    """Local operation with recorded outcomes: outcome x applies the Kraus group E_xk."""
    outcomes: Tuple[Tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(_frozen_array(op) for op in group) for group in self.outcomes)
        flat = [op for group in groups for op in group]
        if not flat or any(not group for group in groups):
            raise StateValidationError("every outcome needs at least one operator", "completeness")
        shapes = {op.shape for op in flat}
        if len(shapes) != 1:
            raise DimensionError(f"instrument operators must share one shape, got {sorted(shapes)}")
        _check_completeness(flat, flat[0].shape[1], "instrument")
        object.__setattr__(self, "outcomes", groups)

    @property
    def n_outcomes(self) -> int:
        return len(self.outcomes)

    @property
    def d_in(self) -> int:
        return self.outcomes[0][0].shape[1]

    @property
    def d_out(self) -> int:
        return self.outcomes[0][0].shape[0]

    def as_channel(self) -> KrausChannel:
        """Forgets the outcome record."""
        return KrausChannel(tuple(op for group in self.outcomes for op in group))

    @classmethod
    def projective(cls, projectors: Sequence[np.ndarray]) -> "Instrument":
        return cls(tuple((np.asarray(p),) for p in projectors))

    @classmethod
    def from_channel(cls, channel: KrausChannel) -> "Instrument":
        """Single-outcome instrument (nothing recorded)."""
        return cls((channel.operators,))
