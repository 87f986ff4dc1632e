"""
utils/qcore/qcore_ops.py
Dense linear-algebra primitives on states and operators.

Bütün fonksiyonlar saf (pure); RNG durumu çağırana aittir.
Index convention: leftmost factor is the most significant digit of the flat index.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from .qcore_constants import RANK_CUTOFF
from .qcore_exceptions import DimensionError, InvalidParameterError, LayoutError
from .qcore_types import (
    DensityOperator,
    Instrument,
    KrausChannel,
    LabelSet,
    PureState,
    SchmidtForm,
    SystemLayout,
    as_label_list,
)

logger = logging.getLogger(__name__)

State = Union[PureState, DensityOperator]
MatrixLike = Union[DensityOperator, np.ndarray]


# -------------------------
# Yardımcılar
# -------------------------
def hermitize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.conj().T) / 2


def as_matrix(x: MatrixLike) -> np.ndarray:
    if isinstance(x, DensityOperator):
        return x.matrix
    if isinstance(x, PureState):
        return np.outer(x.vector, x.vector.conj())
    return np.asarray(x, dtype=complex)


def support_basis(matrix: np.ndarray, cutoff: float = RANK_CUTOFF) -> np.ndarray:
    """Orthonormal columns spanning the support of a PSD matrix."""
    vals, vecs = np.linalg.eigh(hermitize(np.asarray(matrix, dtype=complex)))
    top = max(float(vals[-1]), 0.0) if vals.size else 0.0
    if top <= 0.0:
        return np.zeros((matrix.shape[0], 0), dtype=complex)
    return vecs[:, vals > cutoff * top]


def support_projector(matrix: np.ndarray, cutoff: float = RANK_CUTOFF) -> np.ndarray:
    basis = support_basis(matrix, cutoff)
    return basis @ basis.conj().T


def numerical_rank(values: np.ndarray, cutoff: float = RANK_CUTOFF) -> int:
    values = np.asarray(values, dtype=float)
    if values.size == 0 or values.max() <= 0.0:
        return 0
    return int(np.sum(values > cutoff * values.max()))


def _permute_tensor_axes(dims: Sequence[int], perm: Sequence[int], matrix: np.ndarray) -> np.ndarray:
    n = len(dims)
    t = matrix.reshape(list(dims) + list(dims))
    t = t.transpose(list(perm) + [n + p for p in perm])
    d = int(np.prod(dims, dtype=np.int64))
    return t.reshape(d, d)


# -------------------------
# Tensor product / permutations
# -------------------------
def tensor(x: State, y: State) -> State:
    """Kronecker product; pure ⊗ pure stays pure, anything else becomes a density operator."""
    layout = x.layout.concat(y.layout)
    if isinstance(x, PureState) and isinstance(y, PureState):
        return PureState(layout, np.kron(x.vector, y.vector))
    return DensityOperator(layout, hermitize(np.kron(as_matrix(x), as_matrix(y))))


def tensor_all(states: Sequence[State]) -> State:
    if not states:
        raise DimensionError("tensor product of an empty sequence")
    result = states[0]
    for state in states[1:]:
        result = tensor(result, state)
    return result


def permute(x: State, order: Sequence[str]) -> State:
    """Reorders tensor factors to the given label order."""
    new_layout = x.layout.reorder(order)
    perm = [x.layout.index(label) for label in order]
    if isinstance(x, PureState):
        vec = x.tensor_view().transpose(perm).reshape(-1)
        return PureState(new_layout, vec)
    return DensityOperator(new_layout, _permute_tensor_axes(x.layout.dims, perm, x.matrix))


def embed(x: np.ndarray, labels: LabelSet, layout: SystemLayout) -> np.ndarray:
    """id_complement ⊗ X arranged in layout order; adjoint of the partial trace.

    X is given on the factors named by `labels`, taken in layout order.
    """
    kept = layout.check_labels(labels)
    rest = layout.complement(kept)
    x = np.asarray(x, dtype=complex)
    d_kept = layout.dim_of(kept)
    if x.shape != (d_kept, d_kept):
        raise DimensionError(f"operator shape {x.shape} does not match subsystem dim {d_kept}")
    full = np.kron(x, np.eye(layout.dim_of(rest))) if rest else x
    order = kept + rest
    dims = [layout.dim(label) for label in order]
    # (kept, rest) sırasından layout sırasına
    perm = [order.index(label) for label in layout.labels]
    return _permute_tensor_axes(dims, perm, full)


# -------------------------
# Partial trace
# -------------------------
def partial_trace_matrix(matrix: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Raw partial trace over all axes not listed in `keep` (sorted axis positions)."""
    n = len(dims)
    t = np.asarray(matrix).reshape(list(dims) + list(dims))
    row = list(range(n))
    col = [n + i if i in keep else i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    d = int(np.prod([dims[i] for i in keep], dtype=np.int64))
    return np.einsum(t, row + col, out).reshape(d, d)


def partial_trace_vector(vector: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix of a pure state vector on the `keep` axes."""
    n = len(dims)
    t = np.asarray(vector).reshape(dims)
    left = list(range(n))
    right = [n + i if i in keep else i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    d = int(np.prod([dims[i] for i in keep], dtype=np.int64))
    return np.einsum(t, left, t.conj(), right, out).reshape(d, d)


def partial_trace(rho: State, keep: LabelSet) -> DensityOperator:
    """Reduced operator on the kept factors, in their original relative order."""
    wanted = as_label_list(keep)
    if not wanted:
        raise LayoutError("keep must be a nonempty label set")
    kept = rho.layout.check_labels(wanted)
    keep_idx = [rho.layout.index(label) for label in kept]
    if isinstance(rho, PureState):
        reduced = partial_trace_vector(rho.vector, rho.layout.dims, keep_idx)
    else:
        reduced = partial_trace_matrix(rho.matrix, rho.layout.dims, keep_idx)
    return DensityOperator(rho.layout.subset(kept), hermitize(reduced))


# -------------------------
# Norms and distances
# -------------------------
def trace_norm(x: MatrixLike, hermitian: Optional[bool] = None) -> float:
    """Sum of absolute eigenvalues (Hermitian path) or singular values (general path)."""
    m = as_matrix(x)
    if hermitian is None:
        hermitian = bool(np.allclose(m, m.conj().T, atol=1e-12))
    if hermitian:
        return float(np.sum(np.abs(np.linalg.eigvalsh(hermitize(m)))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def hs_norm(x: MatrixLike) -> float:
    return float(np.linalg.norm(as_matrix(x), "fro"))


def trace_distance(rho: MatrixLike, sigma: MatrixLike) -> float:
    return 0.5 * trace_norm(as_matrix(rho) - as_matrix(sigma), hermitian=True)


def psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(hermitize(matrix))
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T


def fidelity(rho: MatrixLike, sigma: MatrixLike) -> float:
    """Squared fidelity F = ‖√ρ √σ‖₁²."""
    a, b = as_matrix(rho), as_matrix(sigma)
    if a.shape != b.shape:
        raise DimensionError(f"fidelity needs equal shapes, got {a.shape} and {b.shape}")
    root = float(np.sum(np.linalg.svd(psd_sqrt(a) @ psd_sqrt(b), compute_uv=False)))
    return float(min(max(root * root, 0.0), 1.0))


def generalized_inverse_power(sigma: MatrixLike, power: float, cutoff: float = RANK_CUTOFF) -> np.ndarray:
    """σ^power on the support of σ, zero elsewhere (generalized inverse for power < 0)."""
    if power >= 0:
        raise InvalidParameterError(f"generalized inverse power must be negative, got {power}")
    vals, vecs = np.linalg.eigh(hermitize(as_matrix(sigma)))
    top = max(float(vals[-1]), 0.0)
    mapped = np.zeros_like(vals)
    if top > 0.0:
        mask = vals > cutoff * top
        mapped[mask] = vals[mask] ** power
    return hermitize((vecs * mapped) @ vecs.conj().T)


def weighted_hs_norm(s: np.ndarray, sigma: MatrixLike) -> float:
    """‖σ^{-1/4} S σ^{-1/4}‖₂; bounds ‖S‖₁ from above by a factor √(tr σ)."""
    w = generalized_inverse_power(sigma, -0.25)
    return hs_norm(w @ np.asarray(s, dtype=complex) @ w)


# -------------------------
# Decompositions
# -------------------------
def schmidt(psi: PureState, left: LabelSet) -> SchmidtForm:
    """SVD-based Schmidt decomposition across left | rest."""
    left_labels = psi.layout.check_labels(left)
    right_labels = psi.layout.complement(left_labels)
    if not left_labels or not right_labels:
        raise LayoutError("schmidt needs a proper nonempty split", as_label_list(left))
    ordered = permute(psi, left_labels + right_labels)
    d_left = psi.layout.dim_of(left_labels)
    mat = ordered.vector.reshape(d_left, -1)
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    coeffs = s ** 2
    coeffs = coeffs / coeffs.sum()
    return SchmidtForm(
        coefficients=coeffs,
        left=u,
        right=vh.T,
        rank=numerical_rank(coeffs),
        left_layout=psi.layout.subset(left_labels),
        right_layout=psi.layout.subset(right_labels),
    )


def purify(rho: DensityOperator, new_label: str) -> PureState:
    """Canonical purification Σ √λ_i |v_i⟩|i⟩ with eigenvalues descending.

    The ancilla has the full dimension of ρ, not its rank.
    """
    dim = rho.dim
    layout = rho.layout.concat(SystemLayout.of((new_label, dim)))
    vals, vecs = np.linalg.eigh(rho.matrix)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    amp = np.sqrt(np.clip(vals, 0.0, None))
    vec = (vecs * amp).reshape(-1)
    return PureState(layout, vec / np.linalg.norm(vec))


# -------------------------
# States and unitaries
# -------------------------
def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar sample: Ginibre matrix, QR, columns rescaled by the phases of diag(R)."""
    if dim < 1:
        raise InvalidParameterError(f"dim must be >= 1, got {dim}")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = scipy.linalg.qr(z)
    diag = np.diag(r)
    phases = diag / np.abs(diag)
    return q * phases


def max_entangled(k: int, labels: Tuple[str, str]) -> PureState:
    """(1/√k) Σ |ii⟩."""
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    layout = SystemLayout.of((labels[0], k), (labels[1], k))
    return PureState(layout, np.eye(k, dtype=complex).reshape(-1) / np.sqrt(k))


def random_pure(layout: SystemLayout, rng: np.random.Generator) -> PureState:
    """Haar-random pure state."""
    d = layout.total_dim
    vec = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return PureState(layout, vec / np.linalg.norm(vec))


def random_density(layout: SystemLayout, rng: np.random.Generator, rank: Optional[int] = None) -> DensityOperator:
    """Induced-measure mixed state G G†/tr with a d×rank Ginibre G."""
    d = layout.total_dim
    r = d if rank is None else int(rank)
    g = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    m = g @ g.conj().T
    return DensityOperator(layout, hermitize(m / np.real(np.trace(m))))


def random_channel(dim: int, rng: np.random.Generator, n_kraus: int = 2) -> KrausChannel:
    """Random channel from a Haar isometry dim → dim·n_kraus cut into blocks."""
    u = haar_unitary(dim * n_kraus, rng)[:, :dim]
    return KrausChannel(tuple(u[k * dim:(k + 1) * dim, :] for k in range(n_kraus)))


# -------------------------
# Channels and instruments
# -------------------------
def apply_local_matrix(op: np.ndarray, matrix: np.ndarray, dims: Sequence[int], axis: int) -> np.ndarray:
    """(op on factor `axis`) · M · (op on factor `axis`)†, op may be rectangular."""
    n = len(dims)
    t = np.asarray(matrix).reshape(list(dims) + list(dims))
    t = np.moveaxis(np.tensordot(op, t, axes=([1], [axis])), 0, axis)
    t = np.moveaxis(np.tensordot(op.conj(), t, axes=([1], [n + axis])), 0, n + axis)
    new_dims = list(dims)
    new_dims[axis] = op.shape[0]
    d = int(np.prod(new_dims, dtype=np.int64))
    return t.reshape(d, d)


def _local_kraus_sum(ops: Sequence[np.ndarray], rho: DensityOperator, label: Optional[str]) -> Tuple[np.ndarray, SystemLayout]:
    if label is None:
        if ops[0].shape[1] != rho.dim:
            raise DimensionError(f"channel input dim {ops[0].shape[1]} != state dim {rho.dim}")
        out = sum(op @ rho.matrix @ op.conj().T for op in ops)
        if ops[0].shape[0] != rho.dim:
            layout = SystemLayout.of(("out", ops[0].shape[0]))
        else:
            layout = rho.layout
        return out, layout
    axis = rho.layout.index(label)
    if ops[0].shape[1] != rho.layout.dims[axis]:
        raise DimensionError(f"channel input dim {ops[0].shape[1]} != dim of '{label}'")
    out = sum(apply_local_matrix(op, rho.matrix, rho.layout.dims, axis) for op in ops)
    factors = list(rho.layout.factors)
    factors[axis] = (label, ops[0].shape[0])
    return out, SystemLayout(tuple(factors))


def apply_channel(ch: KrausChannel, rho: DensityOperator, label: Optional[str] = None) -> DensityOperator:
    """Σ E_k ρ E_k†, on the whole system or on one factor."""
    out, layout = _local_kraus_sum(ch.operators, rho, label)
    return DensityOperator(layout, hermitize(out))


@dataclass(frozen=True)
class InstrumentResult:
    """ρ′ = Σ_x Λ_x(ρ) ⊗ |x⟩⟨x| together with the flag marginal ρ_X."""
    state: DensityOperator
    flag: DensityOperator
    probabilities: np.ndarray


def apply_instrument(inst: Instrument, rho: DensityOperator, label: str, flag_label: str = "X") -> InstrumentResult:
    """Applies a local instrument on `label` and records outcomes in a new last factor."""
    if flag_label in rho.layout:
        raise LayoutError("flag label already in use", [flag_label])
    branches = []
    layout = rho.layout
    for group in inst.outcomes:
        out, layout = _local_kraus_sum(group, rho, label)
        branches.append(hermitize(out))
    n = inst.n_outcomes
    probs = np.array([float(np.real(np.trace(b))) for b in branches])
    full = sum(np.kron(b, np.diag(np.eye(n)[x]).astype(complex)) for x, b in enumerate(branches))
    full_layout = layout.concat(SystemLayout.of((flag_label, n)))
    flag = DensityOperator(SystemLayout.of((flag_label, n)), np.diag(probs / probs.sum()).astype(complex))
    return InstrumentResult(DensityOperator(full_layout, hermitize(full)), flag, probs)


@dataclass(frozen=True)
class ProjectiveDilation:
    """Isometry V = Σ E_xk ⊗ |x,k⟩ followed by projectors grouped by outcome."""
    isometry: np.ndarray
    projectors: Tuple[np.ndarray, ...]
    ancilla_dim: int


def projective_dilation(inst: Instrument) -> ProjectiveDilation:
    """Realizes a general instrument by an isometry and a projective measurement."""
    flat = [op for group in inst.outcomes for op in group]
    m = len(flat)
    d_in, d_out = inst.d_in, inst.d_out
    v = np.zeros((d_out * m, d_in), dtype=complex)
    for k, op in enumerate(flat):
        ket = np.zeros((m, 1))
        ket[k, 0] = 1.0
        v += np.kron(op, ket)
    projectors = []
    start = 0
    for group in inst.outcomes:
        diag = np.zeros(m)
        diag[start:start + len(group)] = 1.0
        projectors.append(np.kron(np.eye(d_out), np.diag(diag)))
        start += len(group)
    return ProjectiveDilation(v, tuple(projectors), m)


def dilated_branches(dil: ProjectiveDilation, rho: DensityOperator) -> List[np.ndarray]:
    """Unnormalized post-measurement states, ancilla traced out."""
    lifted = dil.isometry @ rho.matrix @ dil.isometry.conj().T
    d_out = dil.isometry.shape[0] // dil.ancilla_dim
    return [
        hermitize(partial_trace_matrix(p @ lifted @ p, [d_out, dil.ancilla_dim], [0]))
        for p in dil.projectors
    ]
