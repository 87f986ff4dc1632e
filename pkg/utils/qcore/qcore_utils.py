"""
utils/qcore/qcore_utils.py
JSON interchange codec, sparse Hermitian bases and builtin states.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .qcore_constants import BUILTIN_STATES
from .qcore_exceptions import ExperimentConfigError, StateFormatError
from .qcore_types import DensityOperator, PureState, SystemLayout

logger = logging.getLogger(__name__)


# -------------------------
# JSON codec
# -------------------------
def complex_to_pairs(values: np.ndarray) -> List[List[float]]:
    flat = np.asarray(values, dtype=complex).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in flat]


def pairs_to_complex(pairs: Any, size: int, where: str = "entries") -> np.ndarray:
    try:
        arr = np.asarray(pairs, dtype=float)
    except (TypeError, ValueError) as exc:
        raise StateFormatError(f"{where} must be numeric [re, im] pairs") from exc
    arr = arr.reshape(-1, 2) if arr.size % 2 == 0 and arr.ndim >= 2 and arr.shape[-1] == 2 else None
    if arr is None or arr.shape[0] != size:
        raise StateFormatError(f"{where} must hold {size} [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def layout_from_list(items: Any) -> SystemLayout:
    if not isinstance(items, list) or not items:
        raise StateFormatError("layout must be a nonempty list of {label, dim} objects")
    try:
        return SystemLayout(tuple((str(item["label"]), int(item["dim"])) for item in items))
    except (KeyError, TypeError, ValueError) as exc:
        raise StateFormatError(f"bad layout entry: {exc}") from exc


def matrix_to_dict(matrix: np.ndarray, layout: SystemLayout, kind: str = "operator") -> Dict[str, Any]:
    return {"kind": kind, "layout": layout.to_list(), "entries": complex_to_pairs(matrix)}


def state_to_dict(state: Union[PureState, DensityOperator]) -> Dict[str, Any]:
    if isinstance(state, PureState):
        return {"kind": "pure", "layout": state.layout.to_list(), "entries": complex_to_pairs(state.vector)}
    return matrix_to_dict(state.matrix, state.layout, kind="density")


def state_from_dict(doc: Any) -> Union[PureState, DensityOperator]:
    """Decodes and validates; invariant violations raise StateValidationError."""
    if not isinstance(doc, dict) or "layout" not in doc or "entries" not in doc:
        raise StateFormatError("document needs 'layout' and 'entries'")
    layout = layout_from_list(doc["layout"])
    kind = doc.get("kind", "density")
    d = layout.total_dim
    if kind == "pure":
        return PureState(layout, pairs_to_complex(doc["entries"], d))
    if kind in ("density", "operator"):
        return DensityOperator(layout, pairs_to_complex(doc["entries"], d * d).reshape(d, d))
    raise StateFormatError(f"unknown kind '{kind}'")


def save_state(state: Union[PureState, DensityOperator], path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(state_to_dict(state), indent=1))


def load_state(path: Union[str, Path]) -> Union[PureState, DensityOperator]:
    """Reads a state file; parse failures raise StateFormatError."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise StateFormatError(f"cannot read file: {exc}", str(path)) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateFormatError(f"invalid JSON: {exc.msg}", str(path)) from exc
    state = state_from_dict(doc)
    logger.debug(f"📦 State yüklendi: {path} ({type(state).__name__}, dims {state.layout.dims})")
    return state


# -------------------------
# Sparse bases (vec uses column-major order)
# -------------------------
def vec(matrix: np.ndarray) -> np.ndarray:
    return np.asarray(matrix).reshape(-1, order="F")


def unvec(vector: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(vector).reshape(dim, dim, order="F")


def hermitian_basis(dim: int) -> sp.csr_matrix:
    """Rows are vec(G_i) of a Hilbert-Schmidt orthonormal Hermitian basis of dim×dim matrices."""
    rows, cols, vals = [], [], []
    r = 0
    s = 1.0 / np.sqrt(2.0)
    for j in range(dim):
        rows.append(r); cols.append(j + j * dim); vals.append(1.0)
        r += 1
    for j in range(dim):
        for k in range(j + 1, dim):
            # (E_jk + E_kj)/√2
            rows += [r, r]; cols += [j + k * dim, k + j * dim]; vals += [s, s]
            r += 1
            # i(E_jk − E_kj)/√2
            rows += [r, r]; cols += [j + k * dim, k + j * dim]; vals += [1j * s, -1j * s]
            r += 1
    return sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(dim * dim, dim * dim))


def partial_trace_superop(dims: Sequence[int], keep: Sequence[int]) -> sp.csr_matrix:
    """Sparse T with vec(tr_rest X) = T vec(X); its transpose is the embedding id ⊗ (·)."""
    dims = list(dims)
    d = int(np.prod(dims, dtype=np.int64))
    keep = list(keep)
    traced = [i for i in range(len(dims)) if i not in keep]
    d_keep = int(np.prod([dims[i] for i in keep], dtype=np.int64))
    idx = np.arange(d)
    digits = np.array(np.unravel_index(idx, dims))            # (n_factors, d)
    kept_flat = np.ravel_multi_index(tuple(digits[keep]), [dims[i] for i in keep]) if keep else np.zeros(d, dtype=int)
    # r ve c için traced rakamlar eşit olmalı
    r_idx, c_idx = np.meshgrid(idx, idx, indexing="ij")
    same = np.ones_like(r_idx, dtype=bool)
    for t in traced:
        same &= digits[t][r_idx] == digits[t][c_idx]
    r_sel, c_sel = r_idx[same], c_idx[same]
    src = r_sel + c_sel * d
    dst = kept_flat[r_sel] + kept_flat[c_sel] * d_keep
    data = np.ones(src.shape[0], dtype=float)
    return sp.csr_matrix((data, (dst, src)), shape=(d_keep * d_keep, d * d))


# -------------------------
# Builtin states (A|B|R)
# -------------------------
def builtin_state(name: str) -> PureState:
    """Fixed zoo: bell (A|R, trivial B), ghz, product (|0⟩_A ⊗ Bell_BR), w."""
    name = name.lower()
    if name not in BUILTIN_STATES:
        raise ExperimentConfigError(f"unknown builtin state '{name}' (known: {BUILTIN_STATES})")
    if name == "bell":
        layout = SystemLayout.of(("A", 2), ("B", 1), ("R", 2))
        vec_ = np.zeros(4, dtype=complex)
        vec_[0] = vec_[3] = 1 / np.sqrt(2)
        return PureState(layout, vec_)
    layout = SystemLayout.of(("A", 2), ("B", 2), ("R", 2))
    amp = np.zeros(8, dtype=complex)
    if name == "ghz":
        amp[0b000] = amp[0b111] = 1 / np.sqrt(2)
    elif name == "product":
        amp[0b000] = amp[0b011] = 1 / np.sqrt(2)
    else:
        amp[0b100] = amp[0b010] = amp[0b001] = 1 / np.sqrt(3)
    return PureState(layout, amp)
