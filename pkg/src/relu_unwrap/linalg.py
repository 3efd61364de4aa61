"""Dense matrix/tensor helpers and the vectorization identities.

Conventions used throughout the package:

* ``vec`` is column-stacking. For an order-k tensor this generalises to
  "first mode varies fastest" (Fortran order), so that

      vec(A @ X @ B) == kron(B.T, A) @ vec(X)

  holds for matrices.
* Arrays are stored row-major (C order) in memory; only ``vec``/``unvec``
  use Fortran order.
* The mode-i unfolding of a tensor ``X`` with shape ``(a_1, ..., a_k)`` is the
  ``a_i x prod(a_j, j != i)`` matrix whose columns are the mode-i fibres, with
  the remaining modes ordered first-fastest (Kolda & Bader convention).
* ``tucker_contract(X, [A_1, ..., A_k])`` contracts mode i of ``X`` with the
  *first* index of ``A_i`` (``A_i`` has shape ``a_i x a_i'``).  Its matrix form
  under ``vec`` is ``tucker_matrix(mats) = kron(A_k.T, ..., A_1.T)``.
"""

from __future__ import annotations

import string
from collections.abc import Sequence

import numpy as np

__all__ = [
    "ShapeError",
    "as_vector",
    "as_matrix",
    "as_tensor",
    "vec",
    "unvec",
    "kron",
    "kron_all",
    "hadamard",
    "unfold",
    "fold",
    "mode_contract",
    "tucker_contract",
    "tucker_contract_sequential",
    "tucker_matrix",
]


class ShapeError(ValueError):
    """Raised when array shapes are incompatible."""


def _finite(arr: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: non-finite entries are not allowed")
    arr.setflags(write=False)
    return arr


def as_vector(obj, name: str = "vector") -> np.ndarray:
    arr = np.array(obj, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name}: expected a vector, got shape {arr.shape}")
    return _finite(arr, name)


def as_matrix(obj, name: str = "matrix") -> np.ndarray:
    arr = np.array(obj, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name}: expected a matrix, got shape {arr.shape}")
    return _finite(arr, name)


def as_tensor(obj, name: str = "tensor") -> np.ndarray:
    arr = np.array(obj, dtype=np.float64)
    if arr.ndim == 0 or 0 in arr.shape:
        raise ShapeError(f"{name}: every mode must have dimension >= 1, got shape {arr.shape}")
    return _finite(arr, name)


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization (first index fastest)."""
    return np.asarray(m).ravel(order="F")


def unvec(v: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`vec` for a fixed shape."""
    v = np.asarray(v)
    if v.ndim != 1 or v.size != int(np.prod(shape)):
        raise ShapeError(f"cannot unvec length-{v.size} vector into shape {tuple(shape)}")
    return np.ascontiguousarray(v.reshape(tuple(shape), order="F"))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product: block (i, j) of the result is ``a[i, j] * b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError("kron expects two matrices")
    (p, q), (r, s) = a.shape, b.shape
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(p * r, q * s)


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.asarray(mats[0], dtype=np.float64)
    for m in mats[1:]:
        out = kron(out, m)
    return out


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"hadamard: shape mismatch {a.shape} vs {b.shape}")
    return a * b


def unfold(x: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding; columns are mode fibres, other modes first-fastest."""
    x = np.asarray(x)
    return np.moveaxis(x, mode, 0).reshape(x.shape[mode], -1, order="F")


def fold(m: np.ndarray, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold` for a tensor of the given full shape."""
    shape = tuple(shape)
    moved = (shape[mode],) + shape[:mode] + shape[mode + 1:]
    return np.ascontiguousarray(np.moveaxis(np.asarray(m).reshape(moved, order="F"), 0, mode))


def mode_contract(x: np.ndarray, a: np.ndarray, mode: int) -> np.ndarray:
    """Contract mode ``mode`` of ``x`` with the first index of ``a``."""
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != x.shape[mode]:
        raise ShapeError(
            f"mode {mode}: matrix with {a.shape[0] if a.ndim == 2 else '?'} rows "
            f"cannot contract a mode of dimension {x.shape[mode]}"
        )
    shape = list(x.shape)
    shape[mode] = a.shape[1]
    return fold(a.T @ unfold(x, mode), mode, shape)


def _check_tucker(x: np.ndarray, mats: Sequence[np.ndarray]) -> None:
    if len(mats) != x.ndim:
        raise ShapeError(f"tucker_contract: {len(mats)} matrices for an order-{x.ndim} tensor")
    for i, (dim, a) in enumerate(zip(x.shape, mats)):
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != dim:
            raise ShapeError(
                f"tucker_contract: mode {i} has dimension {dim} but matrix {i} has shape {a.shape}"
            )


def tucker_contract(x: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """All-at-once Tucker product ``[[x; A_1, ..., A_k]]``."""
    x = np.asarray(x, dtype=np.float64)
    _check_tucker(x, mats)
    k = x.ndim
    letters = string.ascii_letters
    src, dst = letters[:k], letters[k:2 * k]
    spec = ",".join([src] + [src[i] + dst[i] for i in range(k)]) + "->" + dst
    return np.einsum(spec, x, *[np.asarray(a, dtype=np.float64) for a in mats])


def tucker_contract_sequential(x: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Tucker product by contracting one mode at a time via unfold/multiply/fold."""
    x = np.asarray(x, dtype=np.float64)
    _check_tucker(x, mats)
    for mode, a in enumerate(mats):
        x = mode_contract(x, a, mode)
    return x


def tucker_matrix(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Matrix ``M`` with ``vec(tucker_contract(x, mats)) == M @ vec(x)``.

    With first-fastest ``vec`` the factor order is reversed:
    ``M = kron(A_k.T, ..., A_1.T)``.
    """
    return kron_all([np.asarray(a, dtype=np.float64).T for a in reversed(mats)])
