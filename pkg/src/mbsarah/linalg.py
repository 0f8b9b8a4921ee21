"""Small dense/sparse vector helpers.

Dense vectors are plain float64 numpy arrays. Sparse vectors are stored in
canonical form: sorted unique indices, no explicit zeros.
"""
from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    pass


def as_dense(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class SparseVector:
    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        val = np.asarray(self.values, dtype=np.float64).ravel()
        if idx.shape != val.shape:
            raise ValueError("indices and values differ in length")
        if idx.size and (idx.min() < 0 or idx.max() >= self.dim):
            raise DimensionError(f"index out of range for dim {self.dim}")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            # canonicalize: sort, sum duplicates
            uniq, inv = np.unique(idx, return_inverse=True)
            summed = np.zeros(uniq.size)
            np.add.at(summed, inv, val)
            idx, val = uniq, summed
        keep = val != 0.0
        if not keep.all():
            idx, val = idx[keep], val[keep]
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        object.__setattr__(self, "dim", int(self.dim))

    @classmethod
    def from_dense(cls, x) -> "SparseVector":
        x = as_dense(x)
        nz = np.flatnonzero(x)
        return cls(nz, x[nz], x.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    @property
    def nnz(self) -> int:
        return self.indices.size

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.dim, self.indices.tobytes(), self.values.tobytes()))


def _check_dim(x: SparseVector, y: np.ndarray):
    if x.dim != y.shape[0]:
        raise DimensionError(f"sparse dim {x.dim} != dense length {y.shape[0]}")


def dot(a: SparseVector, b) -> float:
    b = as_dense(b)
    _check_dim(a, b)
    if a.nnz == 0:
        return 0.0
    return float(np.dot(a.values, b[a.indices]))


def axpy_sparse(alpha: float, x: SparseVector, y) -> np.ndarray:
    """Return ``y + alpha * x`` as a new dense array."""
    y = as_dense(y)
    _check_dim(x, y)
    out = y.copy()
    if alpha != 0.0:
        out[x.indices] += alpha * x.values
    return out


def norm_sq(v) -> float:
    v = as_dense(v)
    return float(np.dot(v, v))
