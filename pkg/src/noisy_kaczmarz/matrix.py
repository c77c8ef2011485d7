"""Row-oriented matrix storage and the linear-algebra primitives the solvers use.

A :class:`RowMatrix` holds either a dense row-major array or a CSR triple
(``indptr``, ``indices``, ``data``) together with cached squared row norms and
the squared Frobenius norm.  Instances are treated as immutable.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ContractError


def as_vector(values, length: int | None = None, name: str = "vector") -> np.ndarray:
    """Return ``values`` as a contiguous float64 vector with finite entries."""
    v = np.ascontiguousarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ContractError(f"{name} must be one-dimensional, got shape {v.shape}")
    if length is not None and v.shape[0] != length:
        raise ContractError(f"{name} has length {v.shape[0]}, expected {length}")
    if not np.all(np.isfinite(v)):
        raise ContractError(f"{name} contains NaN or Inf")
    return v


class RowMatrix:
    """Dense or CSR matrix with cached row norms.

    Use :meth:`from_dense`, :meth:`from_csr` or :meth:`from_scipy` rather than
    calling the constructor directly.  By default zero rows are rejected
    because the Kaczmarz projection divides by ``||a_i||^2``; pass
    ``allow_zero_rows=True`` for noise matrices and other non-solver data.
    """

    __slots__ = (
        "m", "n", "dense", "indptr", "indices", "data",
        "row_norm_sq", "frob_sq", "_cdf", "_csc",
    )

    def __init__(self, m, n, dense=None, indptr=None, indices=None, data=None,
                 allow_zero_rows=False):
        self.m = int(m)
        self.n = int(n)
        if self.m < 1 or self.n < 1:
            raise ContractError(f"matrix dimensions must be positive, got {m}x{n}")
        self.dense = dense
        self.indptr = indptr
        self.indices = indices
        self.data = data
        self._cdf = None
        self._csc = None
        if dense is not None:
            flat = dense.ravel()
            self.row_norm_sq = _row_sums(flat * flat, _dense_indptr(self.m, self.n), self.m)
        else:
            self.row_norm_sq = _row_sums(data * data, indptr, self.m)
        self.frob_sq = float(np.sum(self.row_norm_sq))
        if not allow_zero_rows and np.any(self.row_norm_sq == 0.0):
            bad = int(np.flatnonzero(self.row_norm_sq == 0.0)[0])
            raise ContractError(f"row {bad} is zero; solver matrices need nonzero rows")
        self.row_norm_sq.setflags(write=False)

    # -- construction -------------------------------------------------

    @classmethod
    def from_dense(cls, array, allow_zero_rows: bool = False) -> "RowMatrix":
        a = np.array(array, dtype=np.float64, order="C", copy=True)
        if a.ndim != 2:
            raise ContractError(f"expected a 2-D array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ContractError("matrix contains NaN or Inf")
        a.setflags(write=False)
        return cls(a.shape[0], a.shape[1], dense=a, allow_zero_rows=allow_zero_rows)

    @classmethod
    def from_csr(cls, indptr, indices, data, shape, allow_zero_rows: bool = False) -> "RowMatrix":
        m, n = (int(s) for s in shape)
        indptr = np.array(indptr, dtype=np.intp)
        indices = np.array(indices, dtype=np.intp)
        data = np.array(data, dtype=np.float64)
        if indptr.shape != (m + 1,) or indptr[0] != 0 or indptr[-1] != data.size:
            raise ContractError("malformed CSR row pointer")
        if indices.shape != data.shape:
            raise ContractError("CSR indices and data differ in length")
        if np.any(np.diff(indptr) < 0):
            raise ContractError("CSR row pointer must be non-decreasing")
        if indices.size and (indices.min() < 0 or indices.max() >= n):
            raise ContractError("CSR column index out of range")
        # strictly increasing columns within each row
        if indices.size > 1:
            step = np.diff(indices)
            row_start = np.zeros(indices.size, dtype=bool)
            row_start[indptr[1:-1][indptr[1:-1] < indices.size]] = True
            if np.any((step <= 0) & ~row_start[1:]):
                raise ContractError("CSR column indices must be strictly increasing within a row")
        if not np.all(np.isfinite(data)):
            raise ContractError("matrix contains NaN or Inf")
        for arr in (indptr, indices, data):
            arr.setflags(write=False)
        return cls(m, n, indptr=indptr, indices=indices, data=data,
                   allow_zero_rows=allow_zero_rows)

    @classmethod
    def from_scipy(cls, matrix, allow_zero_rows: bool = False) -> "RowMatrix":
        """Build CSR storage from any scipy sparse matrix (duplicates summed)."""
        csr = sp.csr_array(matrix, dtype=np.float64)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls.from_csr(csr.indptr, csr.indices, csr.data, csr.shape,
                            allow_zero_rows=allow_zero_rows)

    # -- views --------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    @property
    def is_sparse(self) -> bool:
        return self.dense is None

    @property
    def nnz(self) -> int:
        if self.dense is not None:
            return int(np.count_nonzero(self.dense))
        return int(self.data.size)

    @property
    def row_cdf(self) -> np.ndarray:
        """Cumulative squared row norms, used by norm-squared sampling."""
        if self._cdf is None:
            cdf = np.cumsum(self.row_norm_sq)
            cdf.setflags(write=False)
            self._cdf = cdf
        return self._cdf

    def csc(self):
        """Column-compressed copy ``(indptr, indices, data)``; CSR storage only."""
        if self.dense is not None:
            raise ContractError("csc() is only defined for sparse storage")
        if self._csc is None:
            c = self.to_scipy().tocsc()
            c.sort_indices()
            self._csc = (c.indptr.astype(np.intp), c.indices.astype(np.intp),
                         np.ascontiguousarray(c.data, dtype=np.float64))
        return self._csc

    def to_scipy(self):
        if self.dense is not None:
            return sp.csr_array(self.dense)
        return sp.csr_array((self.data, self.indices, self.indptr), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense.copy()
        return self.to_scipy().toarray()

    def row(self, i: int) -> np.ndarray:
        """Row ``i`` as a dense vector (a copy)."""
        self._check_row(i)
        if self.dense is not None:
            return self.dense[i].copy()
        out = np.zeros(self.n)
        lo, hi = self.indptr[i], self.indptr[i + 1]
        out[self.indices[lo:hi]] = self.data[lo:hi]
        return out

    def row_slice(self, i: int):
        """``(column indices, values)`` of the stored entries of row ``i``."""
        self._check_row(i)
        if self.dense is not None:
            return np.arange(self.n), self.dense[i]
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def matvec(self, x) -> np.ndarray:
        x = as_vector(x, self.n, "x")
        if self.dense is not None:
            return self.dense @ x
        return self.to_scipy() @ x

    def rmatvec(self, y) -> np.ndarray:
        y = as_vector(y, self.m, "y")
        if self.dense is not None:
            return self.dense.T @ y
        return self.to_scipy().T @ y

    def _check_row(self, i):
        if not (0 <= i < self.m):
            raise ContractError(f"row index {i} out of range for {self.m} rows")

    def __repr__(self):
        kind = "csr" if self.is_sparse else "dense"
        return f"RowMatrix({self.m}x{self.n}, {kind}, nnz={self.nnz})"


def row_dot(A: RowMatrix, i: int, x) -> float:
    """Inner product of row ``i`` of ``A`` with ``x``."""
    x = as_vector(x, A.n, "x")
    cols, vals = A.row_slice(i)
    # product-then-pairwise-sum, identical for dense rows and explicit CSR rows
    return float(np.add.reduce(vals * x[cols]))


def residual(A: RowMatrix, x, b) -> np.ndarray:
    """Return ``A x - b``."""
    x = as_vector(x, A.n, "x")
    b = as_vector(b, A.m, "b")
    # same segmented reduction for both storages, so explicit CSR copies of a
    # dense matrix give bit-identical results
    if A.dense is not None:
        ax = _row_sums((A.dense * x).ravel(), _dense_indptr(A.m, A.n), A.m)
    else:
        ax = _row_sums(A.data * x[A.indices], A.indptr, A.m)
    return ax - b


def _dense_indptr(m, n):
    return np.arange(m + 1, dtype=np.intp) * n


def _row_sums(values, indptr, m):
    # segments start only at nonempty rows; reduceat misbehaves on empty ones
    out = np.zeros(m)
    nonempty = np.diff(indptr) > 0
    if values.size:
        out[nonempty] = np.add.reduceat(values, indptr[:-1][nonempty])
    return out


def frobenius_norm_sq(A: RowMatrix) -> float:
    return A.frob_sq


def min_singular_value(A: RowMatrix) -> float:
    """Smallest singular value of ``A`` (zero when rank deficient).

    Computed from the eigenvalues of the Gram matrix of the smaller
    dimension, so it is intended for matrices with ``min(m, n)`` up to a few
    hundred.
    """
    if A.m == 0 or A.n == 0:
        raise ContractError("matrix has a zero dimension")
    M = A.to_dense()
    G = M.T @ M if A.n <= A.m else M @ M.T
    lam = np.linalg.eigvalsh(G)
    return float(np.sqrt(max(lam[0], 0.0)))


def singular_values(M) -> np.ndarray:
    """Full singular spectrum, non-increasing."""
    if isinstance(M, RowMatrix):
        M = M.to_dense()
    return np.linalg.svd(np.asarray(M, dtype=np.float64), compute_uv=False)


def spectral_norm(M) -> float:
    s = singular_values(M)
    return float(s[0]) if s.size else 0.0
