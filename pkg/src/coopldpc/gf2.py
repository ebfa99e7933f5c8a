"""Sparse binary matrices and GF(2) elimination.

Matrices are stored row-major as CSR index arrays (sorted column indices per
row).  Elimination runs on a dense bit-packed copy (``uint64`` words), which
is only ever done once per code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SparseBitMatrix",
    "SystemizedForm",
    "SingularBlock",
    "rank",
    "dense_rank",
    "systemize_right_block",
    "solve_parity",
    "syndrome",
    "read_alist",
    "write_alist",
]


class SingularBlock(ValueError):
    """The rightmost square block is rank deficient; regenerate the code."""


class SparseBitMatrix:
    """Immutable sparse matrix over GF(2).

    Parameters
    ----------
    n_rows, n_cols : int
    indptr, indices : array_like
        CSR row pointer and column indices.  Column indices within a row are
        sorted on construction; duplicates raise ``ValueError``.
    """

    __slots__ = ("n_rows", "n_cols", "indptr", "indices", "_csr", "_csc")

    def __init__(self, n_rows: int, n_cols: int, indptr, indices):
        indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        if indptr.shape != (n_rows + 1,) or indptr[0] != 0 or indptr[-1] != len(indices):
            raise ValueError("malformed row pointer")
        if len(indices) and (indices.min() < 0 or indices.max() >= n_cols):
            raise ValueError("column index out of range")
        row_of = np.repeat(np.arange(n_rows), np.diff(indptr))
        order = np.lexsort((indices, row_of))
        indices = indices[order]
        if len(indices) > 1:
            dup = (np.diff(indices) == 0) & (np.diff(row_of[order]) == 0)
            if dup.any():
                raise ValueError("duplicate entry in a row (GF(2) multi-edge)")
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.indptr = indptr
        self.indices = indices
        self.indptr.flags.writeable = False
        self.indices.flags.writeable = False
        self._csr = None
        self._csc = None

    @classmethod
    def from_edges(cls, rows, cols, n_rows: int, n_cols: int) -> "SparseBitMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        order = np.lexsort((cols, rows))
        counts = np.bincount(rows, minlength=n_rows)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return cls(n_rows, n_cols, indptr, cols[order])

    @classmethod
    def from_dense(cls, dense) -> "SparseBitMatrix":
        dense = np.asarray(dense) & 1
        rows, cols = np.nonzero(dense)
        return cls.from_edges(rows, cols, dense.shape[0], dense.shape[1])

    @classmethod
    def from_csr(cls, m) -> "SparseBitMatrix":
        m = sp.csr_matrix(m)
        m.sum_duplicates()
        m.data %= 2
        m.eliminate_zeros()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def row(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def rows_list(self) -> list[np.ndarray]:
        return [self.row(i) for i in range(self.n_rows)]

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """(row, col) arrays of all nonzeros in row-major order."""
        return np.repeat(np.arange(self.n_rows), np.diff(self.indptr)), self.indices.copy()

    def row_weights(self) -> np.ndarray:
        return np.diff(self.indptr)

    def col_weights(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.n_cols)

    def to_csr(self) -> sp.csr_matrix:
        if self._csr is None:
            data = np.ones(self.nnz, dtype=np.uint8)
            self._csr = sp.csr_matrix((data, self.indices, self.indptr), shape=self.shape)
        return self._csr

    def to_csc(self) -> sp.csc_matrix:
        if self._csc is None:
            self._csc = self.to_csr().tocsc()
        return self._csc

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray().astype(np.uint8)

    def submatrix(self, rows=None, cols=None) -> "SparseBitMatrix":
        m = self.to_csr()
        if rows is not None:
            m = m[np.asarray(rows)]
        if cols is not None:
            m = m[:, np.asarray(cols)]
        return SparseBitMatrix.from_csr(m)

    def matvec(self, x) -> np.ndarray:
        """``H x`` over GF(2).  ``x`` may be ``(n_cols,)`` or ``(n_cols, batch)``."""
        x = np.asarray(x)
        y = self.to_csr().astype(np.int64) @ (x.astype(np.int64) & 1)
        return (y & 1).astype(np.uint8)

    def __eq__(self, other):
        if not isinstance(other, SparseBitMatrix):
            return NotImplemented
        return (self.shape == other.shape and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def __repr__(self):
        return f"SparseBitMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz})"


def hstack(blocks) -> SparseBitMatrix:
    return SparseBitMatrix.from_csr(sp.hstack([b.to_csr() for b in blocks], format="csr"))


def vstack(blocks) -> SparseBitMatrix:
    return SparseBitMatrix.from_csr(sp.vstack([b.to_csr() for b in blocks], format="csr"))


# --- packed dense elimination -------------------------------------------------

def _pack(dense: np.ndarray) -> np.ndarray:
    """Pack a 0/1 matrix into little-endian ``uint64`` words per row."""
    dense = np.ascontiguousarray(dense, dtype=np.uint8)
    n_rows, n_cols = dense.shape
    n_words = (n_cols + 63) // 64
    padded = np.zeros((n_rows, n_words * 64), dtype=np.uint8)
    padded[:, :n_cols] = dense
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view(np.uint64).reshape(n_rows, n_words).copy()


def _unpack(packed: np.ndarray, n_cols: int) -> np.ndarray:
    as_bytes = np.ascontiguousarray(packed).view(np.uint8)
    return np.unpackbits(as_bytes, axis=1, bitorder="little")[:, :n_cols]


def _eliminate(packed: np.ndarray, columns) -> tuple[np.ndarray, list[int]]:
    """Gauss-Jordan elimination in place over the given column order.

    Returns the permutation of rows applied and the list of pivot columns.
    Pivot row ``k`` ends up at position ``k``.
    """
    n_rows = packed.shape[0]
    perm = np.arange(n_rows)
    pivots = []
    r = 0
    for c in columns:
        if r >= n_rows:
            break
        w, b = divmod(int(c), 64)
        bit = np.uint64(1) << np.uint64(b)
        hits = np.nonzero(packed[r:, w] & bit)[0]
        if hits.size == 0:
            continue
        p = r + int(hits[0])
        if p != r:
            packed[[r, p]] = packed[[p, r]]
            perm[[r, p]] = perm[[p, r]]
        others = np.nonzero(packed[:, w] & bit)[0]
        others = others[others != r]
        if others.size:
            packed[others] ^= packed[r]
        pivots.append(int(c))
        r += 1
    return perm, pivots


def dense_rank(dense) -> int:
    """GF(2) rank of a dense 0/1 array."""
    dense = np.asarray(dense, dtype=np.uint8) & 1
    if dense.size == 0:
        return 0
    packed = _pack(dense)
    _, pivots = _eliminate(packed, range(dense.shape[1]))
    return len(pivots)


def rank(H: SparseBitMatrix) -> int:
    """GF(2) rank of a sparse matrix."""
    if H.n_rows == 0 or H.n_cols == 0:
        return 0
    return dense_rank(H.to_dense())


@dataclass(frozen=True)
class SystemizedForm:
    """Row-operation record reducing the rightmost ``block_width`` columns to identity.

    ``transform`` is the product of all recorded row operations (an
    ``n_rows x n_rows`` GF(2) matrix): ``transform @ H`` has ``[I; 0]`` on the
    pivot block.  No column is ever moved.
    """

    matrix: SparseBitMatrix
    block_width: int
    transform: np.ndarray = field(repr=False)

    @cached_property
    def pivot_transform(self) -> np.ndarray:
        """Rows of ``transform`` that produce the pivot bits, as float32 for fast products."""
        return np.ascontiguousarray(self.transform[: self.block_width], dtype=np.float32)

    @property
    def pivot_columns(self) -> np.ndarray:
        return np.arange(self.matrix.n_cols - self.block_width, self.matrix.n_cols)

    @property
    def known_columns(self) -> np.ndarray:
        return np.arange(self.matrix.n_cols - self.block_width)

    def replay(self) -> np.ndarray:
        """Apply the recorded row operations to the original matrix (dense)."""
        prod = self.transform.astype(np.int64) @ self.matrix.to_dense().astype(np.int64)
        return (prod & 1).astype(np.uint8)


def systemize_right_block(H: SparseBitMatrix, block_width: int) -> SystemizedForm:
    """Reduce the rightmost ``block_width`` columns of ``H`` to identity by row operations."""
    if block_width > H.n_rows or block_width > H.n_cols:
        raise ValueError("block wider than the matrix")
    start = H.n_cols - block_width
    block = H.to_csc()[:, start:].toarray().astype(np.uint8)
    aug = np.concatenate([block, np.eye(H.n_rows, dtype=np.uint8)], axis=1)
    packed = _pack(aug)
    _, pivots = _eliminate(packed, range(block_width))
    if len(pivots) < block_width:
        raise SingularBlock(f"rightmost {block_width}-column block has rank {len(pivots)}")
    full = _unpack(packed, block_width + H.n_rows)
    transform = np.ascontiguousarray(full[:, block_width:])
    return SystemizedForm(matrix=H, block_width=block_width, transform=transform)


def solve_parity(sf: SystemizedForm, known_bits) -> np.ndarray:
    """Pivot-column bits completing ``known_bits`` to a word with zero syndrome.

    ``known_bits`` covers the non-pivot columns, shape ``(n_known,)`` or
    ``(n_known, batch)``.
    """
    known = np.asarray(known_bits, dtype=np.int64) & 1
    n_known = sf.matrix.n_cols - sf.block_width
    if known.shape[0] != n_known:
        raise ValueError(f"expected {n_known} known bits, got {known.shape[0]}")
    left = sf.matrix.to_csc()[:, :n_known].astype(np.int64)
    s = ((left @ known) & 1).astype(np.float32)
    # float32 BLAS product is exact: every entry counts at most n_rows < 2**24 ones
    parity = (sf.pivot_transform @ s).astype(np.int64) & 1
    return parity.astype(np.uint8)


def syndrome(H: SparseBitMatrix, c) -> np.ndarray:
    """``H c`` over GF(2)."""
    c = np.asarray(c)
    if c.shape[0] != H.n_cols:
        raise ValueError(f"word length {c.shape[0]} does not match {H.n_cols} columns")
    return H.matvec(c)


# --- alist --------------------------------------------------------------------

def write_alist(H: SparseBitMatrix, path) -> None:
    """Write ``H`` in MacKay's alist format (1-based, zero-padded lists)."""
    col_w = H.col_weights()
    row_w = H.row_weights()
    csc = H.to_csc()
    lines = [f"{H.n_cols} {H.n_rows}", f"{int(col_w.max(initial=0))} {int(row_w.max(initial=0))}",
             " ".join(map(str, col_w)), " ".join(map(str, row_w))]
    max_c = int(col_w.max(initial=0))
    for j in range(H.n_cols):
        rows = csc.indices[csc.indptr[j]:csc.indptr[j + 1]]
        rows = np.sort(rows) + 1
        lines.append(" ".join(map(str, list(rows) + [0] * (max_c - len(rows)))))
    max_r = int(row_w.max(initial=0))
    for i in range(H.n_rows):
        cols = H.row(i) + 1
        lines.append(" ".join(map(str, list(cols) + [0] * (max_r - len(cols)))))
    Path(path).write_text("\n".join(lines) + "\n")


def read_alist(path) -> SparseBitMatrix:
    """Read an alist file; the row lists define the matrix, column lists are cross-checked."""
    tokens = Path(path).read_text().split()
    it = iter(tokens)

    def take(k):
        return [int(next(it)) for _ in range(k)]

    try:
        n_cols, n_rows = take(2)
        max_c, max_r = take(2)
        col_w = take(n_cols)
        row_w = take(n_rows)
        col_lists = [take(max_c) for _ in range(n_cols)]
        row_lists = [take(max_r) for _ in range(n_rows)]
    except StopIteration:
        raise ValueError(f"{path}: truncated alist file") from None
    rows, cols = [], []
    for i, lst in enumerate(row_lists):
        entries = [v - 1 for v in lst if v > 0]
        if len(entries) != row_w[i]:
            raise ValueError(f"{path}: row {i + 1} weight mismatch")
        rows.extend([i] * len(entries))
        cols.extend(entries)
    H = SparseBitMatrix.from_edges(rows, cols, n_rows, n_cols)
    csc = H.to_csc()
    for j, lst in enumerate(col_lists):
        entries = sorted(v - 1 for v in lst if v > 0)
        if len(entries) != col_w[j]:
            raise ValueError(f"{path}: column {j + 1} weight mismatch")
        if entries != csc.indices[csc.indptr[j]:csc.indptr[j + 1]].tolist():
            raise ValueError(f"{path}: column {j + 1} list disagrees with the row lists")
    return H
