"""Iterative decoders on Tanner graphs: sum-product, min-sum and erasure peeling.

LLRs follow the convention ``log P(b=0)/P(b=1)``; a zero LLR decides bit 0.
Soft decoders accept one word ``(n,)`` or a batch ``(B, n)`` and flood all
checks then all bits each iteration, dropping words from the batch as soon as
their syndrome vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .gf2 import SparseBitMatrix

__all__ = [
    "CLIP",
    "DecodeResult",
    "PeelingResult",
    "BPDecoder",
    "decode_sum_product",
    "decode_min_sum",
    "decode_bec_peeling",
    "check_update_tanh",
    "check_update_min_sum",
]

CLIP = 30.0


@dataclass(frozen=True)
class DecodeResult:
    """Hard decisions with per-word convergence flag and iteration count."""

    bits: np.ndarray
    converged: np.ndarray | bool
    iterations: np.ndarray | int


def check_update_tanh(msgs: np.ndarray) -> np.ndarray:
    """Extrinsic tanh-rule outputs along axis 1 of ``msgs`` with shape ``(checks, degree, ...)``.

    Exclusion uses prefix and suffix products, so zero inputs are handled
    exactly and no division occurs.
    """
    t = np.tanh(0.5 * np.clip(msgs, -CLIP, CLIP))
    d = t.shape[1]
    if d == 1:
        return np.zeros_like(t)
    prefix = np.ones_like(t)
    suffix = np.ones_like(t)
    np.cumprod(t[:, :-1], axis=1, out=prefix[:, 1:])
    np.cumprod(t[:, :0:-1], axis=1, out=suffix[:, -2::-1])
    prod = prefix * suffix
    np.clip(prod, -1.0, 1.0, out=prod)
    return np.clip(2.0 * np.arctanh(prod), -CLIP, CLIP)


def check_update_min_sum(msgs: np.ndarray) -> np.ndarray:
    """Extrinsic min-sum outputs along axis 1: ``min |x_j| * prod sign(x_j)`` over ``j != i``."""
    d = msgs.shape[1]
    if d == 1:
        return np.zeros_like(msgs)
    mag = np.abs(msgs)
    neg = msgs < 0
    parity = np.logical_xor.reduce(neg, axis=1, keepdims=True)
    sign = np.where(neg ^ parity, -1.0, 1.0)
    order = np.argpartition(mag, 1, axis=1)
    min1 = np.take_along_axis(mag, order[:, :1], axis=1)
    min2 = np.take_along_axis(mag, order[:, 1:2], axis=1)
    is_min = np.zeros(mag.shape, dtype=bool)
    np.put_along_axis(is_min, order[:, :1], True, axis=1)
    out = np.where(is_min, min2, min1)
    return np.clip(sign * out, -CLIP, CLIP)


class BPDecoder:
    """Flooding belief propagation on a fixed parity-check matrix.

    Parameters
    ----------
    H : SparseBitMatrix
        Parity-check matrix.
    rule : {"sum-product", "min-sum"}
        Check-node update.
    """

    def __init__(self, H: SparseBitMatrix, rule: str = "sum-product"):
        if rule not in ("sum-product", "min-sum"):
            raise ValueError(f"unknown rule {rule!r}")
        self.H = H
        self.rule = rule
        self._check = check_update_tanh if rule == "sum-product" else check_update_min_sum
        csr = H.to_csr()
        self.n = H.n_cols
        self.edge_col = csr.indices.astype(np.int64)
        n_edges = self.edge_col.size
        degs = np.diff(csr.indptr)
        # edges of checks with equal degree form a dense (checks, degree) index block
        self.groups = []
        for d in np.unique(degs[degs > 0]):
            rows = np.nonzero(degs == d)[0]
            idx = csr.indptr[rows][:, None] + np.arange(d)[None, :]
            self.groups.append(idx)
        self.gather = sp.csr_matrix(
            (np.ones(n_edges), (self.edge_col, np.arange(n_edges))), shape=(self.n, n_edges)
        )
        self.syn = sp.csr_matrix(csr, dtype=np.int32)

    def _syndrome_ok(self, bits: np.ndarray) -> np.ndarray:
        """``bits`` has shape (n, B); returns a (B,) mask of zero syndromes."""
        s = self.syn @ bits.astype(np.int32)
        return ~np.any(s & 1, axis=0)

    def decode(self, llr, max_iter: int = 100) -> DecodeResult:
        llr = np.asarray(llr, dtype=float)
        single = llr.ndim == 1
        L = np.atleast_2d(llr)
        if L.shape[1] != self.n:
            raise ValueError(f"expected {self.n} LLRs per word, got {L.shape[1]}")
        L = np.clip(L, -CLIP, CLIP).T.copy()  # (n, B)
        n_words = L.shape[1]
        bits_out = (L < 0).astype(np.uint8)
        converged = self._syndrome_ok(bits_out)
        iterations = np.zeros(n_words, dtype=np.int64)
        active = np.nonzero(~converged)[0]
        if active.size and max_iter > 0:
            La = L[:, active]
            c2v = np.zeros((self.edge_col.size, active.size))
            for it in range(1, max_iter + 1):
                total = La + self.gather @ c2v
                v2c = total[self.edge_col] - c2v
                for idx in self.groups:
                    c2v[idx] = self._check(v2c[idx])
                total = La + self.gather @ c2v
                hard = (total < 0).astype(np.uint8)
                ok = self._syndrome_ok(hard)
                bits_out[:, active] = hard
                iterations[active] = it
                if ok.any():
                    converged[active[ok]] = True
                    keep = ~ok
                    active, La, c2v = active[keep], La[:, keep], c2v[:, keep]
                    if active.size == 0:
                        break
        bits_out = bits_out.T
        if single:
            return DecodeResult(bits_out[0], bool(converged[0]), int(iterations[0]))
        return DecodeResult(bits_out, converged, iterations)


def decode_sum_product(H: SparseBitMatrix, llr, max_iter: int = 100) -> DecodeResult:
    return BPDecoder(H, "sum-product").decode(llr, max_iter)


def decode_min_sum(H: SparseBitMatrix, llr, max_iter: int = 100) -> DecodeResult:
    return BPDecoder(H, "min-sum").decode(llr, max_iter)


@dataclass(frozen=True)
class PeelingResult:
    """Outcome of erasure peeling.

    ``values`` holds the known and recovered bits (unresolved positions are 0),
    ``recovered`` the newly determined positions, ``rounds`` the peeling round
    in which each of them was found (1-based), and ``residual`` the positions
    still erased.
    """

    values: np.ndarray
    recovered: np.ndarray
    rounds: np.ndarray
    residual: np.ndarray


def decode_bec_peeling(H: SparseBitMatrix, erased, known=None, max_rounds: int | None = None) -> PeelingResult:
    """Iteratively solve checks with exactly one erased participant.

    Parameters
    ----------
    H : SparseBitMatrix
    erased : array of int or bool mask
        Erased positions.
    known : array of bits, optional
        Values of the non-erased positions (all-zero word if omitted).
    """
    n = H.n_cols
    mask = np.zeros(n, dtype=bool)
    erased = np.asarray(erased)
    if erased.dtype == bool:
        if erased.shape != (n,):
            raise ValueError("erasure mask has the wrong length")
        mask |= erased
    else:
        mask[erased.astype(np.int64)] = True
    values = np.zeros(n, dtype=np.uint8) if known is None else (np.asarray(known, dtype=np.uint8) & 1).copy()
    values[mask] = 0
    row, col = H.edges()
    round_of = np.zeros(n, dtype=np.int64)
    r = 0
    while max_rounds is None or r < max_rounds:
        er = mask[col]
        n_erased = np.bincount(row, weights=er, minlength=H.n_rows)
        parity = np.bincount(row, weights=values[col] * ~er, minlength=H.n_rows).astype(np.int64) & 1
        solvable = er & (n_erased[row] == 1)
        if not solvable.any():
            break
        r += 1
        targets = col[solvable]
        values[targets] = parity[row[solvable]]
        mask[targets] = False
        round_of[targets] = r
    recovered = np.nonzero(round_of)[0]
    return PeelingResult(values, recovered, round_of[recovered], np.nonzero(mask)[0])
