"""Random construction, encoding and serialization of rate-compatible root-LDPC codes.

Column order of the global parity-check matrix is ``(1i, 1p, p1', 2i, 2p, p2')``
so that frame 1 is the left half and frame 2 the right half.  Row order is
``(1c, 2c, 3c, 4c)``::

        1i    1p    p1'   2i    2p    p2'
  1c [ ---- H_1s ----  |  0     0     0   ]
  2c [  0     0     0  |  ---- H_1r ----  ]
  3c [  I     0     0  |  H_2i  H_2p  0   ]
  4c [  H_1i  H_1p  0  |  I     0     0   ]

``3c`` are the root checks of ``1i`` and ``4c`` those of ``2i``.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .degree import DegreePoly, Ensemble, isolate_root_edge, node_perspective
from .gf2 import (
    SingularBlock,
    SparseBitMatrix,
    SystemizedForm,
    _eliminate,
    _pack,
    _unpack,
    hstack,
    read_alist,
    solve_parity,
    systemize_right_block,
    vstack,
    write_alist,
)

__all__ = [
    "ConstructionFailed",
    "CodeSpec",
    "CooperationCode",
    "build_subcode",
    "build_root_matrix",
    "assemble",
    "encode",
    "relay_reencode",
    "length_quantum",
    "round_length",
    "save_code",
    "load_code",
]


class ConstructionFailed(RuntimeError):
    """No admissible matrix was found within the retry budget."""

    def __init__(self, message: str, block: str = ""):
        super().__init__(message)
        self.block = block


# --- degree sequences ---------------------------------------------------------

def _largest_remainder(fractions: np.ndarray, total: int) -> np.ndarray:
    raw = fractions * total
    counts = np.floor(raw).astype(np.int64)
    short = total - counts.sum()
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def node_degree_counts(p: DegreePoly, n_nodes: int) -> dict[int, int]:
    """Integer node counts per degree for ``n_nodes`` nodes drawn from edge distribution ``p``."""
    nodes = node_perspective(p)
    counts = _largest_remainder(nodes.weights(), n_nodes)
    return {int(d): int(c) for d, c in zip(nodes.degrees(), counts) if c}


def _node_degrees(p: DegreePoly, n_nodes: int, rng, shift: int = 0) -> np.ndarray:
    counts = node_degree_counts(p, n_nodes)
    degs = np.repeat(np.array(list(counts), dtype=np.int64) + shift, list(counts.values()))
    rng.shuffle(degs)
    return degs


def _fit_check_degrees(p: DegreePoly, n_checks: int, n_edges: int, rng) -> np.ndarray:
    """Check degrees following ``p`` as closely as possible with exactly ``n_edges`` sockets."""
    degs = _node_degrees(p, n_checks, rng)
    diff = n_edges - int(degs.sum())
    while diff != 0:
        step = 1 if diff > 0 else -1
        eligible = np.nonzero(degs > 1)[0] if step < 0 else np.arange(n_checks)
        if eligible.size == 0:
            raise ConstructionFailed("cannot fit check degrees to the edge count")
        # spread the correction, preferring checks furthest from the mean
        order = eligible[np.argsort(step * degs[eligible] + rng.random(eligible.size), kind="stable")]
        take = order[: min(abs(diff), order.size)]
        degs[take] += step
        diff -= step * take.size
    return degs


# --- random bipartite graphs -----------------------------------------------------

class _Graph:
    """Mutable edge list with per-edge group labels, used only during construction.

    Edges of the same group may exchange their check endpoints; this keeps every
    bit and check degree (and the group's row/column sets) unchanged.  Group -1
    marks fixed edges (identity root connections).
    """

    def __init__(self, n_rows, n_cols, rows, cols, group):
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.rows = np.asarray(rows, dtype=np.int64).copy()
        self.cols = np.asarray(cols, dtype=np.int64).copy()
        self.group = np.asarray(group, dtype=np.int64).copy()
        self._build_adjacency()

    def _build_adjacency(self):
        self.row_adj = [dict() for _ in range(self.n_rows)]  # col -> edge id
        self.col_adj = [dict() for _ in range(self.n_cols)]  # row -> edge id
        self.n_dup = 0
        for e, (r, c) in enumerate(zip(self.rows.tolist(), self.cols.tolist())):
            if c in self.row_adj[r]:
                self.n_dup += 1
            self.row_adj[r][c] = e
            self.col_adj[c][r] = e

    def has(self, r, c) -> bool:
        e = self.row_adj[r].get(c)
        return e is not None

    def swap(self, e, f):
        """Exchange check endpoints of edges ``e`` and ``f``."""
        re, ce, rf, cf = int(self.rows[e]), int(self.cols[e]), int(self.rows[f]), int(self.cols[f])
        for r, c, k in ((re, ce, e), (rf, cf, f)):
            if self.row_adj[r].get(c) == k:
                del self.row_adj[r][c]
                del self.col_adj[c][r]
        self.rows[e], self.rows[f] = rf, re
        self.row_adj[rf][ce] = e
        self.col_adj[ce][rf] = e
        self.row_adj[re][cf] = f
        self.col_adj[cf][re] = f

    def creates_4cycle(self, r, c, ignore=()) -> bool:
        """Would adding edge (r, c) close a length-4 cycle?"""
        mine = set(self.row_adj[r]) - set(ignore)
        for s in self.col_adj[c]:
            if s == r:
                continue
            if mine.intersection(self.row_adj[s]):
                return True
        return False

    def duplicate_edges(self) -> np.ndarray:
        key = self.rows * self.n_cols + self.cols
        order = np.argsort(key, kind="stable")
        sk = key[order]
        dup = np.zeros(len(key), dtype=bool)
        dup[order[1:]] = sk[1:] == sk[:-1]
        return np.nonzero(dup)[0]

    def four_cycle_rows(self) -> list[tuple[int, int]]:
        a = sp.csr_matrix((np.ones(len(self.rows)), (self.rows, self.cols)), shape=(self.n_rows, self.n_cols))
        a.data[:] = 1
        c = (a @ a.T).tocoo()
        mask = (c.row < c.col) & (c.data >= 2)
        return list(zip(c.row[mask].tolist(), c.col[mask].tolist()))

    def matrix(self) -> SparseBitMatrix:
        return SparseBitMatrix.from_edges(self.rows, self.cols, self.n_rows, self.n_cols)


def _socket_match(row_degs, col_degs, rng):
    rows = np.repeat(np.arange(len(row_degs)), row_degs)
    cols = np.repeat(np.arange(len(col_degs)), col_degs)
    if len(rows) != len(cols):
        raise ValueError("socket counts differ")
    rng.shuffle(rows)
    return rows, cols


def _resolve_duplicates(g: _Graph, rng, max_rounds: int = 100):
    """Re-draw colliding edges by swapping them with random edges of the same group."""
    key = g.rows * g.n_cols + g.cols
    count = Counter(key.tolist())
    for _ in range(max_rounds):
        dups = g.duplicate_edges()
        if dups.size == 0:
            g._build_adjacency()
            return
        for e in dups.tolist():
            same = np.nonzero(g.group == g.group[e])[0]
            for f in rng.choice(same, size=min(32, same.size), replace=False).tolist():
                re, ce, rf, cf = int(g.rows[e]), int(g.cols[e]), int(g.rows[f]), int(g.cols[f])
                new_e, new_f = rf * g.n_cols + ce, re * g.n_cols + cf
                if rf == re or count[new_e] or count[new_f]:
                    continue
                count[re * g.n_cols + ce] -= 1
                count[rf * g.n_cols + cf] -= 1
                count[new_e] += 1
                count[new_f] += 1
                g.rows[e], g.rows[f] = rf, re
                break
    raise ConstructionFailed("could not remove duplicate edges")


def _remove_4cycles(g: _Graph, rng, max_passes: int = 30, tries: int = 40) -> int:
    """Best-effort removal of length-4 cycles by degree-preserving swaps.

    Returns the number of 4-cycle row pairs remaining.
    """
    groups = {int(k): np.nonzero(g.group == k)[0] for k in np.unique(g.group) if k >= 0}
    pairs = g.four_cycle_rows()
    for _ in range(max_passes):
        if not pairs:
            return 0
        for r1, r2 in pairs:
            shared = set(g.row_adj[r1]).intersection(g.row_adj[r2])
            if len(shared) < 2:
                continue
            candidates = [g.row_adj[r][c] for r in (r1, r2) for c in shared if g.group[g.row_adj[r][c]] >= 0]
            if not candidates:
                continue
            e = candidates[rng.integers(len(candidates))]
            pool = groups[int(g.group[e])]
            re, ce = int(g.rows[e]), int(g.cols[e])
            for f in rng.choice(pool, size=min(tries, pool.size), replace=False).tolist():
                rf, cf = int(g.rows[f]), int(g.cols[f])
                if rf in (r1, r2) or g.has(rf, ce) or g.has(re, cf):
                    continue
                if g.creates_4cycle(rf, ce, ignore=(cf,)) or g.creates_4cycle(re, cf, ignore=(ce,)):
                    continue
                g.swap(e, f)
                break
        before = len(pairs)
        pairs = g.four_cycle_rows()
        # dense ensembles at short lengths cannot reach girth 6; stop when progress stalls
        if len(pairs) > 0.9 * before:
            break
    return len(pairs)


def _reduced_left_kernel(dense: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced basis ``Y`` of ``{y : y @ dense = 0}`` and one private index per basis vector."""
    m, n = dense.shape
    aug = _pack(np.concatenate([dense, np.eye(m, dtype=np.uint8)], axis=1))
    _, pivots = _eliminate(aug, range(n))
    rank = len(pivots)
    if rank == m:
        return np.zeros((0, m), dtype=bool), []
    kernel = _pack(_unpack(aug[rank:], n + m)[:, n:])
    _, own = _eliminate(kernel, range(m))
    return _unpack(kernel, m).astype(bool), own


def _repair_block(g: _Graph, group: int, block_rows: np.ndarray, pivot_cols: np.ndarray, rng,
                  avoid_4cycles: bool = False, max_steps: int = 20) -> None:
    """Swap edges of ``group`` until the square block ``block_rows x pivot_cols`` is invertible.

    A swap moves the pivot-column edge ``(rf, cf)`` onto row ``c`` in exchange
    for a non-pivot edge of ``c``, preserving all degrees.  On the block this is
    the rank-one update ``(e_c + e_rf) e_cf^T``, which raises the rank when ``c``
    (but not ``rf``) lies in a left-kernel vector and ``cf`` in a right-kernel one.
    """
    m = len(block_rows)
    row_pos = {int(r): i for i, r in enumerate(block_rows)}
    is_pivot = np.zeros(g.n_cols, dtype=bool)
    is_pivot[pivot_cols] = True
    col_pos = np.full(g.n_cols, -1, dtype=np.int64)
    col_pos[pivot_cols] = np.arange(len(pivot_cols))

    def n_pivot_edges(r):
        return sum(1 for c, e in g.row_adj[r].items() if is_pivot[c] and g.group[e] == group)

    def try_fix(row, cand_cols, forbidden_rows):
        nonpivot = [e for c, e in g.row_adj[row].items() if not is_pivot[c] and g.group[e] == group]
        if not nonpivot:
            return False
        for strict in ((True, False) if avoid_4cycles else (False,)):
            for cf in cand_cols:
                cf = int(cf)
                if g.has(row, cf):
                    continue
                for rf, f in list(g.col_adj[cf].items()):
                    if g.group[f] != group or rf in forbidden_rows or rf == row or n_pivot_edges(rf) < 2:
                        continue
                    for e in rng.permutation(nonpivot).tolist():
                        ce = int(g.cols[e])
                        if g.has(rf, ce):
                            continue
                        if strict and (g.creates_4cycle(row, cf, ignore=(ce,)) or g.creates_4cycle(rf, ce, ignore=(cf,))):
                            continue
                        g.swap(e, f)
                        return True
        return False

    def block_dense():
        dense = np.zeros((m, m), dtype=np.uint8)
        for r in block_rows.tolist():
            for c, e in g.row_adj[r].items():
                if is_pivot[c] and g.group[e] == group:
                    dense[row_pos[r], col_pos[c]] = 1
        return dense

    for _ in range(max_steps):
        dense = block_dense()
        left, own_rows = _reduced_left_kernel(dense)
        if not own_rows:
            return
        right, own_cols = _reduced_left_kernel(dense.T.copy())
        forbidden = set(block_rows[left.any(axis=0)].tolist())
        for k in range(min(len(own_rows), len(own_cols))):
            cols = pivot_cols[rng.permutation(np.nonzero(right[k])[0])]
            rows = [own_rows[k]] + rng.permutation(np.nonzero(left[k])[0]).tolist()
            for r in rows:
                if try_fix(int(block_rows[r]), cols, forbidden):
                    break
    raise ConstructionFailed("could not make the square block invertible")


def _bipartite(row_poly: DegreePoly, col_segments, n_rows: int, rng):
    """Socket-matched random graph; ``col_segments`` is a list of (poly, size, shift)."""
    col_degs = np.concatenate([_node_degrees(p, size, rng, shift) for p, size, shift in col_segments])
    row_degs = _fit_check_degrees(row_poly, n_rows, int(col_degs.sum()), rng)
    return _socket_match(row_degs, col_degs, rng)


# --- public builders -----------------------------------------------------------

def _subcode_sizes(n: int, rate: Fraction) -> tuple[int, int]:
    m = (1 - rate) * n
    if m.denominator != 1:
        raise ValueError(f"n={n} gives a non-integer number of checks at rate {rate}")
    return int(m), n - int(m)


def build_subcode(lam1: DegreePoly, rho1: DegreePoly, n: int, seed, rate=None,
                  remove_4cycles: bool = False, max_retries: int = 100) -> SparseBitMatrix:
    """Random ``H_1s``-type matrix with an invertible rightmost square block.

    Columns are split into (1i, 1p, p1') segments that each follow ``lam1``;
    rows follow ``rho1`` up to the integer fit of the edge total.
    """
    rate = Fraction(rate) if rate is not None else Fraction(1.0 - rho1.inverse_mean() / lam1.inverse_mean()).limit_denominator(100)
    m, k = _subcode_sizes(n, rate)
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        g = _subcode_graph(lam1, rho1, n, m, k, rng, group=0)
        try:
            _finish(g, rng, remove_4cycles, [(0, np.arange(m), np.arange(k, n))])
            H = g.matrix()
            systemize_right_block(H, m)
            return H
        except (ConstructionFailed, SingularBlock):
            continue
    raise ConstructionFailed(f"no invertible subcode after {max_retries} attempts", block="H_1s")


def _subcode_graph(lam1, rho1, n, m, k, rng, group):
    half = k // 2
    segs = [(lam1, half, 0), (lam1, k - half, 0), (lam1, m, 0)]
    rows, cols = _bipartite(rho1, segs, m, rng)
    return _Graph(m, n, rows, cols, np.full(len(rows), group))


def _root_half(lam2, rho2, q, rng):
    """Random block of one root half: ``q`` checks over columns (info q, parity q)."""
    # info bits keep lambda2 degrees minus the root edge, stratified like the parity class
    segs = [(lam2, q, -1), (lam2, q, 0)]
    return _bipartite(isolate_root_edge(rho2), segs, q, rng)


def build_root_matrix(lam2: DegreePoly, rho2: DegreePoly, n_half: int, seed,
                      remove_4cycles: bool = False, max_retries: int = 100) -> SparseBitMatrix:
    """``H_2`` over columns (1i, 1p, 2i, 2p), rows (3c, 4c).

    ``n_half`` bits per root half (1i+1p or 2i+2p); each class has ``n_half/2``.
    The random part of each check class is a single edge permutation onto the
    union of an info class and a parity class.
    """
    if n_half % 2:
        raise ValueError("n_half must be even")
    q = n_half // 2
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        g = _root_graph(lam2, rho2, q, rng, groups=(2, 3), row_offset=0, cols=(0, q, 2 * q, 3 * q), n_rows=2 * q, n_cols=4 * q)
        try:
            _finish(g, rng, remove_4cycles, [(2, np.arange(q), np.arange(3 * q, 4 * q)),
                                             (3, np.arange(q, 2 * q), np.arange(q, 2 * q))])
            return g.matrix()
        except ConstructionFailed:
            continue
    raise ConstructionFailed(f"no invertible root matrix after {max_retries} attempts", block="H_2")


def _root_graph(lam2, rho2, q, rng, groups, row_offset, cols, n_rows, n_cols):
    c1i, c1p, c2i, c2p = cols
    rows_all, cols_all, grp = [], [], []
    ident = np.arange(q)
    # 3c: root identity on 1i, random on (2i, 2p)
    r, c = _root_half(lam2, rho2, q, rng)
    rows_all += [row_offset + ident, row_offset + r]
    cols_all += [c1i + ident, np.where(c < q, c2i + c, c2p + c - q)]
    grp += [np.full(q, -1), np.full(len(r), groups[0])]
    # 4c: root identity on 2i, random on (1i, 1p)
    r, c = _root_half(lam2, rho2, q, rng)
    rows_all += [row_offset + q + ident, row_offset + q + r]
    cols_all += [c2i + ident, np.where(c < q, c1i + c, c1p + c - q)]
    grp += [np.full(q, -1), np.full(len(r), groups[1])]
    return _Graph(n_rows, n_cols, np.concatenate(rows_all), np.concatenate(cols_all), np.concatenate(grp))


def _finish(g: _Graph, rng, remove_4cycles: bool, blocks) -> None:
    _resolve_duplicates(g, rng)
    if remove_4cycles:
        _remove_4cycles(g, rng)
    for group, rows, pivots in blocks:
        _repair_block(g, group, rows, pivots, rng, avoid_4cycles=remove_4cycles)


# --- the assembled code --------------------------------------------------------

def length_quantum(rate: Fraction) -> int:
    """Smallest N such that every class size is an integer for subcode rate ``rate``."""
    rate = Fraction(rate)
    L = 1
    while (rate * L / 4).denominator != 1 or ((1 - rate) * L / 2).denominator != 1:
        L += 1
    return L


def round_length(n: int, rate: Fraction) -> int:
    """Largest admissible length not exceeding ``n``."""
    L = length_quantum(rate)
    if n < L:
        raise ValueError(f"length {n} below the minimum {L} for subcode rate {rate}")
    return (n // L) * L


@dataclass(frozen=True)
class CodeSpec:
    ensemble: Ensemble
    N: int
    seed: int = 0
    subcode_rate: Fraction | None = None
    remove_4cycles: bool = False
    max_retries: int = 100

    def rate1(self) -> Fraction:
        if self.subcode_rate is not None:
            return Fraction(self.subcode_rate)
        return self.ensemble.nominal_subcode_rate()

    def validate(self, tol: float = 1e-3) -> None:
        r1 = self.rate1()
        if not 0 < r1 < 1:
            raise ValueError(f"subcode rate {r1} outside (0, 1)")
        if abs(self.ensemble.subcode_rate - float(r1)) > tol:
            raise ValueError(f"design rate {self.ensemble.subcode_rate:.6f} of (lambda1, rho1) != {r1}")
        if abs(self.ensemble.root_rate - 0.5) > tol:
            raise ValueError(f"root design rate {self.ensemble.root_rate:.6f} != 1/2")
        if self.N % length_quantum(r1):
            raise ValueError(f"N={self.N} is not a multiple of {length_quantum(r1)}")


@dataclass(frozen=True, eq=False)
class CooperationCode:
    """Assembled rate-compatible root-LDPC code with its encoders."""

    N: int
    R1: Fraction
    H_1s: SparseBitMatrix
    H_1r: SparseBitMatrix
    H_2: SparseBitMatrix
    ensemble: Ensemble | None = None
    seed: int | None = None
    H: SparseBitMatrix = field(init=False, repr=False)
    _sf: dict = field(init=False, repr=False)

    def __post_init__(self):
        q, m = self.q, self.m
        if self.H_1s.shape != (m, 2 * q + m) or self.H_1r.shape != (m, 2 * q + m):
            raise ValueError("subcode matrices have the wrong shape")
        if self.H_2.shape != (2 * q, 4 * q):
            raise ValueError("root matrix has the wrong shape")
        z = SparseBitMatrix.from_edges([], [], m, 2 * q + m)
        h2 = self.H_2.to_csr()
        zm = sp.csr_matrix((2 * q, m), dtype=np.uint8)
        h2_global = SparseBitMatrix.from_csr(sp.hstack([h2[:, :2 * q], zm, h2[:, 2 * q:], zm], format="csr"))
        H = vstack([hstack([self.H_1s, z]), hstack([z, self.H_1r]), h2_global])
        object.__setattr__(self, "H", H)
        cols = np.arange(4 * q)
        sl = {"1i": cols[:q], "1p": cols[q:2 * q], "2i": cols[2 * q:3 * q], "2p": cols[3 * q:]}
        sf = {}
        try:
            sf["1s"] = systemize_right_block(self.H_1s, m)
            sf["1r"] = systemize_right_block(self.H_1r, m)
            rows3, rows4 = np.arange(q), np.arange(q, 2 * q)
            sf["3c"] = systemize_right_block(self.H_2.submatrix(rows3, np.concatenate([sl["1i"], sl["2i"], sl["2p"]])), q)
            sf["4c"] = systemize_right_block(self.H_2.submatrix(rows4, np.concatenate([sl["1i"], sl["2i"], sl["1p"]])), q)
        except SingularBlock as exc:
            raise SingularBlock(f"{exc} (while systemizing)") from None
        object.__setattr__(self, "_sf", sf)
        object.__setattr__(self, "_h4_frame1", self.H_2.submatrix(rows4, np.concatenate([sl["1i"], sl["1p"]])))

    # sizes
    @property
    def q(self) -> int:
        """Bits per class 1i, 1p, 2i, 2p (= checks per class 3c, 4c)."""
        return int(self.R1 * self.N / 4)

    @property
    def m(self) -> int:
        """Bits per class p1', p2' (= checks per class 1c, 2c)."""
        return int((1 - self.R1) * self.N / 2)

    @property
    def K(self) -> int:
        return 2 * self.q

    @property
    def Rc(self) -> Fraction:
        return Fraction(self.K, self.N)

    @property
    def beta(self) -> Fraction:
        return Fraction(self.N - self.frame1.stop, self.N)

    # class ranges in global column order
    @property
    def bit_classes(self) -> dict[str, slice]:
        q, m = self.q, self.m
        return {
            "1i": slice(0, q), "1p": slice(q, 2 * q), "p1": slice(2 * q, 2 * q + m),
            "2i": slice(2 * q + m, 3 * q + m), "2p": slice(3 * q + m, 4 * q + m), "p2": slice(4 * q + m, 4 * q + 2 * m),
        }

    @property
    def check_classes(self) -> dict[str, slice]:
        q, m = self.q, self.m
        return {"1c": slice(0, m), "2c": slice(m, 2 * m), "3c": slice(2 * m, 2 * m + q), "4c": slice(2 * m + q, 2 * m + 2 * q)}

    @property
    def frame1(self) -> slice:
        return slice(0, self.N // 2)

    @property
    def frame2(self) -> slice:
        return slice(self.N // 2, self.N)

    @property
    def info_positions(self) -> np.ndarray:
        b = self.bit_classes
        return np.concatenate([np.arange(self.N)[b["1i"]], np.arange(self.N)[b["2i"]]])

    def systemized(self, name: str) -> SystemizedForm:
        return self._sf[name]

    def manifest(self) -> dict:
        return {
            "N": self.N, "K": self.K, "R1": str(self.R1), "Rc": str(self.Rc), "beta": str(self.beta),
            "seed": self.seed,
            "ensemble": self.ensemble.manifest() if self.ensemble is not None else None,
            "bit_classes": {k: [v.start, v.stop] for k, v in self.bit_classes.items()},
            "check_classes": {k: [v.start, v.stop] for k, v in self.check_classes.items()},
        }

    def manifest_hash(self) -> str:
        h = hashlib.sha256(json.dumps(self.manifest(), sort_keys=True).encode())
        for mat in (self.H_1s, self.H_1r, self.H_2):
            h.update(mat.indptr.tobytes())
            h.update(mat.indices.tobytes())
        return h.hexdigest()


def assemble(spec: CodeSpec) -> CooperationCode:
    """Build ``H_1s``, ``H_1r`` and ``H_2`` for ``spec`` and stack them."""
    spec.validate()
    ens = spec.ensemble
    r1 = spec.rate1()
    N = spec.N
    q = int(r1 * N / 4)
    m = int((1 - r1) * N / 2)
    n1 = 2 * q + m
    rng = np.random.default_rng(spec.seed)
    last = None
    for _ in range(spec.max_retries):
        # all four random blocks share one graph so 4-cycle removal sees cross-block cycles
        g1 = _subcode_graph(ens.lam1, ens.rho1, n1, m, 2 * q, rng, group=0)
        g2 = _subcode_graph(ens.lam1, ens.rho1, n1, m, 2 * q, rng, group=1)
        cols = {"1i": 0, "1p": q, "p1": 2 * q, "2i": n1, "2p": n1 + q, "p2": n1 + 2 * q}
        g3 = _root_graph(ens.lam2, ens.rho2, q, rng, groups=(2, 3), row_offset=2 * m,
                         cols=(cols["1i"], cols["1p"], cols["2i"], cols["2p"]), n_rows=2 * m + 2 * q, n_cols=N)
        rows = np.concatenate([g1.rows, m + g2.rows, g3.rows])
        colv = np.concatenate([g1.cols, n1 + g2.cols, g3.cols])
        grp = np.concatenate([g1.group, g2.group, g3.group])
        g = _Graph(2 * m + 2 * q, N, rows, colv, grp)
        blocks = [
            (0, np.arange(m), np.arange(cols["p1"], cols["p1"] + m)),
            (1, np.arange(m, 2 * m), np.arange(cols["p2"], cols["p2"] + m)),
            (2, np.arange(2 * m, 2 * m + q), np.arange(cols["2p"], cols["2p"] + q)),
            (3, np.arange(2 * m + q, 2 * m + 2 * q), np.arange(cols["1p"], cols["1p"] + q)),
        ]
        try:
            _finish(g, rng, spec.remove_4cycles, blocks)
            H = g.matrix()
            csr = H.to_csr()
            H_1s = SparseBitMatrix.from_csr(csr[:m, :n1])
            H_1r = SparseBitMatrix.from_csr(csr[m:2 * m, n1:])
            h2 = csr[2 * m:]
            H_2 = SparseBitMatrix.from_csr(sp.hstack([h2[:, :2 * q], h2[:, n1:n1 + 2 * q]], format="csr"))
            return CooperationCode(N=N, R1=r1, H_1s=H_1s, H_1r=H_1r, H_2=H_2, ensemble=ens, seed=spec.seed)
        except (ConstructionFailed, SingularBlock) as exc:
            last = exc
            continue
    block = getattr(last, "block", "") or "assembly"
    raise ConstructionFailed(f"assembly failed after {spec.max_retries} attempts: {last}", block=block)


# --- encoding ---------------------------------------------------------------------

def _as_batch(x, width, name):
    x = np.asarray(x, dtype=np.uint8)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != width:
        raise ValueError(f"{name} must have {width} bits, got {x.shape[1]}")
    return x & 1, single


def encode(code: CooperationCode, info) -> np.ndarray:
    """Codeword(s) for information bits ``info = (1i, 2i)``; shape ``(K,)`` or ``(B, K)``."""
    u, single = _as_batch(info, code.K, "info")
    q = code.q
    u1, u2 = u[:, :q], u[:, q:]
    known = np.concatenate([u1, u2], axis=1).T
    p1 = solve_parity(code._sf["4c"], known).T
    p2 = solve_parity(code._sf["3c"], known).T
    pp1 = solve_parity(code._sf["1s"], np.concatenate([u1, p1], axis=1).T).T
    pp2 = solve_parity(code._sf["1r"], np.concatenate([u2, p2], axis=1).T).T
    c = np.concatenate([u1, p1, pp1, u2, p2, pp2], axis=1).astype(np.uint8)
    return c[0] if single else c


def relay_reencode(code: CooperationCode, frame1_systematic) -> np.ndarray:
    """Frame-2 content ``(2i, 2p, p2')`` from decoded ``(1i, 1p)`` of the partner."""
    x, single = _as_batch(frame1_systematic, 2 * code.q, "frame-1 systematic part")
    q = code.q
    u2 = code._h4_frame1.matvec(x.T).T
    u1 = x[:, :q]
    p2 = solve_parity(code._sf["3c"], np.concatenate([u1, u2], axis=1).T).T
    pp2 = solve_parity(code._sf["1r"], np.concatenate([u2, p2], axis=1).T).T
    out = np.concatenate([u2, p2, pp2], axis=1).astype(np.uint8)
    return out[0] if single else out


# --- serialization ------------------------------------------------------------------

def save_code(code: CooperationCode, directory) -> Path:
    """Write the three matrices as alist files plus ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_alist(code.H_1s, d / "H_1s.alist")
    write_alist(code.H_1r, d / "H_1r.alist")
    write_alist(code.H_2, d / "H_2.alist")
    manifest = code.manifest()
    manifest["hash"] = code.manifest_hash()
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return d


def load_code(directory) -> CooperationCode:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    ens = Ensemble.from_manifest(manifest["ensemble"]) if manifest.get("ensemble") else None
    code = CooperationCode(
        N=int(manifest["N"]), R1=Fraction(manifest["R1"]),
        H_1s=read_alist(d / "H_1s.alist"), H_1r=read_alist(d / "H_1r.alist"), H_2=read_alist(d / "H_2.alist"),
        ensemble=ens, seed=manifest.get("seed"),
    )
    expected = manifest.get("hash")
    if expected is not None and expected != code.manifest_hash():
        raise ValueError(f"{d}: code hash mismatch after reload")
    return code
