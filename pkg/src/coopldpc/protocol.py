"""Two-user coded cooperation over block-fading links.

Each user owns one codeword of the same rate-compatible code.  In frame 1 both
users broadcast their own frame-1 bits; each partner tries to decode them with
the subcode alone.  Frame 2 then carries, for each user, either the partner's
relayed frame-2 bits, its own, both (combined at the destination), or nothing,
depending on which interuser transmissions succeeded.  The destination knows
which case occurred and decodes each user's full graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .channel import ChannelRealization, Links, combine_mrc, sample_gains, transmit_llr
from .construction import CooperationCode, encode, relay_reencode
from .decoder import BPDecoder
from .seeding import chunks, stream

__all__ = [
    "CaseId",
    "BlockOutcome",
    "SimulationResult",
    "CooperationSimulator",
    "determine_case",
    "determine_cases",
    "wilson_interval",
]


class CaseId(IntEnum):
    """Cooperation case from user 1's point of view."""

    CASE1 = 1  # both interuser transmissions decoded
    CASE2 = 2  # neither decoded
    CASE3 = 3  # user 2 decoded user 1; user 1 failed on user 2
    CASE4 = 4  # user 1 decoded user 2; user 2 failed on user 1


def determine_case(success_1to2: bool, success_2to1: bool) -> CaseId:
    """Case of user 1 given which interuser decodes succeeded."""
    return CaseId(int(determine_cases(np.array([success_1to2]), np.array([success_2to1]))[0]))


def determine_cases(success_1to2, success_2to1) -> np.ndarray:
    s12 = np.asarray(success_1to2, dtype=bool)
    s21 = np.asarray(success_2to1, dtype=bool)
    return np.select([s12 & s21, ~s12 & ~s21, s12 & ~s21], [1, 2, 3], default=4)


@dataclass(frozen=True)
class BlockOutcome:
    case: CaseId
    user1_error: bool
    user2_error: bool
    iterations1: int
    iterations2: int


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class SimulationResult:
    """Integer tallies of a block simulation; merging is plain addition."""

    blocks: int = 0
    errors1: int = 0
    errors2: int = 0
    case_counts: np.ndarray = field(default_factory=lambda: np.zeros(5, dtype=np.int64))
    iterations: int = 0

    def merge(self, other: SimulationResult) -> SimulationResult:
        return SimulationResult(
            self.blocks + other.blocks, self.errors1 + other.errors1, self.errors2 + other.errors2,
            self.case_counts + other.case_counts, self.iterations + other.iterations,
        )

    @property
    def wer1(self) -> float:
        return self.errors1 / self.blocks if self.blocks else float("nan")

    @property
    def wer2(self) -> float:
        return self.errors2 / self.blocks if self.blocks else float("nan")

    def ci1(self) -> tuple[float, float]:
        return wilson_interval(self.errors1, self.blocks)


class CooperationSimulator:
    """Block-level simulator of the cooperation protocol.

    Parameters
    ----------
    code : CooperationCode
    max_iter : int
        Sum-product iterations at the destination and at the partner.
    strict : bool
        Count a non-converged decode as an error even if the information bits match.
    all_zero : bool
        Transmit the all-zero codeword instead of random information.
    """

    def __init__(self, code: CooperationCode, max_iter: int = 100, strict: bool = False, all_zero: bool = False):
        self.code = code
        self.max_iter = max_iter
        self.strict = strict
        self.all_zero = all_zero
        self.full = BPDecoder(code.H)
        self.sub = BPDecoder(code.H_1s)
        self._info = code.info_positions

    def interuser_decode(self, frame1_llr, frame1_bits) -> np.ndarray:
        """Ideal-CRC partner decode: success iff the whole frame 1 is recovered exactly."""
        res = self.sub.decode(frame1_llr, self.max_iter)
        return np.all(np.atleast_2d(res.bits) == np.atleast_2d(frame1_bits), axis=1)

    def _destination(self, cw, frame1_llr, own2, relay2, cases):
        """Assemble and decode one user's word; ``own2``/``relay2`` are frame-2 LLRs of the two senders."""
        f2 = np.zeros_like(own2)
        f2[cases == 1] = relay2[cases == 1]
        f2[cases == 2] = own2[cases == 2]
        m3 = cases == 3
        f2[m3] = combine_mrc(own2[m3], relay2[m3])
        llr = np.concatenate([frame1_llr, f2], axis=1)
        res = self.full.decode(llr, self.max_iter)
        err = np.any(res.bits[:, self._info] != cw[:, self._info], axis=1)
        if self.strict:
            err |= ~res.converged
        return err, res.iterations

    def run_blocks(self, gains: np.ndarray, links: Links, rng, info1=None, info2=None) -> list[BlockOutcome]:
        """Simulate the blocks whose fading gains are the rows of ``gains`` (order 12, 21, 1d, 2d)."""
        e1, e2, cases, it1, it2 = self._run(np.atleast_2d(gains), links, rng, info1, info2)
        return [BlockOutcome(CaseId(int(c)), bool(a), bool(b), int(i), int(j))
                for c, a, b, i, j in zip(cases, e1, e2, it1, it2)]

    def run_block(self, realization: ChannelRealization, links: Links, info1, info2, rng) -> BlockOutcome:
        return self.run_blocks(realization.as_array()[None, :], links, rng,
                               np.atleast_2d(info1), np.atleast_2d(info2))[0]

    def _run(self, gains, links, rng, info1, info2):
        code = self.code
        B = gains.shape[0]
        half = code.N // 2
        if info1 is None:
            info1 = np.zeros((B, code.K), np.uint8) if self.all_zero else rng.integers(0, 2, (B, code.K), dtype=np.uint8)
        if info2 is None:
            info2 = np.zeros((B, code.K), np.uint8) if self.all_zero else rng.integers(0, 2, (B, code.K), dtype=np.uint8)
        c1, c2 = encode(code, info1), encode(code, info2)
        a12, a21, a1d, a2d = (gains[:, k:k + 1] for k in range(4))
        s12, s21, s1d, s2d = links.l12.sigma2, links.l21.sigma2, links.l1d.sigma2, links.l2d.sigma2

        # frame 1: broadcast to partner and destination
        ok12 = self.interuser_decode(transmit_llr(c1[:, :half], a12, s12, rng), c1[:, :half])
        ok21 = self.interuser_decode(transmit_llr(c2[:, :half], a21, s21, rng), c2[:, :half])
        d1_f1 = transmit_llr(c1[:, :half], a1d, s1d, rng)
        d2_f1 = transmit_llr(c2[:, :half], a2d, s2d, rng)

        # frame 2: each user sends its own frame 2 and/or the partner's re-encoded one
        q2 = 2 * code.q
        relay_of_1 = relay_reencode(code, c1[:, :q2])  # what user 2 forwards when ok12
        relay_of_2 = relay_reencode(code, c2[:, :q2])
        d1_own = transmit_llr(c1[:, half:], a1d, s1d, rng)
        d1_relay = transmit_llr(relay_of_1, a2d, s2d, rng)
        d2_own = transmit_llr(c2[:, half:], a2d, s2d, rng)
        d2_relay = transmit_llr(relay_of_2, a1d, s1d, rng)

        cases1 = determine_cases(ok12, ok21)
        cases2 = determine_cases(ok21, ok12)
        err1, it1 = self._destination(c1, d1_f1, d1_own, d1_relay, cases1)
        err2, it2 = self._destination(c2, d2_f1, d2_own, d2_relay, cases2)
        return err1, err2, cases1, it1, it2

    def simulate(self, links: Links, n_blocks: int, seed: int, key: tuple = (), chunk: int = 64) -> SimulationResult:
        """Simulate ``n_blocks`` Rayleigh blocks; chunk ``i`` uses the stream ``(seed, *key, i)``."""
        total = SimulationResult()
        for i, size in chunks(n_blocks, chunk):
            rng = stream(seed, *key, i)
            gains = sample_gains(size, rng)
            e1, e2, cases, it1, it2 = self._run(gains, links, rng, None, None)
            counts = np.bincount(cases, minlength=5)
            total = total.merge(SimulationResult(size, int(e1.sum()), int(e2.sum()), counts, int(it1.sum() + it2.sum())))
        return total
