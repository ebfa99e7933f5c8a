"""Block-Rayleigh fading links with BPSK signalling and channel LLRs.

Gains are normalized to ``E[alpha^2] = 1`` so a link's ``gamma`` is its
average received SNR ``Es/N0``; the noise variance is ``sigma^2 = 1/(2 gamma)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinkParams",
    "Links",
    "ChannelRealization",
    "SCENARIO_OFFSETS",
    "db_to_linear",
    "sample_realization",
    "sample_gains",
    "transmit_llr",
    "combine_mrc",
    "gaussian_llr",
]

# (interuser offset, partner-uplink offset) in dB relative to the user-1 uplink
SCENARIO_OFFSETS = {
    "scenario1": (5.0, 0.0),
    "scenario2": (12.0, 4.0),
    "regular3936": (5.0, 0.0),
}


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class LinkParams:
    """Average SNR of one link."""

    gamma_db: float

    def __post_init__(self):
        if not np.isfinite(self.gamma_db):
            raise ValueError("gamma_db must be finite")

    @property
    def gamma(self) -> float:
        return float(db_to_linear(self.gamma_db))

    @property
    def sigma2(self) -> float:
        return 1.0 / (2.0 * self.gamma)


@dataclass(frozen=True)
class Links:
    """Average SNRs of the four links user1->user2, user2->user1, user1->dest, user2->dest."""

    l12: LinkParams
    l21: LinkParams
    l1d: LinkParams
    l2d: LinkParams

    @classmethod
    def from_offsets(cls, snr_db: float, interuser_db: float = 0.0, partner_db: float = 0.0) -> Links:
        """Links referenced to the user-1 uplink SNR ``snr_db``."""
        inter = LinkParams(snr_db + interuser_db)
        return cls(inter, inter, LinkParams(snr_db), LinkParams(snr_db + partner_db))

    @classmethod
    def scenario(cls, name: str, snr_db: float) -> Links:
        return cls.from_offsets(snr_db, *SCENARIO_OFFSETS[name])

    def gammas(self) -> np.ndarray:
        """Linear average SNRs in the order (12, 21, 1d, 2d)."""
        return np.array([self.l12.gamma, self.l21.gamma, self.l1d.gamma, self.l2d.gamma])

    def swapped(self) -> Links:
        """The same links seen from user 2."""
        return Links(self.l21, self.l12, self.l2d, self.l1d)


@dataclass(frozen=True)
class ChannelRealization:
    """Fading gains of one block, constant over both frames."""

    a12: float
    a21: float
    a1d: float
    a2d: float

    def __post_init__(self):
        if min(self.a12, self.a21, self.a1d, self.a2d) < 0:
            raise ValueError("fading gains must be nonnegative")

    def as_array(self) -> np.ndarray:
        return np.array([self.a12, self.a21, self.a1d, self.a2d])

    def snrs(self, links: Links) -> np.ndarray:
        """Instantaneous SNRs ``alpha^2 gamma`` in the order (12, 21, 1d, 2d)."""
        return self.as_array() ** 2 * links.gammas()

    def swapped(self) -> ChannelRealization:
        return ChannelRealization(self.a21, self.a12, self.a2d, self.a1d)


def sample_gains(n: int, rng) -> np.ndarray:
    """``(n, 4)`` independent Rayleigh gains with unit mean-square."""
    return np.sqrt(rng.standard_exponential((n, 4)))


def sample_realization(links: Links | None, rng) -> ChannelRealization:
    """One block of independent Rayleigh gains.  ``links`` is accepted for symmetry and unused."""
    return ChannelRealization(*sample_gains(1, rng)[0].tolist())


def transmit_llr(bits, alpha: float, sigma2: float, rng) -> np.ndarray:
    """BPSK over ``y = alpha x + z``; returns ``2 alpha y / sigma^2``."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    x = 1.0 - 2.0 * np.asarray(bits, dtype=float)
    y = alpha * x + rng.normal(0.0, np.sqrt(sigma2), size=x.shape)
    return 2.0 * alpha * y / sigma2


def combine_mrc(llr_a, llr_b) -> np.ndarray:
    """Maximum-ratio combining of two independent observations: LLRs add."""
    a = np.asarray(llr_a, dtype=float)
    b = np.asarray(llr_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a + b


def gaussian_llr(snr, size, rng) -> np.ndarray:
    """Consistent Gaussian LLRs of the all-zero word at instantaneous SNR ``snr``: ``N(4 snr, 8 snr)``."""
    snr = float(snr)
    if snr < 0:
        raise ValueError("snr must be nonnegative")
    return 4.0 * snr + np.sqrt(8.0 * snr) * rng.standard_normal(size)
