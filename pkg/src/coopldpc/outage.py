"""BPSK mutual information and the outage limit of two-user coded cooperation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import PchipInterpolator

from .channel import Links, sample_gains
from .protocol import determine_cases
from .seeding import chunks, stream

__all__ = [
    "bpsk_mi",
    "bpsk_mi_cached",
    "OutageScenario",
    "case_mutual_info",
    "outage_indicator",
    "outage_events",
    "outage_probability",
    "bpsk_mi_inverse",
]

_LN2 = np.log(2.0)


@lru_cache(maxsize=8)
def _hermgauss(n: int):
    x, w = np.polynomial.hermite.hermgauss(n)
    return x, w / np.sqrt(np.pi)


def bpsk_mi(snr, n_nodes: int = 127):
    """Mutual information (bits) of BPSK on a real Gaussian channel at instantaneous SNR ``alpha^2 gamma``.

    Given ``x = +1`` the channel LLR is ``N(4 snr, 8 snr)``, so
    ``I = 1 - E[log2(1 + exp(-L))]`` is a one-dimensional Gaussian expectation
    evaluated by Gauss-Hermite quadrature.
    """
    s = np.asarray(snr, dtype=float)
    if np.any(s < 0):
        raise ValueError("snr must be nonnegative")
    x, w = _hermgauss(n_nodes)
    L = 4.0 * s[..., None] + 4.0 * np.sqrt(s)[..., None] * x
    loss = np.logaddexp(0.0, -L) @ w / _LN2
    out = np.clip(1.0 - loss, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


class _MiTable:
    """Monotone interpolation of :func:`bpsk_mi` on a dB grid, and its inverse."""

    def __init__(self, lo_db=-50.0, hi_db=60.0, step_db=0.01):
        self.lo, self.hi = lo_db, hi_db
        grid = np.arange(lo_db, hi_db + step_db / 2, step_db)
        vals = np.maximum.accumulate(bpsk_mi(10.0 ** (grid / 10.0)))
        self.interp = PchipInterpolator(grid, vals)
        strict = np.concatenate([[True], np.diff(vals) > 0])
        self.inv_mi, self.inv_db = vals[strict], grid[strict]

    def __call__(self, snr):
        s = np.asarray(snr, dtype=float)
        out = np.empty_like(s)
        pos = s > 0
        db = np.full(s.shape, -np.inf)
        db[pos] = 10.0 * np.log10(s[pos])
        inside = (db >= self.lo) & (db <= self.hi)
        out[inside] = self.interp(db[inside])
        out[db > self.hi] = 1.0
        low = ~inside & (db < self.lo)
        out[low] = bpsk_mi(s[low]) if low.any() else 0.0
        return np.clip(out, 0.0, 1.0)

    def inverse(self, target):
        t = np.asarray(target, dtype=float)
        db = np.interp(t, self.inv_mi, self.inv_db)
        out = 10.0 ** (db / 10.0)
        # below the grid the curve is linear: I ~ snr / ln 2
        tiny = t < self.inv_mi[0]
        out = np.where(tiny, t * _LN2, out)
        return np.where(t <= 0, 0.0, np.where(t >= self.inv_mi[-1], np.inf, out))


@lru_cache(maxsize=1)
def _table() -> _MiTable:
    return _MiTable()


def bpsk_mi_cached(snr):
    """Table-driven :func:`bpsk_mi` for bulk Monte Carlo use (error below 1e-6)."""
    return _table()(snr)


def bpsk_mi_inverse(target):
    """SNR at which the BPSK mutual information equals ``target`` (inf when unreachable)."""
    out = _table().inverse(target)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OutageScenario:
    """Per-user rate ``R``, cooperation level ``beta`` and the four links.

    ``combining="mrc"`` scores the case where both users send the same frame-2
    bits with the maximum-ratio-combined SNR; ``"equal-gain"`` instead weighs
    the two observations by their fading gains only, which coincides with MRC
    when both links have the same noise level.
    """

    R: float
    beta: float
    links: Links
    combining: str = "mrc"

    def __post_init__(self):
        if not 0 < self.R < 1:
            raise ValueError("R must lie in (0, 1)")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.combining not in ("mrc", "equal-gain"):
            raise ValueError(f"unknown combining {self.combining!r}")

    @property
    def interuser_rate(self) -> float:
        return self.R / (1.0 - self.beta)


def _combined_snr(gains, gammas, combining):
    a1, a2 = gains[..., 2], gains[..., 3]
    g1, g2 = gammas[2], gammas[3]
    if combining == "mrc":
        return a1 ** 2 * g1 + a2 ** 2 * g2
    A = a1 ** 2 + a2 ** 2
    den = a1 ** 2 / g1 + a2 ** 2 / g2
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, A ** 2 / np.where(den > 0, den, 1.0), 0.0)


def case_mutual_info(case, gains, scenario: OutageScenario, mi=bpsk_mi_cached):
    """``I_1d`` for user 1 given the case and fading gains (order 12, 21, 1d, 2d)."""
    gains = np.asarray(gains, dtype=float)
    case = np.asarray(case)
    gam = scenario.links.gammas()
    b = scenario.beta
    m1 = mi(gains[..., 2] ** 2 * gam[2])
    m2 = mi(gains[..., 3] ** 2 * gam[3])
    mc = mi(_combined_snr(gains, gam, scenario.combining))
    out = np.select(
        [case == 1, case == 3],
        [(1 - b) * m1 + b * m2, (1 - b) * m1 + b * mc],
        default=m1,
    )
    return float(out) if out.ndim == 0 else out


def outage_events(gains, scenario: OutageScenario, mi=bpsk_mi_cached) -> np.ndarray:
    """Boolean outage indicator of user 1 for each row of ``gains``."""
    gains = np.atleast_2d(np.asarray(gains, dtype=float))
    gam = scenario.links.gammas()
    thr = scenario.interuser_rate
    ok12 = mi(gains[:, 0] ** 2 * gam[0]) > thr
    ok21 = mi(gains[:, 1] ** 2 * gam[1]) > thr
    cases = determine_cases(ok12, ok21)
    i1d = case_mutual_info(cases, gains, scenario, mi)
    target = np.where(cases == 4, thr, scenario.R)
    return np.asarray(i1d) < target


def outage_indicator(realization, scenario: OutageScenario) -> bool:
    """Whether one realization lies in the outage region of user 1."""
    return bool(outage_events(realization.as_array()[None, :], scenario, mi=bpsk_mi)[0])


def _conditional_outage(s1d, scenario: OutageScenario) -> np.ndarray:
    """``P(outage | alpha_1d)`` with the other three Rayleigh gains integrated out in closed form."""
    gam = scenario.links.gammas()
    b, R, thr = scenario.beta, scenario.R, scenario.interuser_rate
    t_inter = bpsk_mi_inverse(thr)
    p12 = np.exp(-t_inter / gam[0])
    p21 = np.exp(-t_inter / gam[1])
    m1 = bpsk_mi_cached(s1d)
    need = (R - (1 - b) * m1) / b  # mutual information the frame-2 branch must supply
    y_star = bpsk_mi_inverse(np.clip(need, 0.0, 1.0))
    with np.errstate(invalid="ignore", over="ignore"):
        cdf2 = lambda y: np.where(np.isinf(y), 1.0, -np.expm1(-np.maximum(y, 0.0) / gam[3]))
        out1 = np.where(need <= 0, 0.0, cdf2(y_star))
        out3 = np.where(need <= 0, 0.0, cdf2(y_star - s1d))
    out2 = (m1 < R).astype(float)
    out4 = (m1 < thr).astype(float)
    return (p12 * p21 * out1 + (1 - p12) * (1 - p21) * out2
            + p12 * (1 - p21) * out3 + (1 - p12) * p21 * out4)


def outage_probability(scenario: OutageScenario, n_trials: int, seed: int, key: tuple = (),
                       chunk: int = 100_000, method: str = "direct") -> tuple[float, tuple[float, float]]:
    """Monte Carlo outage probability with a 95% normal-approximation interval.

    ``method="direct"`` averages the outage indicator over sampled gains.
    ``method="conditional"`` samples only the user-1 uplink gain and averages
    the exact conditional outage probability over it; the estimate has the
    same mean and far smaller variance deep in the diversity regime
    (maximum-ratio combining only).
    """
    if n_trials < 1:
        raise ValueError("n_trials must be positive")
    if method not in ("direct", "conditional"):
        raise ValueError(f"unknown method {method!r}")
    if method == "conditional" and scenario.combining != "mrc":
        raise ValueError("the conditional estimator requires maximum-ratio combining")
    total = 0.0
    total_sq = 0.0
    for i, size in chunks(n_trials, chunk):
        gains = sample_gains(size, stream(seed, *key, i))
        if method == "direct":
            vals = outage_events(gains, scenario).astype(float)
        else:
            vals = _conditional_outage(gains[:, 2] ** 2 * scenario.links.gammas()[2], scenario)
        total += vals.sum()
        total_sq += (vals ** 2).sum()
    p = total / n_trials
    var = max(total_sq / n_trials - p * p, 0.0)
    half = 1.959963984540054 * np.sqrt(var / n_trials)
    return p, (max(0.0, p - half), min(1.0, p + half))
