"""Population density evolution for the subcode and for the full rate-compatible code.

A density is represented by a 1-D array of LLR samples (all-zero codeword).
Every operation draws its inputs independently and uniformly from the source
populations, so output sample order carries no meaning.

Message populations of the full code, with ``x`` the frame (1 or 2) and
``y`` the other frame::

    a_x  xi -> subcode check         f_x  xi -> its root check
    g_x  xi -> random root-part check
    k_x  xp -> subcode check         l_x  xp -> root-part check
    q_x  px' -> subcode check
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import PchipInterpolator

from .channel import gaussian_llr
from .degree import DegreePoly, EdgeFractions, Ensemble, isolate_root_edge, node_perspective, node_star

__all__ = [
    "CLIP",
    "NoBracket",
    "delta",
    "channel_population",
    "var_convolve",
    "chk_convolve",
    "apply_poly",
    "mixture",
    "density_error_prob",
    "smooth_error_prob",
    "DeResult",
    "de_subcode",
    "de_threshold",
    "DeState",
    "FullPolys",
    "de_full_step",
    "de_full",
    "DeBoundary",
    "de_boundary",
    "de_wer",
]

CLIP = 30.0
_MESSAGES = ("a", "f", "g", "k", "l", "q")


class NoBracket(RuntimeError):
    """No convergent SNR was found inside the search range."""


def delta(value: float, size: int) -> np.ndarray:
    return np.full(size, float(value))


def channel_population(snr: float, size: int, rng) -> np.ndarray:
    """Gaussian-LLR channel density at instantaneous SNR ``snr`` (delta at 0 for ``snr = 0``)."""
    if snr == 0:
        return np.zeros(size)
    if np.isinf(snr):
        return delta(CLIP, size)
    return np.clip(gaussian_llr(snr, size, rng), -CLIP, CLIP)


def _draw(p: np.ndarray, shape, rng) -> np.ndarray:
    return p[rng.integers(0, p.size, size=shape)]


def var_convolve(ps, rng, size: int | None = None) -> np.ndarray:
    """Variable-node convolution: sums of independent draws, one from each population."""
    if not ps:
        raise ValueError("need at least one population")
    size = ps[0].size if size is None else size
    out = np.zeros(size)
    for p in ps:
        out += _draw(p, size, rng)
    return np.clip(out, -CLIP, CLIP)


def _from_tanh(t: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.clip(2.0 * np.arctanh(np.clip(t, -1.0, 1.0)), -CLIP, CLIP)


def chk_convolve(ps, rng, size: int | None = None) -> np.ndarray:
    """Check-node convolution: tanh rule on independent draws, one from each population."""
    if not ps:
        raise ValueError("need at least one population")
    size = ps[0].size if size is None else size
    t = np.ones(size)
    for p in ps:
        t *= np.tanh(0.5 * _draw(p, size, rng))
    return _from_tanh(t)


def apply_poly(p: DegreePoly, kind: str, base: np.ndarray, rng, tail: np.ndarray | None = None,
               size: int | None = None) -> np.ndarray:
    """Evaluate ``sum_i p_i base^(i-1)`` under variable (``"var"``) or check (``"chk"``) convolution.

    With ``tail`` the check form places one draw of ``tail`` inside each
    check combination, which differs from combining the tail afterwards.
    """
    if kind not in ("var", "chk"):
        raise ValueError(f"kind must be 'var' or 'chk', got {kind!r}")
    size = base.size if size is None else size
    counts = rng.multinomial(size, p.weights() / p.weights().sum())
    src = np.tanh(0.5 * base) if kind == "chk" else base
    tail_src = None
    if tail is not None:
        if kind != "chk":
            raise ValueError("a tail is only meaningful inside a check combination")
        tail_src = np.tanh(0.5 * tail)
    parts = []
    for d, n in zip(p.degrees().tolist(), counts.tolist()):
        if n == 0:
            continue
        k = d - 1
        if kind == "var":
            parts.append(_draw(src, (n, k), rng).sum(axis=1) if k > 0 else np.zeros(n))
        else:
            t = _draw(src, (n, k), rng).prod(axis=1) if k > 0 else np.ones(n)
            if tail_src is not None:
                t = t * _draw(tail_src, n, rng)
            parts.append(t)
    out = np.concatenate(parts)
    return np.clip(out, -CLIP, CLIP) if kind == "var" else _from_tanh(out)


def mixture(components, rng, size: int | None = None) -> np.ndarray:
    """Weighted mixture of ``(weight, population)`` pairs."""
    weights = np.array([w for w, _ in components], dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError(f"mixture weights must be nonnegative and sum to 1, got {weights}")
    size = components[0][1].size if size is None else size
    counts = rng.multinomial(size, weights / weights.sum())
    return np.concatenate([_draw(p, n, rng) for (_, p), n in zip(components, counts) if n])


def density_error_prob(p: np.ndarray) -> float:
    """Fraction of negative samples plus half the fraction of zeros."""
    p = np.asarray(p)
    return float((np.count_nonzero(p < 0) + 0.5 * np.count_nonzero(p == 0)) / p.size)


def smooth_error_prob(p: np.ndarray) -> float:
    """``E[1 / (1 + exp|L|)]``: equal to the error probability for symmetric densities,
    but resolves values far below ``1/size``."""
    return float(np.mean(0.5 * (1.0 - np.tanh(0.5 * np.abs(p)))))


def _error(p: np.ndarray) -> float:
    return max(density_error_prob(p), smooth_error_prob(p))


@dataclass(frozen=True)
class DeResult:
    converged: bool
    iterations: int
    trace: np.ndarray


class _Stall:
    """Declares failure once the best error has not improved by ``factor`` within ``patience`` iterations."""

    def __init__(self, patience: int, factor: float = 0.99):
        self.patience, self.factor = patience, factor
        self.best, self.since = np.inf, 0

    def __call__(self, err: float) -> bool:
        if err < self.factor * self.best:
            self.best, self.since = err, 0
        else:
            self.since += 1
        return self.since >= self.patience


def de_subcode(lam1: DegreePoly, rho1: DegreePoly, mu: np.ndarray, rng, max_iter: int = 500,
               eps: float = 1e-6, patience: int | None = 30) -> DeResult:
    """Iterate ``d <- mu (x) lambda1(rho1(d))`` from ``d = delta_0``."""
    P = mu.size
    trace = [_error(mu)]
    if trace[0] < eps:
        return DeResult(True, 0, np.array(trace))
    d = np.zeros(P)
    stall = _Stall(patience) if patience else None
    for it in range(1, max_iter + 1):
        c = apply_poly(rho1, "chk", d, rng, size=P)
        app = var_convolve([mu, apply_poly(node_star(lam1), "var", c, rng, size=P)], rng)
        d = var_convolve([mu, apply_poly(lam1, "var", c, rng, size=P)], rng)
        err = _error(app)
        trace.append(err)
        if err < eps:
            return DeResult(True, it, np.array(trace))
        if stall is not None and stall(err):
            break
    return DeResult(False, len(trace) - 1, np.array(trace))


def de_threshold(lam1: DegreePoly, rho1: DegreePoly, tol_db: float = 0.05, seed: int = 0,
                 population: int = 100_000, lo_db: float = -10.0, hi_db: float = 30.0,
                 max_iter: int = 500, eps: float = 1e-6) -> float:
    """Smallest Gaussian-channel SNR (dB, ``Es/N0``) at which subcode DE converges, by bisection."""
    if tol_db <= 0:
        raise ValueError("tol_db must be positive")

    # every probe reuses one stream so the bisection sees a deterministic, near-monotone predicate
    def ok(db, k):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
        mu = channel_population(10.0 ** (db / 10.0), population, rng)
        return de_subcode(lam1, rho1, mu, rng, max_iter, eps).converged

    if not ok(hi_db, 0):
        raise NoBracket(f"DE does not converge below {hi_db} dB")
    k = 1
    while ok(lo_db, k):
        lo_db -= 10.0
        k += 1
        if lo_db < -60:
            raise NoBracket("DE converges at every SNR tried")
    while hi_db - lo_db > tol_db:
        k += 1
        mid = 0.5 * (lo_db + hi_db)
        if ok(mid, k):
            hi_db = mid
        else:
            lo_db = mid
    return 0.5 * (lo_db + hi_db)


# --- full code ----------------------------------------------------------------------

@dataclass(frozen=True)
class FullPolys:
    """All transformed degree distributions and edge fractions needed by the full-code recursion."""

    rho1: DegreePoly
    lam1: DegreePoly
    lam1_node_star: DegreePoly
    rho2_tilde: DegreePoly
    rho2_node: DegreePoly
    lam2: DegreePoly
    lam2_tilde: DegreePoly
    lam2_node: DegreePoly
    lam2_node_star: DegreePoly
    fractions: EdgeFractions

    @classmethod
    def from_ensemble(cls, ens: Ensemble) -> FullPolys:
        return cls(
            rho1=ens.rho1,
            lam1=ens.lam1,
            lam1_node_star=node_star(ens.lam1),
            rho2_tilde=isolate_root_edge(ens.rho2),
            rho2_node=node_perspective(ens.rho2),
            lam2=ens.lam2,
            lam2_tilde=isolate_root_edge(ens.lam2),
            lam2_node=node_perspective(ens.lam2),
            lam2_node_star=node_star(ens.lam2),
            fractions=ens.edge_fractions(),
        )


@dataclass
class DeState:
    """Twelve message populations plus the two channel densities."""

    mu1: np.ndarray
    mu2: np.ndarray
    msgs: dict = field(default_factory=dict)
    app1: np.ndarray | None = None
    app2: np.ndarray | None = None

    @classmethod
    def initial(cls, mu1: np.ndarray, mu2: np.ndarray) -> DeState:
        if mu1.size != mu2.size:
            raise ValueError("channel populations must share one size")
        zero = np.zeros(mu1.size)
        return cls(mu1, mu2, {f"{m}{x}": zero for m in _MESSAGES for x in (1, 2)})

    @property
    def size(self) -> int:
        return self.mu1.size


def _frame_update(mu, own, other, polys: FullPolys, rng, P):
    """Bit-to-check populations of one frame and the APP of its info class.

    ``own`` holds the frame's previous messages, ``other`` those of the other
    frame (which feed its root checks and the tails of its random checks).
    """
    ef = polys.fractions
    sub_in = mixture([(ef.f_1i1c, own["a"]), (ef.f_1p1c, own["k"]), (ef.f_p1c, own["q"])], rng, P)
    c_sub = apply_poly(polys.rho1, "chk", sub_in, rng, size=P)
    # random checks of this frame's root part carry the other frame's root bit as tail
    rand_in = mixture([(ef.f_1i4c, own["g"]), (ef.f_1p4c, own["l"])], rng, P)
    c_rand = apply_poly(polys.rho2_tilde, "chk", rand_in, rng, tail=other["f"], size=P)
    # root checks of this frame's info bits gather the other frame's random edges
    root_in = mixture([(ef.f_1i4c, other["g"]), (ef.f_1p4c, other["l"])], rng, P)
    c_root = apply_poly(polys.rho2_node, "chk", root_in, rng, size=P)

    t_sub_edge = apply_poly(polys.lam1, "var", c_sub, rng, size=P)
    t_sub_all = apply_poly(polys.lam1_node_star, "var", c_sub, rng, size=P)
    t_rand_all_i = apply_poly(polys.lam2_node, "var", c_rand, rng, size=P)
    t_rand_edge_i = apply_poly(polys.lam2_tilde, "var", c_rand, rng, size=P)
    t_rand_all_p = apply_poly(polys.lam2_node_star, "var", c_rand, rng, size=P)
    t_rand_edge_p = apply_poly(polys.lam2, "var", c_rand, rng, size=P)

    vc = lambda *ps: var_convolve([mu, *ps], rng, P)
    new = {
        "a": vc(t_rand_all_i, t_sub_edge, c_root),
        "f": vc(t_sub_all, t_rand_all_i),
        "g": vc(t_sub_all, t_rand_edge_i, c_root),
        "k": vc(t_rand_all_p, t_sub_edge),
        "l": vc(t_sub_all, t_rand_edge_p),
        "q": vc(t_sub_edge),
    }
    app = vc(t_sub_all, t_rand_all_i, c_root)
    return new, app


def de_full_step(state: DeState, polys: FullPolys, rng) -> DeState:
    """One synchronous iteration of the full-code recursion (both frames read the old state)."""
    P = state.size
    old1 = {m: state.msgs[f"{m}1"] for m in _MESSAGES}
    old2 = {m: state.msgs[f"{m}2"] for m in _MESSAGES}
    new1, app1 = _frame_update(state.mu1, old1, old2, polys, rng, P)
    new2, app2 = _frame_update(state.mu2, old2, old1, polys, rng, P)
    msgs = {f"{m}1": new1[m] for m in _MESSAGES} | {f"{m}2": new2[m] for m in _MESSAGES}
    return replace(state, msgs=msgs, app1=app1, app2=app2)


def de_full(polys: FullPolys, snr1: float, snr2: float, rng, population: int = 100_000,
            max_iter: int = 500, eps: float = 1e-6, patience: int | None = 30) -> DeResult:
    """Run the full-code recursion for frame SNRs ``snr1`` and ``snr2`` (0 = erased frame).

    Success means both information classes reach error probability below ``eps``.
    """
    mu1 = channel_population(snr1, population, rng)
    mu2 = channel_population(snr2, population, rng)
    state = DeState.initial(mu1, mu2)
    stall = _Stall(patience) if patience else None
    trace = []
    for it in range(1, max_iter + 1):
        state = de_full_step(state, polys, rng)
        err = max(_error(state.app1), _error(state.app2))
        trace.append(err)
        if err < eps:
            return DeResult(True, it, np.array(trace))
        if stall is not None and stall(err):
            break
    return DeResult(False, len(trace), np.array(trace))


# --- success region and WER -----------------------------------------------------------

@dataclass(frozen=True)
class DeBoundary:
    """Success region of the full-code recursion in the plane of frame SNRs.

    The ensemble is symmetric in the two frames, so the region is described by
    the diagonal threshold ``s_diag`` and, for ``u < s_diag``, the SNR
    ``v*(u)`` the other frame needs: a pair ``(s1, s2)`` succeeds iff
    ``max >= v*(min)`` (or both exceed ``s_diag``).
    """

    s_diag: float
    u: np.ndarray  # increasing, starts at 0, ends at s_diag
    v: np.ndarray  # nonincreasing, ends at s_diag

    def __post_init__(self):
        if self.u[0] != 0 or not np.all(np.diff(self.u) > 0):
            raise ValueError("u grid must start at 0 and increase")

    def required(self, u) -> np.ndarray:
        """``v*(u)`` by monotone interpolation in dB (linear in ``u`` below the first positive node)."""
        u = np.asarray(u, dtype=float)
        v_db = 10 * np.log10(self.v)
        out = np.empty_like(u)
        pos = self.u[1:]
        interp = PchipInterpolator(10 * np.log10(pos), v_db[1:]) if pos.size > 1 else None
        low = u < pos[0]
        w = np.clip(u[low] / pos[0], 0.0, 1.0)
        out[low] = 10 ** (((1 - w) * v_db[0] + w * v_db[1]) / 10)
        high = ~low
        if interp is not None:
            out[high] = 10 ** (interp(10 * np.log10(np.minimum(u[high], self.s_diag))) / 10)
        else:
            out[high] = self.v[-1]
        return out

    def success(self, s1, s2) -> np.ndarray:
        s1 = np.asarray(s1, dtype=float)
        s2 = np.asarray(s2, dtype=float)
        lo, hi = np.minimum(s1, s2), np.maximum(s1, s2)
        both = lo >= self.s_diag
        ok = np.zeros(lo.shape, dtype=bool)
        ok[both] = True
        rest = ~both
        ok[rest] = hi[rest] >= self.required(lo[rest])
        return ok


def de_boundary(ens: Ensemble, seed: int = 0, population: int = 20_000, tol_db: float = 0.05,
                u_offsets_db=(0.5, 1, 1.5, 2, 3, 4, 5, 6, 8, 10, 13, 16, 20, 25), max_iter: int = 500,
                eps: float = 1e-6, progress=None) -> DeBoundary:
    """Trace the success region of the full-code recursion.

    First the diagonal threshold is bisected, then for each ``u`` below it
    (given as offsets in dB, plus ``u = 0``) the SNR the other frame needs,
    warm-starting each search from the previous answer.
    """
    polys = FullPolys.from_ensemble(ens)
    counter = [0]

    def ok(s1, s2):
        counter[0] += 1
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
        res = de_full(polys, s1, s2, rng, population, max_iter, eps)
        if progress is not None:
            progress(s1, s2, res)
        return res.converged

    lin = lambda db: 10.0 ** (db / 10.0)

    def bisect(pred, lo_db, hi_db):
        while not pred(hi_db):
            lo_db, hi_db = hi_db, hi_db + max(2.0, hi_db - lo_db)
            if hi_db > 40:
                raise NoBracket("no convergent point below 40 dB")
        while pred(lo_db):
            lo_db, hi_db = lo_db - max(2.0, hi_db - lo_db), lo_db
            if lo_db < -40:
                raise NoBracket("converges everywhere")
        while hi_db - lo_db > tol_db:
            mid = 0.5 * (lo_db + hi_db)
            if pred(mid):
                hi_db = mid
            else:
                lo_db = mid
        return hi_db  # conservative end of the bracket

    d_db = bisect(lambda db: ok(lin(db), lin(db)), -5.0, 5.0)
    s_diag = lin(d_db)
    us, vs = [s_diag], [s_diag]
    prev = d_db
    for off in sorted(u_offsets_db):
        u = lin(d_db - off)
        v_db = bisect(lambda db: ok(u, lin(db)), prev, prev + 1.0)
        us.append(u)
        vs.append(lin(v_db))
        prev = v_db
    v0_db = bisect(lambda db: ok(0.0, lin(db)), prev, prev + 1.0)
    us.append(0.0)
    vs.append(lin(v0_db))
    u = np.array(us[::-1])
    v = np.maximum.accumulate(np.array(vs))[::-1]
    return DeBoundary(s_diag, u, v)


def de_wer(ens: Ensemble, links_at, snr_grid_db, n_fading: int, seed: int, boundary: DeBoundary | None = None,
           subcode_threshold_db: float | None = None, population: int = 20_000, method: str = "boundary",
           chunk: int = 100_000, **boundary_kw) -> list[dict]:
    """DE-predicted word error rate of user 1 over Rayleigh block fading.

    For each grid SNR the fading gains of ``n_fading`` blocks are drawn; the
    interuser links succeed when their instantaneous SNR exceeds the subcode
    DE threshold, the case fixes the frame-2 channel, and the block fails when
    the full-code recursion does not converge.  ``links_at(snr_db)`` returns
    the :class:`~coopldpc.channel.Links` for a grid point.

    ``method="boundary"`` looks each block up in the precomputed success
    region; ``method="direct"`` runs the recursion for every block.
    """
    from .channel import sample_gains
    from .protocol import determine_cases, wilson_interval
    from .seeding import chunks, stream

    if method not in ("boundary", "direct"):
        raise ValueError(f"unknown method {method!r}")
    if subcode_threshold_db is None:
        subcode_threshold_db = de_threshold(ens.lam1, ens.rho1, seed=seed, population=population)
    thr = 10.0 ** (subcode_threshold_db / 10.0)
    if method == "boundary" and boundary is None:
        boundary = de_boundary(ens, seed=seed, population=population, **boundary_kw)
    polys = FullPolys.from_ensemble(ens) if method == "direct" else None
    rows = []
    for gi, snr_db in enumerate(snr_grid_db):
        links = links_at(snr_db)
        gam = links.gammas()
        fails, iters, done = 0, [], 0
        for ci, size in chunks(n_fading, chunk):
            rng = stream(seed, gi, ci)
            s = sample_gains(size, rng) ** 2 * gam
            cases = determine_cases(s[:, 0] > thr, s[:, 1] > thr)
            s1 = s[:, 2]
            s2 = np.select([cases == 1, cases == 2, cases == 3], [s[:, 3], s[:, 2], s[:, 2] + s[:, 3]], 0.0)
            if method == "boundary":
                fails += int((~boundary.success(s1, s2)).sum())
            else:
                for a, b in zip(s1.tolist(), s2.tolist()):
                    res = de_full(polys, a, b, rng, population, boundary_kw.get("max_iter", 500),
                                  boundary_kw.get("eps", 1e-6))
                    fails += not res.converged
                    iters.append(res.iterations)
            done += size
        lo, hi = wilson_interval(fails, done)
        rows.append({
            "snr_db": float(snr_db), "wer": fails / done, "ci_low": lo, "ci_high": hi,
            "n_fading": done, "population": population,
            "iterations_mean": float(np.mean(iters)) if iters else float("nan"),
        })
    return rows
