import numpy as np
import pytest
from scipy.stats import ks_2samp, norm

from coopldpc.degree import DegreePoly, get_preset
from coopldpc.density import (
    CLIP, DeBoundary, DeState, FullPolys, NoBracket, apply_poly, channel_population, chk_convolve,
    de_full, de_full_step, de_subcode, de_threshold, de_wer, delta, density_error_prob, mixture,
    smooth_error_prob, var_convolve,
)
from coopldpc.channel import Links
from coopldpc.outage import bpsk_mi_inverse

P = 50_000


def same_distribution(a, b, alpha=1e-3):
    return ks_2samp(a, b).pvalue > alpha


def test_var_convolve_identity_and_moments(rng):
    g = channel_population(0.5, P, rng)
    assert same_distribution(var_convolve([g, delta(0.0, P)], rng), g)
    two = var_convolve([g, g], rng)
    assert two.mean() == pytest.approx(2 * g.mean(), rel=0.02)
    assert two.var() == pytest.approx(2 * g.var(), rel=0.02)


def test_var_convolve_commutes(rng):
    a, b = channel_population(0.3, P, rng), rng.exponential(1.0, P)
    assert same_distribution(var_convolve([a, b], rng), var_convolve([b, a], rng))


def test_chk_convolve_neutral_and_absorbing(rng):
    g = np.clip(channel_population(0.5, P, rng), -12, 12)
    assert same_distribution(chk_convolve([g, delta(CLIP, P)], rng), g)
    np.testing.assert_array_equal(chk_convolve([g, delta(0.0, P)], rng), 0.0)


@pytest.mark.parametrize("p", [0.1, 0.3])
def test_chk_convolve_xor_statistics(rng, p):
    # three-edge check, two incoming hard messages of +-4 with error rate p each
    hard = np.where(rng.random(P) < p, -4.0, 4.0)
    out = chk_convolve([hard, hard], rng)
    expected = sum(pa * pb for (pa, sa) in ((p, 1), (1 - p, 0)) for (pb, sb) in ((p, 1), (1 - p, 0)) if sa ^ sb)
    assert (out < 0).mean() == pytest.approx(expected, abs=4 * np.sqrt(expected / P))
    assert np.abs(out).max() < 4.0


def test_apply_poly_regular_is_plain_convolution(rng):
    g = channel_population(0.4, P, rng)
    assert same_distribution(apply_poly(DegreePoly.regular(4), "var", g, rng), var_convolve([g, g, g], rng))
    assert same_distribution(apply_poly(DegreePoly.regular(3), "chk", g, rng), chk_convolve([g, g], rng))


def test_apply_poly_degree_mix(rng):
    ones = delta(1.0, P)
    out = apply_poly(DegreePoly({2: 0.25, 5: 0.75}), "var", ones, rng)
    assert (out == 1.0).mean() == pytest.approx(0.25, abs=0.01)
    assert (out == 4.0).mean() == pytest.approx(0.75, abs=0.01)


def test_tail_inside_check(rng):
    rho = DegreePoly({3: 0.5, 9: 0.5})
    base = channel_population(1.0, P, rng)
    tail = channel_population(0.2, P, rng)
    inside = apply_poly(rho, "chk", base, rng, tail=tail)
    # the tail joins every check combination, so the mix equals t applied after rho in distribution
    after = chk_convolve([apply_poly(rho, "chk", base, rng), tail], rng)
    assert same_distribution(inside, after)
    # but not to a single tail combined with rho of one degree less
    fewer = apply_poly(DegreePoly({2: 0.5, 8: 0.5}), "chk", base, rng)
    assert not same_distribution(inside, fewer)
    with pytest.raises(ValueError):
        apply_poly(rho, "var", base, rng, tail=tail)


def test_starred_var_matches_composition(rng):
    lam = DegreePoly({2: 0.4, 4: 0.6})
    base = channel_population(0.3, P, rng)
    from coopldpc.degree import starred
    direct = apply_poly(starred(lam), "var", base, rng)
    composed = var_convolve([apply_poly(lam, "var", base, rng), base], rng)
    assert same_distribution(direct, composed)


def test_mixture(rng):
    g = channel_population(0.5, P, rng)
    assert same_distribution(mixture([(1.0, g)], rng), g)
    pm = mixture([(0.5, delta(3.0, P)), (0.5, delta(-3.0, P))], rng)
    assert abs(pm.mean()) < 0.05
    ef = get_preset("regular3936").edge_fractions()
    mix = mixture([(ef.f_1i4c, delta(1.0, P)), (ef.f_1p4c, delta(2.0, P))], rng)
    assert (mix == 2.0).mean() == pytest.approx(3 / 5, abs=0.01)
    with pytest.raises(ValueError):
        mixture([(0.5, g), (0.4, g)], rng)


def test_error_probability():
    assert density_error_prob(delta(0.0, 10)) == 0.5
    assert density_error_prob(delta(2.0, 10)) == 0.0
    assert density_error_prob(np.array([-1.0, 0.0, 1.0, 2.0])) == pytest.approx(0.375)


@pytest.mark.parametrize("m", [1.0, 4.0, 10.0])
def test_gaussian_error_probability(rng, m):
    x = m + np.sqrt(2 * m) * rng.standard_normal(400_000)
    q = norm.sf(np.sqrt(m / 2))
    assert density_error_prob(x) == pytest.approx(q, abs=4 * np.sqrt(q / 400_000) + 1e-6)
    assert smooth_error_prob(x) == pytest.approx(q, rel=0.05)


def test_de_subcode_limits(rng):
    lam, rho = DegreePoly.regular(3), DegreePoly.regular(6)
    sat = de_subcode(lam, rho, delta(CLIP, 1000), rng)
    assert sat.converged and sat.iterations == 0
    dead = de_subcode(lam, rho, delta(0.0, 1000), rng, max_iter=20, patience=5)
    assert not dead.converged
    np.testing.assert_allclose(dead.trace, 0.5)


def test_de_subcode_trace_decreases(rng):
    mu = channel_population(10 ** (-0.1), 20_000, rng)
    res = de_subcode(DegreePoly.regular(3), DegreePoly.regular(6), mu, rng)
    assert res.converged
    t = res.trace
    assert (np.diff(t) <= 3 * np.sqrt(t[:-1] / 20_000) + 1e-9).all()


def test_regular_threshold_matches_literature():
    # (3,6) on the binary-input AWGN channel: sigma* = 0.8809, i.e. Es/N0 = -1.91 dB
    thr = de_threshold(DegreePoly.regular(3), DegreePoly.regular(6), population=20_000, tol_db=0.02)
    assert thr == pytest.approx(-10 * np.log10(2 * 0.8809 ** 2), abs=0.1)


def test_threshold_orderings():
    t39 = de_threshold(DegreePoly.regular(3), DegreePoly.regular(9), population=10_000)
    t36 = de_threshold(DegreePoly.regular(3), DegreePoly.regular(6), population=10_000)
    assert t39 > t36
    assert t39 > 10 * np.log10(bpsk_mi_inverse(2 / 3))
    s1, s2 = get_preset("scenario1"), get_preset("scenario2")
    th1 = de_threshold(s1.lam1, s1.rho1, population=10_000)
    th2 = de_threshold(s2.lam1, s2.rho1, population=10_000)
    assert th2 > th1 + 3.0


def test_threshold_without_bracket():
    with pytest.raises(NoBracket):
        de_threshold(DegreePoly.regular(3), DegreePoly.regular(6), population=2000, lo_db=-20, hi_db=-8)
    with pytest.raises(ValueError):
        de_threshold(DegreePoly.regular(3), DegreePoly.regular(6), tol_db=0)


@pytest.fixture(scope="module")
def regular_polys():
    return FullPolys.from_ensemble(get_preset("regular3936"))


def test_full_step_saturates(rng, regular_polys):
    s = DeState.initial(delta(CLIP, 2000), delta(CLIP, 2000))
    s = de_full_step(s, regular_polys, rng)
    assert all((v > 0).all() for v in s.msgs.values())
    assert density_error_prob(s.app1) == 0 and density_error_prob(s.app2) == 0


def test_full_step_symmetric_channels(rng, regular_polys):
    mu = channel_population(0.6, 20_000, rng)
    s = DeState.initial(mu, mu.copy())
    for _ in range(3):
        s = de_full_step(s, regular_polys, rng)
    for m in "afgklq":
        assert same_distribution(s.msgs[m + "1"], s.msgs[m + "2"])


def test_erased_frame_recovered_through_root_checks(rng, regular_polys):
    res = de_full(regular_polys, 10 ** 0.5, 0.0, rng, population=10_000)
    assert res.converged
    both_dead = de_full(regular_polys, 0.0, 0.0, rng, population=2_000, max_iter=30, patience=5)
    assert not both_dead.converged


def test_erased_frame_fails_without_enough_snr(rng, regular_polys):
    res = de_full(regular_polys, 10 ** -0.5, 0.0, rng, population=10_000, max_iter=200)
    assert not res.converged


def test_boundary_lookup():
    b = DeBoundary(s_diag=1.0, u=np.array([0.0, 0.25, 0.5, 1.0]), v=np.array([4.0, 2.5, 1.6, 1.0]))
    assert b.success(1.2, 1.1) and not b.success(0.9, 0.95)
    assert b.success(0.0, 4.0) and not b.success(0.0, 3.9)
    assert b.success(2.5, 0.25) == b.success(0.25, 2.5)
    assert (np.diff(b.required(np.linspace(0, 1, 50))) <= 1e-12).all()
    with pytest.raises(ValueError):
        DeBoundary(1.0, np.array([0.1, 1.0]), np.array([2.0, 1.0]))


def test_de_wer_direct_extremes():
    ens = get_preset("regular3936")
    rows = de_wer(ens, lambda s: Links.scenario("scenario1", s), [-20.0, 40.0], n_fading=12, seed=1,
                  subcode_threshold_db=0.0, population=2000, method="direct", max_iter=60)
    assert rows[0]["wer"] == 1.0 and rows[1]["wer"] == 0.0
    assert set(rows[0]) == {"snr_db", "wer", "ci_low", "ci_high", "n_fading", "population", "iterations_mean"}
