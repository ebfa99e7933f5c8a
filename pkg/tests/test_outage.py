import numpy as np
import pytest

from coopldpc.channel import ChannelRealization, Links, LinkParams
from coopldpc.outage import (
    OutageScenario, bpsk_mi, bpsk_mi_cached, bpsk_mi_inverse, case_mutual_info, outage_events,
    outage_indicator, outage_probability,
)

INF = 1e6  # gain large enough to saturate the mutual information


def mc_mi(snr, n, rng):
    llr = 4 * snr + np.sqrt(8 * snr) * rng.standard_normal(n)
    return 1 - np.mean(np.logaddexp(0, -llr)) / np.log(2)


def test_mi_endpoints():
    assert bpsk_mi(0.0) == pytest.approx(0.0, abs=1e-12)
    assert bpsk_mi(1e4) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        bpsk_mi(-1.0)


def test_mi_frozen_value():
    # 1e7-sample Monte Carlo of the same expectation gave 0.72165
    assert bpsk_mi(1.0) == pytest.approx(0.7214516, abs=1e-6)


def test_mi_against_monte_carlo(rng):
    for snr in (0.1, 0.5, 2.0):
        assert bpsk_mi(snr) == pytest.approx(mc_mi(snr, 2_000_000, rng), abs=2e-3)


def test_mi_low_snr_slope():
    # I ~ snr / ln 2 for small snr
    assert bpsk_mi(1e-4) == pytest.approx(1e-4 / np.log(2), rel=1e-3)


def test_mi_monotone_and_bounded():
    grid = np.logspace(-4, 2, 1000)
    mi = bpsk_mi(grid)
    assert (np.diff(mi) >= 0).all() and mi.min() >= 0 and mi.max() <= 1


def test_cached_table_and_inverse():
    snr = np.logspace(-5, 5, 500)
    np.testing.assert_allclose(bpsk_mi_cached(snr), bpsk_mi(snr), atol=1e-9)
    targets = np.linspace(0.01, 0.99, 50)
    np.testing.assert_allclose(bpsk_mi(bpsk_mi_inverse(targets)), targets, atol=1e-6)
    assert bpsk_mi_inverse(0.0) == 0.0 and bpsk_mi_inverse(1.0) == np.inf


def scenario(R=1 / 3, beta=0.5, snr_db=10.0, name="scenario1", **kw):
    return OutageScenario(R, beta, Links.scenario(name, snr_db), **kw)


@pytest.mark.parametrize("a1d, a2d, expected", [(0.0, INF, 0.5), (INF, INF, 1.0), (0.0, 0.0, 0.0), (INF, 0.0, 0.5)])
def test_erasure_limit_case1(a1d, a2d, expected):
    mi = case_mutual_info(1, np.array([INF, INF, a1d, a2d]), scenario())
    assert mi == pytest.approx(expected, abs=1e-9)


def test_case3_with_dead_partner_equals_case2(rng):
    gains = rng.rayleigh(np.sqrt(0.5), (1000, 4))
    gains[:, 3] = 0
    sc = scenario()
    np.testing.assert_allclose(case_mutual_info(3, gains, sc), case_mutual_info(2, gains, sc), atol=1e-12)


def test_case3_dominates_case2(rng):
    gains = rng.rayleigh(np.sqrt(0.5), (5000, 4))
    sc = scenario(snr_db=3.0)
    assert (case_mutual_info(3, gains, sc) >= case_mutual_info(2, gains, sc) - 1e-12).all()


def test_combined_observation_matches_direct_monte_carlo(rng):
    # frame-2 observation y' = a1 y1 + a2 y2 of the same bit, y_i = a_i x + n_i
    a1, a2, g1, g2 = 0.8, 1.3, 1.0, 1.0
    n = 1_000_000
    s1, s2 = 1 / (2 * g1), 1 / (2 * g2)
    y = a1 * (a1 + np.sqrt(s1) * rng.standard_normal(n)) + a2 * (a2 + np.sqrt(s2) * rng.standard_normal(n))
    var = a1 ** 2 * s1 + a2 ** 2 * s2
    llr = 2 * (a1 ** 2 + a2 ** 2) * y / var
    direct = 1 - np.mean(np.logaddexp(0, -llr)) / np.log(2)
    sc = OutageScenario(0.3, 0.5, Links(LinkParams(0), LinkParams(0), LinkParams(0), LinkParams(0)))
    formula = case_mutual_info(3, np.array([1, 1, a1, a2]), sc, mi=bpsk_mi)
    assert (formula - 0.5 * bpsk_mi(a1 ** 2)) / 0.5 == pytest.approx(direct, abs=3e-3)


def test_equal_gain_never_beats_mrc(rng):
    gains = rng.rayleigh(np.sqrt(0.5), (5000, 4))
    mrc = case_mutual_info(3, gains, scenario(name="scenario2"))
    eg = case_mutual_info(3, gains, scenario(name="scenario2", combining="equal-gain"))
    assert (eg <= mrc + 1e-12).all()
    same = case_mutual_info(3, gains, scenario(combining="equal-gain"))
    np.testing.assert_allclose(same, case_mutual_info(3, gains, scenario()), atol=1e-12)


def test_outage_indicator_limits():
    sc = scenario()
    assert not outage_indicator(ChannelRealization(INF, INF, INF, INF), sc)
    assert outage_indicator(ChannelRealization(0, 0, 0, 0), sc)
    # erasure-limit pattern: both interuser links up, own uplink erased, partner uplink perfect
    assert not outage_indicator(ChannelRealization(INF, INF, 0, INF), sc)


def test_erasure_patterns_need_one_good_uplink():
    # with R = 1/3 and beta = 1/2 every pattern with an unerased uplink carrying the user's data survives
    sc = scenario()
    for bits in np.ndindex(2, 2, 2, 2):
        g = np.array(bits, dtype=float) * INF
        out = outage_events(g[None, :], sc)[0]
        case = 1 + (not bits[0] and not bits[1]) + 2 * (bits[0] and not bits[1]) + 3 * (not bits[0] and bits[1])
        carried = {1: bits[2] or bits[3], 2: bits[2], 3: bits[2] or bits[3], 4: bits[2]}[case]
        assert out == (not carried), bits


def test_scenario_validation():
    with pytest.raises(ValueError):
        scenario(R=1.2)
    with pytest.raises(ValueError):
        scenario(beta=0.0)
    with pytest.raises(ValueError):
        scenario(combining="selection")
    with pytest.raises(ValueError):
        outage_probability(scenario(combining="equal-gain"), 10, seed=0, method="conditional")


# exact values from numerical integration over the four gains
@pytest.mark.parametrize("name, R, beta, snr_db, exact", [
    ("scenario1", 1 / 3, 0.5, 20.0, 4.4418e-5),
    ("scenario1", 1 / 3, 0.5, 30.0, 4.4735e-7),
    ("scenario2", 0.45, 0.25, 20.0, 2.263e-3),
    ("scenario2", 0.45, 0.25, 30.0, 2.252e-4),
])
def test_conditional_estimator_matches_integration(name, R, beta, snr_db, exact):
    p, (lo, hi) = outage_probability(scenario(R, beta, snr_db, name), 2_000_000, seed=4, method="conditional")
    assert abs(p - exact) <= 1.5 * (hi - lo)  # about 3 standard errors
    assert hi - lo < 0.25 * exact


def test_direct_and_conditional_agree():
    sc = scenario(snr_db=10.0)
    d, (lo, hi) = outage_probability(sc, 400_000, seed=2)
    c, _ = outage_probability(sc, 400_000, seed=2, method="conditional")
    assert lo <= c <= hi
    assert d == pytest.approx(c, rel=0.1)


def test_outage_reproducible_and_chunk_invariant():
    sc = scenario(snr_db=5.0)
    a = outage_probability(sc, 100_000, seed=8, chunk=10_000)
    b = outage_probability(sc, 100_000, seed=8, chunk=10_000)
    assert a == b


def test_outage_decreases_with_each_link():
    base = dict(snr_db=8.0, interuser_db=5.0, partner_db=0.0)
    def p(**kw):
        args = base | kw
        links = Links.from_offsets(args["snr_db"], args["interuser_db"], args["partner_db"])
        return outage_probability(OutageScenario(1 / 3, 0.5, links), 200_000, seed=1, method="conditional")[0]
    ref = p()
    assert p(snr_db=10.0) < ref
    assert p(interuser_db=8.0) < ref
    assert p(partner_db=3.0) < ref
