import math

import numpy as np
import pytest
from scipy.integrate import quad

from maxmin_auctions.auctions import (
    AuctionSpec,
    bid_apa,
    bid_fpa,
    bid_simple_contest,
    bid_spa,
    bid_war,
    interim_expected_payment,
    interim_payments,
    interim_payoff,
    is_total_monotone,
    parse_auction,
    transfer,
    war_crossing,
    winning_conditional_payment,
)
from maxmin_auctions.measure import UNIFORM, PowerMarginal, build_band_reference, build_iid_reference

SQ = PowerMarginal(2.0)


def test_fpa_bids():
    assert bid_fpa(UNIFORM)(0.5) == pytest.approx(0.25)
    assert bid_fpa(SQ)(0.6) == pytest.approx(0.4)
    assert bid_fpa(UNIFORM)(0.0) == 0.0


def test_spa_bid_is_identity():
    b = bid_spa()
    assert [float(b(x)) for x in (0.0, 0.5, 1.0)] == [0.0, 0.5, 1.0]


def test_apa_bids():
    assert bid_apa(UNIFORM)(0.5) == pytest.approx(0.125)
    assert bid_apa(UNIFORM)(0.0) == 0.0
    assert bid_apa(SQ)(0.6) == pytest.approx(0.144)
    oracle = 0.6 * 0.36 - quad(lambda z: z**2, 0, 0.6)[0]
    assert bid_apa(SQ)(0.6) == pytest.approx(oracle, abs=1e-12)


@pytest.mark.parametrize("F", [UNIFORM, SQ, PowerMarginal(0.6)])
def test_apa_equals_win_probability_times_fpa(F):
    x = np.linspace(0.01, 0.99, 50)
    assert np.max(np.abs(bid_apa(F)(x) - F.cdf(x) * bid_fpa(F)(x))) < 1e-9


def test_war_bids():
    b = bid_war(UNIFORM)
    assert b(0.5) == pytest.approx(-0.5 - math.log(0.5), abs=1e-10)
    assert b(0.0) == 0.0
    assert math.isinf(b(1.0))


@pytest.mark.parametrize("alpha", [0.5, 1.5, 3.0])
def test_war_bid_matches_quadrature(alpha):
    F = PowerMarginal(alpha)
    b = bid_war(F)
    for x in (0.2, 0.7, 0.95):
        oracle = quad(lambda z: z * F.pdf(z) / (1 - F.cdf(z)), 0, x, limit=200)[0]
        assert b(x) == pytest.approx(oracle, rel=1e-8, abs=1e-12)


def test_bid_orderings():
    x = np.linspace(0.01, 0.99, 99)
    bI, bA, bW = bid_fpa(UNIFORM)(x), bid_apa(UNIFORM)(x), bid_war(UNIFORM)(x)
    assert np.all(bI > bA)
    assert np.all(bW > bA)
    for b in (bI, bA, bW):
        assert np.all(np.diff(b) > 0)


def test_war_bid_convex_under_hazard_condition():
    x = np.linspace(0.01, 0.98, 200)
    for F in (UNIFORM, SQ):
        assert np.all(np.diff(bid_war(F)(x), 2) > -1e-12)


def test_war_crosses_identity_once():
    t = war_crossing(UNIFORM)
    assert abs(t - 0.7968) < 1e-3
    b = bid_war(UNIFORM)
    x = np.linspace(0.01, 0.99, 500)
    assert np.all((b(x) - x)[x < t - 1e-9] < 0)
    assert np.all((b(x) - x)[x > t + 1e-9] > 0)


def test_contest_endpoints_and_value():
    x = np.linspace(0.0, 0.99, 40)
    assert np.allclose(bid_simple_contest(UNIFORM, 0.0)(x), bid_fpa(UNIFORM)(x))
    assert np.allclose(bid_simple_contest(UNIFORM, 1.0)(x), bid_apa(UNIFORM)(x))
    assert bid_simple_contest(UNIFORM, 0.5)(0.5) == pytest.approx(1 / 6)


def test_contest_interim_payment_matches_revenue_equivalence(uniform400):
    tf = transfer(AuctionSpec("contest", uniform400, 0.5))
    assert interim_expected_payment(tf, uniform400, 0.5, 0.5) == pytest.approx(0.125, abs=1e-9)


def test_transfer_table(uniform400):
    spa = transfer(AuctionSpec("spa", uniform400))
    apa = transfer(AuctionSpec("apa", uniform400))
    war = transfer(AuctionSpec("war", uniform400))
    fpa = transfer(AuctionSpec("fpa", uniform400))
    assert spa(0.7, 0.3) == pytest.approx(0.3)
    assert spa(0.3, 0.7) == 0.0
    assert apa(0.3, 0.7) == pytest.approx(0.045)
    assert war(0.3, 0.7) == pytest.approx(-0.3 - math.log(0.7), abs=1e-10)
    assert war(0.7, 0.3) == pytest.approx(-0.3 - math.log(0.7), abs=1e-10)
    # ties: half the payment in first and second price, own bid in the war
    assert fpa(0.4, 0.4) == pytest.approx(0.1)
    assert spa(0.4, 0.4) == pytest.approx(0.2)
    assert war(0.4, 0.4) == pytest.approx(float(war.bid(0.4)))


@pytest.mark.parametrize("tag", ["fpa", "spa", "apa", "war", "contest:0.3", "contest:1"])
def test_total_transfer_monotone(uniform400, tag):
    tf = transfer(parse_auction(tag, uniform400))
    assert is_total_monotone(tf, uniform400.grid)
    T = tf.cell_total(uniform400)
    assert np.all(np.diff(T, axis=0) >= -1e-12) and np.all(np.diff(T, axis=1) >= -1e-12)


def test_affiliated_total_transfer_monotone(band_half):
    tf = transfer(AuctionSpec("fpa-affiliated", band_half))
    assert is_total_monotone(tf, band_half.grid)


def test_contest_extremes_match_fpa_apa_transfers(uniform400):
    x = uniform400.grid.nodes[::37]
    c0 = transfer(AuctionSpec("contest", uniform400, 0.0))
    c1 = transfer(AuctionSpec("contest", uniform400, 1.0))
    fpa = transfer(AuctionSpec("fpa", uniform400))
    apa = transfer(AuctionSpec("apa", uniform400))
    X, Y = x[:, None], x[None, :]
    assert np.allclose(c0(X, Y), fpa(X, Y))
    assert np.allclose(c1(X, Y), apa(X, Y))


def test_parse_auction_errors(uniform400):
    with pytest.raises(ValueError):
        parse_auction("dutch", uniform400)
    with pytest.raises(ValueError):
        parse_auction("contest:1.5", uniform400)
    with pytest.raises(ValueError):
        parse_auction("contest", uniform400)


def test_bids_need_iid_marginal(band_half):
    with pytest.raises(ValueError, match="IID"):
        transfer(AuctionSpec("apa", band_half))


def test_interim_payments(uniform400):
    spa = transfer(AuctionSpec("spa", uniform400))
    fpa = transfer(AuctionSpec("fpa", uniform400))
    assert interim_expected_payment(spa, uniform400, 0.5, 0.5) == pytest.approx(0.125, abs=1e-12)
    assert interim_expected_payment(fpa, uniform400, 0.5, 0.5) == pytest.approx(0.125, abs=1e-12)
    for tf in (spa, fpa):
        assert interim_expected_payment(tf, uniform400, 0.0, 0.0) == 0.0


def test_revenue_equivalence_of_interim_payments(uniform400):
    tags = ["fpa", "spa", "apa", "war", "contest:0.25", "contest:0.75"]
    e = np.array([interim_payments(transfer(parse_auction(t, uniform400)), uniform400) for t in tags])
    assert np.max(np.ptp(e, axis=0)) < 2e-3
    assert np.max(np.abs(e[0] - uniform400.grid.nodes**2 / 2)) < 1e-9


def test_winning_conditional_payments(uniform400):
    spa = transfer(AuctionSpec("spa", uniform400))
    fpa = transfer(AuctionSpec("fpa", uniform400))
    assert winning_conditional_payment(spa, uniform400, 0.5, 0.5) == pytest.approx(0.25, abs=1e-12)
    for x in (0.1, 0.5, 0.9):
        assert winning_conditional_payment(fpa, uniform400, x, x) == pytest.approx(float(fpa.bid(x)))
    with pytest.raises(ValueError):
        winning_conditional_payment(spa, uniform400, 0.0, 0.5)


def test_affiliated_bid_at_zero_band_matches_fpa():
    ref = build_band_reference(0.0, 200)
    b = transfer(AuctionSpec("fpa-affiliated", ref)).bid
    x = ref.grid.nodes
    assert np.max(np.abs(b(x) - x / 2)) < 1e-4


@pytest.mark.parametrize("zeta", [0.2, 0.5, 0.8])
def test_affiliated_bid_below_value(zeta):
    ref = build_band_reference(zeta, 200)
    b = transfer(AuctionSpec("fpa-affiliated", ref)).bid
    x = ref.grid.nodes
    assert np.all(b(x) <= x)
    assert np.all(np.diff(b(x)) > 0)


@pytest.mark.parametrize("tag", ["fpa", "apa", "war", "contest:0.5"])
def test_iid_equilibria_are_best_responses(uniform200, tag):
    tf = transfer(parse_auction(tag, uniform200))
    for theta in (0.2, 0.5, 0.8):
        base = interim_payoff(tf, uniform200, theta, theta)
        for r in (theta - 0.05, theta + 0.05):
            assert interim_payoff(tf, uniform200, r, theta) < base


def test_affiliated_equilibrium_best_response(band_half):
    tf = transfer(AuctionSpec("fpa-affiliated", band_half))
    for theta in (0.15, 0.35, 0.5, 0.65, 0.85):
        base = interim_payoff(tf, band_half, theta, theta)
        for r in (theta - 0.05, theta + 0.05):
            assert interim_payoff(tf, band_half, r, theta) < base
