import numpy as np
import pytest

from maxmin_auctions.ambiguity import AmbiguitySet, worst_case_revenue
from maxmin_auctions.auctions import AuctionSpec, bid_apa, bid_war, parse_auction, transfer
from maxmin_auctions.comparison import (
    BEST_CASE_PAIRS,
    WORST_CASE_PAIRS,
    _implication_scan,
    _threshold_scan,
    check_nwscc,
    check_rrc,
    check_scc,
    check_wscc,
    crossing_threshold_war,
    difference_matrix,
    linkage_diagnostics,
    rank_auctions,
)
from maxmin_auctions.measure import UNIFORM, CallableMarginal, PowerMarginal, build_band_reference, build_iid_reference


@pytest.fixture(scope="module")
def ref():
    return build_iid_reference(UNIFORM, 400)


@pytest.fixture(scope="module")
def tfs(ref):
    return {k: transfer(AuctionSpec(k, ref)) for k in ("fpa", "spa", "apa", "war")}


def at(ref, theta):
    x = ref.grid.nodes
    j = int(np.argmin(np.abs(x - theta)))
    return j, x[j]


def test_first_vs_second_threshold(ref, tfs):
    rep = check_wscc(tfs["fpa"], tfs["spa"])
    assert rep.holds and rep.forms_agree
    j, x = at(ref, 0.5)
    assert abs(rep.thresholds[j] - x / 2) <= ref.grid.width
    assert not check_scc(tfs["fpa"], tfs["spa"]).holds


def test_first_vs_all_pay_threshold(ref, tfs):
    rep = check_wscc(tfs["fpa"], tfs["apa"])
    assert rep.holds
    x = ref.grid.nodes
    assert np.max(np.abs(rep.thresholds - x)) <= ref.grid.width * (1 + 1e-9)
    assert check_scc(tfs["fpa"], tfs["apa"]).holds


def test_all_pay_vs_war_threshold(ref, tfs):
    rep = check_wscc(tfs["apa"], tfs["war"])
    assert rep.holds
    j, x = at(ref, 0.5)
    target = crossing_threshold_war(bid_apa(UNIFORM), bid_war(UNIFORM), 0.5)
    assert target == pytest.approx(0.4205, abs=1e-3)
    assert abs(rep.thresholds[j] - target) <= ref.grid.width


def test_second_vs_all_pay_fails_with_witness(tfs):
    rep = check_wscc(tfs["spa"], tfs["apa"])
    assert not rep.holds
    j, theta, t1, t2 = rep.witness
    D = difference_matrix(tfs["spa"], tfs["apa"])
    x = tfs["spa"].bid.grid.nodes
    k1, k2 = np.searchsorted(x, t1), np.searchsorted(x, t2)
    assert D[j, k1] < -1e-9 and D[j, k2] > 1e-9 and t1 < t2


def test_identical_transfers(tfs):
    for X in tfs.values():
        assert check_wscc(X, X).holds and check_scc(X, X).holds and check_nwscc(X, X).holds
        assert np.all(np.isnan(check_wscc(X, X).thresholds))


def test_mirror_pairs(tfs):
    assert check_nwscc(tfs["spa"], tfs["fpa"]).holds
    assert check_nwscc(tfs["war"], tfs["apa"]).holds


@pytest.mark.parametrize("a,b", [(x, y) for x in ("fpa", "spa", "apa", "war") for y in ("fpa", "spa", "apa", "war")])
def test_nwscc_is_wscc_of_negated_difference(tfs, a, b):
    X, Y = tfs[a], tfs[b]
    nw = check_nwscc(X, Y)
    D = -difference_matrix(X, Y)
    ok, _, _ = _threshold_scan(D, X.bid.grid.nodes, 1e-9)
    assert nw.holds == ok == _implication_scan(D, 1e-9)
    s = check_scc(X, Y)
    if s.holds:
        assert check_wscc(X, Y).holds


@pytest.mark.parametrize("seed", range(10))
def test_threshold_invariant_on_random_differences(seed):
    rng = np.random.default_rng(seed)
    n = 30
    x = np.arange(n) / n
    D = np.sort(rng.normal(size=(8, n)), axis=1)[:, ::-1]
    D[rng.random(D.shape) < 0.2] = 0.0
    ok, th, _ = _threshold_scan(D, x, 1e-9)
    assert ok == _implication_scan(D, 1e-9)
    if ok:
        for row, t in zip(D, th):
            if np.isfinite(t):
                assert np.all(row[x < t] >= -1e-9) and np.all(row[x > t] <= 1e-9)


# ---------------------------------------------------------------- reference revenue


def test_rrc_equality_under_iid(ref, tfs):
    for a in tfs:
        for b in tfs:
            r = check_rrc(tfs[a], tfs[b], ref)
            assert r.holds and r.max_deficit <= 2e-3
    same = check_rrc(tfs["fpa"], tfs["fpa"], ref)
    assert same.max_deficit == 0.0 and np.array_equal(same.e_x, same.e_y)


def test_rrc_reversed_under_band(band_half):
    I = transfer(AuctionSpec("fpa-affiliated", band_half))
    II = transfer(AuctionSpec("spa", band_half))
    forward = check_rrc(I, II, band_half)
    assert not forward.holds and forward.max_deficit > 0.05
    assert np.all(forward.e_x <= forward.e_y + 1e-12)
    assert check_rrc(II, I, band_half).holds


# ---------------------------------------------------------------- linkage


def test_linkage_iid_equal_derivatives(uniform200):
    rep = linkage_diagnostics(AuctionSpec("apa", uniform200), AuctionSpec("war", uniform200), uniform200)
    assert rep.lc1 is True and rep.lc2 is None
    dx, dy = rep.d_e
    assert np.nanmax(np.abs(dx)) < 1e-12 and np.nanmax(np.abs(dy)) < 1e-12
    rep2 = linkage_diagnostics(AuctionSpec("fpa", uniform200), AuctionSpec("spa", uniform200), uniform200)
    assert rep2.lc1 and rep2.lc2


def test_linkage_band_first_second(band_half):
    rep = linkage_diagnostics(AuctionSpec("fpa-affiliated", band_half), AuctionSpec("spa", band_half), band_half)
    assert rep.lc1 and rep.lc2


def test_linkage_inapplicable_without_equilibrium(band_half):
    rep = linkage_diagnostics(AuctionSpec("apa", band_half), AuctionSpec("war", band_half), band_half)
    assert rep.lc1 is None and rep.lc2 is None
    assert "unavailable" in rep.reason


# ---------------------------------------------------------------- ranking


def test_rank_uniform_kl(uniform200):
    specs = [AuctionSpec(k, uniform200) for k in ("fpa", "spa", "apa", "war")]
    table = rank_auctions(specs, AmbiguitySet("kl", 0.2, "joint", uniform200))
    assert [(p.x, p.y) for p in table.pairs] == list(WORST_CASE_PAIRS)
    for p in table.pairs:
        assert p.certified and p.ranking_holds and p.hazard in (None, True)
    assert table.order[0] == "fpa" and table.order[-1] == "war"


def test_rank_reference_is_flat(uniform200):
    specs = [AuctionSpec(k, uniform200) for k in ("fpa", "spa", "apa", "war")]
    table = rank_auctions(specs, AmbiguitySet("kl", 0.0, "joint", uniform200))
    vals = np.array(list(table.values.values()))
    assert np.ptp(vals) < 2e-3


def test_rank_best_case_pairs(uniform200):
    specs = [AuctionSpec(k, uniform200) for k in ("fpa", "spa", "apa", "war")]
    table = rank_auctions(specs, AmbiguitySet("kl", 0.2, "joint", uniform200), mode="best")
    assert [(p.x, p.y) for p in table.pairs] == list(BEST_CASE_PAIRS)
    assert all(p.certified and p.ranking_holds for p in table.pairs)
    with pytest.raises(ValueError):
        rank_auctions(specs, AmbiguitySet("kl", 0.2, "joint", uniform200), mode="median")


def test_hazard_failure_uncertifies_second_vs_war():
    # a CDF with a hazard dip: theta * lambda(theta) is not monotone
    def cdf(z):
        z = np.asarray(z, dtype=float)
        return z + 0.08 * np.sin(2 * np.pi * z) ** 2 * np.sin(6 * np.pi * z) / 3

    F = CallableMarginal(cdf, "dip")
    ref = build_iid_reference(F, 120)
    specs = [AuctionSpec(k, ref) for k in ("spa", "war")]
    table = rank_auctions(specs, AmbiguitySet("kl", 0.2, "joint", ref))
    cert = table.pair("spa", "war")
    assert cert.hazard is False and not cert.certified
    with pytest.raises(KeyError):
        table.pair("war", "spa")


@pytest.mark.parametrize("fam,kw", [("kl", {}), ("phi", {"phi": "chi2"}), ("blr", {"alpha": 1, "beta": 1}),
                                    ("contam", {})])
@pytest.mark.parametrize("eta", [0.05, 0.3])
def test_certificates_are_sound(uniform200, fam, kw, eta):
    specs = [AuctionSpec(k, uniform200) for k in ("fpa", "spa", "apa", "war")]
    table = rank_auctions(specs, AmbiguitySet(fam, eta, "joint", uniform200, **kw))
    for p in table.pairs:
        if p.certified:
            assert table.values[p.x] >= table.values[p.y] - 1e-6


def test_contest_worst_case_decreasing(uniform200):
    aset = AmbiguitySet("kl", 0.2, "joint", uniform200)
    vals = [worst_case_revenue(aset, transfer(parse_auction(f"contest:{k}", uniform200))).value
            for k in (0.0, 0.25, 0.5, 0.75, 1.0)]
    assert np.all(np.diff(vals) <= 1e-12)


def test_power_marginal_certificates():
    ref = build_iid_reference(PowerMarginal(2.0), 200)
    specs = [AuctionSpec(k, ref) for k in ("fpa", "spa", "apa", "war")]
    table = rank_auctions(specs, AmbiguitySet("kl", 0.2, "joint", ref))
    assert all(p.certified and p.ranking_holds for p in table.pairs)
