import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from maxmin_auctions.measure import (
    UNIFORM,
    CallableMarginal,
    Density1D,
    Density2D,
    Grid1D,
    PowerMarginal,
    TabulatedMarginal,
    build_band_reference,
    build_iid_reference,
    divergence,
    hazard_condition_check,
    is_affiliated,
    quantile,
)


def test_grid_nodes_are_midpoints():
    g = Grid1D(4)
    assert np.allclose(g.nodes, [0.125, 0.375, 0.625, 0.875])
    assert np.all(np.diff(g.nodes) > 0)
    assert g.weight == 0.25
    assert g.cell_of(0.3) == 1
    assert g.cell_of(1.0) == 3


def test_density_validation():
    g = Grid1D(3)
    with pytest.raises(ValueError):
        Density1D(g, np.array([0.5, 0.6, -0.1]))
    with pytest.raises(ValueError):
        Density1D(g, np.array([0.5, 0.6, 0.1]))
    with pytest.raises(ValueError):
        Density2D(g, np.full((2, 2), 0.25))


def test_iid_uniform_masses():
    ref = build_iid_reference(lambda z: z, 4)
    assert np.allclose(ref.marginal_mass, 0.25)


def test_iid_square_masses():
    ref = build_iid_reference(lambda z: z**2, 2)
    assert np.allclose(ref.marginal_mass, [0.25, 0.75])


def test_iid_power_masses_match_quadrature():
    ref = build_iid_reference(PowerMarginal(1.5), 400)
    e = ref.grid.edges
    oracle = [quad(lambda z: 1.5 * z**0.5, a, b)[0] for a, b in zip(e[:-1], e[1:])]
    assert np.max(np.abs(ref.marginal_mass - oracle)) < 1e-6


def test_iid_conditionals_equal_marginal():
    ref = build_iid_reference(PowerMarginal(0.7), 30)
    assert np.allclose(ref.conditional, ref.marginal_mass[None, :], atol=1e-14)
    assert np.allclose(ref.joint, np.outer(ref.marginal_mass, ref.marginal_mass))
    assert np.allclose(ref.density, ref.joint * 900)


def test_non_monotone_cdf_rejected():
    wiggly = lambda z: z + 0.3 * np.sin(4 * np.pi * z) / (4 * np.pi) * 4  # noqa: E731
    with pytest.raises(ValueError, match="increasing"):
        build_iid_reference(wiggly, 20)


def test_tabulated_marginal_rejects_bad_tables():
    with pytest.raises(ValueError):
        TabulatedMarginal([0, 0.5, 1], [0, 0.6, 0.9])
    with pytest.raises(ValueError):
        TabulatedMarginal([0, 0.5, 1], [0, 0.6, 0.5, 1][:3])
    m = TabulatedMarginal([0, 0.5, 1], [0, 0.25, 1])
    assert m.cdf(0.25) == pytest.approx(0.125)


def test_band_zero_is_uniform_product():
    ref = build_band_reference(0.0, 20)
    assert np.allclose(ref.joint, 1.0 / 400)
    assert ref.is_iid


def test_band_support():
    ref = build_band_reference(0.5, 4)
    x = ref.grid.nodes
    far = np.abs(x[:, None] - x[None, :]) > 0.5
    assert np.all(ref.joint[far] == 0)
    assert np.all(ref.joint[~far] > 0)
    assert np.allclose(ref.joint, ref.joint.T)
    assert not ref.is_iid


def test_band_rejects_degenerate():
    with pytest.raises(ValueError):
        build_band_reference(1.0, 10)


@pytest.mark.parametrize("zeta", [0.0, 0.3, 0.5, 0.8])
def test_band_is_affiliated(zeta):
    assert is_affiliated(build_band_reference(zeta, 8))


def test_affiliation_detects_negative_dependence():
    from maxmin_auctions.measure import ReferenceBelief

    m = np.array([[0.1, 0.4], [0.4, 0.1]])
    assert not is_affiliated(ReferenceBelief(Grid1D(2), m))


def test_divergence_examples():
    P = np.array([0.5, 0.5])
    assert divergence(P, P) == 0.0
    assert divergence(np.array([1.0, 0.0]), P) == pytest.approx(math.log(2))
    assert divergence(np.array([0.5, 0.5]), np.array([1.0, 0.0])) == math.inf


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8), st.sampled_from(["kl", "chi2", "hellinger", "burg"]))
def test_divergence_nonnegative(w, phi):
    q = np.array(w) / np.sum(w)
    p = np.full(q.size, 1.0 / q.size)
    d = divergence(q, p, phi)
    assert d >= -1e-15
    if np.allclose(q, p):
        assert d < 1e-12
    else:
        assert d > 0


def test_hazard_condition_power_family():
    assert hazard_condition_check(UNIFORM).holds
    assert hazard_condition_check(PowerMarginal(0.5)).holds
    assert hazard_condition_check(PowerMarginal(2.0)).holds


def test_hazard_condition_detects_dip():
    # density with a sharp trough makes theta f / (1 - F) fall on one stretch
    def cdf(z):
        z = np.asarray(z, dtype=float)
        return z + 0.08 * np.sin(2 * np.pi * z) ** 2 * np.sin(6 * np.pi * z) / 3

    res = hazard_condition_check(CallableMarginal(cdf))
    assert not res.holds
    assert res.violation is not None


def test_quantile_examples():
    x = Grid1D(100).edges
    q = quantile(x, x)
    assert q(0.3) == pytest.approx(0.3, abs=1e-2)
    q2 = quantile(x, x**2)
    assert q2(0.25) == pytest.approx(0.5, abs=1e-2)
    with pytest.raises(ValueError):
        q(1.5)


def test_quantile_jumps_across_flat_piece():
    pts = np.array([0.0, 0.2, 0.4, 0.6, 1.0])
    H = np.array([0.0, 0.5, 0.5, 0.5, 1.0])
    q = quantile(pts, H, kind="step")
    # H <= 0.5 all the way up to the last atom
    assert q(0.5) == 1.0
    assert q(0.49) == 0.2


@given(st.floats(0.0, 1.0))
def test_quantile_galois(c):
    pts = np.linspace(0, 1, 41)
    H = pts**2
    q = quantile(pts, H, kind="step")
    z = q(c)
    assert np.interp(z, pts, H) >= c - 1e-12 or z == 1.0
