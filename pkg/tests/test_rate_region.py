"""Tests for the SDR data, feasibility program, and Pareto machinery."""

import math

import numpy as np
import pytest

from pimac import convex_core as cc
from pimac import model
from pimac import rate_region as rr

H1 = np.array(
    [
        [2.03 * np.exp(-0.68j), 2.10 * np.exp(2.64j), 3.20 * np.exp(1.48j)],
        [4.70 * np.exp(1.97j), 4.50 * np.exp(-0.66j), 2.85 * np.exp(2.41j)],
    ]
)
H2 = np.array(
    [
        [3.2 * np.exp(-0.72j), 2.3 * np.exp(2.52j), 1.9 * np.exp(1.35j)],
        [2.8 * np.exp(1.68j), 2.5 * np.exp(-0.76j), 3.4 * np.exp(2.23j)],
    ]
)
LN2 = math.log(2.0)


@pytest.fixture(scope="module")
def ch1():
    return model.ChannelInstance(H1, 1.0, np.ones(3))


@pytest.fixture(scope="module")
def ch2():
    return model.ChannelInstance(H2, 1.0, np.ones(3))


def profile(*alpha):
    return model.RateProfile(np.array(alpha, dtype=float))


# ---------------------------------------------------------------------------
# appendix data
# ---------------------------------------------------------------------------

def test_sdr_data_squared_moduli(ch1):
    data = rr.build_sdr_data(ch1)
    # |2.03|^2 = 4.1209, |3.2|^2 = 10.24 by hand
    assert np.allclose(data.a[0], [4.1209, 0.0, 10.24], atol=1e-12)
    assert np.allclose(data.a[2], [4.7 ** 2, 4.5 ** 2, 2.85 ** 2], atol=1e-12)


def test_sdr_data_b_row_structure(ch1):
    data = rr.build_sdr_data(ch1)
    assert np.array_equal(data.b[0], data.b[1])
    assert np.array_equal(data.b[0], data.b[3])
    assert data.b[0][0] == 0.0 and data.b[0][1] == 0.0 and data.b[0][2] > 0.0
    assert data.b[2][2] == 0.0


def test_sdr_data_unit_channel():
    ch = model.ChannelInstance(np.ones((2, 3)), 1.0, np.ones(3))
    data = rr.build_sdr_data(ch)
    assert set(np.unique(np.abs(data.atilde))) <= {0.0, 1.0}
    for q in range(4):
        v = np.r_[1.0, data.a[q]]
        assert np.allclose(data.w[q], np.outer(v, v), atol=1e-14)
        v = np.r_[1.0, data.b[q]]
        assert np.allclose(data.z[q], np.outer(v, v), atol=1e-14)


def test_sdr_data_hermitian_quadratic_form(ch1):
    # ct^H Atilde_q ct must equal |atilde_q^T ct|^2 for every complex ct
    data = rr.build_sdr_data(ch1)
    rng = np.random.default_rng(3)
    for q in range(4):
        for _ in range(20):
            ct = rng.normal(size=3) + 1j * rng.normal(size=3)
            quad = np.real(ct.conj() @ data.atilde_mat[q] @ ct)
            assert quad == pytest.approx(abs(data.atilde[q] @ ct) ** 2, rel=1e-10)


def test_sdr_data_requires_three_users():
    ch = model.ChannelInstance(np.ones((2, 4)), 1.0, np.ones(4))
    with pytest.raises(ValueError):
        rr.build_sdr_data(ch)


# ---------------------------------------------------------------------------
# feasibility program
# ---------------------------------------------------------------------------

def test_sdr_feasible_at_zero_rate(ch1):
    data = rr.build_sdr_data(ch1)
    for alpha in [(1, 0, 0), (0.25, 0.25, 0.5), (0, 0, 1)]:
        sol = rr.sdr_feasible(0.0, profile(*alpha), data)
        assert sol is not None
        assert sol.c_matrix[0, 0] == pytest.approx(1.0, abs=1e-6)


def test_sdr_feasible_huge_rate_infeasible(ch1):
    data = rr.build_sdr_data(ch1)
    assert rr.sdr_feasible(50.0, profile(0, 0, 1), data) is None
    assert rr.sdr_feasible(50.0, profile(0.25, 0.25, 0.5), data, proper_only=True) is None


def test_proper_feasibility_boundary_matches_closed_form(ch1):
    # single-user corner: the proper program is tight, so feasibility flips
    # exactly at ln(1 + |h23|^2) nats = 3.1894 bits
    data = rr.build_sdr_data(ch1)
    r_star = math.log1p(2.85 ** 2)
    assert rr.sdr_feasible(r_star - 1e-3, profile(0, 0, 1), data,
                           proper_only=True) is not None
    assert rr.sdr_feasible(r_star + 1e-3, profile(0, 0, 1), data,
                           proper_only=True) is None
    # the improper relaxation contains every rank-1 point below the boundary
    assert rr.sdr_feasible(r_star - 1e-3, profile(0, 0, 1), data) is not None


def test_sdr_oracle_monotone_ladder(ch1):
    data = rr.build_sdr_data(ch1)
    prof = profile(0.25, 0.25, 0.5)
    feas = [rr.sdr_feasible(r, prof, data) is not None
            for r in np.linspace(0.0, 4.0, 9)]
    # once infeasible, stays infeasible
    flips = [a and not b for a, b in zip(feas[1:], feas[:-1])]
    assert not any(flips)


def test_proper_lp_feasible_matches_sdr_proper(ch1):
    data = rr.build_sdr_data(ch1)
    prof = profile(0.3, 0.3, 0.4)
    for r in [0.2, 0.6, 1.0, 1.4, 2.2]:
        thresholds = {0: 0.3 * r, 1: 0.3 * r, 2: 0.4 * r, 3: 0.6 * r}
        lp = rr._proper_lp_feasible(data, thresholds) is not None
        sdr = rr.sdr_feasible(r, prof, data, proper_only=True) is not None
        # the relaxed proper program contains every exact-LP point
        assert sdr or not lp


# ---------------------------------------------------------------------------
# max_sum_rate
# ---------------------------------------------------------------------------

def test_single_user_endpoints(ch1, ch2):
    p1 = rr.max_sum_rate(profile(0, 0, 1), ch1)
    assert p1.rate_sum_bits == pytest.approx(3.1894, abs=5e-3)
    assert p1.rate_sum_bits == pytest.approx(math.log2(1 + 2.85 ** 2), abs=5e-3)
    assert np.allclose(p1.rates_bits[:2], 0.0, atol=1e-9)
    p2 = rr.max_sum_rate(profile(0, 0, 1), ch2)
    assert p2.rate_sum_bits == pytest.approx(3.6508, abs=5e-3)


def test_balanced_profile_vs_paper_row(ch1):
    # the plotted improper point at R1 = R2 = 0.8997: our refinement may
    # slightly dominate the plotted (approximate) tuple but never fall under
    pt = rr.max_sum_rate(profile(0.25, 0.25, 0.5), ch1)
    assert pt.rates_bits[0] == pytest.approx(0.899741, rel=0.02)
    assert pt.rates_bits[2] == pytest.approx(1.79948, rel=0.02)
    assert pt.rates_bits[2] >= 1.79948 - 1e-3
    assert pt.rates_bits[0] == pytest.approx(pt.rates_bits[1], abs=1e-9)


def test_reported_rates_are_achievable(ch1):
    pt = rr.max_sum_rate(profile(0.2, 0.3, 0.5), ch1)
    bounds = model.rate_bounds_improper(ch1, list(pt.covariances))
    assert bounds.L1 >= pt.rates_bits[0] - 1e-3
    assert bounds.L2 >= pt.rates_bits[1] - 1e-3
    assert bounds.L3 >= pt.rates_bits[2] - 1e-3
    assert bounds.L4 >= pt.rates_bits[0] + pt.rates_bits[1] - 1e-3


def test_relaxation_sandwich(ch1):
    for alpha in [(0, 0, 1), (0.25, 0.25, 0.5), (0.5, 0.5, 0)]:
        pt = rr.max_sum_rate(profile(*alpha), ch1)
        assert pt.rate_sum_bits <= pt.bound_bits + 1e-9


def test_mac_corner_proper_equals_improper(ch1):
    # with the P2P user silent, improper signaling cannot enlarge the region
    tol = 2 * cc.DEFAULT_CONFIG.tol_bis / LN2
    for alpha in [(1, 0, 0), (0.5, 0.5, 0)]:
        imp = rr.max_sum_rate(profile(*alpha), ch1)
        prop = rr.max_sum_rate(profile(*alpha), ch1, proper_only=True)
        assert imp.rate_sum_bits >= prop.rate_sum_bits - tol
        assert abs(imp.rate_sum_bits - prop.rate_sum_bits) <= tol


def test_mac_single_user_corner_closed_form(ch1):
    want = math.log2(1 + 4.1209)
    imp = rr.max_sum_rate(profile(1, 0, 0), ch1)
    prop = rr.max_sum_rate(profile(1, 0, 0), ch1, proper_only=True)
    assert imp.rate_sum_bits == pytest.approx(want, abs=2e-3)
    assert prop.rate_sum_bits == pytest.approx(want, abs=2e-3)


def test_improper_dominates_proper_on_grid(ch1):
    tol = 2 * cc.DEFAULT_CONFIG.tol_bis / LN2
    for alpha in [(0.25, 0.25, 0.5), (0.1, 0.1, 0.8), (0.4, 0.2, 0.4)]:
        imp = rr.max_sum_rate(profile(*alpha), ch1)
        prop = rr.max_sum_rate(profile(*alpha), ch1, proper_only=True)
        assert imp.rate_sum_bits >= prop.rate_sum_bits - tol


def test_max_sum_rate_deterministic(ch1):
    a = rr.max_sum_rate(profile(0.25, 0.25, 0.5), ch1)
    b = rr.max_sum_rate(profile(0.25, 0.25, 0.5), ch1)
    assert a.rate_sum_bits == b.rate_sum_bits
    assert all(x.variance == y.variance and x.pseudo_variance == y.pseudo_variance
               for x, y in zip(a.covariances, b.covariances))


# ---------------------------------------------------------------------------
# max_p2p_given_mac
# ---------------------------------------------------------------------------

def test_p2p_plateau_improper(ch1):
    pt = rr.max_p2p_given_mac(0.899741224877468, ch1)
    assert 1.62 <= pt.r3_bits <= 1.80


def test_p2p_plateau_proper(ch1):
    pt = rr.max_p2p_given_mac(0.899741224877468, ch1, proper_only=True)
    assert pt.r3_bits == pytest.approx(0.0654, rel=0.10)


def test_p2p_zero_demand_is_endpoint(ch1):
    pt = rr.max_p2p_given_mac(0.0, ch1)
    assert pt.r3_bits == pytest.approx(3.1894, abs=5e-3)


def test_p2p_demands_are_respected(ch1):
    r = 0.6
    pt = rr.max_p2p_given_mac(r, ch1)
    bounds = model.rate_bounds_improper(ch1, list(pt.covariances))
    assert bounds.L1 >= r - 1e-6
    assert bounds.L2 >= r - 1e-6
    assert bounds.L4 >= 2 * r - 1e-6


def test_p2p_infeasible_demand(ch1):
    with pytest.raises(cc.InfeasibleError):
        rr.max_p2p_given_mac(5.0, ch1, proper_only=True)


def test_p2p_proper_oracle_vs_grid(ch1):
    # exact-LP proper answer cross-checked against a dense variance grid
    r = 0.5
    pt = rr.max_p2p_given_mac(r, ch1, proper_only=True)
    grid = np.linspace(0.0, 1.0, 60)
    g2 = np.abs(H1) ** 2
    c1, c2, c3 = np.meshgrid(grid, grid, grid, indexing="ij")
    i1 = 1.0 + g2[0, 2] * c3
    l1 = np.log2(1 + g2[0, 0] * c1 / i1)
    l2 = np.log2(1 + g2[0, 1] * c2 / i1)
    l4 = np.log2(1 + (g2[0, 0] * c1 + g2[0, 1] * c2) / i1)
    l3 = np.log2(1 + g2[1, 2] * c3 / (1.0 + g2[1, 0] * c1 + g2[1, 1] * c2))
    ok = (l1 >= r) & (l2 >= r) & (l4 >= 2 * r)
    best = float(l3[ok].max())
    assert pt.r3_bits >= best - 1e-6          # grid cannot beat the LP answer
    assert pt.r3_bits == pytest.approx(best, abs=0.02)  # grid granularity


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def test_pareto_sweep_single_point(ch1):
    pts = rr.pareto_sweep(ch1, [profile(0, 0, 1)])
    assert len(pts) == 1
    assert pts[0].rate_sum_bits == pytest.approx(3.1894, abs=5e-3)
    assert pts[0].status == "ok"


def test_pareto_sweep_records_failures(ch1, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(rr, "max_sum_rate", boom)
    pts = rr.pareto_sweep(ch1, [profile(0, 0, 1), profile(1, 0, 0)])
    assert [p.status for p in pts] == ["failed", "failed"]


def test_simplex_grid():
    grid = rr.simplex_grid(5)
    assert len(grid) == 5
    assert grid[0].alpha[2] == 0.0
    assert grid[-1].alpha[2] == 1.0
    for p in grid:
        assert p.alpha.sum() == pytest.approx(1.0)
