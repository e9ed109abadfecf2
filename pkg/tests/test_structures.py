from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy import optimize

from infotrade.environment import Environment, surplus
from infotrade.equilibrium import (
    SearchConfig,
    payoffs,
    verify_price_independent,
    verify_sequential,
    verify_wpbe,
)
from infotrade.errors import InfeasibleTarget
from infotrade.game import FULLY_INFORMED_BUYER, MORE_INFORMED_BUYER, UNINFORMED_SELLER
from infotrade.geometry import (
    lattice,
    region_all,
    s_lambda,
    seller_floor_fb,
    seller_floor_us,
    seller_guarantee,
)
from infotrade.structures import (
    buyer_revelation,
    construct_any,
    construct_discrete,
    construct_fb,
    construct_full_information,
    construct_negative,
    construct_us_unique,
    garble_to_target,
    no_information,
    randomize_public,
    tie_accept_floor,
    uniqueness_sweep,
)

from .conftest import environments, random_env

FINE_GRID = np.round(np.arange(0.0, 3.0001, 0.01), 10)


def assert_hits(env, structure, profile, target, tol=1e-9):
    got = payoffs(env, structure, profile)
    assert abs(got.pi_b - target[0]) <= tol and abs(got.pi_s - target[1]) <= tol, got


# ---------------------------------------------------------------------------
# no information


def test_any_interior_target_e1(e1):
    st_, prof = construct_any(e1, (0.25, 1.25))
    k = prof.price_index(1.25)
    assert prof.sigma[0, k] == pytest.approx(1.0)  # pi_b / (E[v] - p_l) = 0.25 / 0.25
    assert prof.alpha[k, 0] == 1.0
    assert verify_wpbe(e1, st_, prof).ok
    assert_hits(e1, st_, prof, (0.25, 1.25))


def test_any_top_corner_is_a_single_price(e1):
    st_, prof = construct_any(e1, (0.0, 1.5))
    assert np.count_nonzero(prof.sigma) == 1
    assert prof.grid[prof.sigma[0].argmax()] == 1.5
    assert_hits(e1, st_, prof, (0.0, 1.5))
    assert verify_wpbe(e1, st_, prof).ok


def test_any_full_trade_corner(e1):
    st_, prof = construct_any(e1, (0.5, 1.0))
    k = prof.price_index(1.0)
    assert prof.sigma[0, k] == pytest.approx(1.0)
    assert_hits(e1, st_, prof, (0.5, 1.0))


def test_any_rejects_outside_targets(e2):
    with pytest.raises(InfeasibleTarget) as info:
        construct_any(e2, (0.5, 0.5))
    # distance from (0.5, 0.5) to the hypotenuse pi_b + pi_s = 0.75
    assert info.value.distance == pytest.approx(0.25 / math.sqrt(2), abs=1e-12)
    with pytest.raises(InfeasibleTarget):
        construct_any(e2, (0.1, 0.1))


@settings(max_examples=40, suppress_health_check=[HealthCheck.too_slow])
@given(environments(), st.floats(0, 1), st.floats(0, 1))
def test_any_hits_random_targets(env, u, w):
    lo, s = seller_guarantee(env), surplus(env)
    pi_s = lo + u * (s - lo)
    pi_b = w * (s - pi_s)
    st_, prof = construct_any(env, (pi_b, pi_s))
    assert verify_wpbe(env, st_, prof).ok
    assert_hits(env, st_, prof, (pi_b, pi_s))


def test_any_lattice_sweep(e2):
    s = surplus(e2)
    for pt in lattice(region_all(e2), 21):
        st_, prof = construct_any(e2, pt)
        assert verify_wpbe(e2, st_, prof).ok
        assert_hits(e2, st_, prof, pt)
    assert len(lattice(region_all(e2), 21)) == 231 and s == 0.75


def test_full_information_extracts_surplus(e2):
    st_, prof = construct_full_information(e2)
    assert verify_wpbe(e2, st_, prof).ok
    assert_hits(e2, st_, prof, (0.0, 0.75))


# ---------------------------------------------------------------------------
# fully informed buyer


@pytest.mark.parametrize("beta, expected", [(1.0, (0.25, 0.5)), (0.0, (0.0, 0.5)), (0.25, (0.0625, 0.5))])
def test_fb_e2(e2, beta, expected):
    st_, prof = construct_fb(e2, beta)
    assert_hits(e2, st_, prof, expected)
    assert verify_wpbe(e2, st_, prof).ok
    assert verify_price_independent(st_, prof).ok
    assert {FULLY_INFORMED_BUYER, MORE_INFORMED_BUYER} <= st_.class_tags


def test_fb_e1(e1):
    st_, prof = construct_fb(e1, 1.0)
    assert_hits(e1, st_, prof, (0.5, 1.0))


@settings(max_examples=30, suppress_health_check=[HealthCheck.too_slow])
@given(environments())
def test_fb_seller_payoff_is_invariant_in_beta(env):
    floor, _ = seller_floor_fb(env)
    s = surplus(env)
    for beta in (0.0, 0.25, 0.5, 1.0):
        st_, prof = construct_fb(env, beta)
        got = payoffs(env, st_, prof)
        assert got.pi_s == pytest.approx(floor, abs=1e-9)
        assert got.pi_b == pytest.approx(beta * (s - floor), abs=1e-9)
        assert verify_wpbe(env, st_, prof).ok


def test_fb_rejects_bad_beta(e2, e3):
    with pytest.raises(ValueError):
        construct_fb(e2, 1.5)
    with pytest.raises(ValueError):
        construct_fb(e3, 0.5)


# ---------------------------------------------------------------------------
# public randomization


def test_public_mix_of_fb_extremes(e2):
    a = construct_fb(e2, 0.0)
    b = construct_fb(e2, 1.0)
    st_, prof = randomize_public([(0.5, *a), (0.5, *b)])
    assert_hits(e2, st_, prof, (0.125, 0.5), 1e-12)
    assert verify_wpbe(e2, st_, prof).ok


def test_public_mix_of_corners_a_and_b(e2):
    top = construct_full_information(e2)
    corner_b = construct_fb(e2, 0.0)
    st_, prof = randomize_public([(0.5, *top), (0.5, *corner_b)])
    assert_hits(e2, st_, prof, (0.0, 0.5 * (0.75 + 0.5)), 1e-12)
    assert verify_wpbe(e2, st_, prof).ok


def test_public_single_component_is_identity(e2):
    st_, prof = construct_fb(e2, 1.0)
    out = randomize_public([(1.0, st_, prof)])
    assert out.structure is st_ and out.profile is prof


def test_public_mix_validation(e1, e2):
    a = construct_fb(e2, 0.0)
    with pytest.raises(ValueError):
        randomize_public([(0.4, *a), (0.4, *a)])
    with pytest.raises(ValueError):
        randomize_public([(0.5, *a), (0.5, *construct_any(e2, (0.1, 0.5)))])
    with pytest.raises(ValueError):
        randomize_public([(0.5, *a), (0.5, *construct_fb(e1, 0.0))])
    with pytest.raises(ValueError):
        randomize_public([])


# ---------------------------------------------------------------------------
# negative surplus


@pytest.mark.parametrize("weight", [1.0, 2.0, 5.0, 10.0])
def test_negative_e3_reaches_frontier(e3, weight):
    st_, prof = construct_negative(e3, weight)
    got = payoffs(e3, st_, prof)
    assert got == pytest.approx((0.5, 0.5), abs=1e-12)
    assert weight * got.pi_b + got.pi_s == pytest.approx(s_lambda(e3, weight), abs=1e-9)
    assert verify_wpbe(e3, st_, prof).ok


def test_negative_all_inefficient_is_no_trade():
    env = Environment.from_arrays([1.0, 2.0], [0.5, 0.5], [3.0, 4.0])
    st_, prof = construct_negative(env, 2.0)
    assert payoffs(env, st_, prof) == (0.0, 0.0)
    assert verify_wpbe(env, st_, prof).ok


def test_negative_tie_weight():
    # v - c + w (v - 1) vanishes at v = 1 when c(1) = 1
    env = Environment.from_arrays([1.0, 2.0], [0.5, 0.5], [1.0, 0.0])
    half = payoffs(env, *construct_negative(env, 1.0, 0.5))
    none = payoffs(env, *construct_negative(env, 1.0, 0.0))
    assert none == pytest.approx((0.5, 0.5))
    assert half == pytest.approx((0.5, 0.5))
    with pytest.raises(ValueError):
        construct_negative(env, 1.0, 2.0)
    with pytest.raises(ValueError):
        construct_negative(env, 0.5)


def test_negative_refuses_loss_making_trade_branch():
    # the trade branch {2, 3} has mean cost 1.6 above v_low = 1
    env = Environment.from_arrays([1.0, 2.0, 3.0], [0.2, 0.4, 0.4], [5.0, 1.8, 1.4])
    with pytest.raises(InfeasibleTarget):
        construct_negative(env, 1.0)


# ---------------------------------------------------------------------------
# garbling


def test_garble_e1_partial_pool(e1):
    out = garble_to_target(e1, buyer_revelation(e1), (0.3, 1.2))
    d = out.diagnostics
    # pooled mean (1 + 2 f) / (1 + f) equals the posted price 1.2
    oracle = optimize.brentq(lambda f: (1 + 2 * f) / (1 + f) - 1.2, 0.0, 1.0)
    assert d.z_star == -math.inf
    assert d.p_star == pytest.approx(1.2, abs=1e-12)
    assert d.pool_fraction == pytest.approx(oracle, abs=1e-12)
    assert_hits(e1, out.structure, out.profile, (0.3, 1.2))
    rep = verify_wpbe(e1, out.structure, out.profile)
    assert rep.ok and verify_price_independent(out.structure, out.profile).ok
    assert UNINFORMED_SELLER in out.structure.class_tags


def test_garble_e1_full_pool(e1):
    out = garble_to_target(e1, buyer_revelation(e1), (0.0, 1.5))
    assert out.diagnostics.p_star == pytest.approx(1.5)
    assert out.diagnostics.pool_fraction == pytest.approx(1.0)
    assert_hits(e1, out.structure, out.profile, (0.0, 1.5))


def test_garble_e2_efficient_corner(e2):
    out = garble_to_target(e2, no_information(e2), (0.0, 0.75))
    assert out.diagnostics.p_star == pytest.approx(1.5)
    assert_hits(e2, out.structure, out.profile, (0.0, 0.75))
    assert verify_wpbe(e2, out.structure, out.profile).ok


def test_garble_premises(e2):
    with pytest.raises(InfeasibleTarget):
        garble_to_target(e2, buyer_revelation(e2), (0.1, 0.3))  # below the base payoff 0.5
    full = construct_full_information(e2).structure
    with pytest.raises(ValueError):
        garble_to_target(e2, full, (0.0, 0.75))


def test_tie_accept_floor(e2):
    assert tie_accept_floor(e2, buyer_revelation(e2)) == pytest.approx(0.5)
    assert tie_accept_floor(e2, no_information(e2)) == pytest.approx(0.75)


def test_garble_random_targets():
    rng = np.random.default_rng(8)
    for _ in range(25):
        env = random_env(rng, 2, 6)
        base = buyer_revelation(env)
        floor = tie_accept_floor(env, base)
        s = surplus(env)
        pi_s = floor + rng.uniform() * (s - floor)
        pi_b = rng.uniform() * (s - pi_s)
        out = garble_to_target(env, base, (pi_b, pi_s))
        assert_hits(env, out.structure, out.profile, (pi_b, pi_s))
        assert verify_wpbe(env, out.structure, out.profile).ok
        assert verify_price_independent(out.structure, out.profile).ok
        assert 0.0 <= out.diagnostics.pool_fraction <= 1.0
        assert {UNINFORMED_SELLER, MORE_INFORMED_BUYER} <= out.structure.class_tags


# ---------------------------------------------------------------------------
# unique implementation


def test_us_unique_e2():
    env = Environment.from_arrays([1, 2], [0.5, 0.5], [0.5, 1.0])
    out = construct_us_unique(env, (0.1, 0.4))
    assert out.certified
    assert out.exact_floor == pytest.approx(0.25)
    assert_hits(env, out.structure, out.profile, (0.1, 0.4))
    assert out.max_other_profit <= out.floor + 1e-9
    assert out.floor <= 0.25 + 1e-3


def test_us_unique_fine_sweep_separates_the_band():
    env = Environment.from_arrays([1, 2], [0.5, 0.5], [0.5, 1.0])
    out = construct_us_unique(env, (0.1, 0.4))
    d = out.diagnostics
    sweep = np.linspace(0.5, 2.5, 401)
    # outside (z_star, p_star) no price beats the witness floor
    assert uniqueness_sweep(env, out.structure, sweep, d.p_star, (d.z_star, d.p_star)) <= out.floor + 1e-9
    # inside it every remaining buyer accepts: profit climbs towards 0.4 but stays below it
    inside = sweep[(sweep > d.z_star) & (sweep < d.p_star)]
    profits = [uniqueness_sweep(env, out.structure, [p], d.p_star) for p in inside]
    assert np.all(np.diff(profits) > 0)
    assert max(profits) < 0.4 and max(profits) > out.floor
    assert uniqueness_sweep(env, out.structure, sweep, d.p_star) < 0.4


def test_us_unique_e1(e1):
    out = construct_us_unique(e1, (0.25, 1.25))
    assert out.certified and out.exact_floor == pytest.approx(1.0)
    assert_hits(e1, out.structure, out.profile, (0.25, 1.25))


def test_us_unique_requires_strictly_higher_seller_payoff(e2):
    with pytest.raises(InfeasibleTarget):
        construct_us_unique(e2, (0.5, 0.25))


def test_us_unique_with_coarse_search_base(e2):
    out = construct_us_unique(e2, (0.1, 0.6), config=SearchConfig(segments=3, restarts=0))
    assert out.floor == pytest.approx(0.375)
    assert out.certified


def test_us_floor_witness_feeds_unique_construction():
    rng = np.random.default_rng(12)
    done = 0
    for _ in range(6):
        env = random_env(rng, 2, 5, affine=True)
        exact = seller_floor_us(env).value
        target_s = exact + 0.5 * (surplus(env) - exact)
        try:
            out = construct_us_unique(env, (0.0, target_s), config=SearchConfig(segments=48, restarts=1))
        except InfeasibleTarget:
            continue
        assert_hits(env, out.structure, out.profile, (0.0, target_s))
        assert out.floor >= exact - 1e-9
        done += 1
    assert done >= 4


# ---------------------------------------------------------------------------
# finite grids and trembles


def test_discrete_e1(e1):
    out = construct_discrete(e1, (0.25, 1.25), 0.05, FINE_GRID)
    got = payoffs(e1, out.structure, out.profile)
    assert math.dist(got, (0.25, 1.25)) < 0.05
    rep = verify_sequential(e1, out.structure, out.profile, out.trembles)
    assert rep.ok
    assert set(np.round(out.profile.grid[out.profile.sigma.sum(axis=0) > 0], 10)) <= set(FINE_GRID)
    assert out.structure.seller_signals == ("l", "h")
    structure, profile, trembles = out
    assert structure is out.structure and trembles is out.trembles


def test_discrete_e2_low_cost_case(e2):
    out = construct_discrete(e2, (0.2, 0.35), 0.05, FINE_GRID)
    assert out.case == 2
    got = payoffs(e2, out.structure, out.profile)
    assert math.dist(got, (0.2, 0.35)) < 0.05
    assert verify_sequential(e2, out.structure, out.profile, out.trembles).ok


def test_discrete_rejects_outside_target(e1):
    with pytest.raises(InfeasibleTarget):
        construct_discrete(e1, (0.5, 1.5), 0.05, FINE_GRID)


def test_discrete_rejects_too_coarse_grid(e1):
    with pytest.raises(InfeasibleTarget):
        construct_discrete(e1, (0.25, 1.25), 0.001, np.arange(0.0, 3.01, 0.5))
