from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from scipy import integrate, optimize

from infotrade.environment import Belief, Environment
from infotrade.errors import NonAffineCosts
from infotrade.icd import (
    AffineIcd,
    UnboundedSupport,
    affine_icd,
    affine_p_star,
    binary_p,
    greedy_icd,
    icd_decompose,
    is_icd,
    max_profit,
    mpc_check,
    seller_opt_prices,
    seller_profits,
    verify_linear_identities,
)

from .conftest import environments, random_env


def brute_profit(env: Environment, weights, price: float) -> float:
    total = 0.0
    for v, c, w in zip(env.values, env.costs, weights):
        if v >= price:
            total += (price - c) * w
    return total


# ---------------------------------------------------------------------------
# profits and ICD checks


@given(environments())
def test_seller_profits_match_brute_force(env):
    prices = np.concatenate([env.values, [env.v_low - 1, env.v_high + 1]])
    got = seller_profits(env, env.probs, prices)
    want = [brute_profit(env, env.probs, p) for p in prices]
    assert got == pytest.approx(want, abs=1e-12)


def test_opt_prices_e2(e2):
    assert seller_opt_prices(e2, e2.probs) == (2.0,)
    assert seller_opt_prices(e2, [2 / 3, 1 / 3]) == (1.0, 2.0)
    assert seller_opt_prices(e2, Belief.point_mass(e2, 0)) == (1.0,)
    assert max_profit(e2, e2.probs) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "fixture, weights, ok, constant",
    [
        ("e1", [0.5, 0.5], True, 1.0),  # p=1 -> 1, p=2 -> 1
        ("e2", [2 / 3, 1 / 3], True, 1 / 3),  # p=1 -> .5*(2/3), p=2 -> 1/3
    ],
)
def test_is_icd_examples(request, fixture, weights, ok, constant):
    env = request.getfixturevalue(fixture)
    got_ok, got_c = is_icd(env, weights)
    assert got_ok is ok
    assert got_c == pytest.approx(constant, abs=1e-12)


def test_is_icd_rejects_prior_of_e2(e2):
    assert is_icd(e2, [0.5, 0.5])[0] is False


# ---------------------------------------------------------------------------
# greedy construction and decomposition


def test_greedy_examples(e1, e2):
    # top weight 1, next weight 1 * (2 - 1) / (1 - 0.5) = 2, normalized
    assert greedy_icd(e2, 1).weights.tolist() == pytest.approx([2 / 3, 1 / 3])
    assert greedy_icd(e1, 1).weights.tolist() == pytest.approx([0.5, 0.5])
    assert greedy_icd(e2, 0).weights.tolist() == [1.0, 0.0]


def test_greedy_truncates_at_zero_gap_point():
    env = Environment.from_arrays([1, 2, 3, 4], [0.25] * 4, [0.5, 2.0, 2.5, 1.0])
    nu = greedy_icd(env, 3)
    assert nu.support.tolist() == [0, 1]
    ok, constant = is_icd(env, nu)
    assert ok and constant == pytest.approx(0.0, abs=1e-12)


def test_greedy_index_out_of_range(e2):
    with pytest.raises(IndexError):
        greedy_icd(e2, 2)


def test_decomposition_e2(e2):
    parts = icd_decompose(e2).components
    assert len(parts) == 2
    # q = min(.5 / (2/3), .5 / (1/3)) = .75 ; the residual (0, .25) is a point mass on 2
    assert parts[0].weight == pytest.approx(0.75, abs=1e-12)
    assert parts[0].belief.weights.tolist() == pytest.approx([2 / 3, 1 / 3], abs=1e-12)
    assert parts[1].weight == pytest.approx(0.25, abs=1e-12)
    assert parts[1].belief.weights.tolist() == pytest.approx([0.0, 1.0], abs=1e-12)


def test_decomposition_e1_is_trivial(e1):
    parts = icd_decompose(e1).components
    assert len(parts) == 1
    assert parts[0].weight == pytest.approx(1.0)
    assert parts[0].belief.weights.tolist() == pytest.approx([0.5, 0.5])


@settings(max_examples=60)
@given(environments(n_max=7))
def test_decomposition_properties(env):
    dec = icd_decompose(env)
    assert np.max(np.abs(dec.reconstituted() - env.probs)) <= 1e-9
    prior_opt = set(seller_opt_prices(env, env.probs, tol=1e-9))
    fb_total = 0.0
    for part in dec:
        ok, constant = is_icd(env, part.belief)
        assert ok
        assert prior_opt <= set(seller_opt_prices(env, part.belief, tol=1e-9))
        fb_total += part.weight * max_profit(env, part.belief)
    # the fully informed buyer's floor equals the prior's monopoly profit
    assert fb_total == pytest.approx(max_profit(env, env.probs), abs=1e-9)
    assert dec.to_dict()["components"][0]["q"] == dec.components[0].weight


# ---------------------------------------------------------------------------
# closed-form affine ICD


def numeric_profit(g: AffineIcd, p: float, points: int = 400_001) -> float:
    """Profit from a fine Stieltjes sum over the CDF (no density, no closed form)."""
    s = np.linspace(max(p, g.v_lo), g.v_hi, points)
    mass = np.diff(g.cdf_left(s))
    mid = 0.5 * (s[:-1] + s[1:])
    body = float(((p - g.cost(mid)) * mass).sum())
    return body + g.atom_mass * (p - float(g.cost(g.v_hi)))


@pytest.mark.parametrize(
    "slope, intercept, v_lo, mean, v_max",
    [
        (0.5, 0.0, 1.0, 1.5, 2.0),  # E2 witness
        (0.0, 0.0, 0.2, 0.5, 1.0),
        (0.3, 0.1, 1.0, 1.8, 3.0),
        (1.0, -0.4, 1.0, 1.3, 2.0),
        (1.4, -0.5, 1.0, 1.03, 1.2),
    ],
)
def test_affine_icd_is_indifferent(slope, intercept, v_lo, mean, v_max):
    g = affine_icd(slope, intercept, v_lo, mean, v_max)
    # mean from a quadrature of the survival function, separate from the closed form
    tail, _ = integrate.quad(lambda s: float(g.survival(s)), g.v_lo, g.v_hi, epsabs=1e-13)
    assert g.v_lo + tail == pytest.approx(mean, abs=1e-9)
    assert g.mean == pytest.approx(mean, abs=1e-12)
    for p in np.linspace(g.v_lo, g.v_hi, 5):
        assert g.seller_profit(float(p)) == pytest.approx(g.constant, abs=1e-8)
        assert numeric_profit(g, float(p)) == pytest.approx(g.constant, abs=1e-4)


def test_affine_icd_density_integrates_to_continuous_mass():
    g = affine_icd(0.3, 0.1, 1.0, 1.8, 3.0)
    mass, _ = integrate.quad(lambda s: float(g.density(s)), g.v_lo, g.v_hi, epsabs=1e-13)
    assert mass + g.atom_mass == pytest.approx(1.0, abs=1e-9)
    table = g.cdf_table(11)
    assert table[0, 1] == 0.0 and np.all(np.diff(table[:, 1]) >= 0)
    assert set(g.to_dict()) == {"lambda", "gamma", "v_lo", "v_hi", "atom_mass"}


def test_affine_icd_degenerate_and_errors():
    g = affine_icd(0.5, 0.0, 1.5, 1.5, 2.0)
    assert g.is_point_mass and g.atom_mass == 1.0
    with pytest.raises(ValueError):
        affine_icd(0.5, 0.0, 1.6, 1.5, 2.0)
    with pytest.raises(ValueError):
        affine_icd(0.5, 1.0, 1.0, 1.5, 2.0)  # value below cost at v_lo
    # slope 2, intercept -2: survival integral is bounded by 0.5
    with pytest.raises(UnboundedSupport):
        affine_icd(2.0, -2.0, 1.0, 1.6, 1.9)


# ---------------------------------------------------------------------------
# lowest ICD price


def test_p_star_e2(e2):
    ps = affine_p_star(e2)
    assert ps.p_star == pytest.approx(1.0, abs=1e-12)
    assert ps.pi_us == pytest.approx(0.25, abs=1e-12)
    assert ps.clamped
    assert mpc_check(ps.witness, e2)


def test_p_star_e1(e1):
    ps = affine_p_star(e1)
    assert (ps.p_star, ps.pi_us) == pytest.approx((1.0, 1.0), abs=1e-12)


def test_p_star_needs_affine_costs():
    env = Environment.from_arrays([1, 2, 3], [0.3, 0.3, 0.4], [0.0, 0.5, 0.6])
    with pytest.raises(NonAffineCosts):
        affine_p_star(env)


def test_p_star_uniform_matches_continuum_limit():
    # zero cost, uniform values: in the continuum the integrated witness CDF
    # x - p - p ln(x/p) touches x**2 / 2 where 1 - p/x = x
    env = Environment.from_arrays(np.linspace(0, 1, 200), np.full(200, 1 / 200), np.zeros(200))

    def touch_gap(p: float) -> float:
        x = (1 + math.sqrt(1 - 4 * p)) / 2
        return x - p - p * math.log(x / p) - x * x / 2

    root = optimize.brentq(touch_gap, 0.05, 0.249)
    ps = affine_p_star(env)
    assert ps.p_star == pytest.approx(root, abs=1e-3)
    assert mpc_check(ps.witness, env)


def test_p_star_is_minimal():
    rng = np.random.default_rng(7)
    for _ in range(10):
        env = random_env(rng, 3, 6, affine=True)
        ps = affine_p_star(env)
        if ps.clamped:
            continue
        slope, intercept = ps.witness.cost_slope, ps.witness.cost_intercept
        lower = ps.p_star - 1e-6 * env.scale()
        try:
            g = affine_icd(slope, intercept, lower, env.mean_value, env.v_high)
        except ValueError:
            continue
        assert not mpc_check(g, env, 1e-12)


def test_mpc_check_basics(e2):
    assert mpc_check(Belief.prior(e2), e2)
    # all mass at the mean is the most contracted distribution
    env = Environment.from_arrays([1, 1.5, 2], [0.5 - 1e-9, 2e-9, 0.5 - 1e-9], [0, 0, 0])
    assert mpc_check(Belief.point_mass(env, 1), env, 1e-6)
    spread = Environment.from_arrays([1, 1.5, 2], [0.25, 0.5, 0.25], [0, 0, 0])
    assert not mpc_check(Belief(spread, [0.5, 0.0, 0.5]), spread)
    assert not mpc_check(Belief.point_mass(spread, 0), spread)


# ---------------------------------------------------------------------------
# two-point environments


def test_binary_e2_root(e2):
    # log form reduces to 4 (p - 0.75) = p**2, roots 1 and 3; only p = 1 is in range
    root = binary_p(e2)
    assert root.p == pytest.approx(1.0, abs=1e-9)
    assert root.pi_us == pytest.approx(0.25, abs=1e-9)


def test_binary_e1_falls_back(e1):
    root = binary_p(e1)
    assert root.method == "fallback"
    assert root.pi_us == pytest.approx(1.0)


def test_binary_slope_one_branch():
    env = Environment.from_arrays([0.0, 1.0], [0.5, 0.5], [-0.5, 0.5])
    assert binary_p(env).pi_us == pytest.approx(affine_p_star(env).pi_us, abs=1e-6)


def test_binary_requires_two_points():
    env = Environment.from_arrays([1, 2, 3], [0.3, 0.3, 0.4], [0, 0, 0])
    with pytest.raises(ValueError):
        binary_p(env)


def test_binary_agrees_with_bisection_on_random_instances():
    rng = np.random.default_rng(11)
    for _ in range(50):
        env = random_env(rng, 2, 2)
        assert binary_p(env).p == pytest.approx(affine_p_star(env).p_star, abs=1e-6)


# ---------------------------------------------------------------------------
# integration-by-parts identity


def test_identity_residuals_e2(e2):
    r_prior, r_other = verify_linear_identities(Belief.prior(e2), Belief(e2, [2 / 3, 1 / 3]), 1.0, 0.5, 0.0)
    assert abs(r_prior) < 1e-12 and abs(r_other) < 1e-12


def test_identity_at_top_value(e2):
    r_prior, r_other = verify_linear_identities(Belief.prior(e2), Belief(e2, [2 / 3, 1 / 3]), 2.0, 0.5, 0.0)
    assert abs(r_prior) < 1e-12 and abs(r_other) < 1e-12


def test_identity_point_mass_counterexample():
    # F = point mass at x, zero cost, p < x: the left side is v_bar - x
    env = Environment.from_arrays([1.0, 3.0], [0.5, 0.5], [0.0, 1.0])
    r_prior, _ = verify_linear_identities(Belief.point_mass(env, 0), Belief.prior(env), 0.5, 1.0, 0.0)
    assert abs(r_prior) < 1e-12


@settings(max_examples=40)
@given(environments(n_max=5))
def test_identity_random_interior_price(env):
    slope, intercept = 0.4, -0.1
    affine = Environment.from_arrays(env.values, env.probs, slope * env.values + intercept)
    p = 0.5 * (affine.v_low + affine.v_high)
    r_prior, r_other = verify_linear_identities(
        Belief.prior(affine), Belief.point_mass(affine, affine.n - 1), p, slope, intercept
    )
    assert abs(r_prior) < 1e-10 and abs(r_other) < 1e-10


def test_identity_with_affine_witness(e2):
    ps = affine_p_star(e2)
    r_prior, r_other = verify_linear_identities(Belief.prior(e2), ps.witness, ps.p_star, 0.5, 0.0)
    assert abs(r_prior) < 1e-10 and abs(r_other) < 1e-10


def test_affine_unit_elastic_branch():
    # G(v) = 1 - 1/v; mean 1 + ln(v_hi) = 1.5
    g = affine_icd(0.0, 0.0, 1.0, 1.5, 2.0)
    assert g.v_hi == pytest.approx(math.exp(0.5), abs=1e-12)
    assert g.atom_mass == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert float(g.cdf(1.2)) == pytest.approx(1 - 1 / 1.2, abs=1e-12)


def test_affine_exponential_branch():
    # G(v) = 1 - exp(-(v - 1)); mean 2 - exp(-(v_hi - 1)) = 1.5
    g = affine_icd(1.0, -1.0, 1.0, 1.5, 2.0)
    assert g.v_hi == pytest.approx(1 + math.log(2), abs=1e-12)
    assert g.atom_mass == pytest.approx(0.5, abs=1e-12)
    assert float(g.cdf(1.3)) == pytest.approx(1 - math.exp(-0.3), abs=1e-12)


def test_affine_family_is_ordered():
    env = Environment.from_arrays([1.0, 2.0, 3.0, 4.0], [0.1, 0.4, 0.4, 0.1], [0.3, 0.6, 0.9, 1.2])
    lows = [1.2, 1.6, 2.0, 2.4]
    family = [affine_icd(0.3, 0.0, lo, env.mean_value, env.v_high) for lo in lows]
    for wide, narrow in zip(family, family[1:]):
        assert narrow.v_lo >= wide.v_lo and narrow.v_hi <= wide.v_hi + 1e-12
        # the narrower member is a contraction of the wider one
        xs = np.linspace(wide.v_lo, wide.v_hi, 2001)
        assert np.all(narrow_integral(narrow, xs) <= narrow_integral(wide, xs) + 1e-9)


def narrow_integral(g: AffineIcd, xs) -> np.ndarray:
    return np.array([g.integrated_cdf(float(x)) for x in xs])


def test_mpc_rejects_wider_support(e2):
    # v_lo = 0.5 gives support [0.5, 0.5 e**2], wider than the prior's [1, 2]
    g = affine_icd(0.0, 0.0, 0.5, 1.5, 10.0)
    assert g.v_hi == pytest.approx(0.5 * math.exp(2.0))
    assert not mpc_check(g, e2)


def test_p_star_bisection_certificate():
    env = Environment.from_arrays([1.0, 2.0, 3.0, 4.0], [0.1, 0.4, 0.4, 0.1], [0.3, 0.6, 0.9, 1.2])
    ps = affine_p_star(env)
    assert not ps.clamped
    eps = 1e-6 * (env.mean_value - env.v_low)
    above = affine_icd(0.3, 0.0, ps.p_star + eps, env.mean_value, env.v_high)
    below = affine_icd(0.3, 0.0, ps.p_star - eps, env.mean_value, env.v_high)
    assert mpc_check(above, env) and not mpc_check(below, env)
    assert ps.pi_us == pytest.approx(ps.p_star - env.mean_cost, abs=1e-12)


def test_point_mass_prior_p_star():
    env = Environment.from_arrays([2.0], [1.0], [0.5])
    ps = affine_p_star(env)
    assert (ps.p_star, ps.pi_us) == pytest.approx((2.0, 1.5))
