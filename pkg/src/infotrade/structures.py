"""Explicit information structures and equilibria that hit payoff targets.

Each constructor returns an :class:`InformationStructure` together with a
:class:`StrategyProfile` on a finite price grid; the accompanying tests run
them through the verifiers in :mod:`infotrade.equilibrium`.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .environment import Environment, surplus
from .equilibrium import (
    TIE_TOL,
    SearchConfig,
    VerificationReport,
    buyer_best_response,
    default_grid,
    min_seller_profit_search,
    payoffs,
    seller_profit_table,
    verify_sequential,
)
from .errors import InfeasibleTarget
from .game import UNINFORMED_SELLER, InformationStructure, StrategyProfile, TrembleSchedule
from .geometry import (
    contains,
    distance_to_region,
    region_all,
    seller_floor_us,
    seller_guarantee,
)
from .icd import icd_decompose

TARGET_TOL = 1e-9
MEAN_CLASS_TOL = 1e-12


class Construction(NamedTuple):
    structure: InformationStructure
    profile: StrategyProfile


def _check_target(env: Environment, target: Sequence[float], tol: float = TARGET_TOL) -> tuple[float, float]:
    if not env.gains_from_trade:
        raise ValueError("this construction needs an environment with gains from trade")
    region = region_all(env)
    if not contains(region, target, tol):
        dist = distance_to_region(region, target)
        raise InfeasibleTarget(f"target {tuple(target)} lies outside the feasible region (distance {dist:.3g})", dist)
    pi_b, pi_s = float(target[0]), float(target[1])
    s = surplus(env)
    pi_b = max(pi_b, 0.0)
    pi_s = max(pi_s, seller_guarantee(env))
    if pi_b + pi_s > s:
        pi_b = max(s - pi_s, 0.0)
    return pi_b, pi_s


def _point_mass_rows(env: Environment, count: int) -> NDArray[np.float64]:
    rows = np.zeros((count, env.n))
    rows[:, 0] = 1.0
    return rows


def no_information(env: Environment) -> InformationStructure:
    """Neither side learns anything."""
    return InformationStructure(env, ("none",), ("none",), env.probs[None, None, :])


def buyer_revelation(env: Environment) -> InformationStructure:
    """The buyer learns the value; the seller learns nothing."""
    joint = np.zeros((1, env.n, env.n))
    joint[0, np.arange(env.n), np.arange(env.n)] = env.probs
    return InformationStructure(env, ("none",), tuple(f"v{i}" for i in range(env.n)), joint)


# ---------------------------------------------------------------------------
# Uninformed players


def construct_any(env: Environment, target: Sequence[float]) -> Construction:
    """Hit any feasible payoff pair with no information at all.

    The seller mixes a low price ``pi_s + E[c]`` (always accepted) with the
    prior mean (accepted just often enough to keep the seller indifferent).
    Off-path prices meet pessimistic beliefs concentrated on the lowest
    value, so only prices up to ``v_1`` are accepted there.
    """
    pi_b, pi_s = _check_target(env, target)
    ev, ec = env.mean_value, env.mean_cost
    p_low, p_high = pi_s + ec, ev
    spread = p_high - p_low
    single = spread <= 1e-15 * env.scale()

    grid = default_grid(env, [p_low, p_high])
    k_high = int(np.flatnonzero(grid == p_high)[0])
    k_low = k_high if single else int(np.flatnonzero(grid == p_low)[0])

    sigma = np.zeros((1, grid.size))
    alpha = (grid <= env.v_low).astype(float)[:, None]
    beliefs = np.zeros((grid.size, 1, env.n))
    beliefs[:, 0, 0] = 1.0
    beliefs[[k_low, k_high], 0, :] = env.probs
    if single:
        sigma[0, k_high] = 1.0
        alpha[k_high, 0] = 1.0
    else:
        share_low = min(max(pi_b / spread, 0.0), 1.0)
        sigma[0, k_low] = share_low
        sigma[0, k_high] = 1.0 - share_low
        alpha[k_low, 0] = 1.0
        alpha[k_high, 0] = (p_low - ec) / (p_high - ec)
    return Construction(no_information(env), StrategyProfile(grid, sigma, alpha, beliefs))


def construct_full_information(env: Environment, grid: ArrayLike | None = None) -> Construction:
    """Both sides learn the value and the seller extracts all surplus."""
    labels = tuple(f"v{i}" for i in range(env.n))
    joint = np.zeros((env.n, env.n, env.n))
    joint[np.arange(env.n), np.arange(env.n), np.arange(env.n)] = env.probs
    g = default_grid(env) if grid is None else np.asarray(grid, dtype=float)
    sigma = np.zeros((env.n, g.size))
    for i, v in enumerate(env.values):
        sigma[i, int(np.flatnonzero(g == v)[0])] = 1.0
    alpha = (env.values[None, :] >= g[:, None]).astype(float)
    beliefs = np.broadcast_to(np.eye(env.n), (g.size, env.n, env.n)).copy()
    return Construction(InformationStructure(env, labels, labels, joint), StrategyProfile(g, sigma, alpha, beliefs))


# ---------------------------------------------------------------------------
# Fully informed buyer


def construct_fb(env: Environment, beta: float) -> Construction:
    """Buyer knows the value; the seller learns which ICD component it faces.

    Within each component the seller posts the lowest support price with
    probability ``beta`` and the highest otherwise.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    if not env.gains_from_trade:
        raise ValueError("this construction needs an environment with gains from trade")
    parts = icd_decompose(env).components
    joint = np.zeros((len(parts), env.n, env.n))
    grid = default_grid(env)
    sigma = np.zeros((len(parts), grid.size))
    for j, part in enumerate(parts):
        w = part.weight * np.asarray(part.belief.weights)
        joint[j, np.arange(env.n), np.arange(env.n)] = w
        support = part.belief.support
        k_min = int(np.flatnonzero(grid == env.values[support[0]])[0])
        k_max = int(np.flatnonzero(grid == env.values[support[-1]])[0])
        sigma[j, k_min] += beta
        sigma[j, k_max] += 1.0 - beta
    joint[:, np.arange(env.n), np.arange(env.n)] *= (env.probs / joint.sum(axis=(0, 1)))[None, :]
    alpha = (env.values[None, :] >= grid[:, None]).astype(float)
    beliefs = np.broadcast_to(np.eye(env.n), (grid.size, env.n, env.n)).copy()
    structure = InformationStructure(
        env, tuple(f"icd{j}" for j in range(len(parts))), tuple(f"v{i}" for i in range(env.n)), joint
    )
    return Construction(structure, StrategyProfile(grid, sigma, alpha, beliefs))


# ---------------------------------------------------------------------------
# Trade that may destroy surplus


def construct_negative(env: Environment, welfare_weight: float, tie_weight: float = 0.0) -> Construction:
    """Public signal separating types worth trading at ``v_1`` under a weight.

    Types with ``v_1 - c(v) + w (v - v_1) > 0`` (and a ``tie_weight`` share of
    those at zero) are told to trade; they buy at ``v_1``.  The remaining
    types see no trade.  The weighted payoff ``w * pi_b + pi_s`` then equals
    the frontier value for weight ``w``.
    """
    if welfare_weight < 1:
        raise ValueError("welfare_weight must be at least 1")
    if not 0.0 <= tie_weight <= 1.0:
        raise ValueError("tie_weight must lie in [0, 1]")
    v, c, mu = env.values, env.costs, env.probs
    score = env.v_low - c + welfare_weight * (v - env.v_low)
    tie = np.abs(score) <= 1e-12 * env.scale()
    share = np.where(tie, tie_weight, (score > 0).astype(float))
    trade, skip = share * mu, (1.0 - share) * mu
    grid = default_grid(env)
    top = grid.size - 1

    if trade.sum() <= 0:
        structure = no_information(env)
        sigma = np.zeros((1, grid.size))
        sigma[0, top] = 1.0
        alpha = (env.mean_value >= grid).astype(float)[:, None]
        beliefs = np.broadcast_to(mu, (grid.size, 1, env.n)).copy()
        return Construction(structure, StrategyProfile(grid, sigma, alpha, beliefs))

    cost_trade = float(trade @ c) / trade.sum()
    if env.v_low < cost_trade - 1e-12 * env.scale():
        raise InfeasibleTarget(
            "selling at the lowest value to the trading branch loses money; the seller would refuse"
        )
    branches = [("trade", trade)] + ([("no_trade", skip)] if skip.sum() > 0 else [])
    labels = tuple(name for name, _ in branches)
    joint = np.zeros((len(branches), len(branches), env.n))
    for j, (_, mass) in enumerate(branches):
        joint[j, j] = mass
    k_low = int(np.flatnonzero(grid == env.v_low)[0])
    sigma = np.zeros((len(branches), grid.size))
    alpha = np.zeros((grid.size, len(branches)))
    beliefs = np.zeros((grid.size, len(branches), env.n))

    sigma[0, k_low] = 1.0
    alpha[:, 0] = (grid <= env.v_low).astype(float)
    beliefs[:, 0, 0] = 1.0
    beliefs[k_low, 0] = trade / trade.sum()
    if len(branches) == 2:
        post = skip / skip.sum()
        sigma[1, top] = 1.0
        alpha[:, 1] = (post @ v >= grid).astype(float)
        beliefs[:, 1] = post
    structure = InformationStructure(env, labels, labels, joint)
    return Construction(structure, StrategyProfile(grid, sigma, alpha, beliefs))


# ---------------------------------------------------------------------------
# Public randomization


def randomize_public(components: Sequence[tuple[float, InformationStructure, StrategyProfile]]) -> Construction:
    """Draw a component publicly, then play that component's equilibrium."""
    if not components:
        raise ValueError("need at least one component")
    weights = np.array([float(w) for w, _, _ in components])
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("component weights must be nonnegative and sum to 1")
    env = components[0][1].env
    grid = components[0][2].grid
    for _, st, pr in components:
        if not (np.array_equal(st.env.values, env.values) and np.array_equal(st.env.probs, env.probs)
                and np.array_equal(st.env.costs, env.costs)):
            raise ValueError("components must share the environment")
        if pr.grid.shape != grid.shape or not np.allclose(pr.grid, grid, rtol=0, atol=1e-12):
            raise ValueError("components must share the price grid")
    live = [(w, st, pr) for w, st, pr in components if w > 0]
    if len(live) == 1:
        return Construction(live[0][1], live[0][2])

    sellers = [f"{j}:{s}" for j, (_, st, _) in enumerate(live) for s in st.seller_signals]
    buyers = [f"{j}:{b}" for j, (_, st, _) in enumerate(live) for b in st.buyer_signals]
    joint = np.zeros((len(sellers), len(buyers), env.n))
    sigma = np.zeros((len(sellers), grid.size))
    alpha = np.zeros((grid.size, len(buyers)))
    beliefs = np.zeros((grid.size, len(buyers), env.n))
    s0 = b0 = 0
    for w, st, pr in live:
        ns, nb, _ = st.shape
        joint[s0 : s0 + ns, b0 : b0 + nb] = w * st.joint
        sigma[s0 : s0 + ns] = pr.sigma
        alpha[:, b0 : b0 + nb] = pr.alpha
        beliefs[:, b0 : b0 + nb] = pr.beliefs
        s0, b0 = s0 + ns, b0 + nb
    joint *= (env.probs / joint.sum(axis=(0, 1)))[None, None, :]
    structure = InformationStructure(env, tuple(sellers), tuple(buyers), joint)
    return Construction(structure, StrategyProfile(grid, sigma, alpha, beliefs))


# ---------------------------------------------------------------------------
# Garbling buyer information for an uninformed seller


@dataclass(frozen=True)
class GarbleDiagnostics:
    """Parameters of a garbling.

    Attributes:
        z_star: posterior-mean threshold below which buyers are excluded
            (``-inf`` when nobody is).
        beta: share of the threshold class that is excluded.
        p_star: the price the seller posts.
        pool_fraction: share of high-mean buyers moved into the pool.
        base_floor: best profit the seller can make against the base
            structure with tie-accepting buyers.
    """

    z_star: float
    beta: float
    p_star: float
    pool_fraction: float
    base_floor: float


class Garbling(NamedTuple):
    structure: InformationStructure
    profile: StrategyProfile
    diagnostics: GarbleDiagnostics


def tie_accept_floor(env: Environment, structure: InformationStructure) -> float:
    """Seller's best profit against an uninformed-seller structure.

    Buyers hold beliefs ``P(v | t_b)`` and accept ties; the best price is
    one of the posterior means (or no sale).
    """
    means = structure.buyer_means()[structure.buyer_mass > 0]
    grid = np.unique(means)
    alpha = buyer_best_response(structure, grid, "accept")
    table = seller_profit_table(env, structure, alpha, grid)
    return max(float(table.max()), 0.0)


def _mean_classes(means: NDArray[np.float64], live: NDArray[np.intp]) -> list[NDArray[np.intp]]:
    order = live[np.argsort(means[live], kind="stable")]
    classes: list[list[int]] = []
    for b in order:
        if classes and abs(means[b] - means[classes[-1][0]]) <= MEAN_CLASS_TOL * max(1.0, abs(means[b])):
            classes[-1].append(int(b))
        else:
            classes.append([int(b)])
    return [np.array(c) for c in classes]


def garble_to_target(
    env: Environment,
    base: InformationStructure,
    target: Sequence[float],
    base_profile: StrategyProfile | None = None,
) -> Garbling:
    """Coarsen the buyer's information so the seller's price hits a target.

    Buyers with the lowest posterior means are excluded until the lost
    surplus matches the target's shortfall from efficiency.  Everyone else
    trades at one price ``p_star``: buyers with means below it are pooled
    with a fraction of the high-mean buyers into a new signal whose mean is
    exactly ``p_star``.  Beliefs are the buyer-signal posteriors at every
    price.
    """
    if UNINFORMED_SELLER not in base.class_tags:
        raise ValueError("the base structure must have a single seller signal")
    pi_b, pi_s = _check_target(env, target)
    floor = tie_accept_floor(env, base)
    if base_profile is not None:
        floor = max(floor, payoffs(env, base, base_profile).pi_s)
    if pi_s < floor - TARGET_TOL:
        raise InfeasibleTarget(f"target seller payoff {pi_s} is below the base structure's floor {floor}")

    joint = base.joint[0]
    mass = joint.sum(axis=1)
    means = base.buyer_means()
    gains = joint @ (env.values - env.costs)
    cost_mass = joint @ env.costs
    classes = _mean_classes(means, np.flatnonzero(mass > 0))

    loss = surplus(env) - pi_b - pi_s
    z_star, beta = -math.inf, 0.0
    keep = np.zeros(mass.size)  # share of each signal left as is
    pooled = np.zeros(mass.size)  # share moved into the pool
    traded_mass, traded_cost = 0.0, 0.0
    start = 0
    if loss > TARGET_TOL:
        lost = 0.0
        for j, cls in enumerate(classes):
            w = float(gains[cls].sum())
            if w > 0 and lost + w >= loss - TARGET_TOL:
                z_star = float(means[cls[0]])
                beta = min(max((loss - lost) / w, 0.0), 1.0)
                keep[cls] = beta
                pooled[cls] = 1.0 - beta
                traded_mass += (1.0 - beta) * float(mass[cls].sum())
                traded_cost += (1.0 - beta) * float(cost_mass[cls].sum())
                start = j + 1
                break
            keep[cls] = 1.0
            lost += w
        else:
            raise InfeasibleTarget("target asks for more surplus loss than the structure holds")
    rest = [b for cls in classes[start:] for b in cls]
    traded_mass += float(mass[rest].sum())
    traded_cost += float(cost_mass[rest].sum())
    if traded_mass <= 0:
        raise InfeasibleTarget("no buyer is left to trade")
    p_star = (pi_s + traded_cost) / traded_mass

    below = np.array([b for b in rest if means[b] < p_star - MEAN_CLASS_TOL * max(1.0, p_star)], dtype=int)
    above = np.array([b for b in rest if b not in set(below.tolist())], dtype=int)
    short = float(((p_star - means[below]) * mass[below]).sum())
    if math.isfinite(z_star):
        thr = classes[start - 1]
        short += (1.0 - beta) * (p_star - z_star) * float(mass[thr].sum())
    excess = float(((means[above] - p_star) * mass[above]).sum()) if above.size else 0.0
    if short <= TARGET_TOL * max(1.0, traded_mass):
        pool_fraction = 0.0
    elif excess <= 0:
        raise InfeasibleTarget("nobody values the good above the required price")
    else:
        pool_fraction = short / excess
        if pool_fraction > 1.0 + 1e-9:
            raise InfeasibleTarget("target needs a pool fraction above one")
        pool_fraction = min(pool_fraction, 1.0)
    pooled[below] = 1.0
    keep[above] = 1.0 - pool_fraction
    pooled[above] = pool_fraction

    rows, labels = [], []
    for b in range(mass.size):
        if keep[b] > 0 and mass[b] > 0:
            rows.append(keep[b] * joint[b])
            labels.append(base.buyer_signals[b])
    pool_row = (pooled[:, None] * joint).sum(axis=0)
    has_pool = pool_row.sum() > 1e-15
    if has_pool:
        name = "pool"
        while name in labels:
            name += "_"
        rows.append(pool_row)
        labels.append(name)
    new_joint = np.array(rows)
    new_joint *= (env.probs / new_joint.sum(axis=0))[None, :]
    structure = InformationStructure(env, base.seller_signals, tuple(labels), new_joint[None, :, :])

    post = structure.buyer_posteriors()
    means_new = post @ env.values
    near_star = np.abs(means_new - p_star) <= MEAN_CLASS_TOL * max(1.0, abs(p_star))
    grid = default_grid(env, np.concatenate([means_new[~near_star], [p_star]]))
    k_star = int(np.flatnonzero(grid == p_star)[0])
    alpha = buyer_best_response(structure, grid, "accept")
    if has_pool:
        alpha[:, -1] = (grid <= p_star).astype(float)
    sigma = np.zeros((1, grid.size))
    sigma[0, k_star] = 1.0
    beliefs = np.broadcast_to(post, (grid.size,) + post.shape).copy()
    profile = StrategyProfile(grid, sigma, alpha, beliefs)
    diag = GarbleDiagnostics(z_star, beta, p_star, pool_fraction, floor)
    return Garbling(structure, profile, diag)


@dataclass(frozen=True)
class UniqueImplementation:
    """Garbled floor witness plus the uniqueness sweep.

    ``floor`` is the seller payoff of the finite witness structure;
    ``exact_floor`` is the closed-form floor when costs are affine.
    ``max_other_profit`` is the best profit at any grid price other than
    ``p_star`` under either tie-breaking rule, and ``outside_band_profit``
    the same maximum restricted to prices outside ``(z_star, p_star)``.
    Inside that band every buyer who is not excluded accepts, so profit
    rises linearly towards the target and stays strictly below it, but it
    can exceed the floor.  ``certified`` requires the outside-band maximum
    to be at most the floor and every other price to earn strictly less
    than the target.
    """

    structure: InformationStructure
    profile: StrategyProfile
    diagnostics: GarbleDiagnostics
    floor: float
    exact_floor: float | None
    max_other_profit: float
    outside_band_profit: float
    certified: bool


def uniqueness_sweep(
    env: Environment,
    structure: InformationStructure,
    grid: ArrayLike,
    p_star: float,
    band: tuple[float, float] | None = None,
) -> float:
    """Best profit over grid prices other than ``p_star`` for both tie rules.

    Prices strictly inside the open interval ``band`` are skipped.
    """
    g = np.asarray(grid, dtype=float)
    others = np.abs(g - p_star) > 1e-9 * max(1.0, abs(p_star))
    if band is not None:
        lo, hi = band
        slack = 1e-12 * max(1.0, abs(hi))
        others &= (g <= lo + slack) | (g >= hi - slack)
    if not others.any():
        return -math.inf
    best = -math.inf
    for tie in ("accept", "reject"):
        alpha = buyer_best_response(structure, g, tie)
        table = seller_profit_table(env, structure, alpha, g)
        best = max(best, float(table[:, others].max()))
    return best


def construct_us_unique(
    env: Environment,
    target: Sequence[float],
    base: InformationStructure | None = None,
    config: SearchConfig | None = None,
) -> UniqueImplementation:
    """Garble a low-profit witness so the target is the only equilibrium outcome.

    Without ``base`` the witness comes from the seller-profit search.  The
    target's seller payoff must exceed the witness floor.
    """
    if base is None:
        found = min_seller_profit_search(env, config)
        base, floor = found.structure, found.upper_bound
    else:
        floor = tie_accept_floor(env, base)
    us = seller_floor_us(env, config)
    exact = us.value if us.exact else None
    if float(target[1]) <= floor + TARGET_TOL:
        raise InfeasibleTarget(
            f"seller payoff {target[1]} is not strictly above the witness floor {floor}; uniqueness is unavailable"
        )
    garbled = garble_to_target(env, base, target)
    d = garbled.diagnostics
    grid = garbled.profile.grid
    worst = uniqueness_sweep(env, garbled.structure, grid, d.p_star)
    outside = uniqueness_sweep(env, garbled.structure, grid, d.p_star, (d.z_star, d.p_star))
    strict = worst < float(target[1]) - TARGET_TOL
    return UniqueImplementation(
        garbled.structure,
        garbled.profile,
        d,
        floor,
        exact,
        worst,
        outside,
        bool(strict and outside <= floor + 1e-9),
    )


# ---------------------------------------------------------------------------
# Sequential equilibria on a discrete price grid


@dataclass(frozen=True)
class DiscreteConstruction:
    """Result of :func:`construct_discrete`.

    ``reveal_mass`` is the probability that the seller is told the value is
    the lowest one; ``mix_floor`` bounds the high signal's mixing weight
    away from 0 and 1.  ``case`` is 1 when the lowest type is costlier than
    average and 2 otherwise.
    """

    structure: InformationStructure
    profile: StrategyProfile
    trembles: TrembleSchedule
    reveal_mass: float
    mix_floor: float
    case: int
    report: VerificationReport

    def __iter__(self):  # type: ignore[no-untyped-def]
        return iter((self.structure, self.profile, self.trembles))


def _aim_point(env: Environment, target: tuple[float, float], margin: float) -> tuple[float, float]:
    s, floor = surplus(env), seller_guarantee(env)
    diag = math.sqrt(2.0) * margin
    if s - floor < 2 * margin + diag:
        raise InfeasibleTarget("the feasible region is too thin for this epsilon")
    pb, ps = target
    pb, ps = max(pb, margin), max(ps, floor + margin)
    over = pb + ps - (s - diag)
    if over > 0:
        pb, ps = pb - over / 2, ps - over / 2
        if pb < margin:
            ps -= margin - pb
            pb = margin
        if ps < floor + margin:
            pb -= floor + margin - ps
            ps = floor + margin
    return pb, ps


def construct_discrete(
    env: Environment,
    target: Sequence[float],
    epsilon: float,
    grid: ArrayLike,
    tremble_rate: float = 3.0,
    n_list: Sequence[int] = (10, 100, 10_000),
    max_halvings: int = 30,
) -> DiscreteConstruction:
    """Sequential equilibrium of the discrete-price game within ``epsilon``.

    The buyer learns nothing.  The seller is told ``l`` with probability
    ``reveal_mass`` when the value is lowest and ``h`` otherwise.  With the
    low type's cost above average (case 1), ``l`` posts a high price that is
    accepted sometimes and ``h`` mixes it with a lower always-accepted price.
    Otherwise (case 2) ``l`` posts the low price and ``h`` mixes it with the
    mean value of its signal.  Off-path prices meet beliefs concentrated on
    the lowest value, justified by ``l`` trembling far more than ``h``: the
    tremble weight of signal ``l`` is ``n**-tremble_rate`` and that of ``h``
    is ``n**-(2 * tremble_rate)``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    g = np.unique(np.asarray(grid, dtype=float))
    scale = env.scale()
    if g.size == 0 or g[0] > env.v_low + 1e-12 * scale or g[-1] < env.v_high - 1e-12 * scale:
        raise ValueError("the price grid must reach down to the lowest value and up to the highest")
    pi_target = _check_target(env, target)
    aim = _aim_point(env, pi_target, epsilon / 4)
    budget = epsilon - math.dist(aim, (float(target[0]), float(target[1])))

    v_lo, c_lo, mu_lo = env.v_low, float(env.costs[0]), float(env.probs[0])
    ev, ec = env.mean_value, env.mean_cost
    case = 1 if c_lo > ec else 2
    trembles = TrembleSchedule((tremble_rate, 2 * tremble_rate))

    for k in range(1, max_halvings + 1):
        mix_floor = 2.0**-k
        for m in range(0, max_halvings + 1):
            eta_cap = mu_lo * 2.0**-m
            if case == 1:
                pick = _pick_case1(g, eta_cap, ev, ec, v_lo, c_lo, mix_floor, aim)
            else:
                p_bar = (ev - eta_cap * v_lo) / (1 - eta_cap)
                snapped = g[(g > ev + 1e-12 * scale) & (g <= p_bar)]
                if snapped.size == 0:
                    break
                pick = _pick_case2(g, float(snapped[-1]), ev, ec, v_lo, c_lo, mix_floor, aim)
            if pick is None or pick[0] >= budget:
                continue
            _, eta, p_bar, params = pick
            built = _build_discrete(env, g, eta, p_bar, case, params)
            report = verify_sequential(env, built.structure, built.profile, trembles, n_list)
            realized = payoffs(env, built.structure, built.profile)
            miss = math.dist(realized, (float(target[0]), float(target[1])))
            if report.ok and miss < epsilon:
                return DiscreteConstruction(built.structure, built.profile, trembles, eta, mix_floor, case, report)
    raise InfeasibleTarget("no admissible parameters found; epsilon is too small for this grid")


def _pick_case2(
    g: NDArray[np.float64], p_bar: float, ev: float, ec: float, v_lo: float, c_lo: float,
    mix_floor: float, aim: tuple[float, float],
) -> tuple[float, float, float, tuple[float, ...]] | None:
    """Low signal posts ``p_l``; high mixes ``p_bar`` (weight ``mix``) with ``p_l``.

    ``p_bar`` is a grid price and fixes the revealed mass.
    """
    eta = (p_bar - ev) / (p_bar - v_lo)
    ech = (ec - eta * c_lo) / (1 - eta)
    lows = g[(g >= max(ech, v_lo)) & (g < p_bar)]
    if lows.size == 0:
        return None
    mix = 1.0 - (aim[0] - eta * (v_lo - lows)) / ((1 - eta) * (p_bar - lows))
    mix = np.clip(mix, mix_floor, 1.0 - mix_floor)
    at_low = eta + (1 - eta) * (1 - mix)
    mean_low = (eta * v_lo + (1 - eta) * (1 - mix) * p_bar) / at_low
    ok = mean_low >= lows - 1e-12 * np.maximum(1.0, np.abs(lows))
    if not ok.any():
        return None
    pi_b = at_low * (mean_low - lows)
    pi_s = lows - ec
    err = np.where(ok, np.hypot(pi_b - aim[0], pi_s - aim[1]), np.inf)
    j = int(err.argmin())
    return float(err[j]), eta, p_bar, (float(lows[j]), float(mix[j]))


def _pick_case1(
    g: NDArray[np.float64], eta_cap: float, ev: float, ec: float, v_lo: float, c_lo: float,
    mix_floor: float, aim: tuple[float, float],
) -> tuple[float, float, float, tuple[float, ...]] | None:
    """Low signal posts ``q``; high mixes ``q`` (weight ``mix``) with a lower ``p_l``.

    For each price pair the revealed mass is fitted within ``(eta_cap / 2,
    eta_cap]`` so that the buyer payoff matches the aim where possible.
    """
    lows = g[g >= v_lo][:, None]
    highs = g[(g > v_lo) & (g < ev)][None, :]
    if lows.size == 0 or highs.size == 0:
        return None
    b = aim[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        fit = (ev - highs) * (ev - lows - b) / (b * (highs - v_lo) - (ev - highs) * (lows - v_lo))
    eta = np.clip(np.nan_to_num(fit, nan=eta_cap), eta_cap / 2, eta_cap)
    mix = eta * (highs - v_lo) / ((ev - highs) + eta * (highs - v_lo))
    p_bar = (ev - eta * v_lo) / (1 - eta)
    ech = (ec - eta * c_lo) / (1 - eta)
    accept = (lows - ech) / (highs - ech)
    valid = (
        (lows < highs)
        & (lows >= ech)
        & (mix >= mix_floor)
        & (mix <= 1.0 - mix_floor)
        & (accept * (highs - c_lo) >= 0)
    )
    if not valid.any():
        return None
    pi_b = (1 - eta) * (1 - mix) * (p_bar - lows)
    pi_s = (1 - eta) * (lows - ech) + eta * accept * (highs - c_lo)
    err = np.where(valid, np.hypot(pi_b - aim[0], pi_s - aim[1]), np.inf)
    a, c = np.unravel_index(int(err.argmin()), err.shape)
    params = (float(lows[a, 0]), float(highs[0, c]), float(mix[a, c]))
    return float(err[a, c]), float(eta[a, c]), float(p_bar[a, c]), params


def _build_discrete(
    env: Environment, g: NDArray[np.float64], eta: float, p_bar: float, case: int, params: tuple[float, ...]
) -> Construction:
    c_lo = float(env.costs[0])
    ech = (env.mean_cost - eta * c_lo) / (1 - eta)
    joint = np.zeros((2, 1, env.n))
    joint[0, 0, 0] = eta
    joint[1, 0] = env.probs - joint[0, 0]
    structure = InformationStructure(env, ("l", "h"), ("none",), joint)

    sigma = np.zeros((2, g.size))
    if case == 1:
        p_l, q, mix = params
        k_l, k_q = int(np.flatnonzero(g == p_l)[0]), int(np.flatnonzero(g == q)[0])
        sigma[0, k_q] = 1.0
        sigma[1, k_q], sigma[1, k_l] = mix, 1.0 - mix
        k_mixed, accept = k_q, (p_l - ech) / (q - ech)
    else:
        p_l, mix = params
        k_l = int(np.flatnonzero(g == p_l)[0])
        k_bar = int(np.flatnonzero(g == p_bar)[0])
        sigma[0, k_l] = 1.0
        sigma[1, k_bar], sigma[1, k_l] = mix, 1.0 - mix
        k_mixed, accept = k_bar, (p_l - ech) / (p_bar - ech)

    mass = np.einsum("si,sk->ki", joint[:, 0, :], sigma)
    cell = mass.sum(axis=1)
    beliefs = np.zeros((g.size, 1, env.n))
    beliefs[:, 0, 0] = 1.0
    on = cell > 0
    beliefs[on, 0] = mass[on] / cell[on, None]
    means = beliefs[:, 0] @ env.values
    slack = TIE_TOL * np.maximum(1.0, np.abs(g))
    alpha = (means >= g - slack).astype(float)
    alpha[k_mixed] = accept
    return Construction(structure, StrategyProfile(g, sigma, alpha[:, None], beliefs))

