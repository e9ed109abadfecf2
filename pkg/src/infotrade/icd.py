"""Incentive-compatible distributions (ICDs).

A distribution of buyer values is an ICD when the seller earns the same
nonnegative profit at every price in its support, so posting any of those
prices is optimal.  This module tests and builds ICDs on a finite support,
decomposes a prior into ICDs, and handles the closed-form family that arises
when costs are affine in values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, optimize

from .environment import Belief, Environment, affine_cost_fit
from .errors import NonAffineCosts

ZERO_GAP_TOL = 1e-12


def _weights(env: Environment, belief: Belief | ArrayLike) -> NDArray[np.float64]:
    if isinstance(belief, Belief):
        return np.asarray(belief.weights)
    w = np.asarray(belief, dtype=float)
    if w.shape != (env.n,):
        raise ValueError(f"expected {env.n} weights, got shape {w.shape}")
    return w


def seller_profits(env: Environment, weights: ArrayLike, prices: ArrayLike) -> NDArray[np.float64]:
    """Profit ``sum_{v_i >= p} (p - c_i) w_i`` at each price (buyers accept ties)."""
    w = np.asarray(weights, dtype=float)
    p = np.atleast_1d(np.asarray(prices, dtype=float))
    accept = env.values[None, :] >= p[:, None]
    return (accept * (p[:, None] - env.costs[None, :]) * w[None, :]).sum(axis=1)


def max_profit(env: Environment, belief: Belief | ArrayLike) -> float:
    """Seller's best profit against a value distribution on the env support."""
    return float(seller_profits(env, _weights(env, belief), env.values).max())


def seller_opt_prices(
    env: Environment, belief: Belief | ArrayLike, tol: float = 1e-12
) -> tuple[float, ...]:
    """Support prices maximizing seller profit, ties within ``tol`` included."""
    profits = seller_profits(env, _weights(env, belief), env.values)
    best = profits.max()
    return tuple(float(v) for v in env.values[profits >= best - tol * env.scale()])


def is_icd(env: Environment, belief: Belief | ArrayLike, tol: float = 1e-9) -> tuple[bool, float]:
    """Check seller indifference across the belief's support.

    Returns ``(ok, constant)`` where ``constant`` is the profit at the lowest
    support price.  Tolerance is relative to the value range.
    """
    w = _weights(env, belief)
    support = np.flatnonzero(w > 0)
    if support.size == 0:
        raise ValueError("belief has empty support")
    profits = seller_profits(env, w, env.values[support])
    abs_tol = tol * env.value_range if env.value_range > 0 else tol
    constant = float(profits[0])
    ok = bool(np.ptp(profits) <= abs_tol and profits.min() >= -abs_tol)
    return ok, constant


def _zero_gap(env: Environment) -> NDArray[np.bool_]:
    scale = env.value_range if env.value_range > 0 else 1.0
    return np.abs(env.values - env.costs) < ZERO_GAP_TOL * scale


def greedy_icd(
    env: Environment, top_index: int, support: ArrayLike | None = None
) -> Belief:
    """Build the ICD whose highest support point is ``top_index``.

    Mass is assigned from the top down so that lowering the price to each
    next support point leaves profit unchanged.  ``support`` restricts the
    candidate points (zero-based indices); by default every index up to
    ``top_index`` is used.  If some point below the top has value equal to
    cost, the ICD instead lives on the points up to the smallest such index,
    where every price earns zero.
    """
    if not 0 <= top_index < env.n:
        raise IndexError(f"top_index {top_index} outside 0..{env.n - 1}")
    idx = np.arange(top_index + 1) if support is None else np.asarray(sorted(set(support)), dtype=int)
    idx = idx[idx <= top_index]
    if idx.size == 0 or idx[-1] != top_index:
        idx = np.append(idx, top_index)

    flat = _zero_gap(env)[idx[:-1]]
    if np.any(flat):
        idx = idx[: int(np.flatnonzero(flat)[0]) + 1]

    v, c = env.values, env.costs
    mass = np.zeros(env.n)
    mass[idx[-1]] = 1.0
    above = 1.0
    for pos in range(idx.size - 2, -1, -1):
        i, nxt = idx[pos], idx[pos + 1]
        mass[i] = above * (v[nxt] - v[i]) / (v[i] - c[i])
        above += mass[i]
    return Belief(env, mass / mass.sum())


@dataclass(frozen=True)
class IcdComponent:
    weight: float
    belief: Belief
    constant: float


@dataclass(frozen=True)
class IcdDecomposition:
    """Prior written as a convex combination of ICDs."""

    components: tuple[IcdComponent, ...]

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):  # type: ignore[no-untyped-def]
        return iter(self.components)

    def reconstituted(self) -> NDArray[np.float64]:
        return sum(c.weight * np.asarray(c.belief.weights) for c in self.components)

    def to_dict(self) -> dict[str, Any]:
        return {
            "components": [
                {"q": c.weight, "weights": c.belief.weights.tolist(), "constant": c.constant}
                for c in self.components
            ]
        }


def icd_decompose(env: Environment, tie_tol: float = 1e-12) -> IcdDecomposition:
    """Split the prior into ICDs by repeatedly peeling off the greedy ICD.

    Each round builds the greedy ICD on the residual support (topped at its
    highest point), removes the largest multiple of it that keeps the
    residual nonnegative and zeroes every coordinate that hits zero.
    """
    residual = np.array(env.probs, dtype=float)
    parts: list[IcdComponent] = []
    for _ in range(env.n):
        support = np.flatnonzero(residual > 0)
        if support.size == 0:
            break
        nu = greedy_icd(env, int(support[-1]), support)
        w = np.asarray(nu.weights)
        on = np.flatnonzero(w > 0)
        ratios = residual[on] / w[on]
        q = float(ratios.min())
        residual = residual - q * w
        residual[on[ratios <= q * (1 + tie_tol)]] = 0.0
        residual[residual < 0] = 0.0
        parts.append(IcdComponent(q, nu, is_icd(env, nu)[1]))
    total = sum(p.weight for p in parts)
    parts = [IcdComponent(p.weight / total, p.belief, p.constant) for p in parts]
    return IcdDecomposition(tuple(parts))


# ---------------------------------------------------------------------------
# Affine-cost closed form


class UnboundedSupport(ValueError):
    """No finite upper support point satisfies the mean condition."""


@dataclass(frozen=True)
class AffineIcd:
    """Closed-form ICD for costs ``c(v) = cost_slope * v + cost_intercept``.

    The distribution has a density on ``[v_lo, v_hi)`` and an atom of size
    ``atom_mass`` at ``v_hi``.  Every price in the support earns
    ``v_lo - c(mean)``.
    """

    cost_slope: float
    cost_intercept: float
    v_lo: float
    v_hi: float
    atom_mass: float

    @property
    def is_point_mass(self) -> bool:
        return self.v_hi <= self.v_lo

    def cost(self, v: ArrayLike) -> NDArray[np.float64]:
        return self.cost_slope * np.asarray(v, dtype=float) + self.cost_intercept

    def _log_ratio(self, v: NDArray[np.float64]) -> NDArray[np.float64]:
        a = 1.0 - self.cost_slope
        base = a * self.v_lo - self.cost_intercept
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log((a * v - self.cost_intercept) / base)

    def survival(self, v: ArrayLike) -> NDArray[np.float64]:
        """``1 - G(v)`` from the continuous branch, valid on ``[v_lo, v_hi)``."""
        x = np.asarray(v, dtype=float)
        lam = self.cost_slope
        if lam == 1.0:
            return np.exp((x - self.v_lo) / self.cost_intercept)
        return np.exp(self._log_ratio(x) / (lam - 1.0))

    def cdf(self, v: ArrayLike) -> NDArray[np.float64]:
        x = np.asarray(v, dtype=float)
        if self.is_point_mass:
            return (x >= self.v_lo).astype(float)
        inner = 1.0 - self.survival(np.clip(x, self.v_lo, self.v_hi))
        return np.where(x < self.v_lo, 0.0, np.where(x >= self.v_hi, 1.0, inner))

    def cdf_left(self, v: ArrayLike) -> NDArray[np.float64]:
        """Left limit ``G(v-)``."""
        x = np.asarray(v, dtype=float)
        if self.is_point_mass:
            return (x > self.v_lo).astype(float)
        inner = 1.0 - self.survival(np.clip(x, self.v_lo, self.v_hi))
        return np.where(x <= self.v_lo, 0.0, np.where(x > self.v_hi, 1.0, inner))

    def density(self, v: ArrayLike) -> NDArray[np.float64]:
        """Density of the continuous part on ``(v_lo, v_hi)``."""
        x = np.asarray(v, dtype=float)
        lam, gam = self.cost_slope, self.cost_intercept
        if self.is_point_mass:
            return np.zeros_like(x)
        if lam == 1.0:
            d = -np.exp((x - self.v_lo) / gam) / gam
        else:
            base = (1.0 - lam) * self.v_lo - gam
            d = np.exp(self._log_ratio(x) * (2.0 - lam) / (lam - 1.0)) / base
        return np.where((x > self.v_lo) & (x < self.v_hi), d, 0.0)

    def tail_integral(self, x: float) -> float:
        """``int_{v_lo}^{min(x, v_hi)} (1 - G(s)) ds`` in closed form."""
        if self.is_point_mass or x <= self.v_lo:
            return 0.0
        return _survival_integral(self.cost_slope, self.cost_intercept, self.v_lo, min(x, self.v_hi))

    def integrated_cdf(self, x: float) -> float:
        """``int_{-inf}^{x} G(s) ds``."""
        if x <= self.v_lo:
            return 0.0
        if x >= self.v_hi:
            return x - self.mean
        return (x - self.v_lo) - self.tail_integral(x)

    @property
    def mean(self) -> float:
        return self.v_lo + self.tail_integral(self.v_hi)

    @property
    def constant(self) -> float:
        """Seller profit at any support price."""
        return self.v_lo - float(self.cost(self.mean))

    def seller_profit(self, p: float) -> float:
        """Profit at price ``p`` by quadrature over the density plus the atom.

        Independent of the closed-form indifference constant, so it can be
        used to check it.
        """
        if p > self.v_hi:
            return 0.0
        atom = self.atom_mass * (p - float(self.cost(self.v_hi)))
        lo = max(p, self.v_lo)
        if self.is_point_mass or lo >= self.v_hi:
            return atom
        val, _ = integrate.quad(
            lambda s: (p - float(self.cost(s))) * float(self.density(s)),
            lo,
            self.v_hi,
            epsabs=1e-14,
            epsrel=1e-12,
            limit=200,
        )
        return val + atom

    def cdf_table(self, points: int = 101) -> NDArray[np.float64]:
        """``(v, G(v))`` rows on an even grid over the support."""
        v = np.linspace(self.v_lo, self.v_hi, points)
        return np.column_stack([v, self.cdf(v)])

    def to_dict(self) -> dict[str, float]:
        return {
            "lambda": self.cost_slope,
            "gamma": self.cost_intercept,
            "v_lo": self.v_lo,
            "v_hi": self.v_hi,
            "atom_mass": self.atom_mass,
        }


def _survival_integral(lam: float, gam: float, v_lo: float, x: float) -> float:
    if lam == 1.0:
        return float(gam * math.expm1((x - v_lo) / gam))
    a = 1.0 - lam
    base = a * v_lo - gam
    u = a * x - gam
    if u <= 0.0:
        # upper end of the admissible range when lam > 1: survival hits zero
        return base / lam
    log_w = math.log(u / base)
    if lam == 0.0:
        return base * log_w
    return float(-base * math.expm1(-(lam / a) * log_w) / lam)


def affine_icd(
    cost_slope: float,
    cost_intercept: float,
    v_lo: float,
    prior_mean: float,
    v_support_max: float,
) -> AffineIcd:
    """Closed-form ICD with lower support ``v_lo`` and the given mean.

    The upper support point solves the mean condition by a bracketing root
    search.  Raises :class:`UnboundedSupport` when no finite upper point
    reaches the mean.
    """
    lam, gam = float(cost_slope), float(cost_intercept)
    scale = max(1.0, abs(v_support_max), abs(v_lo))
    if v_lo > prior_mean + 1e-15 * scale:
        raise ValueError("v_lo must not exceed the prior mean")
    if prior_mean - v_lo <= 1e-15 * scale:
        return AffineIcd(lam, gam, prior_mean, prior_mean, 1.0)
    gap = (1.0 - lam) * v_lo - gam
    if gap <= 0.0:
        raise ValueError("the lower support point must have value above cost")
    if lam > 1.0:
        cap = gam / (1.0 - lam)
    else:
        cap = max(v_support_max, v_lo) + 1e6 * scale
    target = prior_mean - v_lo

    def excess(x: float) -> float:
        return _survival_integral(lam, gam, v_lo, x) - target

    if excess(cap) < 0.0:
        raise UnboundedSupport("mean condition has no finite upper support point")
    v_hi = optimize.brentq(excess, v_lo, cap, xtol=1e-15 * scale, rtol=4 * np.finfo(float).eps, maxiter=500)
    proto = AffineIcd(lam, gam, v_lo, v_hi, 0.0)
    atom = float(proto.survival(v_hi)) if v_hi < cap else 0.0
    return AffineIcd(lam, gam, v_lo, float(v_hi), atom)


# ---------------------------------------------------------------------------
# Mean-preserving contractions

Candidate = Union[Belief, AffineIcd]


def _discrete_integrated_cdf(points: NDArray[np.float64], weights: NDArray[np.float64], x: NDArray[np.float64]) -> NDArray[np.float64]:
    return (np.clip(x[:, None] - points[None, :], 0.0, None) * weights[None, :]).sum(axis=1)


def mpc_check(candidate: Candidate, env: Environment, tol: float = 1e-9) -> bool:
    """True when ``candidate`` is a mean-preserving contraction of the prior.

    Integrated CDFs are compared exactly at every kink of either CDF; between
    kinks the difference is convex, so this is a complete test.
    """
    prior_i = lambda x: _discrete_integrated_cdf(env.values, env.probs, x)  # noqa: E731
    if isinstance(candidate, AffineIcd):
        mean_g = candidate.mean
        kinks = np.concatenate([env.values, [candidate.v_lo, candidate.v_hi]])
        cand_i = lambda x: np.array([candidate.integrated_cdf(float(t)) for t in x])  # noqa: E731
    else:
        w = np.asarray(candidate.weights)
        mean_g = candidate.mean
        kinks = np.asarray(env.values, dtype=float)
        cand_i = lambda x: _discrete_integrated_cdf(env.values, w, x)  # noqa: E731
    if abs(mean_g - env.mean_value) > tol:
        return False
    kinks = np.unique(kinks)
    return bool(np.all(cand_i(kinks) - prior_i(kinks) <= tol))


# ---------------------------------------------------------------------------
# Lowest ICD price among contractions of the prior


@dataclass(frozen=True)
class PStar:
    p_star: float
    pi_us: float
    witness: AffineIcd
    clamped: bool


def _affine_witness(env: Environment, slope: float, intercept: float, v_lo: float, tol: float) -> AffineIcd | None:
    try:
        g = affine_icd(slope, intercept, v_lo, env.mean_value, env.v_high)
    except (ValueError, ArithmeticError):
        return None
    return g if mpc_check(g, env, tol) else None


def affine_p_star(env: Environment, mpc_tol: float = 1e-12) -> PStar:
    """Lowest price at which a closed-form ICD is a contraction of the prior.

    Bisects over the lower support point between ``max(v_1, c(E[v]))`` and
    ``E[v]``; feasibility is monotone because the family is ordered by
    contraction.  The uninformed-seller floor is ``p_star - E[c]``.
    """
    fit = affine_cost_fit(env)
    if fit is None:
        raise NonAffineCosts("costs are not affine in values")
    slope, intercept = fit
    mean = env.mean_value
    tol = mpc_tol * env.scale()
    if env.n == 1:
        g = AffineIcd(slope, intercept, mean, mean, 1.0)
        return PStar(mean, mean - env.mean_cost, g, True)
    lo = max(env.v_low, slope * mean + intercept)
    hi = mean
    g_lo = _affine_witness(env, slope, intercept, lo, tol)
    if g_lo is not None:
        return PStar(lo, lo - env.mean_cost, g_lo, True)
    witness = _affine_witness(env, slope, intercept, hi, tol)
    assert witness is not None
    for _ in range(200):
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        g = _affine_witness(env, slope, intercept, mid, tol)
        if g is None:
            lo = mid
        else:
            hi, witness = mid, g
    return PStar(hi, hi - env.mean_cost, witness, False)


@dataclass(frozen=True)
class BinaryRoot:
    p: float
    pi_us: float
    method: str  # "root" or "fallback"


def binary_p(env: Environment) -> BinaryRoot:
    """Two-point prior: solve the indifference equation for the lowest ICD price.

    For slope ``lam != 1`` the equation is
    ``(p - c(p))**(1/(lam-1)) * (p - E[c]) = (v_2 - c(v_2))**(lam/(lam-1))``;
    for ``lam == 1`` the exponential analogue
    ``-gamma * exp((v_2 - p)/gamma) = p - E[c]`` is used.  When the equation
    is an identity or has no root in the bracket the general bisection of
    :func:`affine_p_star` is used instead.
    """
    if env.n != 2:
        raise ValueError("binary_p needs a two-point support")
    v1, v2 = env.values
    c1, c2 = env.costs
    lam = (c2 - c1) / (v2 - v1)
    gam = c1 - lam * v1
    ec = env.mean_cost
    lo = max(ec, v1 - 1e-9 * abs(v1))
    hi = env.mean_value
    top_gap = v2 - c2

    if abs(lam - 1.0) <= 1e-12:
        def h(p: float) -> float:
            return -gam * math.exp((v2 - p) / gam) - (p - ec)
    else:
        def h(p: float) -> float:
            gap, margin = (1 - lam) * p - gam, p - ec
            if gap <= 0 or margin <= 0 or top_gap <= 0:
                return -math.inf if margin <= 0 else math.nan
            return math.log(gap) / (lam - 1) + math.log(margin) - lam / (lam - 1) * math.log(top_gap)

    def fallback() -> BinaryRoot:
        ps = affine_p_star(env)
        return BinaryRoot(ps.p_star, ps.pi_us, "fallback")

    if hi <= lo:
        return fallback()
    h_lo, h_hi = h(lo), h(hi)
    if math.isnan(h_lo) or not math.isfinite(h_hi):
        return fallback()
    if abs(h_hi) <= 1e-12 and abs(h_lo) <= 1e-12:
        return fallback()  # the equation is an identity
    if h_hi == 0.0:
        return BinaryRoot(float(hi), float(max(hi, v1) - ec), "root")
    if (h_lo < 0) == (h_hi < 0):
        return fallback()
    rising = h_hi > 0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if (h(mid) > 0) == rising:
            hi = mid
        else:
            lo = mid
    p = 0.5 * (lo + hi)
    return BinaryRoot(float(p), float(max(p, v1) - ec), "root")


def verify_linear_identities(
    prior: Belief,
    other: Candidate,
    p: float,
    cost_slope: float,
    cost_intercept: float,
) -> tuple[float, float]:
    """Residuals of the integration-by-parts identity for both distributions.

    For a distribution ``H`` on ``[., v_bar]`` and affine cost ``c``::

        lam * int_p^{v_bar} H = int_{[p, v_bar]} (p - c(s)) dH
                                - (1 - H(p-)) (p - c(p)) + lam (v_bar - p)

    The left side uses the integrated CDF and the right side the profit
    integral, so the residual checks the two computations against each other.
    """
    env = prior.env
    lam, gam = cost_slope, cost_intercept
    v_bar = env.v_high
    if isinstance(other, AffineIcd):
        v_bar = max(v_bar, other.v_hi)
    cost_p = lam * p + gam

    def discrete_residual(points: NDArray[np.float64], weights: NDArray[np.float64]) -> float:
        grid = np.array([p, v_bar])
        ints = _discrete_integrated_cdf(points, weights, grid)
        lhs = lam * (ints[1] - ints[0])
        below = weights[points < p].sum()
        upper = points >= p
        profit = float(((p - (lam * points[upper] + gam)) * weights[upper]).sum())
        rhs = profit - (1.0 - below) * (p - cost_p) + lam * (v_bar - p)
        return float(lhs - rhs)

    r_prior = discrete_residual(env.values, np.asarray(prior.weights))
    if isinstance(other, AffineIcd):
        lhs = lam * (other.integrated_cdf(v_bar) - other.integrated_cdf(p))
        rhs = other.seller_profit(p) - (1.0 - float(other.cdf_left(p))) * (p - cost_p) + lam * (v_bar - p)
        r_other = float(lhs - rhs)
    else:
        r_other = discrete_residual(other.env.values, np.asarray(other.weights))
    return r_prior, r_other
