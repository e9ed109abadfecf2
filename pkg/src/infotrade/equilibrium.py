"""Payoffs, equilibrium verification and best responses on finite games.

Every check is an exact finite sum over (seller signal, buyer signal, value,
grid price).  Seller optimality is judged per seller signal using expected
profit conditional on that signal.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize, sparse

from .environment import Environment
from .game import InformationStructure, StrategyProfile, TrembleSchedule
from .geometry import PayoffPoint, seller_guarantee

TIE_TOL = 1e-12


def _trade_mass(structure: InformationStructure, sigma: NDArray[np.float64]) -> NDArray[np.float64]:
    """``M[k, b, i] = sum_s P(s, b, v_i) sigma(k | s)``."""
    return np.einsum("sbi,sk->kbi", structure.joint, sigma)


def payoffs(env: Environment, structure: InformationStructure, profile: StrategyProfile) -> PayoffPoint:
    """Ex-ante buyer and seller payoffs of a profile."""
    profile.check_against(structure)
    traded = _trade_mass(structure, profile.sigma) * profile.alpha[:, :, None]
    by_price_value = traded.sum(axis=1)  # K x n
    p = profile.grid[:, None]
    pi_b = float((by_price_value * (env.values[None, :] - p)).sum())
    pi_s = float((by_price_value * (p - env.costs[None, :])).sum())
    return PayoffPoint(pi_b, pi_s)


def seller_profit_table(
    env: Environment, structure: InformationStructure, alpha: ArrayLike, grid: ArrayLike
) -> NDArray[np.float64]:
    """Expected profit per (seller signal, grid price), conditional on the signal.

    Rows of zero-probability seller signals are zero.
    """
    a = np.asarray(alpha, dtype=float)
    g = np.asarray(grid, dtype=float)
    margin = g[:, None] - env.costs[None, :]  # K x n
    raw = np.einsum("sbi,kb,ki->sk", structure.joint, a, margin)
    mass = structure.seller_mass[:, None]
    return np.divide(raw, mass, out=np.zeros_like(raw), where=mass > 0)


def seller_best_response_value(
    env: Environment, structure: InformationStructure, alpha: ArrayLike, grid: ArrayLike
) -> NDArray[np.float64]:
    """Best conditional profit per seller signal over the grid."""
    return seller_profit_table(env, structure, alpha, grid).max(axis=1)


def buyer_best_response(
    structure: InformationStructure, grid: ArrayLike, tie: str = "accept"
) -> NDArray[np.float64]:
    """Accept iff the posterior mean beats the price, with beliefs ``P(v | t_b)``."""
    if tie not in ("accept", "reject"):
        raise ValueError("tie must be 'accept' or 'reject'")
    g = np.asarray(grid, dtype=float)[:, None]
    means = structure.buyer_means()[None, :]
    slack = TIE_TOL * np.maximum(1.0, np.abs(g))
    if tie == "accept":
        return (means >= g - slack).astype(float)
    return (means > g + slack).astype(float)


def default_grid(env: Environment, prices: ArrayLike = ()) -> NDArray[np.float64]:
    """Support values, the given prices and one sentinel below and above."""
    h = 1e-3 * env.value_range if env.value_range > 0 else 1e-3
    pts = np.concatenate([env.values, np.asarray(prices, dtype=float).ravel(), [env.v_low - h, env.v_high + h]])
    return np.unique(pts)


def price_independent_profile(
    env: Environment,
    structure: InformationStructure,
    grid: ArrayLike | None = None,
    tie: str = "accept",
) -> StrategyProfile:
    """Best-response profile with beliefs ``P(v | t_b)`` at every price.

    Each seller signal posts its lowest profit-maximizing grid price.  The
    result is an equilibrium whenever the buyer's signal is sufficient for
    the seller's (values independent of seller signals given buyer signals).
    """
    g = default_grid(env, structure.buyer_means()[structure.buyer_mass > 0]) if grid is None else np.asarray(grid, dtype=float)
    alpha = buyer_best_response(structure, g, tie)
    table = seller_profit_table(env, structure, alpha, g)
    sigma = np.zeros((len(structure.seller_signals), g.size))
    sigma[np.arange(sigma.shape[0]), table.argmax(axis=1)] = 1.0
    post = structure.buyer_posteriors()
    post[structure.buyer_mass <= 0] = env.probs
    beliefs = np.broadcast_to(post, (g.size,) + post.shape).copy()
    return StrategyProfile(g, sigma, alpha, beliefs)


# ---------------------------------------------------------------------------
# Verification


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of the equilibrium checks; every gap is nonnegative."""

    tol: float
    buyer_optimal: bool
    buyer_gap: float
    buyer_worst: tuple[float, str] | None
    seller_optimal: bool
    seller_gaps: tuple[float, ...]
    bayes_on_path: bool
    bayes_gap: float
    bayes_worst: tuple[float, str] | None
    price_independent: bool | None = None
    price_gap: float | None = None
    consistency: bool | None = None
    consistency_trace: tuple[tuple[int, float], ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        flags = [self.buyer_optimal, self.seller_optimal, self.bayes_on_path]
        flags += [f for f in (self.price_independent, self.consistency) if f is not None]
        return all(flags)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "ok": self.ok,
            "tol": self.tol,
            "buyer_optimal": {"ok": self.buyer_optimal, "gap": self.buyer_gap, "worst": self.buyer_worst},
            "seller_optimal": {"ok": self.seller_optimal, "gaps": list(self.seller_gaps)},
            "bayes_on_path": {"ok": self.bayes_on_path, "gap": self.bayes_gap, "worst": self.bayes_worst},
        }
        if self.price_independent is not None:
            out["price_independent"] = {"ok": self.price_independent, "gap": self.price_gap}
        if self.consistency is not None:
            out["consistency"] = {
                "ok": self.consistency,
                "trace": [{"n": n, "distance": d} for n, d in self.consistency_trace],
            }
        return out


def _tv(a: NDArray[np.float64], b: NDArray[np.float64]) -> NDArray[np.float64]:
    return 0.5 * np.abs(a - b).sum(axis=-1)


def verify_wpbe(
    env: Environment, structure: InformationStructure, profile: StrategyProfile, tol: float = 1e-9
) -> VerificationReport:
    """Check buyer optimality, seller optimality and Bayes' rule on path."""
    profile.check_against(structure)
    grid, alpha, beliefs = profile.grid, profile.alpha, profile.beliefs
    labels = structure.buyer_signals

    means = beliefs @ env.values  # K x B
    p = grid[:, None]
    buyer_gaps = alpha * np.maximum(p - means, 0.0) + (1.0 - alpha) * np.maximum(means - p, 0.0)
    k_b, b_b = np.unravel_index(int(buyer_gaps.argmax()), buyer_gaps.shape)
    buyer_gap = float(buyer_gaps[k_b, b_b])

    table = seller_profit_table(env, structure, alpha, grid)
    realized = (table * profile.sigma).sum(axis=1)
    seller_gaps = np.maximum(table.max(axis=1) - realized, 0.0)
    seller_gaps[structure.seller_mass <= 0] = 0.0

    mass = _trade_mass(structure, profile.sigma)  # K x B x n
    cell = mass.sum(axis=2)
    on_path = cell > tol / grid.size
    post = np.divide(mass, cell[:, :, None], out=np.zeros_like(mass), where=cell[:, :, None] > 0)
    tv = np.where(on_path, _tv(post, beliefs), 0.0)
    k_t, b_t = np.unravel_index(int(tv.argmax()), tv.shape)
    bayes_gap = float(tv[k_t, b_t])

    return VerificationReport(
        tol=tol,
        buyer_optimal=buyer_gap <= tol,
        buyer_gap=buyer_gap,
        buyer_worst=(float(grid[k_b]), labels[b_b]) if buyer_gap > 0 else None,
        seller_optimal=bool(np.all(seller_gaps <= tol)),
        seller_gaps=tuple(float(x) for x in seller_gaps),
        bayes_on_path=bayes_gap <= tol,
        bayes_gap=bayes_gap,
        bayes_worst=(float(grid[k_t]), labels[b_t]) if bayes_gap > 0 else None,
    )


@dataclass(frozen=True)
class PriceIndependence:
    ok: bool
    gap: float


def verify_price_independent(
    structure: InformationStructure, profile: StrategyProfile, tol: float = 1e-9
) -> PriceIndependence:
    """Compare every belief with the buyer-signal posterior ``P(v | t_b)``."""
    profile.check_against(structure)
    post = structure.buyer_posteriors()
    live = structure.buyer_mass > 0
    tv = _tv(profile.beliefs[:, live, :], post[None, live, :])
    gap = float(tv.max()) if tv.size else 0.0
    return PriceIndependence(gap <= tol, gap)


def with_price_independence(
    report: VerificationReport, structure: InformationStructure, profile: StrategyProfile
) -> VerificationReport:
    pi = verify_price_independent(structure, profile, report.tol)
    return _replace(report, price_independent=pi.ok, price_gap=pi.gap)


def _replace(report: VerificationReport, **changes: Any) -> VerificationReport:
    from dataclasses import replace

    return replace(report, **changes)


def tremble_distances(
    structure: InformationStructure,
    profile: StrategyProfile,
    trembles: TrembleSchedule,
    n_list: Sequence[int],
) -> list[tuple[int, float]]:
    """Worst total-variation distance between beliefs and tremble posteriors."""
    live = structure.buyer_mass > 0
    out = []
    for n in n_list:
        sig = trembles.strategy(profile.sigma, int(n))
        mass = _trade_mass(structure, sig)[:, live, :]
        cell = mass.sum(axis=2, keepdims=True)
        post = np.divide(mass, cell, out=np.zeros_like(mass), where=cell > 0)
        dist = _tv(post, profile.beliefs[:, live, :])
        out.append((int(n), float(dist.max()) if dist.size else 0.0))
    return out


def verify_sequential(
    env: Environment,
    structure: InformationStructure,
    profile: StrategyProfile,
    trembles: TrembleSchedule,
    n_list: Sequence[int] = (10, 100, 10_000),
    tol: float = 1e-9,
    consistency_tol: float = 1e-6,
) -> VerificationReport:
    """wPBE checks plus convergence of tremble posteriors to the beliefs.

    Consistency holds when the distance sequence is nonincreasing in ``n``
    and the last distance is at most ``consistency_tol``.
    """
    report = verify_wpbe(env, structure, profile, tol)
    trace = tremble_distances(structure, profile, trembles, sorted(n_list))
    dists = [d for _, d in trace]
    monotone = all(b <= a + 1e-15 for a, b in zip(dists, dists[1:]))
    ok = monotone and bool(dists) and dists[-1] <= consistency_tol
    return _replace(report, consistency=ok, consistency_trace=tuple(trace))


# ---------------------------------------------------------------------------
# Searching for structures that hold the uninformed seller down


@dataclass(frozen=True)
class SearchConfig:
    """Settings for :func:`min_seller_profit_search`.

    Attributes:
        segments: number of candidate posterior means per round.
        price_grid: optional explicit candidate means for the first round.
        restarts: extra rounds, each halving the candidate spacing next to
            the means used by the previous round.
    """

    segments: int = 64
    price_grid: tuple[float, ...] | None = None
    restarts: int = 2


@dataclass(frozen=True)
class SearchResult:
    upper_bound: float
    lower_bound: float
    structure: InformationStructure
    profile: StrategyProfile
    report: VerificationReport
    rounds: tuple[float, ...]


def _segment_lp(env: Environment, means: NDArray[np.float64]) -> NDArray[np.float64] | None:
    """Minimize the seller's best profit over splits of the prior into segments.

    Segment ``k`` must have posterior mean ``means[k]`` (or be empty).  Under
    tie-accepting buyers the seller's best price is one of the means, and the
    profit there is linear in the split, so the problem is an LP.
    """
    m, n = means.size, env.n
    nx = m * n
    v, c = env.values, env.costs

    rows, cols, vals = [], [], []
    for i in range(n):
        rows += [i] * m
        cols += [k * n + i for k in range(m)]
        vals += [1.0] * m
    for k in range(m):
        rows += [n + k] * n
        cols += [k * n + i for i in range(n)]
        vals += list(v - means[k])
    a_eq = sparse.csr_matrix((vals, (rows, cols)), shape=(n + m, nx + 1))
    b_eq = np.concatenate([env.probs, np.zeros(m)])

    k_idx, i_idx = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    rows, cols, vals = [], [], []
    for j in range(m):
        mask = k_idx >= j
        cols.append((k_idx * n + i_idx)[mask])
        vals.append((means[j] - c[i_idx])[mask])
        rows.append(np.full(mask.sum(), j))
    rows.append(np.arange(m))
    cols.append(np.full(m, nx))
    vals.append(np.full(m, -1.0))
    a_ub = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, nx + 1)
    )
    cost = np.zeros(nx + 1)
    cost[-1] = 1.0
    bounds = [(0, None)] * nx + [(0, None)]
    res = optimize.linprog(cost, A_ub=a_ub, b_ub=np.zeros(m), A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    return np.clip(res.x[:nx].reshape(m, n), 0.0, None)


def segmented_structure(env: Environment, split: ArrayLike, drop_below: float = 1e-13) -> InformationStructure:
    """Uninformed-seller structure whose buyer signals are the rows of ``split``.

    Rows with negligible mass are dropped and columns are rescaled so the
    value marginal matches the prior exactly.
    """
    x = np.asarray(split, dtype=float)
    x = x[x.sum(axis=1) > drop_below]
    x = x * (env.probs / x.sum(axis=0))[None, :]
    labels = tuple(f"m{k}" for k in range(x.shape[0]))
    return InformationStructure(env, ("none",), labels, x[None, :, :])


def min_seller_profit_search(env: Environment, config: SearchConfig | None = None) -> SearchResult:
    """Search buyer-side structures that minimize the uninformed seller's profit.

    Each round fixes candidate posterior means, solves the segment LP and
    certifies the resulting structure with a tie-accepting best-response
    profile.  The best certified seller payoff is an upper bound on the
    floor; the seller guarantee is reported as the lower bound.
    """
    cfg = config or SearchConfig()
    if cfg.segments < 1:
        raise ValueError("config needs at least one segment")
    lo_bound = seller_guarantee(env)
    if env.n == 1:
        structure = InformationStructure(env, ("none",), ("m0",), env.probs[None, None, :])
        profile = price_independent_profile(env, structure)
        rep = verify_wpbe(env, structure, profile)
        val = payoffs(env, structure, profile).pi_s
        return SearchResult(val, lo_bound, structure, profile, rep, (val,))

    if cfg.price_grid is not None:
        means = np.asarray(cfg.price_grid, dtype=float)
    else:
        means = np.linspace(env.v_low, env.v_high, cfg.segments)
    best: tuple[float, InformationStructure, StrategyProfile, VerificationReport] | None = None
    history: list[float] = []
    for _ in range(cfg.restarts + 1):
        cand = np.unique(np.concatenate([env.values, means[(means >= env.v_low) & (means <= env.v_high)]]))
        split = _segment_lp(env, cand)
        if split is None:
            break
        structure = segmented_structure(env, split)
        profile = price_independent_profile(env, structure)
        report = verify_wpbe(env, structure, profile)
        value = payoffs(env, structure, profile).pi_s
        history.append(value)
        if report.ok and (best is None or value < best[0] - 1e-15):
            best = (value, structure, profile, report)
        # refine: halve the spacing next to every mean the LP used
        active = structure.buyer_means()
        used = np.isin(np.round(cand, 12), np.round(active, 12))
        near = used[:-1] | used[1:]
        means = np.concatenate([cand, 0.5 * (cand[:-1] + cand[1:])[near]])
    if best is None:
        # full revelation to the buyer is always an equilibrium structure
        structure = segmented_structure(env, np.diag(env.probs))
        profile = price_independent_profile(env, structure)
        report = verify_wpbe(env, structure, profile)
        best = (payoffs(env, structure, profile).pi_s, structure, profile, report)
    value, structure, profile, report = best
    return SearchResult(value, lo_bound, structure, profile, report, tuple(history))
