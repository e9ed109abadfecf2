"""Seller payoff floors and the polygons of implementable payoff pairs.

Payoff pairs are written ``(pi_b, pi_s)``: buyer's ex-ante payoff first,
seller's second.  All regions are convex polygons stored counterclockwise.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, NamedTuple

import numpy as np
from numpy.typing import NDArray

from .environment import Environment, affine_cost_fit, surplus
from .icd import AffineIcd, affine_p_star, seller_profits

if TYPE_CHECKING:
    from .equilibrium import SearchConfig, SearchResult

CLIP_TOL = 1e-12
DEFAULT_WELFARE_WEIGHTS: tuple[float, ...] = (1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0, 100.0, 1e4, 1e6)


class PayoffPoint(NamedTuple):
    pi_b: float
    pi_s: float


@dataclass(frozen=True)
class PayoffRegion:
    """Convex polygon of payoff pairs with optional corner labels."""

    vertices: tuple[PayoffPoint, ...]
    kind: str
    labels: dict[str, int] = field(default_factory=dict)

    def as_array(self) -> NDArray[np.float64]:
        return np.array(self.vertices, dtype=float).reshape(-1, 2)

    def contains(self, point: Sequence[float], tol: float = 1e-9) -> bool:
        return contains(self, point, tol)

    def corner(self, label: str) -> PayoffPoint:
        return self.vertices[self.labels[label]]

    def max_pi_b_at(self, pi_s: float) -> float:
        """Largest buyer payoff on the horizontal line through ``pi_s``."""
        pts = self.as_array()
        best = -np.inf
        m = len(pts)
        for k in range(m):
            a, b = pts[k], pts[(k + 1) % m]
            if abs(a[1] - pi_s) <= CLIP_TOL:
                best = max(best, a[0])
            lo, hi = sorted((a[1], b[1]))
            if lo < pi_s < hi:
                t = (pi_s - a[1]) / (b[1] - a[1])
                best = max(best, a[0] + t * (b[0] - a[0]))
        if best == -np.inf:
            raise ValueError(f"pi_s={pi_s} does not meet the region")
        return float(best)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "vertices": [[float(x), float(y)] for x, y in self.vertices],
            "labels": dict(self.labels),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["pi_b", "pi_s"])
        for x, y in self.vertices:
            writer.writerow([repr(float(x)), repr(float(y))])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Floors


def seller_guarantee(env: Environment) -> float:
    """Profit the seller secures by pricing at the lowest value."""
    return max(env.v_low - env.mean_cost, 0.0)


def seller_floor_fb(env: Environment, tol: float = 1e-12) -> tuple[float, tuple[float, ...]]:
    """Monopoly profit against a buyer who knows the value, with the argmax prices."""
    profits = seller_profits(env, env.probs, env.values)
    best = float(profits.max())
    prices = tuple(float(v) for v in env.values[profits >= best - tol * env.scale()])
    return best, prices


@dataclass(frozen=True)
class UninformedFloor:
    """Seller floor when the seller observes nothing.

    ``exact`` is True when ``value`` is the closed-form floor; otherwise
    ``value`` is a certified upper bound and ``lower_bound`` the seller's
    guarantee.
    """

    value: float
    exact: bool
    lower_bound: float
    p_star: float | None = None
    witness: AffineIcd | SearchResult | None = None

    @property
    def flag(self) -> str:
        return "exact" if self.exact else "upper_bound"

    @property
    def gap(self) -> float:
        return self.value - self.lower_bound


def seller_floor_us(env: Environment, config: SearchConfig | None = None) -> UninformedFloor:
    """Lowest seller payoff over buyer-side information structures.

    Exact under affine costs; otherwise the best certified value found by
    :func:`infotrade.equilibrium.min_seller_profit_search`.
    """
    guarantee = seller_guarantee(env)
    if env.n == 1:
        value = env.v_low - env.mean_cost
        return UninformedFloor(value, True, value, env.v_low)
    if affine_cost_fit(env) is not None:
        ps = affine_p_star(env)
        return UninformedFloor(ps.pi_us, True, ps.pi_us, ps.p_star, ps.witness)
    from .equilibrium import min_seller_profit_search

    result = min_seller_profit_search(env, config)
    return UninformedFloor(result.upper_bound, False, guarantee, None, result)


# ---------------------------------------------------------------------------
# Polygon clipping


def _cross(o: NDArray[np.float64], a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def clip_halfplane(poly: NDArray[np.float64], normal: Sequence[float], offset: float, tol: float = CLIP_TOL) -> NDArray[np.float64]:
    """Intersect a convex polygon with ``normal . x <= offset``."""
    if len(poly) == 0:
        return poly
    nrm = np.asarray(normal, dtype=float)
    slack = offset - poly @ nrm
    inside = slack >= -tol
    out: list[NDArray[np.float64]] = []
    m = len(poly)
    for k in range(m):
        cur, nxt = poly[k], poly[(k + 1) % m]
        if inside[k]:
            out.append(cur)
        if m > 1 and inside[k] != inside[(k + 1) % m]:
            t = slack[k] / (slack[k] - slack[(k + 1) % m])
            out.append(cur + t * (nxt - cur))
    return _dedupe(np.array(out).reshape(-1, 2))


def _dedupe(poly: NDArray[np.float64], tol: float = CLIP_TOL) -> NDArray[np.float64]:
    if len(poly) == 0:
        return poly
    keep = [poly[0]]
    for pt in poly[1:]:
        if np.max(np.abs(pt - keep[-1])) > tol:
            keep.append(pt)
    while len(keep) > 1 and np.max(np.abs(keep[0] - keep[-1])) <= tol:
        keep.pop()
    # drop collinear middle points
    changed = True
    while changed and len(keep) > 2:
        changed = False
        for k in range(len(keep)):
            a, b, c = keep[k - 1], keep[k], keep[(k + 1) % len(keep)]
            if abs(_cross(a, b, c)) <= tol * max(1.0, float(np.max(np.abs([a, b, c])))):
                keep.pop(k)
                changed = True
                break
    return np.array(keep)


def _region(poly: NDArray[np.float64], kind: str, named: dict[str, tuple[float, float]]) -> PayoffRegion:
    verts = tuple(PayoffPoint(float(x), float(y)) for x, y in poly)
    labels: dict[str, int] = {}
    for name, pt in named.items():
        for k, v in enumerate(verts):
            if abs(v.pi_b - pt[0]) <= 1e-9 and abs(v.pi_s - pt[1]) <= 1e-9:
                labels[name] = k
                break
    return PayoffRegion(verts, kind, labels)


def _triangle(env: Environment, floor: float, kind: str, low_left: str, low_right: str) -> PayoffRegion:
    s = surplus(env)
    top = (0.0, s)
    left = (0.0, floor)
    right = (s - floor, floor)
    poly = _dedupe(np.array([left, right, top], dtype=float))
    return _region(poly, kind, {"A": top, low_left: left, low_right: right})


def region_all(env: Environment) -> PayoffRegion:
    """Payoffs reachable by some information structure and equilibrium."""
    return _triangle(env, seller_guarantee(env), "triangle_all", "F", "G")


def region_us(env: Environment, floor: UninformedFloor | float | None = None) -> PayoffRegion:
    """Region for buyer-side information with price-independent beliefs.

    Pass a precomputed ``floor`` to avoid repeating the search for
    non-affine costs.
    """
    if floor is None:
        floor = seller_floor_us(env)
    value = floor.value if isinstance(floor, UninformedFloor) else float(floor)
    return _triangle(env, max(value, seller_guarantee(env)), "triangle_us", "D", "E")


def region_fb(env: Environment) -> PayoffRegion:
    """Region when the buyer learns the value exactly."""
    return _triangle(env, seller_floor_fb(env)[0], "triangle_fb", "B", "C")


def contains(region: PayoffRegion, point: Sequence[float], tol: float = 1e-9) -> bool:
    """Membership with tolerance ``tol`` (distance for degenerate regions)."""
    x = np.asarray(point, dtype=float)
    pts = region.as_array()
    if len(pts) == 1:
        return bool(np.linalg.norm(x - pts[0]) <= tol)
    if len(pts) == 2:
        return bool(_segment_distance(x, pts[0], pts[1]) <= tol)
    m = len(pts)
    for k in range(m):
        a, b = pts[k], pts[(k + 1) % m]
        edge = b - a
        if _cross(a, b, x) < -tol * float(np.linalg.norm(edge)):
            return False
    return True


def _segment_distance(x: NDArray[np.float64], a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    d = b - a
    t = float(np.clip((x - a) @ d / (d @ d), 0.0, 1.0)) if d @ d > 0 else 0.0
    return float(np.linalg.norm(x - (a + t * d)))


def distance_to_region(region: PayoffRegion, point: Sequence[float]) -> float:
    """Euclidean distance from ``point`` to the polygon (0 inside)."""
    if contains(region, point, 0.0):
        return 0.0
    x = np.asarray(point, dtype=float)
    pts = region.as_array()
    if len(pts) == 1:
        return float(np.linalg.norm(x - pts[0]))
    m = len(pts)
    return min(_segment_distance(x, pts[k], pts[(k + 1) % m]) for k in range(m))


def region_within(inner: PayoffRegion, outer: PayoffRegion, tol: float = 1e-9) -> bool:
    """Polygon inclusion for convex regions: every inner vertex lies in outer."""
    return all(contains(outer, v, tol) for v in inner.vertices)


def lattice(region: PayoffRegion, per_edge: int) -> list[PayoffPoint]:
    """Triangular lattice of a triangle region (``per_edge`` points per side).

    Degenerate regions return their vertices.
    """
    pts = region.as_array()
    if len(pts) < 3 or per_edge < 2:
        return [PayoffPoint(float(x), float(y)) for x, y in pts]
    a, b, c = pts[:3]
    out = []
    k = per_edge - 1
    for i in range(per_edge):
        for j in range(per_edge - i):
            w_b, w_c = i / k, j / k
            p = a + w_b * (b - a) + w_c * (c - a)
            out.append(PayoffPoint(float(p[0]), float(p[1])))
    return out


# ---------------------------------------------------------------------------
# Environments where trade can destroy surplus


def s_lambda(env: Environment, welfare_weight: float) -> float:
    """Best weighted payoff ``welfare_weight * pi_b + pi_s`` bound."""
    if welfare_weight < 1:
        raise ValueError("welfare_weight must be at least 1")
    inner = env.v_low - env.costs + welfare_weight * (env.values - env.v_low)
    return float(env.probs @ np.maximum(inner, 0.0))


def pi_hat_s(env: Environment) -> float:
    """Seller profit from selling at the lowest value to every efficient type."""
    efficient = env.values >= env.costs
    return max(float(env.probs[efficient] @ (env.v_low - env.costs[efficient])), 0.0)


def region_negative(env: Environment, welfare_weights: Sequence[float] = DEFAULT_WELFARE_WEIGHTS) -> PayoffRegion:
    """Intersection of the weighted-payoff half-planes over a weight grid."""
    grid = np.asarray(welfare_weights, dtype=float)
    if grid.size == 0 or np.any(grid < 1) or np.any(np.diff(grid) <= 0):
        raise ValueError("welfare weights must be increasing and at least 1")
    floor = seller_guarantee(env)
    s1 = s_lambda(env, 1.0)
    if floor > s1 + CLIP_TOL:
        raise ValueError("empty region: seller guarantee exceeds the efficient surplus")
    big = 2.0 * max(1.0, s1, abs(floor)) + 1.0
    poly = np.array([[0.0, floor], [big, floor], [big, big], [0.0, big]])
    for w in grid:
        poly = clip_halfplane(poly, (w, 1.0), s_lambda(env, float(w)))
    if len(poly) == 0:
        raise ValueError("empty intersection")
    named = {"A": (0.0, s1)}
    return _region(poly, "negative_envelope", named)
