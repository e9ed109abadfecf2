"""Trading environments with finitely many buyer values.

An environment fixes the buyer's possible values ``v_1 < ... < v_n``, their
prior probabilities and the seller's cost of serving each value.  Beliefs are
probability vectors over the same support.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidEnvironment

MERGE_TOL = 1e-12
SUM_TOL = 1e-9


def _frozen(a: ArrayLike) -> NDArray[np.float64]:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Environment:
    """Finite-support environment: values, prior and cost per value.

    Build instances with :meth:`from_arrays` (or :func:`load_environment`),
    which validates, merges near-duplicate values and normalizes the prior.
    """

    values: NDArray[np.float64]
    probs: NDArray[np.float64]
    costs: NDArray[np.float64]
    name: str | None = None

    def __post_init__(self) -> None:
        for attr in ("values", "probs", "costs"):
            object.__setattr__(self, attr, _frozen(getattr(self, attr)))
        v, p, c = self.values, self.probs, self.costs
        if v.ndim != 1 or v.size == 0:
            raise InvalidEnvironment("values must be a non-empty list")
        if p.shape != v.shape or c.shape != v.shape:
            raise InvalidEnvironment("values, probs and costs must have equal length")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(p)) and np.all(np.isfinite(c))):
            raise InvalidEnvironment("all entries must be finite numbers")
        if np.any(np.diff(v) <= 0):
            raise InvalidEnvironment("values must be strictly increasing")
        if np.any(p <= 0):
            raise InvalidEnvironment("probabilities must be positive")
        if abs(p.sum() - 1.0) > MERGE_TOL:
            raise InvalidEnvironment(f"probabilities sum to {p.sum()!r}, not 1")

    @classmethod
    def from_arrays(
        cls,
        values: ArrayLike,
        probs: ArrayLike,
        costs: ArrayLike,
        name: str | None = None,
    ) -> Environment:
        """Validate raw arrays and build an environment.

        Values closer than 1e-12 are merged into one support point whose cost
        is the probability-weighted mean.  A probability sum within 1e-9 of
        one is renormalized; anything further off is rejected.
        """
        v = np.atleast_1d(np.asarray(values, dtype=float))
        p = np.atleast_1d(np.asarray(probs, dtype=float))
        c = np.atleast_1d(np.asarray(costs, dtype=float))
        if v.ndim != 1 or v.size == 0:
            raise InvalidEnvironment("values must be a non-empty list")
        if p.shape != v.shape or c.shape != v.shape:
            raise InvalidEnvironment("values, probs and costs must have equal length")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(p)) and np.all(np.isfinite(c))):
            raise InvalidEnvironment("all entries must be finite numbers")
        if np.any(p <= 0):
            raise InvalidEnvironment("probabilities must be positive")
        gaps = np.diff(v)
        if np.any(gaps < -MERGE_TOL):
            raise InvalidEnvironment("values must be increasing")
        total = p.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise InvalidEnvironment(f"probabilities sum to {total!r}, not 1")

        groups = [[0]]
        for i in range(1, v.size):
            if abs(v[i] - v[groups[-1][0]]) <= MERGE_TOL:
                groups[-1].append(i)
            else:
                groups.append([i])
        mv = np.array([v[g[0]] for g in groups])
        mp = np.array([p[g].sum() for g in groups])
        # unmerged points keep their cost exactly, so c == v survives the round trip
        mc = np.array([c[g[0]] if len(g) == 1 else p[g] @ c[g] / p[g].sum() for g in groups])
        return cls(mv, mp / mp.sum(), mc, name)

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def v_low(self) -> float:
        return float(self.values[0])

    @property
    def v_high(self) -> float:
        return float(self.values[-1])

    @property
    def value_range(self) -> float:
        return self.v_high - self.v_low

    @property
    def mean_value(self) -> float:
        return float(self.probs @ self.values)

    @property
    def mean_cost(self) -> float:
        return float(self.probs @ self.costs)

    @property
    def gains_from_trade(self) -> bool:
        """True when every value covers its cost and expected surplus is positive."""
        return bool(np.all(self.costs <= self.values) and surplus(self) > 0)

    def scale(self) -> float:
        """A positive magnitude for relative tolerances."""
        return max(1.0, float(np.max(np.abs(self.values))), float(np.max(np.abs(self.costs))))

    def index_of(self, value: float, tol: float = MERGE_TOL) -> int:
        hits = np.flatnonzero(np.abs(self.values - value) <= tol)
        if hits.size == 0:
            raise KeyError(f"{value!r} is not a support value")
        return int(hits[0])

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "values": self.values.tolist(),
            "probs": self.probs.tolist(),
            "costs": self.costs.tolist(),
        }
        if self.name is not None:
            doc["name"] = self.name
        return doc

    def __repr__(self) -> str:
        label = f"{self.name!r}, " if self.name else ""
        return (
            f"Environment({label}values={self.values.tolist()}, "
            f"probs={self.probs.tolist()}, costs={self.costs.tolist()})"
        )


@dataclass(frozen=True, eq=False)
class Belief:
    """Probability vector over an environment's support."""

    env: Environment
    weights: NDArray[np.float64] = field(repr=False)

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.env.n,):
            raise ValueError(f"belief needs {self.env.n} weights, got shape {w.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("belief weights must be finite and nonnegative")
        total = w.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"belief weights sum to {total!r}, not 1")
        object.__setattr__(self, "weights", _frozen(w / total))

    @classmethod
    def point_mass(cls, env: Environment, index: int) -> Belief:
        w = np.zeros(env.n)
        w[index] = 1.0
        return cls(env, w)

    @classmethod
    def prior(cls, env: Environment) -> Belief:
        return cls(env, env.probs)

    @classmethod
    def normalized(cls, env: Environment, mass: ArrayLike) -> Belief:
        """Belief proportional to a nonnegative mass vector."""
        m = np.clip(np.asarray(mass, dtype=float), 0.0, None)
        total = m.sum()
        if total <= 0:
            raise ValueError("cannot normalize a zero mass vector")
        return cls(env, m / total)

    @property
    def mean(self) -> float:
        return float(self.weights @ self.env.values)

    @property
    def mean_cost(self) -> float:
        return float(self.weights @ self.env.costs)

    @property
    def support(self) -> NDArray[np.intp]:
        return np.flatnonzero(self.weights > 0)

    def __repr__(self) -> str:
        return f"Belief({np.round(self.weights, 12).tolist()})"


def surplus(env: Environment) -> float:
    """Expected gains from trade when every buyer type trades."""
    return float(env.probs @ (env.values - env.costs))


def affine_cost_fit(env: Environment, tol: float = 1e-10) -> tuple[float, float] | None:
    """Return ``(slope, intercept)`` if costs are affine in values, else None.

    The line is fitted through the extreme support points and every other
    cost must lie on it within ``tol`` times the environment scale.
    """
    v, c = env.values, env.costs
    if env.n == 1:
        return 0.0, float(c[0])
    slope = (c[-1] - c[0]) / (v[-1] - v[0])
    intercept = c[0] - slope * v[0]
    if np.max(np.abs(slope * v + intercept - c)) > tol * env.scale():
        return None
    return float(slope), float(intercept)


def _require_keys(doc: Mapping[str, Any], keys: Iterable[str]) -> None:
    missing = [k for k in keys if k not in doc]
    if missing:
        raise InvalidEnvironment(f"environment document is missing keys {missing}")


def _number_list(doc: Mapping[str, Any], key: str) -> list[float]:
    raw = doc[key]
    if not isinstance(raw, Sequence) or isinstance(raw, (str, bytes)):
        raise InvalidEnvironment(f"'{key}' must be an array of numbers")
    try:
        return [float(x) for x in raw]
    except (TypeError, ValueError) as exc:
        raise InvalidEnvironment(f"'{key}' must contain only numbers") from exc


def load_environment(document: Mapping[str, Any] | str) -> Environment:
    """Parse an environment document (a mapping or its JSON text).

    Accepts either the direct form with ``values``, ``probs`` and ``costs``
    or a two-dimensional form with ``joint`` rows ``[v, c, prob]``, which is
    reduced with :func:`reduce_bidimensional`.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise InvalidEnvironment(f"not valid JSON: {exc}") from exc
    if not isinstance(document, Mapping):
        raise InvalidEnvironment("environment document must be an object")
    name = document.get("name")
    if name is not None and not isinstance(name, str):
        raise InvalidEnvironment("'name' must be a string")
    if "joint" in document and "values" not in document:
        rows = document["joint"]
        if not isinstance(rows, Sequence) or isinstance(rows, (str, bytes)):
            raise InvalidEnvironment("'joint' must be an array of [v, c, prob] rows")
        parsed = []
        for row in rows:
            if not isinstance(row, Sequence) or len(row) != 3:
                raise InvalidEnvironment("each joint row must be [v, c, prob]")
            try:
                parsed.append(tuple(float(x) for x in row))
            except (TypeError, ValueError) as exc:
                raise InvalidEnvironment("joint rows must contain numbers") from exc
        env = reduce_bidimensional(parsed)
        return Environment(env.values, env.probs, env.costs, name)
    _require_keys(document, ("values", "probs", "costs"))
    return Environment.from_arrays(
        _number_list(document, "values"),
        _number_list(document, "probs"),
        _number_list(document, "costs"),
        name,
    )


def dump_environment(env: Environment) -> str:
    return json.dumps(env.to_dict(), indent=2)


def read_environment(path: str) -> Environment:
    with open(path, encoding="utf-8") as fh:
        return load_environment(fh.read())


def reduce_bidimensional(rows: Iterable[tuple[float, float, float]]) -> Environment:
    """Collapse ``(value, cost, prob)`` rows into an environment.

    Rows sharing a value are grouped; the cost at that value becomes the
    conditional mean cost and the probabilities are added up.
    """
    data = np.array(list(rows), dtype=float).reshape(-1, 3) if rows is not None else None
    if data is None or data.shape[0] == 0:
        raise InvalidEnvironment("no rows to reduce")
    if np.any(data[:, 2] < 0):
        raise InvalidEnvironment("row probabilities must be nonnegative")
    data = data[data[:, 2] > 0]
    if data.shape[0] == 0:
        raise InvalidEnvironment("all rows have zero probability")
    total = data[:, 2].sum()
    if abs(total - 1.0) > SUM_TOL:
        raise InvalidEnvironment(f"row probabilities sum to {total!r}, not 1")
    order = np.argsort(data[:, 0], kind="stable")
    data = data[order]
    values: list[float] = []
    mass: list[float] = []
    cost_mass: list[float] = []
    for v, c, p in data:
        if values and abs(v - values[-1]) <= MERGE_TOL:
            mass[-1] += p
            cost_mass[-1] += p * c
        else:
            values.append(v)
            mass.append(p)
            cost_mass.append(p * c)
    m = np.array(mass)
    return Environment.from_arrays(values, m / m.sum(), np.array(cost_mass) / m)


def environment_from_density(
    values: ArrayLike,
    density: ArrayLike,
    costs: ArrayLike,
    name: str | None = None,
) -> Environment:
    """Discretize a value density onto the given grid points.

    ``density`` is evaluated at each grid point and normalized, so any
    positive weights work (e.g. a pdf sampled on an equally spaced grid).
    """
    d = np.asarray(density, dtype=float)
    if np.any(d <= 0):
        raise InvalidEnvironment("density must be positive on the grid")
    return Environment.from_arrays(values, d / d.sum(), costs, name)
