"""Information structures, strategy profiles and tremble schedules.

An information structure is a joint distribution over (seller signal, buyer
signal, value).  A strategy profile lives on a finite price grid: the seller
mixes over grid prices per signal, the buyer accepts with some probability
per (price, buyer signal), and holds a belief over values at each such cell.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .environment import Environment
from .errors import DocumentError

STRUCTURE_TOL = 1e-12
PROFILE_TOL = 1e-9

UNINFORMED_SELLER = "uninformed_seller"
FULLY_INFORMED_BUYER = "fully_informed_buyer"
MORE_INFORMED_BUYER = "more_informed_buyer"


def _readonly(a: ArrayLike) -> NDArray[np.float64]:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class InformationStructure:
    """Joint law ``joint[s, b, i] = P(t_s = s, t_b = b, v = v_i)``."""

    env: Environment
    seller_signals: tuple[str, ...]
    buyer_signals: tuple[str, ...]
    joint: NDArray[np.float64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "seller_signals", tuple(str(s) for s in self.seller_signals))
        object.__setattr__(self, "buyer_signals", tuple(str(b) for b in self.buyer_signals))
        joint = np.array(self.joint, dtype=float)
        shape = (len(self.seller_signals), len(self.buyer_signals), self.env.n)
        if joint.shape != shape:
            raise DocumentError(f"joint has shape {joint.shape}, expected {shape}")
        if len(set(self.seller_signals)) != shape[0] or len(set(self.buyer_signals)) != shape[1]:
            raise DocumentError("signal labels must be unique")
        if np.any(joint < 0) or not np.all(np.isfinite(joint)):
            raise DocumentError("joint probabilities must be finite and nonnegative")
        marginal = joint.sum(axis=(0, 1))
        if np.max(np.abs(marginal - self.env.probs)) > STRUCTURE_TOL:
            raise DocumentError("value marginal of the joint differs from the prior")
        object.__setattr__(self, "joint", _readonly(joint))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.joint.shape  # type: ignore[return-value]

    @property
    def buyer_mass(self) -> NDArray[np.float64]:
        return self.joint.sum(axis=(0, 2))

    @property
    def seller_mass(self) -> NDArray[np.float64]:
        return self.joint.sum(axis=(1, 2))

    @property
    def buyer_value_joint(self) -> NDArray[np.float64]:
        """``P(t_b, v)`` as a ``B x n`` array."""
        return self.joint.sum(axis=0)

    def buyer_posteriors(self) -> NDArray[np.float64]:
        """``P(v | t_b)`` rows; rows of zero-mass signals are zero."""
        bv = self.buyer_value_joint
        mass = bv.sum(axis=1, keepdims=True)
        return np.divide(bv, mass, out=np.zeros_like(bv), where=mass > 0)

    def buyer_means(self) -> NDArray[np.float64]:
        return self.buyer_posteriors() @ self.env.values

    @property
    def class_tags(self) -> frozenset[str]:
        tags = set()
        if len(self.seller_signals) == 1:
            tags.add(UNINFORMED_SELLER)
        bv = self.buyer_value_joint
        live = bv.sum(axis=1) > 0
        if np.all((bv[live] > 0).sum(axis=1) == 1):
            tags.add(FULLY_INFORMED_BUYER)
        p_b = self.buyer_mass
        p_sb = self.joint.sum(axis=2)
        lhs = self.joint * p_b[None, :, None]
        rhs = p_sb[:, :, None] * bv[None, :, :]
        if np.max(np.abs(lhs - rhs)) <= STRUCTURE_TOL:
            tags.add(MORE_INFORMED_BUYER)
        return frozenset(tags)

    def to_dict(self) -> dict[str, Any]:
        triples = [
            [self.seller_signals[s], self.buyer_signals[b], int(i), float(self.joint[s, b, i])]
            for s, b, i in zip(*np.nonzero(self.joint))
        ]
        return {
            "seller_signals": list(self.seller_signals),
            "buyer_signals": list(self.buyer_signals),
            "joint": triples,
            "tags": sorted(self.class_tags),
        }


def _label_index(labels: Sequence[str], key: Any, what: str) -> int:
    if isinstance(key, str):
        try:
            return labels.index(key)
        except ValueError:
            raise DocumentError(f"unknown {what} signal {key!r}") from None
    if isinstance(key, int) and 0 <= key < len(labels):
        return key
    raise DocumentError(f"bad {what} signal reference {key!r}")


def structure_from_dict(doc: Mapping[str, Any], env: Environment) -> InformationStructure:
    try:
        sellers = [str(s) for s in doc["seller_signals"]]
        buyers = [str(b) for b in doc["buyer_signals"]]
        triples = doc["joint"]
    except (KeyError, TypeError) as exc:
        raise DocumentError(f"structure document is missing {exc}") from exc
    joint = np.zeros((len(sellers), len(buyers), env.n))
    for row in triples:
        if not isinstance(row, Sequence) or len(row) != 4:
            raise DocumentError("joint entries must be [t_s, t_b, v_index, prob]")
        s = _label_index(sellers, row[0], "seller")
        b = _label_index(buyers, row[1], "buyer")
        i = row[2]
        if not isinstance(i, int) or not 0 <= i < env.n:
            raise DocumentError(f"value index {i!r} outside the support")
        joint[s, b, i] += float(row[3])
    return InformationStructure(env, tuple(sellers), tuple(buyers), joint)


@dataclass(frozen=True, eq=False)
class StrategyProfile:
    """Strategies and beliefs on a finite price grid.

    Shapes: ``sigma`` is ``S x K``, ``alpha`` is ``K x B`` and ``beliefs`` is
    ``K x B x n`` for ``K`` grid prices.
    """

    grid: NDArray[np.float64]
    sigma: NDArray[np.float64]
    alpha: NDArray[np.float64]
    beliefs: NDArray[np.float64]

    def __post_init__(self) -> None:
        grid = np.array(self.grid, dtype=float)
        sigma = np.array(self.sigma, dtype=float)
        alpha = np.array(self.alpha, dtype=float)
        beliefs = np.array(self.beliefs, dtype=float)
        k = grid.size
        if grid.ndim != 1 or k == 0 or np.any(np.diff(grid) <= 0):
            raise DocumentError("price grid must be a strictly increasing non-empty list")
        if sigma.ndim != 2 or sigma.shape[1] != k:
            raise DocumentError("seller strategy must have one column per grid price")
        if alpha.ndim != 2 or alpha.shape[0] != k:
            raise DocumentError("buyer strategy must have one row per grid price")
        if beliefs.ndim != 3 or beliefs.shape[:2] != alpha.shape:
            raise DocumentError("beliefs must be indexed by (grid price, buyer signal)")
        if np.any(sigma < 0) or np.max(np.abs(sigma.sum(axis=1) - 1)) > PROFILE_TOL:
            raise DocumentError("seller strategy rows must be distributions")
        if np.any(alpha < 0) or np.any(alpha > 1):
            raise DocumentError("acceptance probabilities must lie in [0, 1]")
        if np.any(beliefs < 0) or np.max(np.abs(beliefs.sum(axis=2) - 1)) > PROFILE_TOL:
            raise DocumentError("beliefs must be distributions")
        for name, arr in (("grid", grid), ("sigma", sigma), ("alpha", alpha), ("beliefs", beliefs)):
            object.__setattr__(self, name, _readonly(arr))

    @property
    def n_prices(self) -> int:
        return int(self.grid.size)

    def price_index(self, price: float, tol: float = 1e-12) -> int:
        hits = np.flatnonzero(np.abs(self.grid - price) <= tol * max(1.0, abs(price)))
        if hits.size == 0:
            raise KeyError(f"price {price!r} is not on the grid")
        return int(hits[0])

    def check_against(self, structure: InformationStructure) -> None:
        """Raise :class:`DocumentError` if dimensions disagree with ``structure``."""
        s, b, n = structure.shape
        if self.sigma.shape[0] != s:
            raise DocumentError(f"profile has {self.sigma.shape[0]} seller signals, structure has {s}")
        if self.alpha.shape[1] != b:
            raise DocumentError(f"profile has {self.alpha.shape[1]} buyer signals, structure has {b}")
        if self.beliefs.shape[2] != n:
            raise DocumentError(f"beliefs cover {self.beliefs.shape[2]} values, support has {n}")

    def with_alpha(self, alpha: ArrayLike) -> StrategyProfile:
        return StrategyProfile(self.grid, self.sigma, alpha, self.beliefs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "grid": self.grid.tolist(),
            "sigma": self.sigma.tolist(),
            "alpha": self.alpha.tolist(),
            "beliefs": self.beliefs.tolist(),
        }


def profile_from_dict(doc: Mapping[str, Any]) -> StrategyProfile:
    try:
        return StrategyProfile(
            np.asarray(doc["grid"], dtype=float),
            np.asarray(doc["sigma"], dtype=float),
            np.asarray(doc["alpha"], dtype=float),
            np.asarray(doc["beliefs"], dtype=float),
        )
    except KeyError as exc:
        raise DocumentError(f"profile document is missing {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, DocumentError):
            raise
        raise DocumentError(f"profile arrays are ragged or non-numeric: {exc}") from exc


@dataclass(frozen=True)
class TrembleSchedule:
    """Fully mixed perturbations of the seller strategy.

    Signal ``s`` trembles with total weight ``n**-exponents[s]`` spread evenly
    over the grid: ``(1 - n**-e) * sigma + n**-e / K``.  Larger exponents make
    a signal's trembles vanish faster.
    """

    exponents: tuple[float, ...]

    def __post_init__(self) -> None:
        exps = tuple(float(e) for e in self.exponents)
        if any(e <= 0 for e in exps):
            raise DocumentError("tremble exponents must be positive")
        object.__setattr__(self, "exponents", exps)

    def strategy(self, sigma: ArrayLike, n: int) -> NDArray[np.float64]:
        sig = np.asarray(sigma, dtype=float)
        if sig.shape[0] != len(self.exponents):
            raise DocumentError("one tremble exponent per seller signal is required")
        if n < 2:
            raise ValueError("tremble index must be at least 2")
        eps = np.power(float(n), -np.asarray(self.exponents))[:, None]
        return (1.0 - eps) * sig + eps / sig.shape[1]

    def to_dict(self) -> dict[str, Any]:
        return {"exponents": list(self.exponents)}


def trembles_from_dict(doc: Mapping[str, Any]) -> TrembleSchedule:
    try:
        return TrembleSchedule(tuple(doc["exponents"]))
    except (KeyError, TypeError) as exc:
        raise DocumentError(f"tremble document needs an 'exponents' list: {exc}") from exc
