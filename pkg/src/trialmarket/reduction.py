"""Assortment optimization for a two-segment logit market, solved through
the performance-ranking problem.

The assortment problem picks a subset S of products maximizing

    alpha * sum_{i in S} r_i * U1_i / (1 + sum_{i in S} U1_i)
      + (1 - alpha) * sum_{i in S} r_i * U2_i / (1 + sum_{i in S} U2_i).

Solving it through a performance-ranking oracle works by building one
market per candidate assortment size s: two consumer classes whose
appeals are the segment utilities, identical per-class qualities given
by the (rescaled) revenues, z = 1, no purchase history, and 0/1
visibilities exposing exactly the top s positions.  The oracle's best
ranking then picks which s products to expose, and the best value over
all sizes equals the assortment optimum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import MarketConfig, PopularitySignal, Ranking
from .policies import (
    MAX_BRUTE_FORCE_ITEMS,
    SizeLimitError,
    performance_ranking_bruteforce,
    performance_ranking_swap_heuristic,
)

MAX_ENUMERATION_ITEMS = 20
APPEAL_FLOOR = 1e-30  # stands in for utility 0; invisible at solver tolerances


@dataclass(frozen=True)
class TwoClassLogitInstance:
    """Two utility realizations with a mixing weight and product revenues."""

    utilities1: np.ndarray
    utilities2: np.ndarray
    revenues: np.ndarray
    alpha: float

    def __post_init__(self):
        u1 = np.asarray(self.utilities1, dtype=np.float64)
        u2 = np.asarray(self.utilities2, dtype=np.float64)
        r = np.asarray(self.revenues, dtype=np.float64)
        object.__setattr__(self, "utilities1", u1)
        object.__setattr__(self, "utilities2", u2)
        object.__setattr__(self, "revenues", r)
        n = u1.shape[0]
        if u1.ndim != 1 or n == 0 or u2.shape != (n,) or r.shape != (n,):
            raise ValueError("utility and revenue vectors must share one non-empty length")
        if np.any(u1 < 0) or np.any(u2 < 0):
            raise ValueError("utilities must be non-negative")
        if np.any(r < 0):
            raise ValueError("revenues must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    @property
    def num_products(self) -> int:
        return self.utilities1.shape[0]

    def to_json_dict(self) -> dict:
        return {
            "V1": self.utilities1.tolist(),
            "V2": self.utilities2.tolist(),
            "revenues": self.revenues.tolist(),
            "alpha": self.alpha,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TwoClassLogitInstance":
        return cls(doc["V1"], doc["V2"], doc["revenues"], float(doc["alpha"]))

    @classmethod
    def from_json(cls, text: str) -> "TwoClassLogitInstance":
        return cls.from_json_dict(json.loads(text))

    def expected_revenue(self, assortment) -> float:
        s = np.asarray(sorted(assortment), dtype=np.int64)
        if s.size == 0:
            return 0.0
        r, u1, u2 = self.revenues[s], self.utilities1[s], self.utilities2[s]
        return float(
            self.alpha * (r @ u1) / (1.0 + u1.sum())
            + (1.0 - self.alpha) * (r @ u2) / (1.0 + u2.sum())
        )


@dataclass(frozen=True)
class ReductionResult:
    assortment: tuple[int, ...]
    value: float
    exact: bool


def market_for_size(instance: TwoClassLogitInstance, size: int) -> MarketConfig:
    """The performance-ranking market exposing exactly ``size`` positions.

    Revenues are rescaled by their maximum so they fit the [0, 1] quality
    range; the rescaling divides every ranking objective by the same
    constant, so maximizers are unchanged and values rescale back exactly.
    """
    n = instance.num_products
    if not 1 <= size <= n:
        raise ValueError("assortment size out of range")
    appeals = np.stack([instance.utilities1, instance.utilities2], axis=1)
    appeals = np.maximum(appeals, APPEAL_FLOOR)
    scale = instance.revenues.max()
    qualities = np.repeat((instance.revenues / scale)[:, None], 2, axis=1)
    visibilities = np.concatenate([np.ones(size), np.zeros(n - size)])
    weights = np.array([instance.alpha, 1.0 - instance.alpha])
    return MarketConfig(appeals, qualities, visibilities, weights, no_trial_mass=1.0)


def solve_two_class_logit(
    instance: TwoClassLogitInstance,
    oracle: str = "bruteforce",
) -> ReductionResult:
    """Best assortment via N calls to a performance-ranking solver.

    With the exact brute-force oracle the returned value matches the
    direct subset enumeration; the swap-heuristic oracle yields a result
    flagged as inexact.
    """
    if oracle not in ("bruteforce", "swap"):
        raise ValueError(f"unknown oracle {oracle!r}")
    exact = oracle == "bruteforce"
    n = instance.num_products
    if exact and n > MAX_BRUTE_FORCE_ITEMS:
        raise SizeLimitError(
            f"exact reduction needs brute force, limited to N <= {MAX_BRUTE_FORCE_ITEMS}"
        )
    scale = float(instance.revenues.max())
    if scale == 0.0:
        return ReductionResult((), 0.0, True)
    best_value = 0.0
    best_assortment: tuple[int, ...] = ()
    for size in range(1, n + 1):
        market = market_for_size(instance, size)
        if exact:
            ranking, objective = performance_ranking_bruteforce(market, PopularitySignal.none())
        else:
            ranking, objective = performance_ranking_swap_heuristic(market, PopularitySignal.none())
        value = objective * scale
        if value > best_value:
            best_value = value
            order = ranking.items_by_position()
            best_assortment = tuple(sorted(int(i) for i in order[:size]))
    return ReductionResult(best_assortment, best_value, exact)


def brute_force_two_class_logit(instance: TwoClassLogitInstance) -> tuple[tuple[int, ...], float]:
    """Exact optimum over all 2^N assortments.

    Ties break to the lexicographically smallest item tuple (the empty
    assortment, worth 0, is included).
    """
    n = instance.num_products
    if n > MAX_ENUMERATION_ITEMS:
        raise SizeLimitError(f"subset enumeration limited to N <= {MAX_ENUMERATION_ITEMS}")
    r, u1, u2 = instance.revenues, instance.utilities1, instance.utilities2
    alpha = instance.alpha
    best_set: tuple[int, ...] = ()
    best_value = 0.0
    for mask in range(1, 1 << n):
        members = tuple(i for i in range(n) if mask >> i & 1)
        s = np.array(members, dtype=np.int64)
        num1 = float(r[s] @ u1[s])
        num2 = float(r[s] @ u2[s])
        value = alpha * num1 / (1.0 + float(u1[s].sum())) + (1.0 - alpha) * num2 / (
            1.0 + float(u2[s].sum())
        )
        if value > best_value or (value == best_value and members < best_set):
            best_value = value
            best_set = members
    return best_set, best_value
