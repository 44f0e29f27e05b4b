"""Ranking policies: popularity, activity, quality-based, and performance.

The performance ranking maximizes the probability of a purchase in the
next period.  For a single consumer class the objective is a ratio of
linear functions of the position assignment and is solved exactly by
Dinkelbach's parametric method; with several classes the problem is
hard, so a brute-force enumerator (small N) and a pairwise-swap local
search are provided.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import (
    InvalidInstanceError,
    MarketConfig,
    PopularitySignal,
    Ranking,
    SignalMode,
)

MAX_BRUTE_FORCE_ITEMS = 9
SWAP_IMPROVEMENT_TOL = 1e-12
DINKELBACH_TOL = 1e-12
DINKELBACH_MAX_ITER = 200


class UnsupportedSolverError(ValueError):
    """Solver cannot handle the given instance (e.g. exact solver, K > 1)."""


class SizeLimitError(ValueError):
    """Instance too large for exhaustive enumeration."""


class RankingKind(Enum):
    POPULARITY = "popularity"
    ACTIVITY = "activity"
    PERFORMANCE = "performance"
    AVERAGE_QUALITY = "average_quality"
    SEGMENTED_QUALITY = "segmented_quality"


class SolverKind(Enum):
    EXACT_K1 = "exact_k1"
    BRUTE_FORCE = "brute_force"
    SWAP_HEURISTIC = "swap_heuristic"


@dataclass(frozen=True)
class PolicySpec:
    """A ranking rule plus the popularity signal consumers observe.

    The ranking rule is always fed exactly the counts the consumer sees:
    under a NONE signal dynamic rules receive the zero vector, so they
    degrade to their launch behaviour.
    """

    kind: RankingKind
    signal: SignalMode
    solver: SolverKind | None = None

    def __post_init__(self):
        if self.signal is SignalMode.SEGMENTED and self.kind is not RankingKind.SEGMENTED_QUALITY:
            raise InvalidInstanceError("segmented signal is only defined for the segmented quality ranking")
        if self.kind is RankingKind.SEGMENTED_QUALITY and self.signal is SignalMode.GLOBAL:
            raise InvalidInstanceError("segmented quality ranking uses a segmented signal or none")
        if self.kind is RankingKind.PERFORMANCE and self.solver is None:
            raise InvalidInstanceError("performance policy needs a solver")
        if self.kind is not RankingKind.PERFORMANCE and self.solver is not None:
            raise InvalidInstanceError("only the performance policy takes a solver")

    @property
    def is_static(self) -> bool:
        return self.kind in (RankingKind.AVERAGE_QUALITY, RankingKind.SEGMENTED_QUALITY)

    @property
    def label(self) -> str:
        named = {
            (RankingKind.SEGMENTED_QUALITY, SignalMode.SEGMENTED): "SQSSI",
            (RankingKind.SEGMENTED_QUALITY, SignalMode.NONE): "SQNSI",
            (RankingKind.AVERAGE_QUALITY, SignalMode.GLOBAL): "AQGSI",
            (RankingKind.AVERAGE_QUALITY, SignalMode.NONE): "AQNSI",
        }
        key = (self.kind, self.signal)
        if key in named:
            return named[key]
        suffix = {SignalMode.GLOBAL: "GSI", SignalMode.SEGMENTED: "SSI", SignalMode.NONE: "NSI"}
        return f"{self.kind.value.upper()}-{suffix[self.signal]}"


SQSSI = PolicySpec(RankingKind.SEGMENTED_QUALITY, SignalMode.SEGMENTED)
SQNSI = PolicySpec(RankingKind.SEGMENTED_QUALITY, SignalMode.NONE)
AQGSI = PolicySpec(RankingKind.AVERAGE_QUALITY, SignalMode.GLOBAL)
AQNSI = PolicySpec(RankingKind.AVERAGE_QUALITY, SignalMode.NONE)
EXPERIMENT_POLICIES = (SQSSI, SQNSI, AQGSI, AQNSI)


def _order_by_decreasing(values: np.ndarray) -> np.ndarray:
    """Item order sorted by decreasing value, ties to the lower index."""
    return np.argsort(-np.asarray(values, dtype=np.float64), kind="stable")


def popularity_ranking(counts) -> Ranking:
    """Most purchased item first; ties to the lower item index."""
    d = np.asarray(counts, dtype=np.float64)
    return Ranking.from_item_order(_order_by_decreasing(d))


def activity_ranking(last_purchase_step) -> Ranking:
    """Most recently purchased first; never-purchased items last, by index."""
    last = np.asarray(last_purchase_step, dtype=np.int64)
    key = np.where(last >= 0, -last.astype(np.float64), np.inf)
    return Ranking.from_item_order(np.argsort(key, kind="stable"))


def average_quality(config: MarketConfig) -> np.ndarray:
    """Class-weighted mean quality of each item."""
    return config.qualities @ config.class_weights


def average_quality_ranking(config: MarketConfig) -> Ranking:
    return Ranking.from_item_order(_order_by_decreasing(average_quality(config)))


def segmented_quality_rankings(config: MarketConfig) -> list[Ranking]:
    """One ranking per class, sorted by that class's quality column."""
    return [
        Ranking.from_item_order(_order_by_decreasing(config.qualities[:, k]))
        for k in range(config.num_classes)
    ]


def _counts_matrix(config: MarketConfig, signal: PopularitySignal) -> np.ndarray:
    """Per-class observed counts as an (N, K) float matrix."""
    n, k = config.num_items, config.num_classes
    if signal.mode is SignalMode.NONE:
        return np.zeros((n, k))
    if signal.mode is SignalMode.GLOBAL:
        if signal.counts.shape != (n,):
            raise InvalidInstanceError("global signal counts must match the item count")
        return np.repeat(signal.counts[:, None].astype(np.float64), k, axis=1)
    if signal.counts.shape != (n, k):
        raise InvalidInstanceError("segmented signal counts must be (N, K)")
    return signal.counts.astype(np.float64)


def _objective_of_order(config: MarketConfig, order: np.ndarray, counts: np.ndarray) -> float:
    """Next-period purchase probability of showing ``order`` to every class."""
    v = config.visibilities
    total = 0.0
    for k in range(config.num_classes):
        base = config.appeals[:, k] + counts[:, k]
        terms = v * base[order]
        denom = terms.sum() + config.no_trial_mass
        total += config.class_weights[k] * float(terms @ config.qualities[order, k]) / denom
    return total


def performance_ranking_k1(config: MarketConfig, counts=None) -> Ranking:
    """Exact single-class performance ranking via Dinkelbach's method.

    Maximizes sum_i v[sigma(i)] * f_i / (sum_j v[sigma(j)] * g_j + z)
    with f_i = (a_i + d_i) * q_i and g_i = a_i + d_i.
    """
    if config.num_classes != 1:
        raise UnsupportedSolverError("exact performance solver requires a single consumer class")
    d = np.zeros(config.num_items) if counts is None else np.asarray(counts, dtype=np.float64)
    g = config.appeals[:, 0] + d
    f = g * config.qualities[:, 0]
    order, _ = _dinkelbach(f, g, config.visibilities, config.no_trial_mass)
    return Ranking.from_item_order(order)


def _dinkelbach(
    f: np.ndarray,
    g: np.ndarray,
    v: np.ndarray,
    z: float,
    tol: float = DINKELBACH_TOL,
    max_iter: int = DINKELBACH_MAX_ITER,
) -> tuple[np.ndarray, list[float]]:
    """Parametric ratio maximization; returns (item order, lambda trace).

    For fixed lambda the subproblem max_sigma sum_i v[sigma(i)] * (f_i -
    lambda * g_i) is solved by the rearrangement inequality: sort scores
    decreasingly against the decreasing visibilities.  Terminates when
    the subproblem optimum drops to tol, at which point the current
    order attains the optimal ratio.
    """

    def ratio(order: np.ndarray) -> float:
        return float(v @ f[order]) / (float(v @ g[order]) + z)

    order = _order_by_decreasing(np.where(g > 0, f / g, 0.0))  # quality-sorted start
    lam = ratio(order)
    lambdas = [lam]
    for _ in range(max_iter):
        scores = f - lam * g
        order = _order_by_decreasing(scores)
        excess = float(v @ scores[order]) - lam * z
        if excess <= tol:
            break
        lam = ratio(order)
        lambdas.append(lam)
    return order, lambdas


def _permutation_batches(n: int, batch: int = 40320):
    perms = itertools.permutations(range(n))
    while True:
        block = list(itertools.islice(perms, batch))
        if not block:
            return
        yield np.asarray(block, dtype=np.int64)


def performance_ranking_bruteforce(
    config: MarketConfig,
    signal: PopularitySignal | None = None,
) -> tuple[Ranking, float]:
    """Exact maximizer of the next-period purchase probability over S_N.

    Ties break to the lexicographically smallest item-by-position order.
    """
    n = config.num_items
    if n > MAX_BRUTE_FORCE_ITEMS:
        raise SizeLimitError(f"brute force limited to N <= {MAX_BRUTE_FORCE_ITEMS}, got {n}")
    signal = signal or PopularitySignal.none()
    counts = _counts_matrix(config, signal)
    v = config.visibilities
    w = config.class_weights
    z = config.no_trial_mass
    best_val = -np.inf
    best_order: np.ndarray | None = None
    for perms in _permutation_batches(n):
        totals = np.zeros(perms.shape[0])
        for k in range(config.num_classes):
            base = config.appeals[:, k] + counts[:, k]
            terms = base[perms] * v[None, :]
            qk = config.qualities[:, k][perms]
            totals += w[k] * (terms * qk).sum(axis=1) / (terms.sum(axis=1) + z)
        idx = int(np.argmax(totals))
        if totals[idx] > best_val:
            best_val = float(totals[idx])
            best_order = perms[idx].copy()
    assert best_order is not None
    return Ranking.from_item_order(best_order), best_val


def performance_ranking_swap_heuristic(
    config: MarketConfig,
    signal: PopularitySignal | None = None,
    max_passes: int = 50,
) -> tuple[Ranking, float]:
    """Best-improvement pairwise position swaps from the quality ranking.

    Stops when no swap improves the objective by more than 1e-12 or when
    max_passes is exhausted; the returned objective never falls below
    the average-quality ranking's.
    """
    signal = signal or PopularitySignal.none()
    counts = _counts_matrix(config, signal)
    order = average_quality_ranking(config).items_by_position()
    best = _objective_of_order(config, order, counts)
    n = config.num_items
    for _ in range(max_passes):
        best_gain = 0.0
        best_pair = None
        for i in range(n - 1):
            for j in range(i + 1, n):
                order[i], order[j] = order[j], order[i]
                gain = _objective_of_order(config, order, counts) - best
                order[i], order[j] = order[j], order[i]
                if gain > best_gain:
                    best_gain = gain
                    best_pair = (i, j)
        if best_pair is None or best_gain <= SWAP_IMPROVEMENT_TOL:
            break
        i, j = best_pair
        order[i], order[j] = order[j], order[i]
        best = _objective_of_order(config, order, counts)
    return Ranking.from_item_order(order), best
