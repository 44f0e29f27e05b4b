"""Market instance, trial/purchase probabilities, and state accounting.

A market has N items shown to K consumer classes.  A consumer of class k
who faces ranking ``sigma`` and observed purchase counts ``d`` tries item
i with probability

    p[i] = v[sigma(i)] * (a[i,k] + d[i]) / (sum_j v[sigma(j)] * (a[j,k] + d[j]) + z)

where ``v`` weights display positions, ``a`` is the class-specific item
appeal, and ``z`` is an optional no-trial mass.  Having tried item i she
purchases it with probability ``q[i,k]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

SIMPLEX_TOL = 1e-12


class InvalidInstanceError(ValueError):
    """A market instance violates a structural invariant."""


class DegenerateInstanceError(ValueError):
    """A probability denominator is zero (no visible mass and z == 0)."""


class UndefinedShareError(ValueError):
    """Market shares requested before any purchase happened."""


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


def derive_class_weights(arrival_rates: Sequence[float]) -> np.ndarray:
    """Normalize per-class arrival rates into simplex weights."""
    rates = np.asarray(arrival_rates, dtype=np.float64)
    if rates.ndim != 1 or rates.size == 0:
        raise InvalidInstanceError("arrival rates must be a non-empty vector")
    if np.any(rates <= 0.0) or not np.all(np.isfinite(rates)):
        raise InvalidInstanceError("arrival rates must be strictly positive and finite")
    return rates / rates.sum()


@dataclass(frozen=True)
class MarketConfig:
    """Immutable problem instance.

    appeals, qualities: (N, K) matrices (rows = items, columns = classes).
    visibilities: (N,) non-increasing position weights, not all zero.
    class_weights: (K,) simplex vector.
    no_trial_mass: the constant z added to every trial denominator.
    """

    appeals: np.ndarray
    qualities: np.ndarray
    visibilities: np.ndarray
    class_weights: np.ndarray
    no_trial_mass: float = 0.0

    def __post_init__(self):
        a = _as_readonly(np.atleast_2d(self.appeals))
        q = _as_readonly(np.atleast_2d(self.qualities))
        v = _as_readonly(self.visibilities)
        w = _as_readonly(self.class_weights)
        object.__setattr__(self, "appeals", a)
        object.__setattr__(self, "qualities", q)
        object.__setattr__(self, "visibilities", v)
        object.__setattr__(self, "class_weights", w)
        object.__setattr__(self, "no_trial_mass", float(self.no_trial_mass))

        n, k = a.shape
        if n < 1 or k < 1:
            raise InvalidInstanceError("need at least one item and one class")
        if q.shape != (n, k):
            raise InvalidInstanceError(f"qualities shape {q.shape} != appeals shape {(n, k)}")
        if v.shape != (n,):
            raise InvalidInstanceError(f"visibilities must have shape ({n},), got {v.shape}")
        if w.shape != (k,):
            raise InvalidInstanceError(f"class_weights must have shape ({k},), got {w.shape}")
        if np.any(w < 0.0) or abs(w.sum() - 1.0) > SIMPLEX_TOL:
            raise InvalidInstanceError("class weights must be non-negative and sum to 1")
        if np.any(a <= 0.0) or not np.all(np.isfinite(a)):
            raise InvalidInstanceError("appeals must be strictly positive and finite")
        if np.any(q < 0.0) or np.any(q > 1.0):
            raise InvalidInstanceError("qualities must lie in [0, 1]")
        if np.any(v < 0.0) or not np.all(np.isfinite(v)):
            raise InvalidInstanceError("visibilities must be non-negative and finite")
        if np.any(np.diff(v) > 0.0):
            raise InvalidInstanceError("visibilities must be non-increasing by position")
        if not np.any(v > 0.0):
            raise InvalidInstanceError("at least one position must be visible")
        if self.no_trial_mass < 0.0:
            raise InvalidInstanceError("no-trial mass must be non-negative")

    @property
    def num_items(self) -> int:
        return self.appeals.shape[0]

    @property
    def num_classes(self) -> int:
        return self.appeals.shape[1]

    @classmethod
    def from_arrival_rates(
        cls,
        appeals,
        qualities,
        visibilities,
        arrival_rates,
        no_trial_mass: float = 0.0,
    ) -> "MarketConfig":
        return cls(appeals, qualities, visibilities, derive_class_weights(arrival_rates), no_trial_mass)

    def to_json_dict(self) -> dict:
        return {
            "num_items": self.num_items,
            "num_classes": self.num_classes,
            "class_weights": self.class_weights.tolist(),
            "appeals": self.appeals.tolist(),
            "qualities": self.qualities.tolist(),
            "visibilities": self.visibilities.tolist(),
            "z": self.no_trial_mass,
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "MarketConfig":
        try:
            appeals = doc["appeals"]
            qualities = doc["qualities"]
            visibilities = doc["visibilities"]
        except KeyError as exc:
            raise InvalidInstanceError(f"missing config field: {exc}") from exc
        if "class_weights" in doc:
            weights = np.asarray(doc["class_weights"], dtype=np.float64)
        elif "arrival_rates" in doc:
            weights = derive_class_weights(doc["arrival_rates"])
        else:
            raise InvalidInstanceError("config needs class_weights or arrival_rates")
        cfg = cls(appeals, qualities, visibilities, weights, float(doc.get("z", 0.0)))
        for name, expected in (("num_items", cfg.num_items), ("num_classes", cfg.num_classes)):
            if name in doc and int(doc[name]) != expected:
                raise InvalidInstanceError(f"{name}={doc[name]} inconsistent with matrices ({expected})")
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "MarketConfig":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class Ranking:
    """Assignment of items to display positions.

    ``position_of_item[i] = j`` places item i at position j; position 0
    is the most visible.  The assignment is a bijection on 0..N-1.
    """

    position_of_item: np.ndarray

    def __post_init__(self):
        pos = np.array(self.position_of_item, dtype=np.int64, copy=True)
        pos.setflags(write=False)
        object.__setattr__(self, "position_of_item", pos)
        n = pos.shape[0]
        if pos.ndim != 1 or n == 0:
            raise InvalidInstanceError("ranking must be a non-empty vector")
        seen = np.zeros(n, dtype=bool)
        if pos.min() < 0 or pos.max() >= n:
            raise InvalidInstanceError("ranking positions out of range")
        seen[pos] = True
        if not seen.all():
            raise InvalidInstanceError("ranking must be a bijection onto positions")

    @property
    def num_items(self) -> int:
        return self.position_of_item.shape[0]

    @classmethod
    def identity(cls, n: int) -> "Ranking":
        return cls(np.arange(n, dtype=np.int64))

    @classmethod
    def from_item_order(cls, items_by_position: Sequence[int]) -> "Ranking":
        """Build from the item sequence shown at positions 0, 1, ..."""
        order = np.asarray(items_by_position, dtype=np.int64)
        pos = np.empty_like(order)
        pos[order] = np.arange(order.shape[0], dtype=np.int64)
        return cls(pos)

    def items_by_position(self) -> np.ndarray:
        order = np.empty(self.num_items, dtype=np.int64)
        order[self.position_of_item] = np.arange(self.num_items, dtype=np.int64)
        return order


class SignalMode(Enum):
    """Which popularity counts a consumer is shown."""

    GLOBAL = "global"
    SEGMENTED = "segmented"
    NONE = "none"


@dataclass(frozen=True)
class PopularitySignal:
    """Purchase counts displayed to consumers.

    GLOBAL carries an (N,) vector, SEGMENTED an (N, K) per-class matrix,
    NONE carries no counts and behaves as the all-zero vector.
    """

    mode: SignalMode
    counts: np.ndarray | None = None

    def __post_init__(self):
        if self.mode is SignalMode.NONE:
            if self.counts is not None:
                raise InvalidInstanceError("NONE signal carries no counts")
            return
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        if self.mode is SignalMode.GLOBAL and counts.ndim != 1:
            raise InvalidInstanceError("global signal counts must be an (N,) vector")
        if self.mode is SignalMode.SEGMENTED and counts.ndim != 2:
            raise InvalidInstanceError("segmented signal counts must be an (N, K) matrix")
        if counts.size == 0 or counts.min() < 0:
            raise InvalidInstanceError("signal counts must be non-negative and non-empty")

    @classmethod
    def global_counts(cls, counts) -> "PopularitySignal":
        return cls(SignalMode.GLOBAL, counts)

    @classmethod
    def segmented(cls, counts_by_class) -> "PopularitySignal":
        return cls(SignalMode.SEGMENTED, counts_by_class)

    @classmethod
    def none(cls) -> "PopularitySignal":
        return cls(SignalMode.NONE, None)

    def counts_for_class(self, k: int, num_items: int) -> np.ndarray:
        """The (N,) count vector a class-k consumer observes."""
        if self.mode is SignalMode.NONE:
            return np.zeros(num_items, dtype=np.int64)
        if self.mode is SignalMode.GLOBAL:
            return self.counts
        return self.counts[:, k]

    def global_view(self, num_items: int) -> np.ndarray:
        """Counts aggregated over classes (row sums under SEGMENTED)."""
        if self.mode is SignalMode.NONE:
            return np.zeros(num_items, dtype=np.int64)
        if self.mode is SignalMode.GLOBAL:
            return self.counts
        return self.counts.sum(axis=1)


@dataclass
class MarketState:
    """Mutable-by-replacement purchase bookkeeping for a simulation run."""

    step: int
    global_purchases: np.ndarray
    class_purchases: np.ndarray
    last_purchase_step: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.global_purchases = np.asarray(self.global_purchases, dtype=np.int64)
        self.class_purchases = np.asarray(self.class_purchases, dtype=np.int64)
        if self.last_purchase_step is None:
            self.last_purchase_step = np.full(self.global_purchases.shape[0], -1, dtype=np.int64)
        else:
            self.last_purchase_step = np.asarray(self.last_purchase_step, dtype=np.int64)
        if not np.array_equal(self.global_purchases, self.class_purchases.sum(axis=1)):
            raise InvalidInstanceError("global purchases must equal row sums of class purchases")

    @classmethod
    def initial(cls, num_items: int, num_classes: int) -> "MarketState":
        return cls(
            step=0,
            global_purchases=np.zeros(num_items, dtype=np.int64),
            class_purchases=np.zeros((num_items, num_classes), dtype=np.int64),
        )

    def total_purchases(self) -> int:
        return int(self.global_purchases.sum())


def trial_probabilities(
    config: MarketConfig,
    ranking: Ranking,
    observed_counts,
    k: int,
) -> tuple[np.ndarray, float]:
    """Per-item trial probabilities and the no-trial probability for class k."""
    if not 0 <= k < config.num_classes:
        raise InvalidInstanceError(f"class index {k} out of range")
    counts = np.asarray(observed_counts, dtype=np.float64)
    if counts.shape != (config.num_items,):
        raise InvalidInstanceError("observed counts must be an (N,) vector")
    if np.any(counts < 0):
        raise InvalidInstanceError("observed counts must be non-negative")
    v_eff = config.visibilities[ranking.position_of_item]
    terms = v_eff * (config.appeals[:, k] + counts)
    denom = terms.sum() + config.no_trial_mass
    if denom <= 0.0:
        raise DegenerateInstanceError("zero trial denominator: no visible mass and z == 0")
    return terms / denom, config.no_trial_mass / denom


def purchase_probability_next(
    config: MarketConfig,
    ranking: Ranking | Sequence[Ranking],
    signal: PopularitySignal,
) -> float:
    """Probability that the next arriving consumer purchases something.

    Under a SEGMENTED signal each class k is evaluated with its own
    counts, and ``ranking`` may be a per-class sequence of rankings.
    """
    n, kk = config.num_items, config.num_classes
    if isinstance(ranking, Ranking):
        rankings = [ranking] * kk
    else:
        rankings = list(ranking)
        if len(rankings) != kk:
            raise InvalidInstanceError(f"need one ranking per class ({kk}), got {len(rankings)}")
    if signal.mode is not SignalMode.NONE:
        expected = (n,) if signal.mode is SignalMode.GLOBAL else (n, kk)
        if signal.counts.shape != expected:
            raise InvalidInstanceError(f"signal counts shape {signal.counts.shape} != {expected}")
    total = 0.0
    for k in range(kk):
        p, _ = trial_probabilities(config, rankings[k], signal.counts_for_class(k, n), k)
        total += config.class_weights[k] * float(p @ config.qualities[:, k])
    return total


def market_shares(counts) -> np.ndarray:
    """Fraction of all purchases captured by each item."""
    d = np.asarray(counts, dtype=np.float64)
    total = d.sum()
    if total <= 0:
        raise UndefinedShareError("market shares undefined before the first purchase")
    return d / total
