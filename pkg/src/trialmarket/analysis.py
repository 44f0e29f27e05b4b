"""Asymptotic market quantities, monopoly prediction, and bound checks.

A heterogeneous market shown a single static ranking behaves like a
single-class market whose per-item appeal and quality depend on the
current purchase counts but stay within fixed bounds.  The functions
here evaluate those generalized quantities, their limits, the purchase
threshold after which the leading item stays ahead, and the closed-form
limit purchase probabilities of the four quality-ranking policies
together with their tightness constructions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .model import MarketConfig, Ranking
from .policies import average_quality, average_quality_ranking, segmented_quality_rankings


class TieBreakingError(ValueError):
    """The strict-uniqueness hypothesis of a limit result fails."""


def _per_class_denominators(config: MarketConfig, ranking: Ranking, counts: np.ndarray) -> np.ndarray:
    """sum_j v[sigma(j)] * (a[j,k] + d[j]) + z, for every class k."""
    veff = config.visibilities[ranking.position_of_item]
    return veff @ (config.appeals + counts[:, None]) + config.no_trial_mass


def _appeal_mix_weights(config: MarketConfig, ranking: Ranking, counts: np.ndarray) -> np.ndarray:
    """(N, K) weights w_k * q[i,k] / denom_k used by the generalized quantities."""
    denoms = _per_class_denominators(config, ranking, counts)
    return config.class_weights[None, :] * config.qualities / denoms[None, :]


def generalized_appeal(config: MarketConfig, ranking: Ranking, counts) -> np.ndarray:
    """State-dependent single-market appeal of each item.

    A weighted average over classes of the class appeals, so it always
    lies between the per-item min and max class appeal.  Items whose
    weighted quality is zero never register a purchase and their value
    is reported as NaN.
    """
    d = np.asarray(counts, dtype=np.float64)
    mix = _appeal_mix_weights(config, ranking, d)
    den = mix.sum(axis=1)
    num = (mix * config.appeals).sum(axis=1)
    out = np.full(config.num_items, np.nan)
    ok = den > 0.0
    out[ok] = num[ok] / den[ok]
    return out


def _appeal_with_fallback(config: MarketConfig, ranking: Ranking, counts: np.ndarray) -> np.ndarray:
    """Generalized appeal with NaNs replaced by the plain class mean.

    The replacement only enters the shared denominator of the purchase
    probability decomposition, where any bounded choice cancels out, and
    the class mean keeps the appeal bounds intact.
    """
    appeal = generalized_appeal(config, ranking, counts)
    nan = np.isnan(appeal)
    if nan.any():
        appeal = appeal.copy()
        appeal[nan] = config.appeals[nan].mean(axis=1)
    return appeal


def generalized_quality(config: MarketConfig, ranking: Ranking, counts) -> np.ndarray:
    """State-dependent single-market quality of each item.

    Converges to the class-weighted average quality as total purchases
    grow, with a sandwich error bounded by the visibility-weighted
    appeal-to-purchase ratio.
    """
    d = np.asarray(counts, dtype=np.float64)
    mix_sum = _appeal_mix_weights(config, ranking, d).sum(axis=1)
    veff = config.visibilities[ranking.position_of_item]
    appeal = _appeal_with_fallback(config, ranking, d)
    scale = float(veff @ (appeal + d)) + config.no_trial_mass
    return mix_sum * scale


def purchase_probabilities_static(config: MarketConfig, ranking: Ranking, counts) -> np.ndarray:
    """P[next arrival purchases item i] under one shared static ranking."""
    d = np.asarray(counts, dtype=np.float64)
    veff = config.visibilities[ranking.position_of_item]
    denoms = _per_class_denominators(config, ranking, d)
    per_class = veff[:, None] * (config.appeals + d[:, None]) / denoms[None, :]
    return (per_class * config.qualities) @ config.class_weights


def reconstructed_purchase_probabilities(config: MarketConfig, ranking: Ranking, counts) -> np.ndarray:
    """The same probabilities assembled from the generalized quantities.

    Algebraically identical to `purchase_probabilities_static`; exposed
    so the identity can be verified numerically.
    """
    d = np.asarray(counts, dtype=np.float64)
    veff = config.visibilities[ranking.position_of_item]
    appeal = _appeal_with_fallback(config, ranking, d)
    quality = generalized_quality(config, ranking, d)
    scale = float(veff @ (appeal + d)) + config.no_trial_mass
    return veff * (appeal + d) / scale * quality


def quality_sandwich_bound(config: MarketConfig, ranking: Ranking, counts) -> float:
    """Relative half-width B: (1-B) qbar <= generalized quality <= (1+B) qbar.

    Defined only when visibility-weighted purchases are positive.
    """
    d = np.asarray(counts, dtype=np.float64)
    veff = config.visibilities[ranking.position_of_item]
    weighted_purchases = float(veff @ d)
    if weighted_purchases <= 0.0:
        return math.inf
    return float(veff @ config.appeals.max(axis=1)) / weighted_purchases


def limit_quantities(config: MarketConfig) -> tuple[np.ndarray, np.ndarray]:
    """Limits of the generalized appeal and quality for every item.

    Limit appeal is the quality-weighted average of class appeals and is
    NaN for items whose weighted quality is zero; limit quality is the
    class-weighted average quality.
    """
    w = config.class_weights
    qbar = config.qualities @ w
    num = (config.appeals * config.qualities) @ w
    abar = np.full(config.num_items, np.nan)
    ok = qbar > 0.0
    abar[ok] = num[ok] / qbar[ok]
    return abar, qbar


def tie_breaking_global(config: MarketConfig, ranking: Ranking) -> bool:
    """Unique item with strictly largest visibility times average quality."""
    scores = config.visibilities[ranking.position_of_item] * average_quality(config)
    order = np.sort(scores)[::-1]
    return bool(order.shape[0] == 1 or order[0] > order[1])


def tie_breaking_segmented(config: MarketConfig) -> bool:
    """Every class has a unique strictly-highest-quality item."""
    if config.num_items == 1:
        return True
    top2 = np.sort(config.qualities, axis=0)[-2:, :]
    return bool(np.all(top2[1] > top2[0]))


def monopoly_predictor(config: MarketConfig, ranking: Ranking) -> int:
    """The item whose market share converges to one under a static ranking."""
    scores = config.visibilities[ranking.position_of_item] * average_quality(config)
    if not tie_breaking_global(config, ranking):
        raise TieBreakingError("no unique top visibility-quality product; limit not predictable")
    return int(np.argmax(scores))


def dtot_threshold(config: MarketConfig, ranking: Ranking) -> float:
    """Total purchases beyond which the top item's generalized score stays ahead.

    Diagnostic bound; requires strictly positive visibilities at every
    position and the global tie-breaking condition.
    """
    veff = config.visibilities[ranking.position_of_item]
    if np.any(veff <= 0.0):
        raise ValueError("threshold undefined: some position has zero visibility")
    if not tie_breaking_global(config, ranking):
        raise TieBreakingError("threshold needs a unique top visibility-quality product")
    scores = np.sort(veff * average_quality(config))[::-1]
    best, second = float(scores[0]), float(scores[1])
    gap = best - second
    return float(veff.max() / veff.min() * config.appeals.max(axis=1).sum() / gap * (best + second))


def no_signal_purchase_probability(config: MarketConfig, rankings: list[Ranking]) -> float:
    """Per-arrival purchase probability when counts are never displayed.

    Constant over time; each class k sees its own ranking (pass the same
    ranking K times for a shared display).
    """
    total = 0.0
    for k in range(config.num_classes):
        veff = config.visibilities[rankings[k].position_of_item]
        terms = veff * config.appeals[:, k]
        denom = terms.sum() + config.no_trial_mass
        total += config.class_weights[k] * float(terms @ config.qualities[:, k]) / denom
    return total


@dataclass(frozen=True)
class AsymptoticReport:
    """Limit purchase probabilities of the four quality-ranking policies.

    Fields are None when the tie-breaking hypothesis of the underlying
    limit fails.  The no-signal values are exact at every step, not just
    in the limit; the segmented no-signal value applies the no-signal
    formula per market segment.
    """

    p_aqgsi: float | None
    p_aqnsi: float
    p_sqssi: float | None
    p_sqnsi: float
    ratio_sqssi_aqgsi: float | None
    ratio_aqnsi_aqgsi: float | None
    aqgsi_monopoly_item: int | None
    sqssi_monopoly_items: list[int] | None

    def to_json_dict(self) -> dict:
        return asdict(self)

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)


def asymptotic_report(config: MarketConfig) -> AsymptoticReport:
    qbar = average_quality(config)
    aq_ranking = average_quality_ranking(config)
    sq_rankings = segmented_quality_rankings(config)

    p_aqnsi = no_signal_purchase_probability(config, [aq_ranking] * config.num_classes)
    p_sqnsi = no_signal_purchase_probability(config, sq_rankings)

    p_aqgsi = None
    aq_item = None
    if tie_breaking_global(config, aq_ranking):
        p_aqgsi = float(qbar.max())
        aq_item = monopoly_predictor(config, aq_ranking)

    p_sqssi = None
    sq_items = None
    if tie_breaking_segmented(config):
        p_sqssi = float(config.class_weights @ config.qualities.max(axis=0))
        sq_items = [int(np.argmax(config.qualities[:, k])) for k in range(config.num_classes)]

    return AsymptoticReport(
        p_aqgsi=p_aqgsi,
        p_aqnsi=p_aqnsi,
        p_sqssi=p_sqssi,
        p_sqnsi=p_sqnsi,
        ratio_sqssi_aqgsi=(p_sqssi / p_aqgsi) if (p_sqssi is not None and p_aqgsi) else None,
        ratio_aqnsi_aqgsi=(p_aqnsi / p_aqgsi) if p_aqgsi else None,
        aqgsi_monopoly_item=aq_item,
        sqssi_monopoly_items=sq_items,
    )


TIGHTNESS_KINDS = ("theorem3_upper", "theorem3_lower", "theorem4")
_APPEAL_FLOOR = 1e-30


def tightness_instance(
    kind: str,
    num_classes: int,
    epsilon: float,
    epsilon_appeal: float | None = None,
) -> MarketConfig:
    """Parametric worst-case markets attaining the policy-ratio bounds.

    All three use as many items as classes, uniform class weights,
    uniform visibilities, z = 0, and a diagonal quality matrix with 1
    for the first item and 1 - epsilon for the rest:

    - theorem3_upper: near-identity appeals; hiding the popularity
      signal approaches K times the signal-shown efficiency.
    - theorem3_lower: all-ones appeals with epsilon_appeal on the
      diagonal; the no-signal efficiency ratio collapses toward 0.
    - theorem4: all-ones appeals; segmenting approaches K times the
      average-quality efficiency.
    """
    if kind not in TIGHTNESS_KINDS:
        raise ValueError(f"kind must be one of {TIGHTNESS_KINDS}")
    if num_classes < 2:
        raise ValueError("constructions need at least two classes")
    if epsilon <= 0.0 or epsilon >= 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    k = num_classes
    qualities = np.zeros((k, k))
    np.fill_diagonal(qualities, 1.0 - epsilon)
    qualities[0, 0] = 1.0
    if kind == "theorem3_upper":
        appeals = np.full((k, k), _APPEAL_FLOOR)
        np.fill_diagonal(appeals, 1.0)
    elif kind == "theorem3_lower":
        if epsilon_appeal is None or epsilon_appeal <= 0.0:
            raise ValueError("theorem3_lower needs epsilon_appeal > 0")
        appeals = np.ones((k, k))
        np.fill_diagonal(appeals, epsilon_appeal)
    else:
        appeals = np.ones((k, k))
    weights = np.full(k, 1.0 / k)
    visibilities = np.ones(k)
    return MarketConfig(appeals, qualities, visibilities, weights, no_trial_mass=0.0)
