"""Discrete-time agent-based simulation loop and Monte Carlo harness.

Each step: draw a consumer class from the class weights, draw a tried
item (or the no-trial outcome) from the class's trial probabilities
under the policy's ranking and displayed counts, then draw the purchase
with the item's class quality.

Two execution paths produce bitwise-identical results: a pure-Python
reference (`run_simulation`, full per-step trace) and a numba kernel
used by `monte_carlo` for replication batches.  Both consume the same
counter-based random streams (see rng.py), draw-for-draw.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .model import (
    DegenerateInstanceError,
    InvalidInstanceError,
    MarketConfig,
    MarketState,
    Ranking,
    SignalMode,
)
from .policies import (
    PolicySpec,
    RankingKind,
    SolverKind,
    activity_ranking,
    average_quality,
    average_quality_ranking,
    performance_ranking_bruteforce,
    performance_ranking_k1,
    performance_ranking_swap_heuristic,
    popularity_ranking,
    segmented_quality_rankings,
)
from .rng import SLOT_CLASS, SLOT_ITEM, SLOT_PURCHASE, ReplicationStream, derive_stream_key

FLOAT_FORMAT = "%.10g"


@dataclass(frozen=True)
class StepRecord:
    step: int
    consumer_class: int
    item: int | None  # None when the no-trial outcome was drawn
    purchased: bool


@dataclass(frozen=True)
class SimulationTrace:
    records: list[StepRecord]
    final_state: MarketState

    def cumulative_purchases(self) -> np.ndarray:
        """Total purchases after each step, length = horizon."""
        return np.cumsum([1 if r.purchased else 0 for r in self.records])


@dataclass(frozen=True)
class EfficiencyCurve:
    policy_label: str
    steps: np.ndarray
    mean_cum_purchases: np.ndarray
    stderr: np.ndarray
    replications: int


@dataclass(frozen=True)
class PurchaseProfile:
    policy_label: str
    mean_total: np.ndarray
    mean_by_class: np.ndarray
    replications: int


@dataclass(frozen=True)
class MonteCarloResult:
    curves: list[EfficiencyCurve]
    profiles: list[PurchaseProfile]

    def curve(self, label: str) -> EfficiencyCurve:
        for c in self.curves:
            if c.policy_label == label:
                return c
        raise KeyError(label)

    def profile(self, label: str) -> PurchaseProfile:
        for p in self.profiles:
            if p.policy_label == label:
                return p
        raise KeyError(label)


class _PolicyRuntime:
    """Resolves the ranking and displayed counts a class sees each step.

    Static rankings are computed once; dynamic rankings are recomputed
    from the currently displayed counts every step.
    """

    def __init__(self, config: MarketConfig, policy: PolicySpec):
        self.config = config
        self.policy = policy
        self.static_rankings: list[Ranking] | None = None
        if policy.kind is RankingKind.AVERAGE_QUALITY:
            self.static_rankings = [average_quality_ranking(config)] * config.num_classes
        elif policy.kind is RankingKind.SEGMENTED_QUALITY:
            self.static_rankings = segmented_quality_rankings(config)
        if policy.kind is RankingKind.PERFORMANCE:
            if policy.solver is SolverKind.EXACT_K1 and config.num_classes != 1:
                raise InvalidInstanceError("exact performance solver requires K = 1")

    def displayed_counts(self, state: MarketState, k: int) -> np.ndarray:
        mode = self.policy.signal
        if mode is SignalMode.GLOBAL:
            return state.global_purchases
        if mode is SignalMode.SEGMENTED:
            return state.class_purchases[:, k]
        return np.zeros(self.config.num_items, dtype=np.int64)

    def ranking_for(self, state: MarketState, k: int) -> Ranking:
        if self.static_rankings is not None:
            return self.static_rankings[k]
        kind = self.policy.kind
        counts = self.displayed_counts(state, k)
        if kind is RankingKind.POPULARITY:
            return popularity_ranking(counts)
        if kind is RankingKind.ACTIVITY:
            last = state.last_purchase_step
            if self.policy.signal is SignalMode.NONE:
                last = np.full(self.config.num_items, -1, dtype=np.int64)
            return activity_ranking(last)
        solver = self.policy.solver
        if solver is SolverKind.EXACT_K1:
            return performance_ranking_k1(self.config, counts)
        if solver is SolverKind.BRUTE_FORCE:
            return performance_ranking_bruteforce(self.config, _signal_of(counts))[0]
        return performance_ranking_swap_heuristic(self.config, _signal_of(counts))[0]

    def effective_visibilities(self, state: MarketState, k: int) -> np.ndarray:
        ranking = self.ranking_for(state, k)
        return self.config.visibilities[ranking.position_of_item]


def _signal_of(counts: np.ndarray):
    from .model import PopularitySignal

    return PopularitySignal.global_counts(counts)


def _draw_class(weights: np.ndarray, u: float) -> int:
    k = weights.shape[0] - 1
    acc = 0.0
    for kk in range(weights.shape[0]):
        acc += float(weights[kk])
        if u < acc:
            return kk
    return k


def _draw_item(
    veff: np.ndarray,
    appeals_k: np.ndarray,
    counts: np.ndarray,
    z: float,
    u: float,
) -> int:
    """Inverse-CDF walk in item-index order; -1 means no trial.

    Mirrors the numba kernel operation-for-operation so both paths
    produce identical traces.
    """
    n = veff.shape[0]
    terms = np.empty(n)
    denom = 0.0
    for i in range(n):
        term = float(veff[i]) * (float(appeals_k[i]) + float(counts[i]))
        terms[i] = term
        denom += term
    denom += z
    if denom <= 0.0:
        raise DegenerateInstanceError("zero trial denominator during simulation")
    threshold = u * denom
    chosen = -1
    acc = 0.0
    for i in range(n):
        acc += terms[i]
        if threshold < acc:
            chosen = i
            break
    if chosen == -1 and z == 0.0:
        # float slack in the final partial sum; the walk must land somewhere
        for i in range(n - 1, -1, -1):
            if terms[i] > 0.0:
                chosen = i
                break
    return chosen


def simulate_step(
    config: MarketConfig,
    policy: PolicySpec,
    state: MarketState,
    rng: ReplicationStream,
    _runtime: _PolicyRuntime | None = None,
) -> tuple[MarketState, StepRecord]:
    """Advance the market by one consumer arrival."""
    runtime = _runtime or _PolicyRuntime(config, policy)
    t = state.step + 1
    k = _draw_class(config.class_weights, rng.unit(t, SLOT_CLASS))
    veff = runtime.effective_visibilities(state, k)
    counts = runtime.displayed_counts(state, k)
    chosen = _draw_item(veff, config.appeals[:, k], counts, config.no_trial_mass, rng.unit(t, SLOT_ITEM))
    purchased = False
    if chosen >= 0:
        purchased = rng.unit(t, SLOT_PURCHASE) < float(config.qualities[chosen, k])
    d = state.global_purchases.copy()
    dk = state.class_purchases.copy()
    last = state.last_purchase_step.copy()
    if purchased:
        d[chosen] += 1
        dk[chosen, k] += 1
        last[chosen] = t
    new_state = MarketState(step=t, global_purchases=d, class_purchases=dk, last_purchase_step=last)
    record = StepRecord(step=t, consumer_class=k, item=None if chosen < 0 else chosen, purchased=purchased)
    return new_state, record


def run_simulation(
    config: MarketConfig,
    policy: PolicySpec,
    horizon: int,
    rng: ReplicationStream,
) -> SimulationTrace:
    """Run one replication of `horizon` consumer arrivals."""
    if horizon < 1:
        raise InvalidInstanceError("horizon must be at least 1")
    runtime = _PolicyRuntime(config, policy)
    state = MarketState.initial(config.num_items, config.num_classes)
    records: list[StepRecord] = []
    for _ in range(horizon):
        state, record = simulate_step(config, policy, state, rng, _runtime=runtime)
        records.append(record)
    return SimulationTrace(records=records, final_state=state)


def default_checkpoints(horizon: int) -> np.ndarray:
    """100 evenly spaced steps plus the horizon itself."""
    grid = np.round(horizon * np.arange(1, 101) / 100.0).astype(np.int64)
    grid = grid[grid >= 1]
    return np.unique(np.append(grid, horizon))


def _python_replication(
    config: MarketConfig,
    policy: PolicySpec,
    horizon: int,
    stream: ReplicationStream,
    checkpoints: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Reference per-replication run; returns (curve, class purchase counts)."""
    runtime = _PolicyRuntime(config, policy)
    state = MarketState.initial(config.num_items, config.num_classes)
    curve = np.zeros(checkpoints.shape[0], dtype=np.int64)
    cum = 0
    ci = 0
    for _ in range(horizon):
        state, record = simulate_step(config, policy, state, stream, _runtime=runtime)
        if record.purchased:
            cum += 1
        if ci < checkpoints.shape[0] and checkpoints[ci] == state.step:
            curve[ci] = cum
            ci += 1
    return curve, state.class_purchases.copy()


def _kernel_inputs(config: MarketConfig, policy: PolicySpec):
    """Static per-class effective visibilities and the signal-mode code."""
    if policy.kind is RankingKind.AVERAGE_QUALITY:
        rankings = [average_quality_ranking(config)] * config.num_classes
    elif policy.kind is RankingKind.SEGMENTED_QUALITY:
        rankings = segmented_quality_rankings(config)
    else:
        return None
    veff = np.stack(
        [config.visibilities[r.position_of_item] for r in rankings], axis=1
    )  # (N, K)
    mode = {SignalMode.GLOBAL: 0, SignalMode.SEGMENTED: 1, SignalMode.NONE: 2}[policy.signal]
    return np.ascontiguousarray(veff), mode


def monte_carlo(
    config: MarketConfig,
    policies: list[PolicySpec],
    horizon: int,
    replications: int,
    base_seed: int,
    checkpoints: np.ndarray | None = None,
    threads: int | None = None,
    engine: str = "auto",
) -> MonteCarloResult:
    """Replicated simulations with independent per-replication streams.

    Replication r of policy index p draws from the stream keyed by
    (base_seed, p, r), so results do not depend on execution order or
    thread count.  Static-ranking policies run on the numba kernel;
    other policies fall back to the pure-Python path.
    """
    if replications < 1:
        raise InvalidInstanceError("need at least one replication")
    if horizon < 1:
        raise InvalidInstanceError("horizon must be at least 1")
    if engine not in ("auto", "python", "numba"):
        raise ValueError(f"unknown engine {engine!r}")
    cps = default_checkpoints(horizon) if checkpoints is None else np.asarray(checkpoints, dtype=np.int64)
    if cps.ndim != 1 or cps.size == 0 or np.any(np.diff(cps) <= 0) or cps[0] < 1 or cps[-1] > horizon:
        raise InvalidInstanceError("checkpoints must be strictly increasing within [1, horizon]")

    curves: list[EfficiencyCurve] = []
    profiles: list[PurchaseProfile] = []
    for p_idx, policy in enumerate(policies):
        kernel_in = _kernel_inputs(config, policy) if engine != "python" else None
        keys = np.array(
            [derive_stream_key(base_seed, p_idx, r) for r in range(replications)],
            dtype=np.uint64,
        )
        if kernel_in is not None:
            from . import _kernel

            veff, mode = kernel_in
            rep_curves, rep_class = _kernel.run_replications(
                np.ascontiguousarray(config.appeals),
                np.ascontiguousarray(config.qualities),
                config.class_weights,
                veff,
                mode,
                config.no_trial_mass,
                horizon,
                keys,
                cps,
                threads,
            )
        elif engine == "numba":
            raise InvalidInstanceError(f"policy {policy.label} has no kernel path (dynamic ranking)")
        else:
            rep_curves = np.zeros((replications, cps.shape[0]), dtype=np.int64)
            rep_class = np.zeros((replications, config.num_items, config.num_classes), dtype=np.int64)
            for r in range(replications):
                stream = ReplicationStream(int(keys[r]))
                rep_curves[r], rep_class[r] = _python_replication(config, policy, horizon, stream, cps)

        mean_curve = rep_curves.mean(axis=0)
        if replications > 1:
            stderr = rep_curves.std(axis=0, ddof=1) / np.sqrt(replications)
        else:
            stderr = np.zeros(cps.shape[0])
        mean_by_class = rep_class.mean(axis=0)
        curves.append(
            EfficiencyCurve(
                policy_label=policy.label,
                steps=cps.copy(),
                mean_cum_purchases=mean_curve,
                stderr=stderr,
                replications=replications,
            )
        )
        profiles.append(
            PurchaseProfile(
                policy_label=policy.label,
                mean_total=mean_by_class.sum(axis=1),
                mean_by_class=mean_by_class,
                replications=replications,
            )
        )
    return MonteCarloResult(curves=curves, profiles=profiles)


def simulate_final_purchases(
    config: MarketConfig,
    policy: PolicySpec,
    horizon: int,
    replications: int,
    base_seed: int,
    threads: int | None = None,
    policy_index: int = 0,
) -> np.ndarray:
    """Per-replication final purchase counts, shape (R, N, K).

    Streams are keyed as in `monte_carlo` with the given policy index, so
    replication r here reproduces replication r of a monte_carlo run.
    """
    keys = np.array(
        [derive_stream_key(base_seed, policy_index, r) for r in range(replications)],
        dtype=np.uint64,
    )
    checkpoints = np.array([horizon], dtype=np.int64)
    kernel_in = _kernel_inputs(config, policy)
    if kernel_in is not None:
        from . import _kernel

        veff, mode = kernel_in
        _, rep_class = _kernel.run_replications(
            np.ascontiguousarray(config.appeals),
            np.ascontiguousarray(config.qualities),
            config.class_weights,
            veff,
            mode,
            config.no_trial_mass,
            horizon,
            keys,
            checkpoints,
            threads,
        )
        return rep_class
    rep_class = np.zeros((replications, config.num_items, config.num_classes), dtype=np.int64)
    for r in range(replications):
        stream = ReplicationStream(int(keys[r]))
        _, rep_class[r] = _python_replication(config, policy, horizon, stream, checkpoints)
    return rep_class


def write_efficiency_csv(path, curves: list[EfficiencyCurve]) -> None:
    """Columns: policy, step, mean_cum_purchases, stderr."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "step", "mean_cum_purchases", "stderr"])
        for curve in curves:
            for i in range(curve.steps.shape[0]):
                writer.writerow(
                    [
                        curve.policy_label,
                        int(curve.steps[i]),
                        FLOAT_FORMAT % curve.mean_cum_purchases[i],
                        FLOAT_FORMAT % curve.stderr[i],
                    ]
                )


def average_quality_ranks(config: MarketConfig) -> np.ndarray:
    """1-based rank of each item by decreasing average quality (1 = best)."""
    order = np.argsort(-average_quality(config), kind="stable")
    ranks = np.empty(config.num_items, dtype=np.int64)
    ranks[order] = np.arange(1, config.num_items + 1)
    return ranks


def write_profile_csv(path, profiles: list[PurchaseProfile], config: MarketConfig) -> None:
    """Columns: policy, item, class_or_total, mean_purchases, quality, appeal, avg_quality_rank.

    Class rows carry the class-specific quality/appeal; total rows carry
    the class-weighted averages.
    """
    qbar = average_quality(config)
    abar = config.appeals @ config.class_weights
    ranks = average_quality_ranks(config)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["policy", "item", "class_or_total", "mean_purchases", "quality", "appeal", "avg_quality_rank"]
        )
        for prof in profiles:
            for i in range(config.num_items):
                writer.writerow(
                    [
                        prof.policy_label,
                        i,
                        "total",
                        FLOAT_FORMAT % prof.mean_total[i],
                        FLOAT_FORMAT % qbar[i],
                        FLOAT_FORMAT % abar[i],
                        int(ranks[i]),
                    ]
                )
                for k in range(config.num_classes):
                    writer.writerow(
                        [
                            prof.policy_label,
                            i,
                            f"class{k + 1}",
                            FLOAT_FORMAT % prof.mean_by_class[i, k],
                            FLOAT_FORMAT % config.qualities[i, k],
                            FLOAT_FORMAT % config.appeals[i, k],
                            int(ranks[i]),
                        ]
                    )
