"""Numba kernels for the replication batches run by monte_carlo.

The arithmetic here mirrors engine._draw_class / engine._draw_item and
rng.unit_at operation-for-operation; tests assert bitwise equality of
whole traces between the two paths.  Replications are independent
(private state, own stream key, own output rows), so prange scheduling
cannot affect results.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange, set_num_threads
from numba import config as _numba_config

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _mix64(x):
    x = (x ^ (x >> np.uint64(30))) * _MUL1
    x = (x ^ (x >> np.uint64(27))) * _MUL2
    return x ^ (x >> np.uint64(31))


@njit(cache=True, inline="always")
def _unit_at(key, counter):
    state = key + (np.uint64(counter) + np.uint64(1)) * _GAMMA
    return np.float64(_mix64(state) >> np.uint64(11)) * _INV_2_53


@njit(cache=True)
def _simulate_replication(
    appeals,
    qualities,
    weights,
    veff,
    signal_mode,
    z,
    horizon,
    key,
    checkpoint_steps,
    out_curve,
    out_class_purchases,
):
    n, num_classes = appeals.shape
    d = np.zeros(n, dtype=np.int64)
    out_class_purchases[:] = 0
    terms = np.empty(n, dtype=np.float64)
    cum = 0
    ci = 0
    num_checkpoints = checkpoint_steps.shape[0]
    for t in range(1, horizon + 1):
        u = _unit_at(key, t * 3 + 0)
        k = num_classes - 1
        acc = 0.0
        for kk in range(num_classes):
            acc += weights[kk]
            if u < acc:
                k = kk
                break
        denom = 0.0
        for i in range(n):
            if signal_mode == 0:
                c = d[i]
            elif signal_mode == 1:
                c = out_class_purchases[i, k]
            else:
                c = 0
            term = veff[i, k] * (appeals[i, k] + c)
            terms[i] = term
            denom += term
        denom += z
        threshold = _unit_at(key, t * 3 + 1) * denom
        chosen = -1
        acc = 0.0
        for i in range(n):
            acc += terms[i]
            if threshold < acc:
                chosen = i
                break
        if chosen == -1 and z == 0.0:
            for i in range(n - 1, -1, -1):
                if terms[i] > 0.0:
                    chosen = i
                    break
        if chosen >= 0:
            if _unit_at(key, t * 3 + 2) < qualities[chosen, k]:
                d[chosen] += 1
                out_class_purchases[chosen, k] += 1
                cum += 1
        if ci < num_checkpoints and checkpoint_steps[ci] == t:
            out_curve[ci] = cum
            ci += 1


@njit(cache=True, parallel=True)
def _run_replications(
    appeals,
    qualities,
    weights,
    veff,
    signal_mode,
    z,
    horizon,
    keys,
    checkpoint_steps,
    curves,
    class_purchases,
):
    for r in prange(keys.shape[0]):
        _simulate_replication(
            appeals,
            qualities,
            weights,
            veff,
            signal_mode,
            z,
            horizon,
            keys[r],
            checkpoint_steps,
            curves[r],
            class_purchases[r],
        )


def run_replications(
    appeals,
    qualities,
    weights,
    veff,
    signal_mode: int,
    z: float,
    horizon: int,
    keys,
    checkpoint_steps,
    threads: int | None = None,
):
    """Run one stream-keyed replication per entry of ``keys``.

    Returns (curves, class_purchases) of shapes (R, C) and (R, N, K).
    """
    reps = keys.shape[0]
    n, num_classes = appeals.shape
    curves = np.zeros((reps, checkpoint_steps.shape[0]), dtype=np.int64)
    class_purchases = np.zeros((reps, n, num_classes), dtype=np.int64)
    if threads is not None:
        set_num_threads(max(1, min(threads, _numba_config.NUMBA_NUM_THREADS)))
    _run_replications(
        np.ascontiguousarray(appeals, dtype=np.float64),
        np.ascontiguousarray(qualities, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64),
        np.ascontiguousarray(veff, dtype=np.float64),
        np.int64(signal_mode),
        np.float64(z),
        np.int64(horizon),
        np.ascontiguousarray(keys, dtype=np.uint64),
        np.ascontiguousarray(checkpoint_steps, dtype=np.int64),
        curves,
        class_purchases,
    )
    return curves, class_purchases
