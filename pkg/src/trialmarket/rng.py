"""Counter-based random streams for reproducible Monte Carlo runs.

Every replication owns an independent stream keyed by
(base_seed, policy_index, replication).  Within a stream, the draw used
at simulation step ``t`` for purpose ``slot`` is a pure function of the
key and ``(t, slot)``: the uniform is obtained by avalanche-hashing the
counter position ``t * SLOTS_PER_STEP + slot``.  Because draws are
random access rather than sequential, results cannot depend on which
draws a code path happens to consume, on thread scheduling, or on the
implementation language (the numba kernels re-implement the identical
arithmetic and are tested for bitwise equality against this module).

The hash is the splitmix64 finalizer, i.e. each stream is the splitmix64
output sequence starting at a key-derived state.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15  # golden-ratio increment
_KEY_SALT_POLICY = 0xB5297A4D3C28F1A5
_KEY_SALT_REPLICATION = 0x68E31DA4A1B4F0D7

SLOTS_PER_STEP = 3
SLOT_CLASS = 0
SLOT_ITEM = 1
SLOT_PURCHASE = 2


def mix64(x: int) -> int:
    """splitmix64 avalanche finalizer on a 64-bit integer."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_stream_key(base_seed: int, policy_index: int, replication: int) -> int:
    """64-bit stream key for one (policy, replication) pair.

    Chained avalanche mixing keeps streams for nearby seeds, policy
    indices, and replication numbers statistically independent.
    """
    if base_seed < 0 or policy_index < 0 or replication < 0:
        raise ValueError("seed, policy index, and replication must be non-negative")
    h = mix64((base_seed + _GAMMA) & _MASK64)
    h = mix64(h ^ ((policy_index + _KEY_SALT_POLICY) & _MASK64))
    h = mix64(h ^ ((replication + _KEY_SALT_REPLICATION) & _MASK64))
    return h


def unit_at(key: int, counter: int) -> float:
    """Uniform double in [0, 1) at an absolute counter position."""
    state = (key + ((counter + 1) * _GAMMA)) & _MASK64
    return (mix64(state) >> 11) * (1.0 / 9007199254740992.0)  # 2**53


class ReplicationStream:
    """Random-access uniform stream for a single simulation replication.

    ``unit(step, slot)`` returns the same value no matter how many times
    or in which order it is called.
    """

    __slots__ = ("key",)

    def __init__(self, key: int):
        self.key = key & _MASK64

    @classmethod
    def for_replication(cls, base_seed: int, policy_index: int, replication: int) -> "ReplicationStream":
        return cls(derive_stream_key(base_seed, policy_index, replication))

    def unit(self, step: int, slot: int) -> float:
        if step < 1 or not 0 <= slot < SLOTS_PER_STEP:
            raise ValueError(f"step must be >= 1 and slot in [0,{SLOTS_PER_STEP}); got {step}, {slot}")
        return unit_at(self.key, step * SLOTS_PER_STEP + slot)
