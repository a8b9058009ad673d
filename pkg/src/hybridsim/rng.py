"""Keyed, counter-based random substreams.

Every stochastic decision in a round draws from a stream addressed by
``(stream key, agent key, round, draw index)``.  Draws are pure functions of
that address, so results never depend on iteration order or worker count.
The mixing function is the splitmix64 finalizer applied over the address
words, vectorized over agents with numpy.
"""

from __future__ import annotations

import hashlib
from collections.abc import Iterable

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        x = x + _GOLDEN
        x = (x ^ (x >> np.uint64(30))) * _M1
        x = (x ^ (x >> np.uint64(27))) * _M2
        return x ^ (x >> np.uint64(31))


def stream_key(*words: int) -> int:
    """Fold integer words (seed, replicate, ...) into one 64-bit stream key."""
    h = np.zeros(1, dtype=np.uint64)
    for w in words:
        h = _mix(h ^ np.uint64(int(w) & _MASK))
    return int(h[0])


def agent_key(agent_id: str) -> int:
    """Stable 64-bit key for an agent identifier (independent of PYTHONHASHSEED)."""
    digest = hashlib.blake2b(str(agent_id).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def agent_keys(ids: Iterable[str]) -> np.ndarray:
    return np.fromiter((agent_key(i) for i in ids), dtype=np.uint64)


def uniforms(key: int, agents: np.ndarray, round_index: int, draw: int = 0) -> np.ndarray:
    """One uniform in [0, 1) per agent key for the given round and draw index."""
    h = _mix(np.asarray(agents, dtype=np.uint64) ^ np.uint64(key & _MASK))
    h = _mix(h ^ np.uint64(int(round_index) & _MASK))
    h = _mix(h ^ np.uint64(int(draw) & _MASK))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def uniform(key: int, agent: int, round_index: int, draw: int = 0) -> float:
    return float(uniforms(key, np.array([agent], dtype=np.uint64), round_index, draw)[0])


def text_key(*parts: object) -> int:
    """64-bit key from arbitrary printable parts; used for deterministic text choices."""
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def choose_index(u: float, n: int) -> int:
    """Map a uniform draw to an index in range(n); n must be positive."""
    return min(int(u * n), n - 1)

