"""Classical opinion-dynamics models for ordinary users.

Each model is decomposed into a selection function (who influences the
focal agent), a message function (what a source conveys) and an update
function (how much the focal attitude moves).  Update kernels are written
against numpy so the same code evaluates one interaction or a whole round.

A round is synchronous by default: every agent reads the round-start
snapshot, deltas are computed independently and committed together.  Random
choices come from :mod:`hybridsim.rng` substreams keyed by
``(stream, agent, round)``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, ClassVar, Union

import numpy as np

from . import rng

ATTITUDE_MIN = -1.0
ATTITUDE_MAX = 1.0


class InvalidStateError(ValueError):
    """Agent state is not valid for the active model."""


class ContractError(ValueError):
    """A caller passed inputs that violate an operation's precondition."""


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")


def _check_positive(name: str, value: float) -> None:
    if not value > 0.0:
        raise ValueError(f"{name} must be > 0, got {value}")


@dataclass(frozen=True)
class BCParams:
    alpha: float = 0.10
    epsilon: float = 0.30
    kind: ClassVar[str] = "bc"

    def __post_init__(self) -> None:
        _check_alpha(self.alpha)
        _check_positive("epsilon", self.epsilon)


@dataclass(frozen=True)
class HKParams:
    """Influence strength is induced: N_in / (N_in + 1)."""

    epsilon: float = 0.10
    paper_literal_signs: bool = False
    kind: ClassVar[str] = "hk"

    def __post_init__(self) -> None:
        _check_positive("epsilon", self.epsilon)


@dataclass(frozen=True)
class RAParams:
    alpha: float = 0.30
    init_uncertainty: float = 0.20
    paper_literal_signs: bool = False
    kind: ClassVar[str] = "ra"

    def __post_init__(self) -> None:
        _check_alpha(self.alpha)
        _check_positive("init_uncertainty", self.init_uncertainty)


@dataclass(frozen=True)
class SJParams:
    alpha: float = 0.15
    acc_thred: float = 0.10
    rej_thred: float = 0.90
    kind: ClassVar[str] = "sj"

    def __post_init__(self) -> None:
        _check_alpha(self.alpha)
        _check_positive("acc_thred", self.acc_thred)
        if not self.rej_thred > self.acc_thred:
            raise ValueError(
                f"rej_thred ({self.rej_thred}) must exceed acc_thred ({self.acc_thred})"
            )


@dataclass(frozen=True)
class LorenzParams:
    alpha: float = 0.10
    lam: float = 1.0
    k: float = 2.0
    rho: float = 0.9
    M: float = 1.0
    credibility: float = 1.0
    kind: ClassVar[str] = "lorenz"

    def __post_init__(self) -> None:
        _check_alpha(self.alpha)
        _check_positive("lam", self.lam)
        _check_positive("k", self.k)
        _check_positive("M", self.M)
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if not 0.0 <= self.credibility <= 1.0:
            raise ValueError(f"credibility must lie in [0, 1], got {self.credibility}")


ModelParams = Union[BCParams, HKParams, RAParams, SJParams, LorenzParams]

MODEL_CLASSES: dict[str, type] = {
    cls.kind: cls for cls in (BCParams, HKParams, RAParams, SJParams, LorenzParams)
}

# Column names used by published parameter tables.
_ALIASES = {
    "bc_bound": "epsilon",
    "init_uct": "init_uncertainty",
    "lambda": "lam",
    "tho": "rho",
}


def params_from_dict(data: Mapping[str, Any]) -> ModelParams:
    """Build model parameters from ``{"kind": "bc", "alpha": ..., ...}``."""
    data = dict(data)
    kind = str(data.pop("kind", "")).lower()
    if kind not in MODEL_CLASSES:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {sorted(MODEL_CLASSES)}")
    values = {_ALIASES.get(k, k): v for k, v in data.items()}
    return MODEL_CLASSES[kind](**values)


def params_to_dict(params: ModelParams) -> dict[str, Any]:
    return {"kind": params.kind, **asdict(params)}


@dataclass(frozen=True)
class OrdinaryAgentState:
    id: str
    attitude: float
    uncertainty: float = 0.0


@dataclass(frozen=True)
class Message:
    source: str
    score: float
    segment: tuple[float, float] | None = None


@dataclass(frozen=True)
class SelectionResult:
    targets: frozenset[str] = frozenset()


# ---------------------------------------------------------------------------
# update kernels (scalar or array arguments)
# ---------------------------------------------------------------------------


def bc_delta(a, m, alpha, epsilon):
    diff = m - a
    return alpha * (np.abs(diff) < epsilon) * diff


def ra_delta(a, u_i, m, u_j, alpha, literal=False):
    overlap = np.minimum(a + u_i, m + u_j) - np.maximum(a - u_i, m - u_j)
    ratio = overlap / u_j
    sim = np.where(ratio > 1.0, ratio - 1.0, 0.0)
    direction = (a - m) if literal else (m - a)
    return alpha * sim * direction


def sj_delta(a, m, alpha, acc, rej):
    diff = m - a
    dist = np.abs(diff)
    assimilation = np.where(dist < acc, diff, 0.0)
    repulsion = np.where(dist > rej, -diff, 0.0)
    return alpha * (assimilation + repulsion)


def lorenz_delta(a, m, alpha, lam, k, rho, M, credibility):
    pol = (M * M - a * a) / (M * M)
    lam_k = lam**k
    sim = lam_k / (lam_k + np.abs(m - a) ** k)
    force = rho * (m - a) + (1.0 - rho) * m
    return alpha * credibility * pol * sim * force


def hk_deltas(focal: np.ndarray, focal_pos: np.ndarray, pool: np.ndarray, epsilon: float,
              literal: bool = False, chunk_rows: int = 256) -> np.ndarray:
    """HK deltas for ``focal`` attitudes against every pool member except itself.

    ``focal_pos[r]`` is the pool index of focal row ``r`` (or -1 if the focal
    agent is not part of the pool).  Focal rows are processed in sorted chunks
    so each chunk only compares against the window of pool values that can
    fall inside the bound.
    """
    out = np.zeros(len(focal), dtype=np.float64)
    if len(pool) == 0 or len(focal) == 0:
        return out
    order = np.argsort(pool, kind="stable")
    sorted_pool = pool[order]
    rows_order = np.argsort(focal, kind="stable")
    for start in range(0, len(focal), chunk_rows):
        rows = rows_order[start:start + chunk_rows]
        a = focal[rows]
        lo = max(0, int(np.searchsorted(sorted_pool, a.min() - epsilon, side="left")) - 1)
        hi = min(len(pool), int(np.searchsorted(sorted_pool, a.max() + epsilon, side="right")) + 1)
        cols = order[lo:hi]
        diff = sorted_pool[None, lo:hi] - a[:, None]
        inside = (np.abs(diff) < epsilon) & (cols[None, :] != focal_pos[rows][:, None])
        n_in = inside.sum(axis=1)
        total = np.where(inside, diff, 0.0).sum(axis=1)
        if literal:
            total = -total
        out[rows] = np.where(n_in > 0, total / (n_in + 1), 0.0)
    return out


# ---------------------------------------------------------------------------
# single-interaction operations
# ---------------------------------------------------------------------------


def message_of(params: ModelParams, agent: OrdinaryAgentState) -> Message:
    if isinstance(params, RAParams):
        if not agent.uncertainty > 0.0:
            raise InvalidStateError(
                f"agent {agent.id!r}: RA requires uncertainty > 0, got {agent.uncertainty}"
            )
        return Message(
            agent.id,
            agent.attitude,
            (agent.attitude - agent.uncertainty, agent.attitude + agent.uncertainty),
        )
    return Message(agent.id, agent.attitude)


def update_bc(state: OrdinaryAgentState, msg: Message, params: BCParams) -> float:
    return float(bc_delta(state.attitude, msg.score, params.alpha, params.epsilon))


def update_hk(state: OrdinaryAgentState, msgs: Iterable[Message], params: HKParams) -> float:
    scores = np.array([m.score for m in msgs if m.source != state.id], dtype=np.float64)
    delta = hk_deltas(
        np.array([state.attitude]), np.array([-1]), scores, params.epsilon,
        params.paper_literal_signs,
    )
    return float(delta[0])


def update_ra(state: OrdinaryAgentState, msg: Message, params: RAParams) -> float:
    if msg.segment is None:
        raise ContractError(f"RA update needs a segment message from {msg.source!r}")
    if not state.uncertainty > 0.0:
        raise InvalidStateError(f"agent {state.id!r}: RA requires uncertainty > 0")
    lo, hi = msg.segment
    half = (hi - lo) / 2.0
    return float(
        ra_delta(state.attitude, state.uncertainty, msg.score, half, params.alpha,
                 params.paper_literal_signs)
    )


def update_sj(state: OrdinaryAgentState, msg: Message, params: SJParams) -> float:
    return float(sj_delta(state.attitude, msg.score, params.alpha, params.acc_thred,
                          params.rej_thred))


def update_lorenz(state: OrdinaryAgentState, msg: Message, params: LorenzParams) -> float:
    return float(
        lorenz_delta(state.attitude, msg.score, params.alpha, params.lam, params.k,
                     params.rho, params.M, params.credibility)
    )


def clamp(values):
    return np.clip(values, ATTITUDE_MIN, ATTITUDE_MAX)


# ---------------------------------------------------------------------------
# populations and pools
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Population:
    """Ordinary agents in canonical (sorted id) order."""

    ids: tuple[str, ...]
    attitudes: np.ndarray
    uncertainty: np.ndarray
    keys: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def from_states(cls, states: Iterable[OrdinaryAgentState]) -> Population:
        ordered = sorted(states, key=lambda s: s.id)
        ids = tuple(s.id for s in ordered)
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate agent ids in population")
        att = np.array([s.attitude for s in ordered], dtype=np.float64)
        unc = np.array([s.uncertainty for s in ordered], dtype=np.float64)
        return cls(ids, att, unc, rng.agent_keys(ids))

    @classmethod
    def from_attitudes(cls, attitudes: Mapping[str, float], params: ModelParams | None = None,
                       uncertainty: float | None = None) -> Population:
        if uncertainty is None:
            uncertainty = params.init_uncertainty if isinstance(params, RAParams) else 0.0
        return cls.from_states(
            OrdinaryAgentState(str(i), float(a), uncertainty) for i, a in attitudes.items()
        )

    def with_attitudes(self, attitudes: np.ndarray) -> Population:
        return Population(self.ids, attitudes, self.uncertainty, self.keys)

    def states(self) -> list[OrdinaryAgentState]:
        return [
            OrdinaryAgentState(i, float(a), float(u))
            for i, a, u in zip(self.ids, self.attitudes, self.uncertainty)
        ]

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class Pool:
    """Round-start snapshot of every message source visible to ordinary agents.

    Ordinary agents occupy indices ``0..n_ordinary-1`` (canonical order),
    followed by external (core-user) messages sorted by source id.
    """

    ids: tuple[str, ...]
    scores: np.ndarray
    half_widths: np.ndarray
    n_ordinary: int


def build_pool(params: ModelParams, population: Population,
               externals: Iterable[Message] = ()) -> Pool:
    ext = sorted(externals, key=lambda m: m.source)
    for m in ext:
        if not ATTITUDE_MIN <= m.score <= ATTITUDE_MAX or math.isnan(m.score):
            raise ValueError(f"external message from {m.source!r} has score {m.score} outside [-1, 1]")
    if isinstance(params, RAParams):
        bad = np.nonzero(~(population.uncertainty > 0.0))[0]
        if len(bad):
            raise InvalidStateError(
                f"agent {population.ids[bad[0]]!r}: RA requires uncertainty > 0"
            )
    ext_half = [
        (m.segment[1] - m.segment[0]) / 2.0 if m.segment is not None
        else (params.init_uncertainty if isinstance(params, RAParams) else 0.0)
        for m in ext
    ]
    return Pool(
        ids=population.ids + tuple(m.source for m in ext),
        scores=np.concatenate([population.attitudes, np.array([m.score for m in ext], dtype=np.float64)]),
        half_widths=np.concatenate([population.uncertainty, np.array(ext_half, dtype=np.float64)]),
        n_ordinary=len(population),
    )


class _BoundIndex:
    """Sorted view of pool scores for uniform choice inside a confidence bound."""

    def __init__(self, scores: np.ndarray):
        self.order = np.argsort(scores, kind="stable")
        self.sorted = scores[self.order]
        self.rank = np.empty_like(self.order)
        self.rank[self.order] = np.arange(len(scores))

    def _inside(self, idx: np.ndarray, a: np.ndarray, eps: float) -> np.ndarray:
        return np.abs(self.sorted[idx] - a) < eps

    def partners(self, focal: np.ndarray, epsilon: float, u: np.ndarray) -> np.ndarray:
        """Uniform choice among pool members with ``|score - a| < epsilon``, excluding self."""
        n = len(self.sorted)
        a = self.sorted[self.rank[focal]]
        lo = np.searchsorted(self.sorted, a - epsilon, side="right")
        hi = np.searchsorted(self.sorted, a + epsilon, side="left")
        # searchsorted works on a - eps / a + eps; re-align to the exact |diff| < eps predicate
        while True:
            m = (lo > 0) & self._inside(np.maximum(lo - 1, 0), a, epsilon)
            if not m.any():
                break
            lo[m] -= 1
        while True:
            m = (lo < hi) & ~self._inside(np.minimum(lo, n - 1), a, epsilon)
            if not m.any():
                break
            lo[m] += 1
        while True:
            m = (hi < n) & self._inside(np.minimum(hi, n - 1), a, epsilon)
            if not m.any():
                break
            hi[m] += 1
        while True:
            m = (hi > lo) & ~self._inside(np.maximum(hi - 1, 0), a, epsilon)
            if not m.any():
                break
            hi[m] -= 1
        own = self.rank[focal]
        count = hi - lo - 1
        out = np.full(len(focal), -1, dtype=np.int64)
        ok = count > 0
        k = np.minimum((u[ok] * count[ok]).astype(np.int64), count[ok] - 1)
        pos = lo[ok] + k
        pos = pos + (pos >= own[ok])
        out[ok] = self.order[pos]
        return out


def _uniform_partners(focal: np.ndarray, pool_size: int, u: np.ndarray) -> np.ndarray:
    count = pool_size - 1
    if count <= 0:
        return np.full(len(focal), -1, dtype=np.int64)
    k = np.minimum((u * count).astype(np.int64), count - 1)
    return k + (k >= focal)


def select_partner_indices(params: ModelParams, pool: Pool, focal: np.ndarray,
                           u: np.ndarray, bound_index: _BoundIndex | None = None) -> np.ndarray:
    """Partner pool index per focal agent (-1 when nobody qualifies). Not used by HK."""
    if isinstance(params, BCParams):
        index = bound_index if bound_index is not None else _BoundIndex(pool.scores)
        return index.partners(focal, params.epsilon, u)
    return _uniform_partners(focal, len(pool.ids), u)


def select_partners(params: ModelParams, focal: str, pool: Pool, u: float) -> SelectionResult:
    """Selection for one focal agent; ``u`` is its draw from the round substream."""
    try:
        i = pool.ids.index(focal)
    except ValueError:
        raise KeyError(f"focal agent {focal!r} not in pool") from None
    if len(pool.ids) < 2:
        return SelectionResult()
    if isinstance(params, HKParams):
        return SelectionResult(frozenset(x for x in pool.ids if x != focal))
    j = select_partner_indices(params, pool, np.array([i]), np.array([u]))[0]
    return SelectionResult(frozenset() if j < 0 else frozenset({pool.ids[j]}))


def _deltas(params: ModelParams, pool: Pool, focal: np.ndarray, u: np.ndarray,
            bound_index: _BoundIndex | None) -> np.ndarray:
    a = pool.scores[focal]
    if isinstance(params, HKParams):
        return hk_deltas(a, focal, pool.scores, params.epsilon, params.paper_literal_signs)
    partner = select_partner_indices(params, pool, focal, u, bound_index)
    has = partner >= 0
    out = np.zeros(len(focal), dtype=np.float64)
    if not has.any():
        return out
    a = a[has]
    j = partner[has]
    m = pool.scores[j]
    if isinstance(params, BCParams):
        d = bc_delta(a, m, params.alpha, params.epsilon)
    elif isinstance(params, RAParams):
        d = ra_delta(a, pool.half_widths[focal[has]], m, pool.half_widths[j], params.alpha,
                     params.paper_literal_signs)
    elif isinstance(params, SJParams):
        d = sj_delta(a, m, params.alpha, params.acc_thred, params.rej_thred)
    else:
        d = lorenz_delta(a, m, params.alpha, params.lam, params.k, params.rho, params.M,
                         params.credibility)
    out[has] = d
    return out


def step_round(params: ModelParams, population: Population, externals: Iterable[Message],
               key: int, round_index: int, *, workers: int = 1,
               synchronous: bool = True) -> Population:
    """Advance every ordinary agent by one round.

    ``key`` is a stream key from :func:`hybridsim.rng.stream_key`; each agent
    draws from the substream ``(key, agent id, round_index)``.
    """
    if len(population) == 0:
        return population
    pool = build_pool(params, population, externals)
    u = rng.uniforms(key, population.keys, round_index)
    if not synchronous:
        return population.with_attitudes(_sequential(params, pool, u))
    bound_index = _BoundIndex(pool.scores) if isinstance(params, BCParams) else None
    focal = np.arange(len(population))
    if workers <= 1 or len(population) < 2 * workers:
        delta = _deltas(params, pool, focal, u, bound_index)
    else:
        chunks = np.array_split(focal, workers)
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda c: _deltas(params, pool, c, u[c], bound_index), chunks))
        delta = np.concatenate(parts)
    return population.with_attitudes(clamp(population.attitudes + delta))


def _sequential(params: ModelParams, pool: Pool, u: np.ndarray) -> np.ndarray:
    """Asynchronous variant: agents update in canonical order against live attitudes."""
    scores = pool.scores.copy()
    live = Pool(pool.ids, scores, pool.half_widths, pool.n_ordinary)
    for i in range(pool.n_ordinary):
        d = _deltas(params, live, np.array([i]), u[i:i + 1], None)[0]
        scores[i] = min(ATTITUDE_MAX, max(ATTITUDE_MIN, scores[i] + d))
    return scores[: pool.n_ordinary].copy()


def ordinary_stream(seed: int, replicate: int = 0) -> int:
    """Stream key for the ordinary-agent phase of replicate ``replicate``."""
    return rng.stream_key(seed, replicate)


def simulate(params: ModelParams, population: Population, rounds: int, seed: int,
             replicate: int = 0, externals: Sequence[Sequence[Message]] | None = None,
             *, key: int | None = None, workers: int = 1,
             synchronous: bool = True) -> list[np.ndarray]:
    """Pure-ABM run; returns the attitude vector after each of ``rounds`` rounds.

    ``externals[t]`` (optional) are the messages injected in round ``t + 1``.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    stream = ordinary_stream(seed, replicate) if key is None else key
    out = []
    pop = population
    for t in range(1, rounds + 1):
        ext = externals[t - 1] if externals is not None else ()
        pop = step_round(params, pop, ext, stream, t, workers=workers, synchronous=synchronous)
        out.append(pop.attitudes.copy())
    return out
