"""Agent memory: append-only records, scored retrieval and periodic reflection."""

from __future__ import annotations

import enum
import logging
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np

from hybridsim.metrics import cosine

logger = logging.getLogger(__name__)


class MemoryKind(str, enum.Enum):
    PERSONAL = "personal_experience"
    EVENT = "event"
    REFLECTION = "reflection"


@dataclass(frozen=True)
class MemoryRecord:
    text: str
    vector: np.ndarray = field(repr=False, compare=False)
    created_round: int
    importance: float
    immediacy: float
    kind: MemoryKind
    seq: int


@dataclass(frozen=True)
class RetrievalWeights:
    recency: float = 0.25
    relevance: float = 0.25
    importance: float = 0.25
    immediacy: float = 0.25
    decay: float = 0.9

    def __post_init__(self) -> None:
        if min(self.recency, self.relevance, self.importance, self.immediacy) < 0:
            raise ValueError("retrieval weights must be non-negative")
        if not 0 < self.decay <= 1:
            raise ValueError("decay must be in (0, 1]")


class AgentMemory:
    """Single-owner memory store for one core agent."""

    def __init__(self, embed: Callable[[str], np.ndarray]):
        self.embed = embed
        self.records: list[MemoryRecord] = []

    def __len__(self) -> int:
        return len(self.records)

    def recent(self, n: int, kinds: Iterable[MemoryKind] | None = None) -> list[MemoryRecord]:
        pool = self._filter(kinds)
        return pool[-n:] if n > 0 else []

    def _filter(self, kinds) -> list[MemoryRecord]:
        if kinds is None:
            return list(self.records)
        kinds = set(kinds)
        return [r for r in self.records if r.kind in kinds]


def write_observation(memory: AgentMemory, text: str, round_index: int, kind: MemoryKind,
                      importance: float = 0.5, immediacy: float = 0.5) -> AgentMemory:
    if not text.strip():
        raise ValueError("memory text must be non-empty")
    for name, v in (("importance", importance), ("immediacy", immediacy)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {v}")
    memory.records.append(MemoryRecord(
        text, memory.embed(text), round_index, importance, immediacy,
        MemoryKind(kind), len(memory.records),
    ))
    return memory


def score_record(record: MemoryRecord, query_vec: np.ndarray, current_round: int,
                 w: RetrievalWeights) -> float:
    age = max(0, current_round - record.created_round)
    return (w.recency * w.decay ** age
            + w.relevance * cosine(query_vec, record.vector)
            + w.importance * record.importance
            + w.immediacy * record.immediacy)


def retrieve_memories(memory: AgentMemory, query: str, k: int, current_round: int,
                      weights: RetrievalWeights | None = None,
                      kinds: Iterable[MemoryKind] | None = None) -> list[MemoryRecord]:
    """Top-k records by weighted score; ties by newer round, then insertion order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pool = memory._filter(kinds)
    if not pool:
        return []
    w = weights or RetrievalWeights()
    qv = memory.embed(query)
    scored = [(score_record(r, qv, current_round, w), r) for r in pool]
    scored.sort(key=lambda sr: (-sr[0], -sr[1].created_round, sr[1].seq))
    return [r for _, r in scored[:k]]


# ---------------------------------------------------------------------------
# reflection
# ---------------------------------------------------------------------------

QUESTIONS_PROMPT = (
    "{records}\n\n"
    "Given only the information above, what are {n} most salient high-level questions we can "
    "answer about the subjects in the statements? Write one question per line."
)

INSIGHT_PROMPT = (
    "Statements about {name}:\n{records}\n\n"
    "What high-level insight can you infer from the above statements to answer the question: "
    "{question}\nAnswer with one sentence."
)

DEFAULT_QUESTION = "What are the most important things that happened recently?"
INSIGHT_IMPORTANCE = 0.8


def _numbered(records: Iterable[MemoryRecord]) -> str:
    return "\n".join(f"{i}. {r.text}" for i, r in enumerate(records, 1))


def _questions(raw: str, limit: int) -> list[str]:
    out = []
    for line in raw.splitlines():
        q = line.strip().lstrip("-*0123456789.) ").strip()
        if q:
            out.append(q)
    return out[:limit]


def reflect(memory: AgentMemory, respond, agent_id: str, name: str, current_round: int,
            period: int = 5, max_questions: int = 3, window: int = 20,
            k: int = 5) -> list[MemoryRecord]:
    """Append reflection records when ``current_round`` is on the period.

    ``respond(agent_id, round, prompt, kind)`` returns text, or ``None`` when
    the driver has nothing for that kind; it may raise on driver failure, in
    which case reflection is skipped for this round.
    """
    if period < 1 or current_round % period != 0 or not memory.records:
        return []
    recent = memory.recent(window)
    added: list[MemoryRecord] = []
    try:
        raw = respond(agent_id, current_round,
                      QUESTIONS_PROMPT.format(records=_numbered(recent), n=max_questions),
                      "questions")
        questions = _questions(raw, max_questions) if raw else [DEFAULT_QUESTION]
        for q in questions:
            evidence = retrieve_memories(memory, q, k, current_round)
            insight = respond(agent_id, current_round,
                              INSIGHT_PROMPT.format(name=name, records=_numbered(evidence), question=q),
                              "insight")
            if insight and insight.strip():
                write_observation(memory, insight.strip(), current_round, MemoryKind.REFLECTION,
                                  importance=INSIGHT_IMPORTANCE, immediacy=0.5)
                added.append(memory.records[-1])
    except Exception as exc:  # driver failures must not abort the run
        logger.warning("reflection skipped for %s at round %d: %s", agent_id, current_round, exc)
    return added
