"""Text analysis services used to turn generated content into numbers.

Stance comes from a remote chat model (when configured) or an offline
keyword lexicon; intensity from a valence lexicon with negation handling;
content type only from the remote model.  The embedder is a hashed TF-IDF
vectorizer whose document frequencies accumulate over the run's corpus.
"""

from __future__ import annotations

import enum
import hashlib
import importlib.resources
import logging
import math
import re
import threading
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import lru_cache

import httpx
import numpy as np

from .chat import ChatClient, ServiceUnavailable

logger = logging.getLogger(__name__)


class StanceLabel(str, enum.Enum):
    SUPPORT = "Support"
    NEUTRAL = "Neutral"
    OPPOSE = "Oppose"


class ContentType(str, enum.Enum):
    CALL_FOR_ACTION = "call_for_action"
    TESTIMONY = "testimony"
    SHARING_OF_OPINION = "sharing_of_opinion"
    REFERENCE_TO_THIRD_PARTY = "reference_to_third_party"
    OTHER = "other"


STANCE_PROMPT = (
    "What's the author's stance on {target}? Please choose from Support, Neutral, and Oppose. "
    "Only output your choice.\n"
    "\n"
    "Text: {text} \n"
    "Stance: "
)

CONTENT_PROMPT = (
    "Please classify the text into one of the following categories based on its content. "
    "Only output your choice.\n"
    "\n"
    "1. call for action: tweet contained a call for action (e.g. requesting, challenging, "
    "promoting, inviting, summoning someone to do something).\n"
    "2. testimony: tweet contained a testimony of the victim (e.g. report, declaration, "
    "first-person experience).\n"
    "3. sharing of opinion: e.g. evaluation, appreciation, addition, analysis of opinions.\n"
    "4. reference to a third party: reporting on something/-one, direct and indirect quotes.\n"
    "5. other: other content that does not fall into the above categories.\n"
    "\n"
    "Text: {text} \n"
    "Answer: "
)

_TOKEN = re.compile(r"[a-z0-9_]+(?:'[a-z]+)?")
NEGATORS = frozenset({
    "not", "no", "never", "none", "nobody", "nothing", "neither", "nor", "nowhere",
    "cannot", "without", "hardly", "barely", "isn't", "aren't", "wasn't", "weren't",
    "don't", "doesn't", "didn't", "won't", "wouldn't", "shouldn't", "couldn't", "can't",
    "ain't", "haven't", "hasn't", "hadn't",
})
NEGATION_WINDOW = 3
NEUTRAL_BAND = 0.05


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def _negated(tokens: list[str], i: int) -> bool:
    return any(t in NEGATORS for t in tokens[max(0, i - NEGATION_WINDOW):i])


def _first_match(text: str, table: Iterable[tuple[str, object]]):
    """Label whose pattern occurs earliest in ``text`` (case-insensitive)."""
    low = text.lower()
    best = None
    for pattern, label in table:
        pos = low.find(pattern)
        if pos >= 0 and (best is None or pos < best[0]):
            best = (pos, label)
    return None if best is None else best[1]


def map_stance_response(raw: str) -> StanceLabel | None:
    return _first_match(raw, [(s.value.lower(), s) for s in StanceLabel])


_CONTENT_PATTERNS = [
    ("call for action", ContentType.CALL_FOR_ACTION),
    ("call_for_action", ContentType.CALL_FOR_ACTION),
    ("testimony", ContentType.TESTIMONY),
    ("sharing of opinion", ContentType.SHARING_OF_OPINION),
    ("sharing_of_opinion", ContentType.SHARING_OF_OPINION),
    ("reference to a third party", ContentType.REFERENCE_TO_THIRD_PARTY),
    ("reference_to_third_party", ContentType.REFERENCE_TO_THIRD_PARTY),
    ("other", ContentType.OTHER),
]
_CONTENT_BY_NUMBER = dict(zip("12345", ContentType))


def map_content_response(raw: str) -> ContentType | None:
    label = _first_match(raw, _CONTENT_PATTERNS)
    if label is not None:
        return label
    m = re.match(r"\s*([1-5])\b", raw)
    return _CONTENT_BY_NUMBER[m.group(1)] if m else None


# ---------------------------------------------------------------------------
# stance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TopicLexicon:
    """Keywords signalling support for or opposition to one topic."""

    topic: str
    support: frozenset[str] = frozenset()
    oppose: frozenset[str] = frozenset()

    @classmethod
    def from_dict(cls, data: Mapping) -> TopicLexicon:
        def norm(words):
            return frozenset(w.lower().lstrip("#@") for w in words)

        return cls(str(data.get("topic", "")), norm(data.get("support", ())), norm(data.get("oppose", ())))

    def polarity(self, text: str) -> float:
        """Net keyword polarity in [-1, 1]; negated hits count for the other side."""
        tokens = tokenize(text)
        pro = con = 0
        for i, tok in enumerate(tokens):
            sign = 1 if tok in self.support else -1 if tok in self.oppose else 0
            if sign == 0:
                continue
            if _negated(tokens, i):
                sign = -sign
            if sign > 0:
                pro += 1
            else:
                con += 1
        return 0.0 if pro + con == 0 else (pro - con) / (pro + con)


def default_lexicon(topic: str = "the movement") -> TopicLexicon:
    tag = re.sub(r"[^a-z0-9]", "", topic.lower())
    support = {"support", "supporting", "solidarity", "stand", "believe", "justice",
               "empower", "empowering", "inspiring", "proud", "courage", "brave"}
    if tag:
        support.add(tag)
    oppose = {"oppose", "opposing", "against", "hoax", "overblown", "reject", "fake",
              "witchhunt", "exaggerated", "nonsense"}
    return TopicLexicon(topic, frozenset(support), frozenset(oppose))


class LexiconStance:
    def __init__(self, lexicon: TopicLexicon, band: float = NEUTRAL_BAND):
        self.lexicon = lexicon
        self.band = band

    def __call__(self, text: str) -> StanceLabel:
        p = self.lexicon.polarity(text)
        if p > self.band:
            return StanceLabel.SUPPORT
        if p < -self.band:
            return StanceLabel.OPPOSE
        return StanceLabel.NEUTRAL


class RemoteStance:
    """Chat-model stance annotation with the lexicon as fallback."""

    def __init__(self, client: ChatClient, target: str, fallback: LexiconStance):
        self.client = client
        self.target = target
        self.fallback = fallback

    def __call__(self, text: str) -> StanceLabel:
        try:
            raw = self.client.complete(STANCE_PROMPT.format(target=self.target, text=text))
        except ServiceUnavailable as exc:
            logger.warning("stance service unavailable, using lexicon: %s", exc)
            return self.fallback(text)
        label = map_stance_response(raw)
        if label is None:
            logger.warning("unrecognised stance response %r; treating as Neutral", raw[:80])
            return StanceLabel.NEUTRAL
        return label


def annotate_stance(text: str, backend) -> StanceLabel:
    if not text.strip():
        raise ValueError("stance annotation needs non-empty text")
    return backend(text)


# ---------------------------------------------------------------------------
# sentiment intensity
# ---------------------------------------------------------------------------


@lru_cache(maxsize=1)
def valence_lexicon() -> dict[str, float]:
    """Word valences rescaled to [-1, 1] (VADER lexicon, ratings in [-4, 4])."""
    path = importlib.resources.files("vaderSentiment") / "vader_lexicon.txt"
    table = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        parts = line.split("\t")
        if len(parts) >= 2:
            table[parts[0].lower()] = max(-1.0, min(1.0, float(parts[1]) / 4.0))
    return table


class SentimentAnalyzer:
    """Absolute mean valence of lexicon hits, with negation flipping."""

    def __init__(self, lexicon: Mapping[str, float] | None = None):
        self.lexicon = dict(valence_lexicon() if lexicon is None else lexicon)

    def polarity(self, text: str) -> float:
        tokens = tokenize(text)
        hits = []
        for i, tok in enumerate(tokens):
            v = self.lexicon.get(tok)
            if v is None or tok in NEGATORS:
                continue
            hits.append(-v if _negated(tokens, i) else v)
        return float(np.mean(hits)) if hits else 0.0

    def intensity(self, text: str) -> float:
        return min(1.0, abs(self.polarity(text)))


def sentiment_intensity(text: str, analyzer: SentimentAnalyzer | None = None) -> float:
    return (analyzer or _default_analyzer()).intensity(text)


@lru_cache(maxsize=1)
def _default_analyzer() -> SentimentAnalyzer:
    return SentimentAnalyzer()


# ---------------------------------------------------------------------------
# content type
# ---------------------------------------------------------------------------


def classify_content_type(text: str, client: ChatClient | None) -> ContentType:
    if client is None:
        logger.debug("no content classifier configured; labelling as other")
        return ContentType.OTHER
    try:
        raw = client.complete(CONTENT_PROMPT.format(text=text))
    except ServiceUnavailable as exc:
        logger.warning("content classifier unavailable: %s", exc)
        return ContentType.OTHER
    label = map_content_response(raw)
    if label is None:
        logger.warning("unrecognised content-type response %r; labelling as other", raw[:80])
        return ContentType.OTHER
    return label


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------


class Embedder:
    """Hashed TF-IDF vectors with run-level document frequencies."""

    def __init__(self, dim: int = 512):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self._df: dict[str, int] = {}
        self._docs = 0
        self._lock = threading.Lock()

    def bucket(self, token: str) -> int:
        h = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(h, "little") % self.dim

    def observe(self, text: str) -> None:
        terms = set(tokenize(text))
        with self._lock:
            self._docs += 1
            for t in terms:
                self._df[t] = self._df.get(t, 0) + 1

    def idf(self, token: str) -> float:
        return math.log((1 + self._docs) / (1 + self._df.get(token, 0))) + 1.0

    def __call__(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        counts: dict[str, int] = {}
        for tok in tokenize(text):
            counts[tok] = counts.get(tok, 0) + 1
        with self._lock:
            for tok, c in sorted(counts.items()):
                vec[self.bucket(tok)] += c * self.idf(tok)
        return vec


def embed_text(text: str, embedder: Embedder) -> np.ndarray:
    return embedder(text)


# ---------------------------------------------------------------------------
# toxicity
# ---------------------------------------------------------------------------


@dataclass
class ToxicityClient:
    """Posts ``{"text": ...}`` and reads a summary score at a dotted JSON path."""

    endpoint: str
    score_path: str = "summaryScore"
    timeout: float = 10.0
    transport: httpx.BaseTransport | None = field(default=None, repr=False)

    def score(self, text: str) -> float | None:
        try:
            with httpx.Client(timeout=self.timeout, transport=self.transport) as http:
                resp = http.post(self.endpoint, json={"text": text})
                resp.raise_for_status()
                data = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            logger.warning("toxicity service unavailable: %s", exc)
            return None
        value = data
        for part in self.score_path.split("."):
            if not isinstance(value, Mapping) or part not in value:
                logger.warning("toxicity response lacks %r", self.score_path)
                return None
            value = value[part]
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"toxicity score {value} outside [0, 1]")
        return value


def toxicity_score(text: str, client: ToxicityClient | None) -> float | None:
    return None if client is None else client.score(text)


# ---------------------------------------------------------------------------
# facade
# ---------------------------------------------------------------------------


class TextAnnotator:
    """Bundles stance, intensity and content-type annotation with per-text caching."""

    def __init__(self, stance_backend, analyzer: SentimentAnalyzer | None = None,
                 content_client: ChatClient | None = None):
        self.stance_backend = stance_backend
        self.analyzer = analyzer or _default_analyzer()
        self.content_client = content_client
        self._cache: dict[str, tuple[StanceLabel, float]] = {}
        self._lock = threading.Lock()

    @classmethod
    def offline(cls, lexicon: TopicLexicon | None = None) -> TextAnnotator:
        return cls(LexiconStance(lexicon or default_lexicon()))

    def stance_and_intensity(self, text: str) -> tuple[StanceLabel, float]:
        with self._lock:
            hit = self._cache.get(text)
        if hit is not None:
            return hit
        if text.strip():
            result = (annotate_stance(text, self.stance_backend), self.analyzer.intensity(text))
        else:
            result = (StanceLabel.NEUTRAL, 0.0)
        with self._lock:
            self._cache[text] = result
        return result

    def content_type(self, text: str) -> ContentType:
        return classify_content_type(text, self.content_client)
