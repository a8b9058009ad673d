"""Text-generation drivers for core agents: remote chat, replay and heuristic."""

from __future__ import annotations

import json
import logging
import threading
from collections import defaultdict, deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from hybridsim import rng
from hybridsim.agent.actions import DoNothing, Like, Post, Reply, Retweet, format_response
from hybridsim.agent.prompt import TweetView
from hybridsim.annotators import LexiconStance, StanceLabel, TopicLexicon, default_lexicon
from hybridsim.chat import ChatClient, ChatSettings, ServiceUnavailable

logger = logging.getLogger(__name__)

ACTION = "action"
SYSTEM_PROMPT = "You are a Twitter user taking part in an online discussion. Follow the requested format exactly."


class DriverUnavailable(RuntimeError):
    """The driver could not produce a response for this turn."""


@dataclass(frozen=True)
class DriverConfig:
    kind: str = "heuristic"
    base_url: str = "http://127.0.0.1:8000/v1"
    model: str = "gpt-3.5-turbo-0613"
    api_key_env: str = "OPENAI_API_KEY"
    max_tokens: int = 256
    temperature: float = 0.0
    timeout: float = 30.0
    retries: int = 3
    replay_path: str | None = None
    max_in_flight: int = 8

    def __post_init__(self) -> None:
        if self.kind not in ("remote_chat", "replay", "heuristic"):
            raise ValueError(f"unknown driver kind {self.kind!r}")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be > 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")

    @classmethod
    def from_dict(cls, data: Mapping) -> DriverConfig:
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class AgentTurn:
    """What a heuristic driver may look at besides the prompt."""

    agent_id: str
    name: str
    role: str
    attitude: float
    timeline: Sequence[TweetView] = ()


class Driver(Protocol):
    def respond(self, agent_id: str, round_index: int, prompt: str, kind: str = ACTION,
                turn: AgentTurn | None = None) -> str | None: ...


class RemoteChatDriver:
    def __init__(self, config: DriverConfig, transport=None):
        self.client = ChatClient(ChatSettings(
            base_url=config.base_url, model=config.model, api_key_env=config.api_key_env,
            max_tokens=config.max_tokens, temperature=config.temperature,
            timeout=config.timeout, retries=config.retries,
        ), transport=transport)

    def respond(self, agent_id, round_index, prompt, kind=ACTION, turn=None):
        try:
            return self.client.complete(prompt, system=SYSTEM_PROMPT)
        except ServiceUnavailable as exc:
            raise DriverUnavailable(str(exc)) from exc


class ReplayDriver:
    """Serves recorded responses keyed by (agent id, round, kind), in file order."""

    def __init__(self, records: Iterable[Mapping]):
        self._queues: dict[tuple[str, int, str], deque[str]] = defaultdict(deque)
        self._lock = threading.Lock()
        for rec in records:
            key = (str(rec["agent_id"]), int(rec["round"]), str(rec.get("kind", ACTION)))
            self._queues[key].append(str(rec["response"]))

    @classmethod
    def from_jsonl(cls, path: str | Path) -> ReplayDriver:
        records = []
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{n}: {exc}") from exc
        return cls(records)

    def respond(self, agent_id, round_index, prompt, kind=ACTION, turn=None):
        with self._lock:
            q = self._queues.get((str(agent_id), int(round_index), kind))
            if q:
                return q.popleft()
        if kind == ACTION:
            raise DriverUnavailable(f"no recorded response left for {agent_id} at round {round_index}")
        return None


# action propensities: post, retweet, reply, like, do_nothing
ROLE_PROPENSITY = {
    "Idea Starter": (0.50, 0.20, 0.10, 0.10, 0.10),
    "Amplifier": (0.20, 0.50, 0.05, 0.10, 0.15),
    "Curator": (0.20, 0.20, 0.30, 0.10, 0.20),
    "Commentator": (0.20, 0.35, 0.20, 0.10, 0.15),
    "Viewer": (0.05, 0.05, 0.00, 0.10, 0.80),
}

_SUPPORT = (
    "I stand in solidarity with {tag}. {tone}",
    "Proud to support {tag} and every survivor who speaks up. {tone}",
    "We believe survivors. {tag} {tone}",
)
_OPPOSE = (
    "I am against where this campaign is going. {tone}",
    "This whole thing is overblown. {tone}",
    "I reject this online pile-on. {tone}",
)
_NEUTRAL = (
    "Reading the news today and still making up my mind.",
    "Lots of discussion online right now, following along.",
)
_TONE = {
    1: ("It feels okay.", "This seems bad."),
    2: ("This is good.", "This is terrible."),
    3: ("This is amazing and wonderful!", "This is horrible and disgusting!"),
}


class HeuristicDriver:
    """Deterministic, offline stand-in for a chat model.

    Action choice is biased by communication role; content polarity and tone
    follow the agent's current attitude.  Every choice is a pure function of
    (seed, agent, round).
    """

    def __init__(self, topic: str = "#MeToo", seed: int = 0, lexicon: TopicLexicon | None = None):
        self.topic = topic
        self.seed = seed
        self.stance = LexiconStance(lexicon or default_lexicon(topic))

    def _u(self, agent_id: str, round_index: int, draw: int) -> float:
        key = rng.text_key("heuristic", self.seed, agent_id, round_index, draw)
        return rng.uniform(key, 0, 0)

    def _text(self, agent_id: str, round_index: int, attitude: float) -> str:
        strength = 3 if abs(attitude) > 0.6 else 2 if abs(attitude) > 0.3 else 1
        pick = self._u(agent_id, round_index, 3)
        if attitude > 0.05:
            t = _SUPPORT[rng.choose_index(pick, len(_SUPPORT))]
            return t.format(tag=self.topic, tone=_TONE[strength][0])
        if attitude < -0.05:
            t = _OPPOSE[rng.choose_index(pick, len(_OPPOSE))]
            return t.format(tone=_TONE[strength][1])
        return _NEUTRAL[rng.choose_index(pick, len(_NEUTRAL))]

    def _target(self, turn: AgentTurn, round_index: int) -> TweetView | None:
        others = [t for t in turn.timeline if t.author != turn.name]
        if not others:
            return None
        want = (StanceLabel.SUPPORT if turn.attitude > 0.05 else
                StanceLabel.OPPOSE if turn.attitude < -0.05 else StanceLabel.NEUTRAL)
        aligned = [t for t in others if t.content and self.stance(t.content) == want]
        pool = aligned or others
        return pool[rng.choose_index(self._u(turn.agent_id, round_index, 2), len(pool))]

    def respond(self, agent_id, round_index, prompt, kind=ACTION, turn=None):
        if kind != ACTION:
            return None
        if turn is None:
            raise DriverUnavailable("heuristic driver needs the agent turn")
        weights = ROLE_PROPENSITY[turn.role]
        u = self._u(agent_id, round_index, 1)
        acc, choice = 0.0, 4
        for i, w in enumerate(weights):
            acc += w
            if u < acc:
                choice = i
                break
        target = self._target(turn, round_index) if choice in (1, 2, 3) else None
        if choice in (1, 2, 3) and target is None:
            choice = 0 if turn.role != "Viewer" else 4
        text = self._text(agent_id, round_index, turn.attitude)
        if choice == 0:
            action = Post(text)
        elif choice == 1:
            quote = text if self._u(agent_id, round_index, 4) < 0.3 else None
            action = Retweet(quote, target.author, str(target.id), target.content)
        elif choice == 2:
            action = Reply(text, target.author, str(target.id))
        elif choice == 3:
            action = Like(target.author, str(target.id))
        else:
            return format_response(DoNothing())
        return format_response(action, "due to `what I just read`, I need to:")


def make_driver(config: DriverConfig, topic: str = "#MeToo", seed: int = 0,
                lexicon: TopicLexicon | None = None) -> Driver:
    if config.kind == "remote_chat":
        return RemoteChatDriver(config)
    if config.kind == "replay":
        if not config.replay_path:
            raise ValueError("replay driver needs replay_path")
        return ReplayDriver.from_jsonl(config.replay_path)
    return HeuristicDriver(topic, seed, lexicon)


def generate(driver: Driver, agent_id: str, round_index: int, prompt: str,
             turn: AgentTurn | None = None) -> str:
    out = driver.respond(agent_id, round_index, prompt, ACTION, turn)
    if out is None:
        raise DriverUnavailable(f"driver produced no response for {agent_id}")
    return out
