"""Twitter-like world: follow graph, tweet store, timelines, notifications and feed policies."""

from __future__ import annotations

import bisect
import enum
import heapq
import json
import logging
import math
from collections import defaultdict
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

from hybridsim.agent.actions import AgentAction, DoNothing, Like, Post, Reply, Retweet

logger = logging.getLogger(__name__)

TIME_FORMAT = "%Y-%m-%d %H:%M:%S"


class UnknownUser(KeyError):
    pass


class TweetKind(str, enum.Enum):
    POST = "post"
    RETWEET = "retweet"
    REPLY = "reply"


@dataclass
class Tweet:
    id: int
    author: str
    content: str
    kind: TweetKind
    parent_id: int | None
    timestamp: datetime
    like_count: int = 0
    retweet_count: int = 0
    round: int = 0

    @property
    def sort_key(self) -> tuple[datetime, int]:
        return (self.timestamp, self.id)

    def to_dict(self) -> dict:
        return {
            "id": self.id, "author": self.author, "content": self.content,
            "kind": self.kind.value, "parent_id": self.parent_id,
            "timestamp": self.timestamp.strftime(TIME_FORMAT),
            "like_count": self.like_count, "retweet_count": self.retweet_count,
            "round": self.round,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> Tweet:
        return cls(int(d["id"]), str(d["author"]), str(d.get("content") or ""),
                   TweetKind(d.get("kind", "post")),
                   None if d.get("parent_id") is None else int(d["parent_id"]),
                   datetime.strptime(d["timestamp"], TIME_FORMAT),
                   int(d.get("like_count", 0)), int(d.get("retweet_count", 0)),
                   int(d.get("round", 0)))


@dataclass(frozen=True)
class NewsItem:
    round: int
    text: str

    def __post_init__(self) -> None:
        if self.round < 1:
            raise ValueError(f"news round must be >= 1, got {self.round}")


def load_news(path: str | Path) -> list[NewsItem]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return sorted((NewsItem(int(d["round"]), str(d["text"])) for d in data), key=lambda n: n.round)


class FeedMode(str, enum.Enum):
    DEFAULT = "default"
    OPPOSITE = "opposite"
    NEUTRAL = "neutral"
    PUBLIC_HASHTAG = "public_hashtag"

    @classmethod
    def _missing_(cls, value):
        short = {"s1": cls.OPPOSITE, "s2": cls.NEUTRAL, "s3": cls.PUBLIC_HASHTAG}
        return short.get(str(value).lower())


@dataclass(frozen=True)
class FeedPolicy:
    mode: FeedMode = FeedMode.DEFAULT
    fraction: float = 0.3
    neutral_threshold: float = 0.1
    hashtag: str = "#PublicDebate"
    pool_size: int = 50

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", FeedMode(self.mode))
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must be in [0, 1]")
        if self.neutral_threshold < 0:
            raise ValueError("neutral_threshold must be >= 0")


@dataclass
class Mutation:
    """What one applied action changed."""

    actor: str
    action: str
    created: int | None = None
    liked: int | None = None
    retweeted: int | None = None
    notify: str | None = None
    diagnostic: str | None = None

    @property
    def empty(self) -> bool:
        return self.created is None and self.liked is None


@dataclass
class Feed:
    tweets: list[Tweet]
    extra_sections: list[str] = field(default_factory=list)


class Environment:
    def __init__(self, start: datetime = datetime(2018, 1, 1), step: timedelta = timedelta(hours=12)):
        self.start = start
        self.step = step
        self.users: set[str] = set()
        self.followees: dict[str, set[str]] = defaultdict(set)
        self.tweets: dict[int, Tweet] = {}
        self._by_author: dict[str, list[tuple[tuple[datetime, int], int]]] = defaultdict(list)
        self._all: list[tuple[tuple[datetime, int], int]] = []
        self._replies_to: dict[str, list[int]] = defaultdict(list)
        self._next_id = 1

    # -- graph -----------------------------------------------------------

    def add_user(self, user: str) -> None:
        self.users.add(user)

    def follow(self, follower: str, followee: str) -> None:
        for u in (follower, followee):
            if u not in self.users:
                raise UnknownUser(u)
        if follower == followee:
            raise ValueError(f"self-follow not allowed: {follower}")
        self.followees[follower].add(followee)

    def clock(self, round_index: int) -> datetime:
        return self.start + self.step * round_index

    # -- store -----------------------------------------------------------

    def _insert(self, tweet: Tweet) -> Tweet:
        self.tweets[tweet.id] = tweet
        entry = (tweet.sort_key, tweet.id)
        bisect.insort(self._by_author[tweet.author], entry)
        bisect.insort(self._all, entry)
        if tweet.kind is TweetKind.REPLY and tweet.parent_id in self.tweets:
            self._replies_to[self.tweets[tweet.parent_id].author].append(tweet.id)
        self._next_id = max(self._next_id, tweet.id + 1)
        return tweet

    def add_tweet(self, author: str, content: str, kind: TweetKind = TweetKind.POST,
                  parent_id: int | None = None, timestamp: datetime | None = None,
                  round_index: int = 0) -> Tweet:
        if author not in self.users:
            raise UnknownUser(author)
        if kind is not TweetKind.POST and parent_id not in self.tweets:
            raise ValueError(f"{kind.value} references unknown tweet {parent_id}")
        ts = timestamp if timestamp is not None else self.clock(round_index)
        return self._insert(Tweet(self._next_id, author, content, kind, parent_id, ts, round=round_index))

    def apply_action(self, action: AgentAction, actor: str, clock: datetime,
                     round_index: int = 0) -> Mutation:
        if actor not in self.users:
            raise UnknownUser(actor)
        m = Mutation(actor, action.name)
        if isinstance(action, DoNothing):
            return m
        if isinstance(action, Post):
            m.created = self.add_tweet(actor, action.content, TweetKind.POST, None, clock, round_index).id
            return m
        parent = self._parent(action.original_tweet_id)
        if parent is None:
            m.action = DoNothing.name
            m.diagnostic = f"{action.name} references unknown tweet {action.original_tweet_id!r}"
            logger.info("rejected action of %s: %s", actor, m.diagnostic)
            return m
        if isinstance(action, Retweet):
            tw = self.add_tweet(actor, action.content or "", TweetKind.RETWEET, parent.id, clock, round_index)
            parent.retweet_count += 1
            m.created, m.retweeted = tw.id, parent.id
        elif isinstance(action, Reply):
            tw = self.add_tweet(actor, action.content, TweetKind.REPLY, parent.id, clock, round_index)
            m.created, m.notify = tw.id, parent.author
        elif isinstance(action, Like):
            parent.like_count += 1
            m.liked = parent.id
        return m

    def _parent(self, ref: str) -> Tweet | None:
        try:
            return self.tweets.get(int(str(ref).strip()))
        except ValueError:
            return None

    def commit(self, actions: Iterable[tuple[str, int, AgentAction]], round_index: int) -> list[Mutation]:
        """Apply a round's queued actions in (actor, action index) order."""
        clock = self.clock(round_index)
        return [self.apply_action(a, actor, clock, round_index)
                for actor, _, a in sorted(actions, key=lambda x: (x[0], x[1]))]

    # -- views -----------------------------------------------------------

    def personal_timeline(self, user: str, k: int = 5) -> list[Tweet]:
        if user not in self.users:
            raise UnknownUser(user)
        if k < 1:
            raise ValueError("k must be >= 1")
        sources = [user, *self.followees.get(user, ())]
        candidates = (e for a in sources for e in self._by_author.get(a, [])[-k:])
        return [self.tweets[i] for _, i in heapq.nlargest(k, candidates)]

    def public_timeline(self, k: int = 5) -> list[Tweet]:
        if k < 1:
            raise ValueError("k must be >= 1")
        return [self.tweets[i] for _, i in reversed(self._all[-k:])]

    def notifications_for(self, user: str, since_round: int = 0) -> list[Tweet]:
        if user not in self.users:
            raise UnknownUser(user)
        found = [self.tweets[i] for i in self._replies_to.get(user, ())
                 if self.tweets[i].round >= since_round and self.tweets[i].author != user]
        return sorted(found, key=lambda t: t.sort_key, reverse=True)

    def hashtag_timeline(self, hashtag: str, k: int) -> list[Tweet]:
        tag = hashtag.lower()
        out = []
        for _, i in reversed(self._all):
            if tag in self.tweets[i].content.lower():
                out.append(self.tweets[i])
                if len(out) == k:
                    break
        return out

    # -- io --------------------------------------------------------------

    def export_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for tid in sorted(self.tweets):
                fh.write(json.dumps(self.tweets[tid].to_dict(), ensure_ascii=False) + "\n")

    def import_jsonl(self, path: str | Path) -> None:
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    tw = Tweet.from_dict(json.loads(line))
                except (ValueError, KeyError) as exc:
                    raise ValueError(f"{path}:{n}: {exc}") from exc
                self.add_user(tw.author)
                if tw.parent_id is not None and tw.parent_id not in self.tweets:
                    raise ValueError(f"{path}:{n}: parent {tw.parent_id} not found")
                self._insert(tw)


def apply_feed_policy(policy: FeedPolicy, env: Environment, user: str, timeline: Sequence[Tweet],
                      user_attitude: float, score_of: Callable[[Tweet], float | None]) -> Feed:
    """Adjust a personal timeline under an intervention policy.

    S1/S2 replace the oldest ceil(fraction * k) slots (or fill free slots) with
    the most recent qualifying public tweets not already shown; S3 leaves the
    timeline alone and adds the public hashtag space to the prompt.
    """
    timeline = list(timeline)
    if policy.mode is FeedMode.DEFAULT:
        return Feed(timeline)
    if policy.mode is FeedMode.PUBLIC_HASHTAG:
        public = env.hashtag_timeline(policy.hashtag, max(1, len(timeline) or 5))
        rendered = "\n".join(f"tweet id: {t.id} [{t.author}]: {t.content}" for t in public)
        return Feed(timeline, [
            f"(8) The public discussion space {policy.hashtag} you can see is {rendered}",
            f"You are encouraged to share your opinions in the public space with the hashtag {policy.hashtag}.",
        ])
    slots = math.ceil(policy.fraction * max(len(timeline), 1)) if policy.fraction > 0 else 0
    if slots == 0:
        return Feed(timeline)

    def qualifies(t: Tweet) -> bool:
        s = score_of(t)
        if s is None:
            return False
        if policy.mode is FeedMode.OPPOSITE:
            return s * user_attitude < 0
        return abs(s) < policy.neutral_threshold

    shown = {t.id for t in timeline}
    picks = [t for t in env.public_timeline(policy.pool_size)
             if t.id not in shown and t.author != user and qualifies(t)][:slots]
    if not picks:
        return Feed(timeline)
    keep = timeline[:max(0, len(timeline) - len(picks))]
    merged = sorted(keep + picks, key=lambda t: t.sort_key, reverse=True)
    return Feed(merged)
