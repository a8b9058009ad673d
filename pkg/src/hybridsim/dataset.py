"""Dataset files: users.jsonl, edges.jsonl, news.json, micro_pairs.jsonl and an optional empirical trace."""

from __future__ import annotations

import json
import logging
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hybridsim.agent.profile import ACCOUNT_TYPES, ROLES, CoreProfile, assign_social_tiers
from hybridsim.environment import NewsItem, load_news
from hybridsim.metrics import AttitudeTrace

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class UserRecord:
    id: str
    is_core: bool
    initial_attitude: float
    profile: CoreProfile | None = None
    experience: str = ""
    tweets: tuple[Mapping, ...] = ()

    def to_dict(self) -> dict:
        d = {"id": self.id, "is_core": self.is_core, "initial_attitude": self.initial_attitude}
        if self.is_core:
            d.update(profile=self.profile.to_dict() if self.profile else None,
                     experience=self.experience, tweets=list(self.tweets))
        return d


@dataclass(frozen=True)
class MicroPair:
    user: str
    context: Mapping
    truth: Mapping
    round: int = 1


@dataclass
class Dataset:
    users: list[UserRecord]
    edges: list[tuple[str, str]] = field(default_factory=list)
    news: list[NewsItem] = field(default_factory=list)
    micro_pairs: list[MicroPair] = field(default_factory=list)
    empirical: AttitudeTrace | None = None

    def __post_init__(self) -> None:
        self.validate()

    @property
    def core(self) -> list[UserRecord]:
        return [u for u in self.users if u.is_core]

    @property
    def ordinary(self) -> list[UserRecord]:
        return [u for u in self.users if not u.is_core]

    def validate(self) -> None:
        ids = [u.id for u in self.users]
        if len(set(ids)) != len(ids):
            raise DatasetError("duplicate user ids")
        known = set(ids)
        for u in self.users:
            if not -1.0 <= u.initial_attitude <= 1.0:
                raise DatasetError(f"user {u.id!r}: initial attitude {u.initial_attitude} outside [-1, 1]")
        for a, b in self.edges:
            for x in (a, b):
                if x not in known:
                    raise DatasetError(f"edge references unknown user {x!r}")
            if a == b:
                raise DatasetError(f"self-loop on {a!r}")
        for p in self.micro_pairs:
            if p.user not in known:
                raise DatasetError(f"micro pair references unknown user {p.user!r}")


def _jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield n, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{n}: {exc}") from exc


def _user(d: Mapping, where: str) -> UserRecord:
    try:
        is_core = bool(d.get("is_core", False))
        profile = None
        if is_core:
            prof = dict(d.get("profile") or {})
            prof.setdefault("name", str(d["id"]))
            profile = CoreProfile.from_dict(prof)
        return UserRecord(str(d["id"]), is_core, float(d["initial_attitude"]), profile,
                          str(d.get("experience", "")), tuple(d.get("tweets", ())))
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"{where}: {exc}") from exc


def load_dataset(directory: str | Path) -> Dataset:
    root = Path(directory)
    users_path = root / "users.jsonl"
    if not users_path.exists():
        raise DatasetError(f"{users_path} not found")
    users = [_user(d, f"{users_path}:{n}") for n, d in _jsonl(users_path)]
    edges = []
    if (root / "edges.jsonl").exists():
        for n, d in _jsonl(root / "edges.jsonl"):
            try:
                edges.append((str(d["follower"]), str(d["followee"])))
            except KeyError as exc:
                raise DatasetError(f"{root / 'edges.jsonl'}:{n}: missing {exc}") from exc
    news = load_news(root / "news.json") if (root / "news.json").exists() else []
    pairs = []
    if (root / "micro_pairs.jsonl").exists():
        for n, d in _jsonl(root / "micro_pairs.jsonl"):
            try:
                pairs.append(MicroPair(str(d["user"]), d.get("context", {}), d["truth"], int(d.get("round", 1))))
            except KeyError as exc:
                raise DatasetError(f"{root / 'micro_pairs.jsonl'}:{n}: missing {exc}") from exc
    empirical = None
    if (root / "empirical_trace.csv").exists():
        empirical = AttitudeTrace.read_csv(root / "empirical_trace.csv")
    return Dataset(users, edges, news, pairs, empirical)


def save_dataset(ds: Dataset, directory: str | Path) -> None:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "users.jsonl", "w", encoding="utf-8") as fh:
        for u in ds.users:
            fh.write(json.dumps(u.to_dict(), ensure_ascii=False) + "\n")
    with open(root / "edges.jsonl", "w", encoding="utf-8") as fh:
        for a, b in ds.edges:
            fh.write(json.dumps({"follower": a, "followee": b}) + "\n")
    (root / "news.json").write_text(
        json.dumps([{"round": n.round, "text": n.text} for n in ds.news], indent=1, ensure_ascii=False) + "\n",
        encoding="utf-8")
    if ds.micro_pairs:
        with open(root / "micro_pairs.jsonl", "w", encoding="utf-8") as fh:
            for p in ds.micro_pairs:
                fh.write(json.dumps({"user": p.user, "round": p.round, "context": p.context,
                                     "truth": p.truth}, ensure_ascii=False) + "\n")
    if ds.empirical is not None:
        (root / "empirical_trace.csv").write_text(ds.empirical.to_csv(), encoding="utf-8")


def clustered_attitudes(n: int, gen: np.random.Generator) -> np.ndarray:
    """Attitudes in five narrow opinion clusters, skewed towards support."""
    centers = gen.choice([-0.6, -0.3, 0.0, 0.3, 0.6], n, p=[0.10, 0.15, 0.20, 0.25, 0.30])
    return np.clip(centers + gen.uniform(-0.05, 0.05, n), -1.0, 1.0)


_NEWS = (
    "Guests at a televised awards ceremony dressed in black in solidarity with survivors of sexual harassment.",
    "A prominent politician was endorsed despite allegations of sexual misconduct.",
    "Thousands joined marches in several cities to demand accountability for workplace harassment.",
)


def synthetic(n_core: int, n_ordinary: int, seed: int = 0, follows_per_core: int = 10) -> Dataset:
    """Random but reproducible dataset for demos, benchmarks and tests."""
    gen = np.random.default_rng(seed)
    width = len(str(max(n_core, n_ordinary, 1)))
    core_ids = [f"core{i:0{width}d}" for i in range(n_core)]
    ord_ids = [f"user{i:0{width}d}" for i in range(n_ordinary)]
    activity = assign_social_tiers(gen.poisson(20, n_core).tolist())
    influence = assign_social_tiers(gen.lognormal(5, 1.5, n_core).tolist())
    core_att = np.clip(gen.normal(0.3, 0.45, n_core), -1, 1)
    users = []
    for i, cid in enumerate(core_ids):
        profile = CoreProfile(
            name=cid, gender=str(gen.choice(["female", "male", "unknown"])),
            political_leaning=str(gen.choice(["left", "right", "center", "unknown"])),
            account_type=str(gen.choice(ACCOUNT_TYPES)),
            activity_tier=activity[i], influence_tier=influence[i],
            communication_role=str(gen.choice(ROLES, p=[0.2, 0.25, 0.15, 0.2, 0.2])),
        )
        users.append(UserRecord(cid, True, float(core_att[i]), profile,
                                f"{cid} has followed the discussion around #MeToo for a while."))
    for uid, a in zip(ord_ids, clustered_attitudes(n_ordinary, gen)):
        users.append(UserRecord(uid, False, float(a)))
    edges = set()
    for cid in core_ids:
        if n_core > 1:
            for j in gen.choice(n_core, min(follows_per_core, n_core - 1) + 1, replace=False):
                if core_ids[j] != cid:
                    edges.add((cid, core_ids[j]))
    news = [NewsItem(r, t) for r, t in zip((1, 5, 9), _NEWS)]
    return Dataset(users, sorted(edges), news)
