"""Simulation modes: single-round micro replication, multi-round macro runs and frozen-core replication."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import defaultdict
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

import hybridsim
from hybridsim import abm, metrics
from hybridsim.agent.actions import (AgentAction, DoNothing, Like, Post, Reply, Retweet,
                                     format_call, parse_response)
from hybridsim.agent.drivers import AgentTurn, Driver, DriverUnavailable, generate, make_driver
from hybridsim.agent.memory import AgentMemory, MemoryKind, reflect, retrieve_memories, write_observation
from hybridsim.agent.profile import pseudonymize
from hybridsim.agent.prompt import TIME_FORMAT, PromptContext, TweetView, assemble_prompt
from hybridsim.annotators import (ContentType, Embedder, StanceLabel, TextAnnotator, TopicLexicon,
                                  default_lexicon)
from hybridsim.bridge import AttitudeSource, CoreAttitudeRecord, annotate_attitude, sync_core_into_pool
from hybridsim.config import RunConfig
from hybridsim.dataset import Dataset, UserRecord
from hybridsim.environment import Environment, Tweet, TweetKind, apply_feed_policy

logger = logging.getLogger(__name__)


class RunAborted(RuntimeError):
    """Driver failures exceeded the budget; partial outputs were written."""


def make_annotator(config: RunConfig) -> TextAnnotator:
    lexicon = TopicLexicon.from_dict(config.lexicon) if config.lexicon else default_lexicon(config.topic)
    return TextAnnotator.offline(lexicon)


def _lexicon(config: RunConfig) -> TopicLexicon:
    return TopicLexicon.from_dict(config.lexicon) if config.lexicon else default_lexicon(config.topic)


# ---------------------------------------------------------------------------
# core agents
# ---------------------------------------------------------------------------


@dataclass
class CoreAgent:
    user: UserRecord
    name: str
    memory: AgentMemory
    produced: list[str] = field(default_factory=list)
    consumed: list[str] = field(default_factory=list)

    @property
    def id(self) -> str:
        return self.user.id

    @property
    def role(self) -> str:
        return self.user.profile.communication_role


@dataclass
class TurnResult:
    agent_id: str
    action: AgentAction
    failed: bool = False
    diagnostic: str | None = None
    seen: tuple[int, ...] = ()


def describe_action(name: str, action: AgentAction, alias: Mapping[str, str],
                    env: Environment) -> str | None:
    if isinstance(action, Post):
        return f"[{name}]: {action.content}"
    target = env.tweets.get(int(action.original_tweet_id)) if not isinstance(action, DoNothing) else None
    if target is None:
        return None
    who = alias.get(target.author, target.author)
    if isinstance(action, Retweet):
        extra = f" saying: {action.content}" if action.content else ""
        return f"[{name}]: {name} retweets [{who}]: '{target.content}'{extra}"
    if isinstance(action, Reply):
        return f"[{name}]: {name} replies to [{who}]: {action.content}"
    if isinstance(action, Like):
        return f"[{name}]: {name} likes a tweet of [{who}]: '{target.content}'"
    return None


# ---------------------------------------------------------------------------
# macro mode
# ---------------------------------------------------------------------------


@dataclass
class MacroResult:
    trace: metrics.AttitudeTrace
    core_ids: tuple[str, ...]
    ordinary_ids: tuple[str, ...]
    env: Environment
    core_records: list[dict[str, CoreAttitudeRecord]]
    actions: list[dict[str, AgentAction]]
    failures: list[int]
    report: dict
    aborted: bool = False


class HybridSimulation:
    def __init__(self, dataset: Dataset, config: RunConfig, driver: Driver | None = None,
                 annotator: TextAnnotator | None = None, embedder: Embedder | None = None):
        self.dataset = dataset
        self.config = config
        self.annotator = annotator or make_annotator(config)
        self.embedder = embedder or Embedder()
        core = dataset.core
        self.driver = driver if driver is not None or not core else make_driver(
            config.driver, config.topic, config.seed, _lexicon(config))
        self.env = Environment(config.start_time, timedelta(hours=config.step_hours))
        self.alias = {u.id: pseudonymize(u.profile.name if u.profile else u.id) for u in core}
        for u in dataset.users:
            if u.is_core:
                self.env.add_user(u.id)
        for a, b in dataset.edges:
            if a in self.env.users and b in self.env.users:
                self.env.follow(a, b)
        self.agents = {u.id: CoreAgent(u, self.alias[u.id], AgentMemory(self.embedder))
                       for u in sorted(core, key=lambda u: u.id)}
        self._seed_history()
        self.records = {a: CoreAttitudeRecord(a, 0, ag.user.initial_attitude, AttitudeSource.CARRIED)
                        for a, ag in self.agents.items()}
        self.population = abm.Population.from_attitudes(
            {u.id: u.initial_attitude for u in dataset.ordinary}, config.model)
        self.stream = abm.ordinary_stream(config.seed, 0)

    def _seed_history(self) -> None:
        """Load historical tweets into the store and personal experience into memory."""
        before = self.config.start_time - timedelta(hours=self.config.step_hours)
        for agent in self.agents.values():
            for tw in agent.user.tweets:
                text = str(tw.get("content", ""))
                if not text:
                    continue
                ts = datetime.strptime(tw["time"], TIME_FORMAT) if "time" in tw else before
                self.env.add_tweet(agent.id, text, TweetKind.POST, None, ts, 0)
        for tweet in sorted(self.env.tweets.values(), key=lambda t: t.id):
            self.embedder.observe(tweet.content)
        for agent in self.agents.values():
            if agent.user.experience:
                write_observation(agent.memory, agent.user.experience, 0, MemoryKind.PERSONAL, 0.6, 0.3)
            for tid in [i for _, i in self.env._by_author.get(agent.id, [])]:
                write_observation(agent.memory, f"[{agent.name}]: {self.env.tweets[tid].content}",
                                  0, MemoryKind.PERSONAL, 0.5, 0.3)

    def tweet_text(self, ref) -> str | None:
        try:
            tweet = self.env.tweets.get(int(ref))
        except (TypeError, ValueError):
            return None
        while tweet is not None and not tweet.content and tweet.parent_id is not None:
            tweet = self.env.tweets.get(tweet.parent_id)
        return tweet.content if tweet is not None else None

    def score_of(self, tweet: Tweet) -> float | None:
        text = self.tweet_text(tweet.id)
        return annotate_attitude(text, self.annotator) if text else None

    # -- one core turn (read-only w.r.t. shared state) ----------------------

    def _turn(self, agent: CoreAgent, t: int, news: str | None) -> TurnResult:
        cfg = self.config
        try:
            if cfg.reflection_period > 0:
                reflect(agent.memory, self.driver.respond, agent.id, agent.name, t, cfg.reflection_period)
            attitude = self.records[agent.id].attitude
            timeline = self.env.personal_timeline(agent.id, cfg.timeline_k)
            feed = apply_feed_policy(cfg.feed_policy, self.env, agent.id, timeline, attitude, self.score_of)
            notes = self.env.notifications_for(agent.id, since_round=t - 1)
            query = news or agent.user.experience or agent.user.profile.describe()
            mem = retrieve_memories(agent.memory, query, cfg.memory_k, t) if len(agent.memory) else []
            lines = [r.text for r in mem[:1]] + ["{" + r.text + "}" for r in mem[1:]]
            view = lambda tw: TweetView(tw.id, self.alias.get(tw.author, tw.author), tw.content, tw.timestamp)
            views = [view(tw) for tw in feed.tweets]
            prompt = assemble_prompt(PromptContext(
                name=agent.name, profile=agent.user.profile.describe(), clock=self.env.clock(t),
                news=news, experience=agent.user.experience, memory=lines, timeline=views,
                notifications=[view(n) for n in notes], extra_sections=feed.extra_sections,
            ))
            raw = generate(self.driver, agent.id, t, prompt,
                           AgentTurn(agent.id, agent.name, agent.role, attitude, tuple(views)))
        except DriverUnavailable as exc:
            logger.warning("driver failed for %s at round %d: %s", agent.id, t, exc)
            return TurnResult(agent.id, DoNothing(), failed=True, diagnostic=str(exc))
        parsed = parse_response(raw)
        return TurnResult(agent.id, parsed.action, diagnostic=parsed.diagnostic,
                          seen=tuple(tw.id for tw in feed.tweets))

    def _core_phase(self, t: int, news: str | None) -> list[TurnResult]:
        agents = list(self.agents.values())
        workers = min(self.config.workers, self.config.driver.max_in_flight)
        if workers > 1 and len(agents) > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                return list(ex.map(lambda a: self._turn(a, t, news), agents))
        return [self._turn(a, t, news) for a in agents]

    def _commit(self, t: int, turns: list[TurnResult], news: str | None) -> dict[str, AgentAction]:
        muts = self.env.commit([(r.agent_id, 0, r.action) for r in turns], t)
        effective = {}
        for r, m in zip(sorted(turns, key=lambda r: r.agent_id), muts):
            effective[r.agent_id] = DoNothing() if m.diagnostic else r.action
        # serialized bookkeeping: corpus statistics, memories and echo-chamber corpora
        for tid in sorted(i for i in self.env.tweets if self.env.tweets[i].round == t):
            self.embedder.observe(self.env.tweets[tid].content)
        for r in sorted(turns, key=lambda r: r.agent_id):
            agent = self.agents[r.agent_id]
            followees = self.env.followees.get(agent.id, set())
            agent.consumed.extend(self.env.tweets[i].content for i in r.seen
                                  if self.env.tweets[i].author in followees and self.env.tweets[i].content)
            action = effective[r.agent_id]
            if news:
                write_observation(agent.memory, news, t, MemoryKind.EVENT, 0.7, 0.9)
            for note in self.env.notifications_for(agent.id, since_round=t):
                write_observation(agent.memory,
                                  f"[{self.alias.get(note.author, note.author)}]: replies to you: {note.content}",
                                  t, MemoryKind.EVENT, 0.7, 0.9)
            text = describe_action(agent.name, action, self.alias, self.env)
            if text:
                write_observation(agent.memory, text, t, MemoryKind.EVENT, 0.6, 0.8)
            content = getattr(action, "content", None)
            if content:
                agent.produced.append(content)
        return effective

    def run(self) -> MacroResult:
        cfg = self.config
        news_by_round = defaultdict(list)
        for n in self.dataset.news:
            news_by_round[n.round].append(n.text)
        core_ids = tuple(self.agents)
        vectors, record_log, action_log, failures = [], [], [], []
        aborted = False
        for t in range(1, cfg.rounds + 1):
            news = " ".join(news_by_round.get(t, [])) or None
            if self.agents:
                turns = self._core_phase(t, news)
                failed = sum(r.failed for r in turns)
                failures.append(failed)
                effective = self._commit(t, turns, news)
                self.records, messages = sync_core_into_pool(
                    t, effective, self.annotator, self.records, self.tweet_text)
                action_log.append(effective)
                record_log.append(dict(self.records))
                if failed > math.floor(cfg.failure_budget * len(turns)):
                    logger.error("round %d: %d of %d driver calls failed; aborting", t, failed, len(turns))
                    aborted = True
            else:
                messages = []
                failures.append(0)
            self.population = abm.step_round(cfg.model, self.population, messages, self.stream, t,
                                             workers=cfg.workers)
            core_vec = np.array([self.records[a].attitude for a in core_ids], dtype=np.float64)
            vectors.append(np.concatenate([core_vec, self.population.attitudes]))
            if aborted:
                break
        trace = metrics.AttitudeTrace.from_vectors(vectors)
        report = metrics.macro_report(trace, self.dataset.empirical)
        corpora = {a.id: (a.produced, a.consumed) for a in self.agents.values()}
        report["homogeneity"] = metrics.population_homogeneity(corpora, self.embedder)
        report["driver_failures"] = int(sum(failures))
        report["rounds_completed"] = len(vectors)
        report["toxicity"] = None
        return MacroResult(trace, core_ids, self.population.ids, self.env, record_log, action_log,
                           failures, report, aborted)


def run_macro(dataset: Dataset, config: RunConfig, out_dir: str | Path | None = None,
              driver: Driver | None = None, annotator: TextAnnotator | None = None) -> MacroResult:
    sim = HybridSimulation(dataset, config, driver, annotator)
    result = sim.run()
    if out_dir is not None:
        write_macro_outputs(result, config, out_dir)
    if result.aborted:
        raise RunAborted(f"driver failure budget exceeded after {len(result.trace)} rounds")
    return result


def _write_trace_files(out: Path, trace: metrics.AttitudeTrace, ids: Sequence[str], wide: bool) -> None:
    (out / "trace.csv").write_text(trace.to_csv(), encoding="utf-8")
    if wide and trace.vectors is not None:
        with open(out / "trace_agents.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["round", *ids])
            for r, v in zip(trace.rounds, trace.vectors):
                w.writerow([r, *(repr(float(x)) for x in v)])


def _manifest(config: RunConfig, extra: Mapping | None = None) -> str:
    doc = {"config": config.to_dict(), "seed": config.seed, "version": hybridsim.__version__}
    doc.update(extra or {})
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_macro_outputs(result: MacroResult, config: RunConfig, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_trace_files(out, result.trace, result.core_ids + result.ordinary_ids, config.write_agent_trace)
    result.env.export_jsonl(out / "tweets.jsonl")
    metrics.write_report(result.report, out / "metrics.json", out / "metrics.csv")
    with open(out / "core_trace.jsonl", "w", encoding="utf-8") as fh:
        for t, (acts, recs) in enumerate(zip(result.actions, result.core_records), 1):
            for a in sorted(recs):
                fh.write(json.dumps({
                    "round": t, "agent_id": a, "action": format_call(acts.get(a, DoNothing())),
                    "attitude": recs[a].attitude, "source": recs[a].source.value,
                }, ensure_ascii=False) + "\n")
    (out / "run-manifest.json").write_text(_manifest(config, {
        "mode": "macro", "core_users": len(result.core_ids), "ordinary_users": len(result.ordinary_ids),
        "aborted": result.aborted,
    }), encoding="utf-8")


# ---------------------------------------------------------------------------
# frozen-core replication
# ---------------------------------------------------------------------------


def load_core_trace(path: str | Path) -> dict[int, dict[str, float]]:
    rounds: dict[int, dict[str, float]] = defaultdict(dict)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                rounds[int(d["round"])][str(d["agent_id"])] = float(d["attitude"])
    return dict(rounds)


@dataclass
class FrozenResult:
    traces: list[metrics.AttitudeTrace]
    reports: list[dict]
    mean: dict


def run_frozen_replicate(recording: Mapping[int, Mapping[str, float]], dataset: Dataset,
                         config: RunConfig, n: int | None = None,
                         out_dir: str | Path | None = None) -> FrozenResult:
    """Replay recorded core attitudes; only the ordinary-agent phase is re-randomized."""
    n = config.replications if n is None else n
    if n < 1:
        raise ValueError("n must be >= 1")
    core_ids = tuple(sorted(u.id for u in dataset.core))
    expected = set(range(1, config.rounds + 1))
    if core_ids and set(recording) != expected:
        raise ValueError(f"recording covers rounds {sorted(recording)}, expected 1..{config.rounds}")
    for t, rec in recording.items():
        if set(rec) != set(core_ids):
            raise ValueError(f"recording round {t} does not match the dataset's core users")
    base = abm.Population.from_attitudes({u.id: u.initial_attitude for u in dataset.ordinary}, config.model)
    traces, reports = [], []
    for r in range(n):
        pop = base
        stream = abm.ordinary_stream(config.seed, r)
        vectors = []
        for t in range(1, config.rounds + 1):
            rec = recording.get(t, {})
            msgs = [abm.Message(a, rec[a]) for a in core_ids]
            pop = abm.step_round(config.model, pop, msgs, stream, t, workers=config.workers)
            core_vec = np.array([rec[a] for a in core_ids], dtype=np.float64)
            vectors.append(np.concatenate([core_vec, pop.attitudes]))
        trace = metrics.AttitudeTrace.from_vectors(vectors)
        traces.append(trace)
        reports.append(metrics.macro_report(trace, dataset.empirical))
    result = FrozenResult(traces, reports, metrics.mean_reports(reports))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for r, trace in enumerate(traces):
            sub = out / f"replicate_{r:02d}"
            sub.mkdir(exist_ok=True)
            _write_trace_files(sub, trace, core_ids + base.ids, config.write_agent_trace)
            metrics.write_report(reports[r], sub / "metrics.json")
        metrics.write_report({"mean": result.mean, "replicates": reports}, out / "metrics.json")
        (out / "run-manifest.json").write_text(_manifest(config, {"mode": "frozen_replicate", "n": n}),
                                               encoding="utf-8")
    return result


# ---------------------------------------------------------------------------
# micro mode
# ---------------------------------------------------------------------------

BEHAVIORS = ("post", "retweet")


def _views(items: Sequence[Mapping]) -> list[TweetView]:
    return [TweetView(int(d["id"]), str(d["author"]), str(d.get("content", "")),
                      datetime.strptime(d["time"], TIME_FORMAT)) for d in items]


def _predicted_text(action: AgentAction, context: Mapping) -> str:
    if isinstance(action, (Post, Reply)):
        return action.content
    if isinstance(action, Retweet):
        if action.content:
            return action.content
        for d in context.get("timeline", ()):
            if str(d["id"]) == action.original_tweet_id:
                return str(d.get("content", ""))
        return action.original_tweet
    return ""


@dataclass
class MicroResult:
    rows: list[dict]
    report: dict


def run_micro(dataset: Dataset, config: RunConfig, driver: Driver | None = None,
              annotator: TextAnnotator | None = None, out_dir: str | Path | None = None) -> MicroResult:
    annotator = annotator or make_annotator(config)
    driver = driver or make_driver(config.driver, config.topic, config.seed, _lexicon(config))
    embedder = Embedder()
    users = {u.id: u for u in dataset.users}
    for p in dataset.micro_pairs:
        embedder.observe(str(p.truth.get("text", "")))
    rows = []
    for idx, pair in enumerate(dataset.micro_pairs):
        user = users[pair.user]
        profile = user.profile
        name = pseudonymize(profile.name if profile else user.id)
        ctx = pair.context
        timeline = _views(ctx.get("timeline", ()))
        row = {"index": idx, "user": pair.user, "round": pair.round, "failed": False}
        try:
            prompt = assemble_prompt(PromptContext(
                name=name, profile=profile.describe() if profile else "",
                clock=datetime.strptime(ctx.get("time", config.start), TIME_FORMAT),
                news=ctx.get("news"), experience=ctx.get("experience", user.experience),
                memory=ctx.get("memory", ()), timeline=timeline,
                notifications=_views(ctx.get("notifications", ())),
            ))
            role = profile.communication_role if profile else "Viewer"
            raw = generate(driver, pair.user, pair.round, prompt,
                           AgentTurn(pair.user, name, role, user.initial_attitude, tuple(timeline)))
        except DriverUnavailable as exc:
            row.update(failed=True, diagnostic=str(exc))
            rows.append(row)
            continue
        parsed = parse_response(raw)
        text = _predicted_text(parsed.action, ctx)
        stance, intensity = annotator.stance_and_intensity(text)
        row.update(
            action=format_call(parsed.action), diagnostic=parsed.diagnostic,
            behavior=parsed.action.name if parsed.action.name in BEHAVIORS else "other",
            text=text, stance=stance.value,
            content_type=annotator.content_type(text).value if text else ContentType.OTHER.value,
            attitude=annotate_attitude(text, annotator) if text else 0.0,
        )
        rows.append(row)
    report = _micro_report(rows, dataset, embedder)
    result = MicroResult(rows, report)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "micro_results.jsonl", "w", encoding="utf-8") as fh:
            for r in rows:
                fh.write(json.dumps(r, ensure_ascii=False) + "\n")
        metrics.write_report(report, out / "metrics.json", out / "metrics.csv")
        (out / "run-manifest.json").write_text(_manifest(config, {"mode": "micro"}), encoding="utf-8")
    return result


def _micro_report(rows: list[dict], dataset: Dataset, embedder: Embedder) -> dict:
    ok = [r for r in rows if not r["failed"]]
    report: dict = {"pairs": len(rows), "failed": len(rows) - len(ok)}
    if not ok:
        return report
    truths = [dataset.micro_pairs[r["index"]].truth for r in ok]

    def scored(key: str, labels: Sequence[str], prefix: str) -> None:
        pairs = [(r[key], str(t[key])) for r, t in zip(ok, truths) if key in t]
        if pairs:
            pred, truth = zip(*pairs)
            report[f"{prefix}_accuracy"], report[f"{prefix}_macro_f1"] = \
                metrics.classification_metrics(list(pred), list(truth), labels)

    scored("behavior", BEHAVIORS, "behavior")
    scored("stance", [s.value for s in StanceLabel], "stance")
    scored("content_type", [c.value for c in ContentType], "content")
    att = [(r["attitude"], float(t["attitude"])) for r, t in zip(ok, truths) if "attitude" in t]
    if att:
        report["attitude_mae"] = metrics.mae(*zip(*att))
    sims = [metrics.cosine(embedder(r["text"]), embedder(str(t["text"])))
            for r, t in zip(ok, truths) if t.get("text") and r["text"]]
    if sims:
        report["content_similarity"] = float(np.mean(sims))
    return report
