"""Turns core-user content into attitude scores and ABM messages."""

from __future__ import annotations

import enum
import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass

from hybridsim.abm import Message
from hybridsim.agent.actions import AgentAction, DoNothing, Post, Reply, Retweet
from hybridsim.annotators import StanceLabel, TextAnnotator

logger = logging.getLogger(__name__)


class AttitudeSource(str, enum.Enum):
    GENERATED = "generated_content"
    CARRIED = "carried_over"
    RETWEET = "retweet_target"


@dataclass(frozen=True)
class CoreAttitudeRecord:
    agent_id: str
    round: int
    attitude: float
    source: AttitudeSource

    def __post_init__(self) -> None:
        if not -1.0 <= self.attitude <= 1.0:
            raise ValueError(f"attitude {self.attitude} outside [-1, 1]")


def content_to_attitude(label: StanceLabel | str, intensity: float) -> float:
    """Sign from stance, magnitude from sentiment intensity; neutral maps to 0."""
    if not 0.0 <= intensity <= 1.0:
        raise ValueError(f"intensity must be in [0, 1], got {intensity}")
    label = StanceLabel(label)
    if label is StanceLabel.SUPPORT:
        return float(intensity)
    if label is StanceLabel.OPPOSE:
        return -float(intensity)
    return 0.0


def annotate_attitude(text: str, annotator: TextAnnotator) -> float:
    return content_to_attitude(*annotator.stance_and_intensity(text))


def sync_core_into_pool(
    round_index: int,
    actions: Mapping[str, AgentAction],
    annotator: TextAnnotator,
    previous: Mapping[str, CoreAttitudeRecord],
    tweet_text: Callable[[str], str | None] = lambda _ref: None,
) -> tuple[dict[str, CoreAttitudeRecord], list[Message]]:
    """Update core attitudes from this round's effective actions.

    ``actions`` maps every core agent to the action the environment accepted
    (agents missing from it are treated as doing nothing).  ``tweet_text``
    resolves a tweet id to its stored text for bare retweets.
    """
    records: dict[str, CoreAttitudeRecord] = {}
    for agent_id in sorted(set(previous) | set(actions)):
        action = actions.get(agent_id, DoNothing())
        prior = previous.get(agent_id)
        rec = None
        try:
            if isinstance(action, (Post, Reply)) or (isinstance(action, Retweet) and action.content):
                rec = CoreAttitudeRecord(agent_id, round_index,
                                         annotate_attitude(action.content, annotator),
                                         AttitudeSource.GENERATED)
            elif isinstance(action, Retweet):
                text = tweet_text(action.original_tweet_id) or action.original_tweet
                rec = CoreAttitudeRecord(agent_id, round_index, annotate_attitude(text, annotator),
                                         AttitudeSource.RETWEET)
        except Exception as exc:  # annotator failure keeps the previous attitude
            logger.warning("annotation failed for %s at round %d: %s", agent_id, round_index, exc)
            rec = None
        if rec is None:
            if prior is None:
                continue
            rec = CoreAttitudeRecord(agent_id, round_index, prior.attitude, AttitudeSource.CARRIED)
        records[agent_id] = rec
    messages = [Message(a, r.attitude) for a, r in sorted(records.items())]
    return records, messages

