"""Core-user profiles: demographics, social-trait tiers and communication roles."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

ACCOUNT_TYPES = (
    "Journalist", "Private Person", "Celebrity", "Media Organization", "Activist",
    "Politician", "Social Bot", "NGO", "International Organization", "Company",
    "Governmental Organization", "Suspended Accounts",
)

ROLE_DESCRIPTIONS = {
    "Idea Starter": "Start a conversational meme, and tend to be highly engaged with the media "
                    "and post original content.",
    "Amplifier": "Collect multiple thoughts and share ideas and opinions. Enjoy being the first "
                 "one to retweet original content.",
    "Curator": "Use a broader context to define ideas. Tend to take ideas of others and either "
               "validate, question, challenge, or dismiss them. Tend to be the ties that form "
               "between others, aggregating ideas together to help clarify and steer the topic "
               "of conversation.",
    "Commentator": "Detail and refine ideas. Take part in something to which he or she strongly "
                   "feels about. Want to share information not for self-benefit.",
    "Viewer": "Take a passive interest in the conversation. Leave footprint by viewing rather than "
              "contributing to the conversation. Prefer to consume information rather than create "
              "or share information online.",
}
ROLES = tuple(ROLE_DESCRIPTIONS)

ACTIVITY_LEVELS = ("not active", "moderately active", "highly active")
INFLUENCE_LEVELS = ("not influential", "moderately influential", "highly influential")

PROFILE_PROMPT = (
    "Given the following observation about an individual {name}, please summarize the relevant "
    "details from the profile. His or her profile information is as follows:\n"
    "\n"
    "Name: {name}\n"
    "Gender: {gender}\n"
    "Political Leaning: {ideo}\n"
    "Activity Level: {activity}\n"
    "Influence Level: {influence}\n"
    "Feature: {commu_role}\n"
    "Account Type: {account_type}\n"
    "Short Bio: {bio}\n"
    "A selection of posted tweets: {tweets}\n"
    "You can deduce the preferences and personality from the bio and tweets, but please avoid "
    "repeating the observation in the summary.\n"
    "Summary:"
)


def pseudonymize(handle: str) -> str:
    """Keep the first and last character only, e.g. ``emily1`` -> ``e***1``."""
    if len(handle) < 2:
        return f"{handle}***"
    return f"{handle[0]}***{handle[-1]}"


def assign_social_tiers(measures: Sequence[float]) -> list[int]:
    """Tier 1..3 per user from ascending measure with a 6:3:1 split.

    Boundaries are floor(0.6 n) and floor(0.9 n); the sort is stable, so ties
    keep input order.
    """
    n = len(measures)
    order = sorted(range(n), key=lambda i: measures[i])
    low, mid = 6 * n // 10, 9 * n // 10
    tiers = [0] * n
    for pos, i in enumerate(order):
        tiers[i] = 1 if pos < low else 2 if pos < mid else 3
    return tiers


@dataclass(frozen=True)
class CoreProfile:
    name: str
    gender: str = "unknown"
    political_leaning: str = "unknown"
    account_type: str = "Private Person"
    activity_tier: int = 1
    influence_tier: int = 1
    communication_role: str = "Viewer"
    summary: str = ""

    def __post_init__(self) -> None:
        if self.account_type not in ACCOUNT_TYPES:
            raise ValueError(f"unknown account type {self.account_type!r}")
        if self.communication_role not in ROLE_DESCRIPTIONS:
            raise ValueError(f"unknown communication role {self.communication_role!r}")
        for tier in (self.activity_tier, self.influence_tier):
            if tier not in (1, 2, 3):
                raise ValueError(f"tier must be 1, 2 or 3, got {tier}")

    @classmethod
    def from_dict(cls, data: Mapping) -> CoreProfile:
        fields = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**fields)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @property
    def activity(self) -> str:
        return ACTIVITY_LEVELS[self.activity_tier - 1]

    @property
    def influence(self) -> str:
        return INFLUENCE_LEVELS[self.influence_tier - 1]

    def describe(self) -> str:
        """Profile paragraph; falls back to an attribute sentence when no summary was ingested."""
        if self.summary:
            return self.summary
        return (
            f"{self.name} is a {self.activity} and {self.influence} {self.account_type.lower()} "
            f"on social media, with {self.political_leaning} political leaning. "
            f"{self.name} tends to {ROLE_DESCRIPTIONS[self.communication_role][0].lower()}"
            f"{ROLE_DESCRIPTIONS[self.communication_role][1:]}"
        )


def profile_prompt(profile: CoreProfile, bio: str, tweets: Sequence[str]) -> str:
    return PROFILE_PROMPT.format(
        name=profile.name, gender=profile.gender, ideo=profile.political_leaning,
        activity=profile.activity, influence=profile.influence,
        commu_role=ROLE_DESCRIPTIONS[profile.communication_role],
        account_type=profile.account_type, bio=bio, tweets=" ".join(tweets),
    )
