"""Rendering of the core-agent observation prompt."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from datetime import datetime

TIME_FORMAT = "%Y-%m-%d %H:%M:%S"

HEADER = (
    "You are using the social media Twitter. You might need to perform reaction to the "
    "observation. You need to answer what you will do to the observations based on the "
    "following information:"
)

ACTION_CATALOG = """In terms of how you actually perform the action, you take action by calling functions. Currently, there are the following functions that can be called.
- do_nothing(): Do nothing. There is nothing that you like to respond to.
- post(content): Post a tweet. `content` is the sentence that you will post.
- retweet(content, author, original_tweet_id, original_tweet). Retweet or quote an existing tweet in your Twitter page. `content` is the statements that you attach when retweeting. If you want to say nothing, set `content` to None. `author` is the author of the tweet that you want to retweet, it should be the concrete name. `original_tweet_id` and `original_tweet` are the id and content of the retweeted tweet.
- reply(content, author, original_tweet_id). Reply to an existing tweet in your Twitter page or reply one of replies in your notifications, but don't reply to yourself and those not in your Twitter page. `content` is what you will reply to the original tweet or other comments. `author` is the author of the original tweet or comment that you want to reply to. `original_tweet_id` is the id of the original tweet.
- like(author, original_tweet_id). Press like on an existing tweet in your Twitter page. `author` is the author of the original tweet that you like. `original_tweet_id` is the id of the original tweet.

Call one function at a time, please give a thought before calling these actions, i.e., use the following format strictly:

{[OPTION 1]}
Thought: None of the observation attract my attention, I need to:
Action: do_nothing()

{[OPTION 2]}
Thought: due to `xxx`, I need to:
Action: post(content="yyy")

{[OPTION 3]}
Thought: due to `xxx`, I need to:
Action: retweet(content="yyy", author="zzz", original_tweet_id="0", original_tweet="kkk")

{[OPTION 4]}
Thought: due to `xxx`, I need to:
Action: reply(content="yyy", author="zzz", original_tweet_id="0")

{[OPTION 5]}
Thought: due to `xxx`, I need to:
Action: like(author="zzz", original_tweet_id="1")

Now begin your actions. Remember only write one function call after `Action:`."""


@dataclass(frozen=True)
class TweetView:
    """A tweet as shown to an agent (author already pseudonymized)."""

    id: int
    author: str
    content: str
    time: datetime

    def render(self) -> str:
        return f"tweet id: {self.id} [{self.author}]: {self.content} --Post Time: {self.time.strftime(TIME_FORMAT)}"


@dataclass(frozen=True)
class PromptContext:
    name: str
    profile: str
    clock: datetime
    news: str | None = None
    experience: str = ""
    memory: Sequence[str] = ()
    timeline: Sequence[TweetView] = ()
    notifications: Sequence[TweetView] = ()
    extra_sections: Sequence[str] = field(default_factory=tuple)


def assemble_prompt(ctx: PromptContext) -> str:
    news = f'"{ctx.news}"' if ctx.news else ""
    lines = [
        HEADER,
        f"(1) You are {ctx.name}. {ctx.profile}",
        f"(2) Current time is {ctx.clock.strftime(TIME_FORMAT)}",
        f"(3) The news you got is {news}",
        f"(4) Your personal experience is {ctx.experience}",
        "(5) Your recent memory is " + "\n".join(ctx.memory),
        "(6) The twitter page you can see is " + "\n".join(t.render() for t in ctx.timeline),
        "(7) The notifications you can see are " + "\n".join(t.render() for t in ctx.notifications),
    ]
    lines.extend(ctx.extra_sections)
    lines += ["", ACTION_CATALOG, f"Based on the above history, what will you, {ctx.name}, do next?"]
    return "\n".join(lines) + "\n"
