"""Agent actions and the ``Thought: / Action:`` response format."""

from __future__ import annotations

import ast
import json
import logging
import re
from dataclasses import dataclass
from typing import Union

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DoNothing:
    name = "do_nothing"


@dataclass(frozen=True)
class Post:
    content: str
    name = "post"


@dataclass(frozen=True)
class Retweet:
    content: str | None
    author: str
    original_tweet_id: str
    original_tweet: str = ""
    name = "retweet"


@dataclass(frozen=True)
class Reply:
    content: str
    author: str
    original_tweet_id: str
    name = "reply"


@dataclass(frozen=True)
class Like:
    author: str
    original_tweet_id: str
    name = "like"


AgentAction = Union[DoNothing, Post, Retweet, Reply, Like]

SIGNATURES: dict[str, tuple[str, ...]] = {
    "do_nothing": (),
    "post": ("content",),
    "retweet": ("content", "author", "original_tweet_id", "original_tweet"),
    "reply": ("content", "author", "original_tweet_id"),
    "like": ("author", "original_tweet_id"),
}

OPTION_THOUGHT = {
    "do_nothing": "None of the observation attract my attention, I need to:",
}


@dataclass(frozen=True)
class ParsedResponse:
    thought: str
    action: AgentAction
    diagnostic: str | None = None


def _lit(value: str | None) -> str:
    return "None" if value is None else json.dumps(value, ensure_ascii=False)


def format_call(action: AgentAction) -> str:
    if isinstance(action, DoNothing):
        return "do_nothing()"
    args = ", ".join(f"{k}={_lit(getattr(action, k))}" for k in SIGNATURES[action.name])
    return f"{action.name}({args})"


def format_response(action: AgentAction, thought: str | None = None) -> str:
    if thought is None:
        thought = OPTION_THOUGHT.get(action.name, "due to `what I just read`, I need to:")
    return f"Thought: {thought}\nAction: {format_call(action)}"


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_ACTION_MARK = re.compile(r"^[ \t]*Action[ \t]*:", re.MULTILINE)
_THOUGHT_MARK = re.compile(r"^[ \t]*Thought[ \t]*:(.*)$", re.MULTILINE)
_CALL_HEAD = re.compile(r"\s*`?\s*([A-Za-z_]+)\s*\(")


def _call_span(text: str, start: int) -> str:
    """Text of the call starting at ``start``, up to its matching parenthesis if found."""
    depth = 0
    quote = None
    i = start
    while i < len(text):
        ch = text[i]
        if quote:
            if ch == "\\":
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return text[start:i + 1]
        i += 1
    end = text.rfind(")")
    return text[start:end + 1] if end > start else text[start:]


def _strict_args(call: str, name: str) -> dict[str, object] | None:
    try:
        node = ast.parse(call.strip(), mode="eval").body
    except SyntaxError:
        return None
    if not isinstance(node, ast.Call):
        return None
    params = SIGNATURES[name]
    out: dict[str, object] = {}
    if len(node.args) > len(params):
        return None
    for key, arg in zip(params, node.args):
        if not isinstance(arg, ast.Constant):
            return None
        out[key] = arg.value
    for kw in node.keywords:
        if kw.arg is None or not isinstance(kw.value, ast.Constant):
            return None
        out[kw.arg] = kw.value.value
    return out


def _lenient_args(call: str, name: str) -> dict[str, object]:
    """Split on known ``key=`` markers; tolerates unescaped quotes inside values."""
    body = call[call.find("(") + 1:]
    if body.endswith(")"):
        body = body[:-1]
    marks = []
    for key in SIGNATURES[name]:
        m = re.search(rf"(?:^|,)\s*{key}\s*=", body)
        if m:
            marks.append((m.start(), m.end(), key))
    marks.sort()
    out: dict[str, object] = {}
    for idx, (_, value_start, key) in enumerate(marks):
        value_end = marks[idx + 1][0] if idx + 1 < len(marks) else len(body)
        raw = body[value_start:value_end].strip().rstrip(",").strip()
        if raw == "None":
            out[key] = None
        elif len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
            out[key] = raw[1:-1]
        else:
            out[key] = raw
    return out


def _text(value: object) -> str | None:
    if value is None:
        return None
    s = str(value)
    return s if s.strip() else None


def _build(name: str, args: dict[str, object]) -> AgentAction:
    if name == "do_nothing":
        return DoNothing()
    content = _text(args.get("content"))
    author = _text(args.get("author")) or ""
    tweet_id = _text(args.get("original_tweet_id"))
    if name == "post":
        if content is None:
            raise ValueError("post without content")
        return Post(content)
    if tweet_id is None:
        raise ValueError(f"{name} without original_tweet_id")
    if name == "retweet":
        return Retweet(content, author, tweet_id, _text(args.get("original_tweet")) or "")
    if name == "reply":
        if content is None:
            raise ValueError("reply without content")
        return Reply(content, author, tweet_id)
    return Like(author, tweet_id)


def parse_response(raw: str) -> ParsedResponse:
    """Parse the last ``Action:`` of a model response; never raises."""
    raw = raw or ""
    thoughts = _THOUGHT_MARK.findall(raw)
    thought = thoughts[-1].strip() if thoughts else ""
    marks = list(_ACTION_MARK.finditer(raw))
    if not marks:
        return _degrade(thought, "no Action line in response")
    tail = raw[marks[-1].end():]
    head = _CALL_HEAD.match(tail)
    if not head or head.group(1) not in SIGNATURES:
        return _degrade(thought, f"unrecognised action call: {tail.strip()[:60]!r}")
    name = head.group(1)
    call = _call_span(tail, head.start(1))
    args = _strict_args(call, name)
    if args is None:
        args = _lenient_args(call, name)
    try:
        return ParsedResponse(thought, _build(name, args))
    except ValueError as exc:
        return _degrade(thought, str(exc))


def _degrade(thought: str, why: str) -> ParsedResponse:
    logger.info("response degraded to do_nothing: %s", why)
    return ParsedResponse(thought, DoNothing(), why)
