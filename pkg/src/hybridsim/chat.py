"""Minimal client for OpenAI-compatible chat-completions endpoints."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

import httpx

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.openai.com/v1"


class ServiceUnavailable(RuntimeError):
    """Remote service could not be reached or kept failing after retries."""


@dataclass(frozen=True)
class ChatSettings:
    base_url: str = DEFAULT_BASE_URL
    model: str = "gpt-3.5-turbo-0613"
    api_key_env: str = "OPENAI_API_KEY"
    max_tokens: int = 256
    temperature: float = 0.0
    timeout: float = 30.0
    retries: int = 3
    backoff: float = 0.5

    def __post_init__(self) -> None:
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be > 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


_RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}


class ChatClient:
    def __init__(self, settings: ChatSettings, transport: httpx.BaseTransport | None = None):
        self.settings = settings
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(settings.api_key_env, "").strip()
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._http = httpx.Client(
            base_url=settings.base_url.rstrip("/"),
            headers=headers,
            timeout=settings.timeout,
            transport=transport,
        )

    def close(self) -> None:
        self._http.close()

    def complete(self, user: str, system: str | None = None) -> str:
        messages = []
        if system:
            messages.append({"role": "system", "content": system})
        messages.append({"role": "user", "content": user})
        payload = {
            "model": self.settings.model,
            "messages": messages,
            "max_tokens": self.settings.max_tokens,
            "temperature": self.settings.temperature,
        }
        last: Exception | None = None
        for attempt in range(self.settings.retries + 1):
            if attempt:
                time.sleep(self.settings.backoff * 2 ** (attempt - 1))
            try:
                resp = self._http.post("/chat/completions", json=payload)
            except httpx.HTTPError as exc:
                last = exc
                logger.warning("chat request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code in _RETRY_STATUS:
                last = ServiceUnavailable(f"HTTP {resp.status_code}")
                logger.warning("chat request got HTTP %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise ServiceUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ServiceUnavailable(f"malformed chat response: {exc}") from exc
        raise ServiceUnavailable(
            f"chat endpoint unavailable after {self.settings.retries + 1} attempts: {last}"
        )
