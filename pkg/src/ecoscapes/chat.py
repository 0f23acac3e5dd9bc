"""Pluggable multimodal chat backends.

A session pins an optional system prompt and keeps an ordered history;
each send is atomic with respect to that history (nothing is appended on
failure). Two backends ship: a deterministic local stub for tests and
offline runs, and a chat-completions-style HTTP backend for real models.
Images travel base64-inline in the request body.
"""

from __future__ import annotations

import base64
import hashlib
import time
from dataclasses import dataclass

import requests

from ecoscapes.errors import (
    BackendUnconfiguredError,
    MalformedReplyError,
    RateLimitedError,
    TransportError,
)

ROLE_SYSTEM = "system"
ROLE_USER = "user"
ROLE_ASSISTANT = "assistant"

RATE_LIMIT_RETRIES = 3
BACKOFF_BASE_SECONDS = 1.0


@dataclass(frozen=True)
class ChatMessage:
    role: str
    text: str
    images: tuple[bytes, ...] = ()

    def __post_init__(self):
        if self.role not in (ROLE_SYSTEM, ROLE_USER, ROLE_ASSISTANT):
            raise ValueError(f"unknown role {self.role!r}")
        if self.role == ROLE_SYSTEM and self.images:
            raise ValueError("system messages carry no images")


class ChatSession:
    """An ordered exchange with one backend, under one system prompt."""

    def __init__(self, backend: "ChatBackend", system: str | None,
                 model_name: str):
        self._backend = backend
        self.system = system
        self.model_name = model_name
        self.history: list[ChatMessage] = []

    def send(self, user_text: str, images=()) -> str:
        """One exchange: returns the assistant text and appends both turns.

        The backend call sees the pinned system prompt plus the full
        history; history only grows after the reply arrives, so a
        transport failure leaves the session untouched.
        """
        images = tuple(bytes(i) for i in images)
        reply = self._backend.complete(
            system=self.system,
            history=tuple(self.history),
            user_text=user_text,
            images=images,
            model_name=self.model_name,
        )
        self.history.append(ChatMessage(ROLE_USER, user_text, images))
        self.history.append(ChatMessage(ROLE_ASSISTANT, reply))
        return reply


class ChatBackend:
    """Base backend: hands out sessions, subclasses answer them."""

    def open_session(self, system: str | None = None,
                     model_name: str = "") -> ChatSession:
        return ChatSession(self, system=system, model_name=model_name)

    def complete(self, system, history, user_text, images, model_name) -> str:
        raise NotImplementedError


def stub_reply(system: str | None, history, user_text: str, images) -> str:
    """Deterministic local stand-in for a model reply.

    Pure function of all inputs: a fixed tag, a stable digest over the
    system prompt, history, user text, and image bytes, then the first
    40 characters of the user text. Distinct prompts differ at least in
    the digest.
    """
    h = hashlib.sha256()
    h.update(repr(system).encode("utf-8"))
    for msg in history:
        h.update(msg.role.encode("utf-8"))
        h.update(msg.text.encode("utf-8"))
        for img in msg.images:
            h.update(img)
    h.update(user_text.encode("utf-8"))
    for img in images:
        h.update(img)
    return f"STUB[{h.hexdigest()[:12]}]: {user_text[:40]}"


class StubChatBackend(ChatBackend):
    """Offline backend computing replies locally; replays byte-identically."""

    def complete(self, system, history, user_text, images, model_name) -> str:
        return stub_reply(system, history, user_text, images)


class RemoteChatBackend(ChatBackend):
    """Chat-completions-style HTTP backend.

    One POST per send carrying the system prompt, the full history, and
    the new user turn as a role-tagged message array; images are attached
    as base64 data URLs inside the user content. Retries (up to 3, with
    exponential backoff) apply to rate-limit signals only; any other
    failure surfaces immediately so pipeline failure semantics stay
    crisp.
    """

    def __init__(self, endpoint_url: str, token: str = "",
                 temperature: float = 0.0, timeout: float = 120.0,
                 session: requests.Session | None = None,
                 sleeper=time.sleep):
        if not endpoint_url:
            raise BackendUnconfiguredError("chat endpoint URL is not configured")
        self.endpoint_url = endpoint_url
        self.token = token
        self.temperature = temperature
        self.timeout = timeout
        self._session = session or requests.Session()
        self._sleep = sleeper

    def complete(self, system, history, user_text, images, model_name) -> str:
        payload = {
            "model": model_name,
            "temperature": self.temperature,
            "messages": self._messages(system, history, user_text, images),
        }
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        for attempt in range(1, RATE_LIMIT_RETRIES + 1):
            try:
                resp = self._session.post(self.endpoint_url, json=payload,
                                          headers=headers, timeout=self.timeout)
            except requests.RequestException as e:
                raise TransportError(f"chat request failed: {e}") from e
            if resp.status_code == 429:
                if attempt == RATE_LIMIT_RETRIES:
                    raise RateLimitedError(attempts=attempt)
                self._sleep(BACKOFF_BASE_SECONDS * 2 ** (attempt - 1))
                continue
            if resp.status_code >= 400:
                raise TransportError(
                    f"chat service returned HTTP {resp.status_code}")
            return self._extract_text(resp)
        raise RateLimitedError(attempts=RATE_LIMIT_RETRIES)

    @staticmethod
    def _messages(system, history, user_text, images) -> list[dict]:
        messages: list[dict] = []
        if system is not None:
            messages.append({"role": ROLE_SYSTEM, "content": system})
        for msg in history:
            messages.append({"role": msg.role,
                             "content": _content_parts(msg.text, msg.images)})
        messages.append({"role": ROLE_USER,
                         "content": _content_parts(user_text, images)})
        return messages

    @staticmethod
    def _extract_text(resp) -> str:
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise MalformedReplyError(f"unexpected chat reply shape: {e}") from e
        if not isinstance(text, str):
            raise MalformedReplyError("chat reply content is not text")
        return text


def _content_parts(text: str, images) -> list[dict]:
    parts: list[dict] = [{"type": "text", "text": text}]
    for img in images:
        encoded = base64.b64encode(img).decode("ascii")
        parts.append({
            "type": "image_url",
            "image_url": {"url": f"data:image/png;base64,{encoded}"},
        })
    return parts
