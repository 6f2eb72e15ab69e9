"""OpenAI-compatible chat-completions and embeddings client."""

from __future__ import annotations

import logging
import os
import time
from typing import Any

import httpx
import numpy as np

from genagents.errors import BackendUnavailable, EmptyCompletion
from genagents.llm.backend import normalize
from genagents.llm.prompts import PromptRequest

log = logging.getLogger(__name__)

_RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}


class HTTPBackend:
    """Talks to ``{base_url}/chat/completions`` and ``{base_url}/embeddings``.

    Transport errors and retryable status codes are retried ``attempts`` times
    with exponential backoff; other client errors fail immediately.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        embedding_model: str,
        api_key: str | None = None,
        api_key_env: str = "OPENAI_API_KEY",
        attempts: int = 3,
        backoff: float = 0.5,
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        key = os.environ.get(api_key_env) or api_key or ""
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self.model = model
        self.embedding_model = embedding_model
        self.attempts = attempts
        self.backoff = backoff
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"), headers=headers, timeout=timeout, transport=transport
        )

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        last_error = "no attempt made"
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                response = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                log.warning("attempt %d/%d to %s failed: %s", attempt + 1, self.attempts, path, last_error)
                continue
            if response.status_code in _RETRYABLE_STATUS:
                last_error = f"HTTP {response.status_code}"
                log.warning("attempt %d/%d to %s failed: %s", attempt + 1, self.attempts, path, last_error)
                continue
            if response.is_error:
                raise BackendUnavailable(f"{path}: HTTP {response.status_code}: {response.text[:200]}")
            try:
                return response.json()
            except ValueError as exc:
                raise BackendUnavailable(f"{path}: invalid JSON body") from exc
        raise BackendUnavailable(f"{path} failed after {self.attempts} attempts: {last_error}")

    def complete(self, request: PromptRequest) -> str:
        body = self._post(
            "/chat/completions",
            {
                "model": self.model,
                "messages": [{"role": "user", "content": request.rendered_text}],
                "max_tokens": request.max_tokens,
                "temperature": request.temperature,
            },
        )
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise EmptyCompletion("response carried no choices") from None
        if not content or not content.strip():
            raise EmptyCompletion(f"empty completion for {request.template_id.value}")
        return content

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        body = self._post("/embeddings", {"model": self.embedding_model, "input": text})
        try:
            values = body["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError):
            raise BackendUnavailable("embedding response missing data") from None
        return normalize(np.asarray(values, dtype=np.float64))
