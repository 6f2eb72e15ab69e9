"""Backend protocol and vector helpers shared by all implementations."""

from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np

from genagents.llm.prompts import PromptRequest

EMBEDDING_DIM = 64


@runtime_checkable
class LLMBackend(Protocol):
    def complete(self, request: PromptRequest) -> str: ...

    def embed(self, text: str) -> np.ndarray: ...


def normalize(values) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    norm = float(np.sqrt(np.sum(vec * vec)))
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("cannot normalize a zero or non-finite vector")
    out = vec / norm
    out.setflags(write=False)
    return out


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    denom = float(np.sqrt(np.sum(a * a)) * np.sqrt(np.sum(b * b)))
    if denom == 0.0:
        return 0.0
    return float(min(1.0, max(-1.0, float(np.sum(a * b)) / denom)))


def complete_parsed(backend: LLMBackend, request: PromptRequest, parse, retries: int = 1):
    """Complete and parse, re-asking ``retries`` times on MalformedCompletion."""
    from genagents.errors import MalformedCompletion

    for attempt in range(retries + 1):
        text = backend.complete(request)
        try:
            return parse(text)
        except MalformedCompletion:
            if attempt == retries:
                raise
    raise AssertionError("unreachable")  # pragma: no cover
