"""Deterministic table-driven backend used for tests and reference runs.

A script maps each template id to an ordered list of rows. The first row whose
matcher accepts the rendered prompt supplies the response; every template
needs a default row (one with no matcher). Responses may reference the
request's template variables as ``{name}``. A row holding several responses
picks one by hashing ``(seed, template_id, rendered_text)``, so the backend
stays a pure function of its inputs.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from genagents.errors import ConfigInvalid, EmptyCompletion
from genagents.llm.backend import EMBEDDING_DIM, normalize
from genagents.llm.prompts import PromptRequest, TemplateId

_PLACEHOLDER = re.compile(r"\{(\w+)\}")
_TOKEN = re.compile(r"[a-z0-9]+")


def _clock(minute_of_day: int) -> str:
    return f"{minute_of_day // 60:02d}:{minute_of_day % 60:02d}"


def _split_evenly(request: PromptRequest) -> str:
    """Cut the activity in the request into granularity-sized chunks."""
    v = request.variables
    hours, minutes = (int(part) for part in v["start"].split(":"))
    start = hours * 60 + minutes
    duration = int(v["duration"])
    step = int(v["granularity"])
    lines = []
    offset = 0
    while offset < duration:
        length = min(step, duration - offset)
        lines.append(f"{_clock((start + offset) % 1440)} ({length}m): {v['description']}")
        offset += length
    return "\n".join(lines)


BUILTINS: dict[str, Callable[[PromptRequest], str]] = {
    "split_evenly": _split_evenly,
}


@dataclass(frozen=True)
class ScriptRow:
    contains: tuple[str, ...] = ()
    regex: re.Pattern[str] | None = None
    responses: tuple[str, ...] = ()
    builtin: str | None = None

    @property
    def is_default(self) -> bool:
        return not self.contains and self.regex is None

    def matches(self, text: str) -> bool:
        lowered = text.lower()
        if any(needle.lower() not in lowered for needle in self.contains):
            return False
        if self.regex is not None and not self.regex.search(text):
            return False
        return True


def parse_row(raw: Any, path: str) -> ScriptRow:
    if isinstance(raw, str):
        return ScriptRow(responses=(raw,))
    if not isinstance(raw, Mapping):
        raise ConfigInvalid(path, "script row must be a mapping or a string")
    unknown = set(raw) - {"contains", "regex", "response", "responses", "builtin"}
    if unknown:
        raise ConfigInvalid(path, f"unknown keys {sorted(unknown)}")
    contains = raw.get("contains", ())
    if isinstance(contains, str):
        contains = (contains,)
    pattern = None
    if raw.get("regex") is not None:
        try:
            pattern = re.compile(str(raw["regex"]))
        except re.error as exc:
            raise ConfigInvalid(f"{path}.regex", str(exc)) from None
    responses: Sequence[Any] = ()
    if "response" in raw:
        responses = (raw["response"],)
    elif "responses" in raw:
        responses = raw["responses"]
    builtin = raw.get("builtin")
    if builtin is not None and builtin not in BUILTINS:
        raise ConfigInvalid(f"{path}.builtin", f"unknown builtin {builtin!r}")
    if not responses and builtin is None:
        raise ConfigInvalid(path, "row needs response, responses or builtin")
    return ScriptRow(
        contains=tuple(str(c) for c in contains),
        regex=pattern,
        responses=tuple(str(r) for r in responses),
        builtin=builtin,
    )


@lru_cache(maxsize=1 << 16)
def _token_vector(token: str, dim: int) -> np.ndarray:
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    vec = rng.standard_normal(dim)
    vec.setflags(write=False)
    return vec


@lru_cache(maxsize=1 << 14)
def hashed_embedding(text: str, dim: int = EMBEDDING_DIM) -> np.ndarray:
    """Sum of per-token pseudo-random vectors, normalized to unit length.

    Texts sharing words get correlated vectors, which gives scripted runs a
    usable notion of relevance without a model.
    """
    tokens = _TOKEN.findall(text.lower()) or [text]
    total = np.sum(np.stack([_token_vector(tok, dim) for tok in tokens]), axis=0)
    return normalize(total)


class ScriptedBackend:
    def __init__(
        self,
        table: Mapping[TemplateId, Sequence[ScriptRow]],
        seed: int = 0,
        dim: int = EMBEDDING_DIM,
    ):
        for tid in TemplateId:
            rows = table.get(tid, ())
            if not any(row.is_default for row in rows):
                raise ConfigInvalid(f"script.{tid.value}", "a default row is required")
        self._table = {tid: tuple(rows) for tid, rows in table.items()}
        self.seed = int(seed)
        self.dim = int(dim)

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any], seed: int = 0, dim: int = EMBEDDING_DIM, path: str = "script") -> "ScriptedBackend":
        if not isinstance(raw, Mapping):
            raise ConfigInvalid(path, "script must be a mapping of template id to rows")
        table: dict[TemplateId, list[ScriptRow]] = {}
        for key, rows in raw.items():
            try:
                tid = TemplateId(key)
            except ValueError:
                raise ConfigInvalid(f"{path}.{key}", "unknown template id") from None
            if isinstance(rows, (str, Mapping)):
                rows = [rows]
            table[tid] = [parse_row(row, f"{path}.{key}[{i}]") for i, row in enumerate(rows)]
        return cls(table, seed=seed, dim=dim)

    def _pick(self, row: ScriptRow, request: PromptRequest) -> str:
        if row.builtin is not None:
            return BUILTINS[row.builtin](request)
        if len(row.responses) == 1:
            return row.responses[0]
        key = f"{self.seed}\x00{request.template_id.value}\x00{request.rendered_text}"
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        return row.responses[int.from_bytes(digest[:8], "little") % len(row.responses)]

    def complete(self, request: PromptRequest) -> str:
        for row in self._table[request.template_id]:
            if row.matches(request.rendered_text):
                raw = self._pick(row, request)
                break
        else:  # pragma: no cover - constructor guarantees a default row
            raise EmptyCompletion(request.template_id.value)
        variables = request.variables
        text = _PLACEHOLDER.sub(lambda m: variables.get(m.group(1), m.group(0)), raw)
        if not text.strip():
            raise EmptyCompletion(f"empty scripted response for {request.template_id.value}")
        return text

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        return hashed_embedding(text, self.dim)
