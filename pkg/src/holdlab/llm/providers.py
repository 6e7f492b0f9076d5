"""Chat providers: a live HTTP client and a deterministic replay of recorded responses."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

log = logging.getLogger(__name__)


class ProviderError(RuntimeError):
    pass


@dataclass
class LlmProviderConfig:
    kind: str = "replay"  # http | replay
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4o"
    temperature: float = 0.3
    timeout: float = 120.0
    max_retries: int = 3
    api_key_env: str = "LLM_API_KEY"
    fixture: str | None = None

    def validate(self) -> None:
        if self.kind not in ("http", "replay"):
            raise ValueError(f"provider kind must be http or replay, got {self.kind!r}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.kind == "replay" and not self.fixture:
            raise ValueError("replay provider needs a fixture path")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Exchange:
    """One request/response pair, as written to the transcript."""

    template_id: str
    ordinal: int
    system: str
    prompt: str
    response_text: str

    def to_dict(self) -> dict:
        return asdict(self)


class Provider(Protocol):
    def complete(self, template_id: str, system: str, prompt: str) -> str: ...


@dataclass
class _Counter:
    counts: dict[str, int] = field(default_factory=dict)

    def next(self, template_id: str) -> int:
        n = self.counts.get(template_id, 0)
        self.counts[template_id] = n + 1
        return n


class RecordingProvider:
    """Wraps a provider and keeps every exchange in memory."""

    def __init__(self, inner) -> None:
        self.inner = inner
        self.exchanges: list[Exchange] = []
        self._ord = _Counter()

    def complete(self, template_id: str, system: str, prompt: str) -> str:
        k = self._ord.next(template_id)
        text = self.inner.complete(template_id, system, prompt)
        self.exchanges.append(Exchange(template_id, k, system, prompt, text))
        return text

    def as_fixture(self) -> list[dict]:
        return [{"template_id": e.template_id, "ordinal": e.ordinal, "response_text": e.response_text}
                for e in self.exchanges]


class ReplayProvider:
    """Answers each call with the recorded response for (template id, call ordinal)."""

    def __init__(self, entries: list[dict]) -> None:
        self.table: dict[tuple[str, int], str] = {}
        for e in entries:
            key = (str(e["template_id"]), int(e["ordinal"]))
            if key in self.table:
                raise ProviderError(f"duplicate replay entry {key}")
            self.table[key] = str(e["response_text"])
        self._ord = _Counter()

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayProvider":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, list):
            raise ProviderError(f"{path}: replay fixture must be a JSON array")
        return cls(data)

    def complete(self, template_id: str, system: str, prompt: str) -> str:
        k = self._ord.next(template_id)
        try:
            return self.table[(template_id, k)]
        except KeyError:
            raise ProviderError(f"replay fixture has no response for {template_id} call #{k}") from None


class HttpProvider:
    """Chat-completions style endpoint."""

    def __init__(self, cfg: LlmProviderConfig, client: httpx.Client | None = None) -> None:
        self.cfg = cfg
        self.client = client or httpx.Client(timeout=cfg.timeout)

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.cfg.api_key_env)
        if not key:
            raise ProviderError(f"environment variable {self.cfg.api_key_env} is not set")
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def complete(self, template_id: str, system: str, prompt: str) -> str:
        body = {
            "model": self.cfg.model,
            "messages": [{"role": "system", "content": system}, {"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
        }
        headers = self._headers()
        last: Exception | None = None
        for attempt in range(self.cfg.max_retries + 1):
            try:
                r = self.client.post(self.cfg.endpoint, json=body, headers=headers)
                if r.status_code == 429 or r.status_code >= 500:
                    raise ProviderError(f"HTTP {r.status_code}")
                r.raise_for_status()
                return r.json()["choices"][0]["message"]["content"]
            except (httpx.HTTPError, ProviderError, KeyError, IndexError, ValueError) as e:
                last = e
                log.warning("provider call %s failed (attempt %d): %s", template_id, attempt + 1, e)
                if attempt < self.cfg.max_retries:
                    time.sleep(min(2.0 ** attempt, 30.0))
        raise ProviderError(f"provider failed after {self.cfg.max_retries + 1} attempts: {last}")


def make_provider(cfg: LlmProviderConfig):
    cfg.validate()
    if cfg.kind == "replay":
        return ReplayProvider.from_file(cfg.fixture)
    return HttpProvider(cfg)
