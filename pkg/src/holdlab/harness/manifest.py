"""Run manifest: what was run, with which seeds, and which files it produced."""

from __future__ import annotations

import datetime as _dt
import json
import platform
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any

import numpy as np


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def module_versions() -> dict[str, str]:
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"holdlab": own, "numpy": np.__version__, "python": platform.python_version()}


@dataclass
class RunManifest:
    command: str
    config: dict[str, Any]
    seeds: list[int] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)
    versions: dict[str, str] = field(default_factory=module_versions)
    status: str = "ok"
    error: dict | None = None
    started: str = field(default_factory=_now)
    finished: str = ""

    def add(self, *paths: str) -> None:
        for p in paths:
            if p not in self.artifacts:
                self.artifacts.append(p)

    def write(self, out: str | Path) -> Path:
        out = Path(out)
        missing = [p for p in self.artifacts if not (out / p).exists()]
        if missing:
            raise FileNotFoundError(f"manifest references missing artifacts: {missing}")
        self.finished = _now()
        out.mkdir(parents=True, exist_ok=True)
        path = out / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def read(cls, path: str | Path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))
