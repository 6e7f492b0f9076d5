"""Prompt templates and their rendering.

Templates live as text files next to this module. Placeholders are written
``{name}``; rendering is a single pass, so text substituted into a template
(JSON, programs) is never scanned for placeholders itself.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Mapping

from ..sim.config import ScenarioConfig

TEMPLATE_IDS = ("initializer", "modifier", "analyzer", "refiner")
PLACEHOLDER_RE = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


class TemplateError(KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0])


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    system: str
    body: str

    @property
    def placeholders(self) -> list[str]:
        return sorted(set(PLACEHOLDER_RE.findall(self.body)))

    def render(self, values: Mapping[str, object]) -> str:
        missing = [k for k in self.placeholders if k not in values]
        if missing:
            raise TemplateError(f"template {self.template_id!r} has unfilled placeholders: {missing}")
        return PLACEHOLDER_RE.sub(lambda m: str(values[m.group(1)]), self.body)


def _read(name: str) -> str:
    return resources.files(__package__).joinpath("templates", f"{name}.txt").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def load_template(template_id: str) -> PromptTemplate:
    if template_id not in TEMPLATE_IDS:
        raise TemplateError(f"unknown template {template_id!r}")
    text = _read(template_id)
    # first paragraph is the role line, the rest is the user message
    system, _, body = text.partition("\n\n")
    return PromptTemplate(template_id, system.strip(), body)


@dataclass(frozen=True)
class PromptContext:
    """Scenario facts substituted into the shared background section."""

    line_phrase: str
    action_step: int
    max_hold: int
    network_description: str

    @classmethod
    def from_scenario(cls, sc: ScenarioConfig) -> "PromptContext":
        n = len(sc.lines)
        shared = [s for s in sc.stop_ids if sc.is_shared(s)]
        if n == 1:
            ln = sc.lines[0]
            kind = "loop" if ln.circular else "route"
            phrase = f"a single bus line on a {ln.route_length / 1000:.2f} km {kind} with {len(ln.stops)} stops"
        else:
            phrase = f"{n} bus lines that share {len(shared)} stops"
        parts = []
        for i, ln in enumerate(sc.lines, start=1):
            kind = "circular" if ln.circular else "one-way"
            parts.append(f"- line {i} (id {ln.line_id}): {kind}, {ln.route_length:.0f} m long, {len(ln.stops)} stops, "
                         f"a bus every {ln.departure_interval:g} s")
        cap = "effectively unlimited" if sc.capacity >= 1000 else str(sc.capacity)
        parts.append(f"- bus capacity: {cap} passengers")
        if shared:
            parts.append(f"- shared stops: {', '.join(shared)}")
        return cls(phrase, sc.action_step, sc.max_hold, "\n".join(parts))

    def common(self) -> str:
        tpl = PromptTemplate("_common", "", _read("_common"))
        return tpl.render({
            "line_phrase": self.line_phrase,
            "action_step": self.action_step,
            "max_hold": self.max_hold,
            "network_description": self.network_description,
        })


def render_prompt(template_id: str, ctx: PromptContext, **values: object) -> tuple[str, str]:
    """Return (system, user) text for one call."""
    tpl = load_template(template_id)
    return tpl.system, tpl.render({"common": ctx.common(), **values})


def audit_templates() -> dict[str, list[str]]:
    """Placeholders used by each template, for checks and docs."""
    return {tid: load_template(tid).placeholders for tid in TEMPLATE_IDS}
