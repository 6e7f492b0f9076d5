from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ast import EvalError, RewardProgram
from .evaluator import evaluate
from .parser import parse

LARGE_REWARD = 1e6


@dataclass
class ValidationReport:
    warnings: list[str] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def probe_states(n: int = 32, seed: int = 0) -> list[tuple[list[float], int, list[float]]]:
    """Plausible (cur, action, nxt) triples: balanced, bunched, and random."""
    rng = np.random.default_rng(seed)
    probes = [
        ([1650, 1650, 0, 0, 50, 0], 1, [1650, 1650, 0, 0, 50, 0]),
        ([1650, 1650, 0, 0, 50, 0], 0, [1650, 1650, 0, 0, 50, 5]),
        ([300, 3000, 800, 2500, 100, 40], 0, [330, 2970, 830, 2470, 100, 45]),
        ([0, 0, 0, 0, 0, 0], 1, [0, 0, 0, 0, 0, 0]),
    ]
    for _ in range(n):
        cur = [*rng.uniform(0, 4000, 4), float(rng.integers(0, 121)), float(5 * rng.integers(0, 19))]
        a = int(rng.integers(0, 2))
        nxt = list(cur)
        nxt[5] = min(cur[5] + 5, 90) if a == 0 else 0.0
        nxt[:4] = [max(0.0, x + d) for x, d in zip(cur[:4], rng.normal(0, 30, 4))]
        probes.append((cur, a, nxt))
    return probes


def validate_program(program: RewardProgram) -> ValidationReport:
    """Evaluate on probe vectors; EvalErrors are errors, huge magnitudes are warnings."""
    rep = ValidationReport()
    biggest = 0.0
    for cur, a, nxt in probe_states():
        try:
            r = evaluate(program, cur, a, nxt)
        except EvalError as e:
            rep.errors.append(e.to_dict())
            continue
        biggest = max(biggest, abs(r))
    if biggest > LARGE_REWARD:
        rep.warnings.append(f"reward magnitude reaches {biggest:.3g} on probe states; consider rescaling")
    return rep


def load_reward_file(path: str | Path, origin: str = "file") -> RewardProgram:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), origin=origin, name=path.stem)


def save_reward_file(program: RewardProgram, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(program.pretty(), encoding="utf-8")
    return path
