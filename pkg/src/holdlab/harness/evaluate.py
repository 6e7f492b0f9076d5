"""Multi-seed evaluation with mean and SD per metric."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from ..sim.config import ScenarioConfig
from ..sim.env import BusEnv
from ..sim.metrics import compute_metrics
from .factory import controller_factory

log = logging.getLogger(__name__)

METRICS = ("sd_headway", "avg_travel_time", "avg_waiting_time", "avg_holding_time", "incomplete_fraction")
TABLE_COLUMNS = (("sd_headway", "SD headways (s)"), ("avg_travel_time", "Avg TT (s)"),
                 ("avg_waiting_time", "Avg WT (s)"), ("avg_holding_time", "Avg HT (s)"))


@dataclass
class SeedRow:
    seed: int
    ok: bool
    metrics: dict[str, float] = field(default_factory=dict)
    error: str = ""


@dataclass
class EvalSummary:
    controller: str
    rows: list[SeedRow]
    mean: dict[str, float]
    sd: dict[str, float]

    @property
    def failures(self) -> list[SeedRow]:
        return [r for r in self.rows if not r.ok]

    def to_dict(self) -> dict:
        return {"controller": self.controller, "seeds": [r.seed for r in self.rows],
                "n_ok": sum(r.ok for r in self.rows), "failed_seeds": [r.seed for r in self.failures],
                "mean": self.mean, "sd": self.sd}


def parse_seeds(text: str) -> list[int]:
    """'1..10', '3,5,9' or a mix such as '1..3,7'."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    return seeds


def _run_one(args: tuple) -> SeedRow:
    scenario, make, seed = args
    try:
        ctrl = (controller_factory(make, scenario) if isinstance(make, str) else make)()
        env = BusEnv(scenario, seed, ctrl, record_events=False).run()
        return SeedRow(seed, True, compute_metrics(env).flat())
    except Exception as e:  # a failing seed becomes a flagged row, not a crash
        log.warning("seed %d failed: %s", seed, e)
        return SeedRow(seed, False, error=f"{type(e).__name__}: {e}")


def _pop_stats(xs: list[float]) -> tuple[float, float]:
    if not xs:
        return math.nan, math.nan
    m = math.fsum(xs) / len(xs)
    return m, math.sqrt(math.fsum((x - m) ** 2 for x in xs) / len(xs))


def aggregate(rows: Iterable[SeedRow]) -> tuple[dict[str, float], dict[str, float]]:
    ok = sorted((r for r in rows if r.ok), key=lambda r: r.seed)
    mean, sd = {}, {}
    for k in METRICS:
        mean[k], sd[k] = _pop_stats([r.metrics[k] for r in ok])
    return mean, sd


def evaluate_multi_seed(scenario: ScenarioConfig, spec: str, seeds: list[int], workers: int = 1) -> EvalSummary:
    if not seeds:
        raise ValueError("need at least one seed")
    make = controller_factory(spec, scenario)  # also fails fast on a bad spec
    order = sorted(set(int(s) for s in seeds))
    if workers > 1 and not spec.startswith("reward-preset:"):
        jobs = [(scenario, spec, s) for s in order]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_one, jobs))
    else:
        rows = [_run_one((scenario, make, s)) for s in order]
    rows.sort(key=lambda r: r.seed)
    mean, sd = aggregate(rows)
    return EvalSummary(spec, rows, mean, sd)


def metrics_csv(summary: EvalSummary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "status", *METRICS, "error"])
    for r in summary.rows:
        w.writerow([r.seed, "ok" if r.ok else "failed", *[repr(r.metrics[k]) if r.ok else "" for k in METRICS],
                    r.error])
    w.writerow(["mean", "aggregate", *[repr(summary.mean[k]) for k in METRICS], ""])
    w.writerow(["sd", "aggregate", *[repr(summary.sd[k]) for k in METRICS], ""])
    return buf.getvalue()


def format_table(summaries: list[EvalSummary]) -> str:
    """Mean +- SD cells, one row per controller."""
    head = ["Method", *[label for _, label in TABLE_COLUMNS]]
    body = [[s.controller, *[f"{s.mean[k]:.2f} ± {s.sd[k]:.2f}" for k, _ in TABLE_COLUMNS]] for s in summaries]
    widths = [max(len(str(row[i])) for row in [head, *body]) for i in range(len(head))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip() for row in [head, *body]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_summary(summary: EvalSummary, out: Path) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(metrics_csv(summary), encoding="utf-8")
    (out / "aggregate.json").write_text(json.dumps(summary.to_dict(), indent=2) + "\n", encoding="utf-8")
    (out / "table.txt").write_text(format_table([summary]), encoding="utf-8")
    return ["metrics.csv", "aggregate.json", "table.txt"]
