"""Iterative reward generation: initialize, train/test, analyze, modify, refine.

Each iteration's modified reward is trained and tested. If its metric is
worse than the gate allows relative to the last accepted iteration, the
refiner is asked for another candidate until one passes (or a cap is hit).
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from ..reward.ast import ParseError, RewardProgram
from ..reward.parser import parse
from ..reward.validate import save_reward_file, validate_program
from ..rl.agent import RewardFailure, Step, TrainConfig, run_test, run_training
from ..rl.checkpoint import save_params
from ..rl.qnet import QNetworkParams
from ..sim.config import ScenarioConfig
from ..sim.metrics import MetricsReport
from .feedback import TRAJECTORY_LIMIT, encode_feedback_json, results_summary, truncate_trajectory
from .providers import RecordingProvider
from .templates import PromptContext, render_prompt

log = logging.getLogger(__name__)

REFINE_CAP = 8
SYNTAX_RETRIES = 3

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


class OrchestrationError(RuntimeError):
    def __init__(self, message: str, transcript: list[dict] | None = None) -> None:
        super().__init__(message)
        self.transcript = transcript or []


def extract_program(text: str) -> str:
    """Body of the first fenced block, or the whole reply when there is none."""
    m = _FENCE_RE.search(text)
    body = m.group(1) if m else text
    return body.strip() + "\n"


@dataclass
class RefinerCriterion:
    metric: str = "avg_travel_time"
    mode: str = "multiplicative"
    slack: float = 1.10
    # optional per-iteration slack (index I-1 applies to iteration I); last entry repeats
    schedule: list[float] | None = None

    def validate(self) -> None:
        for s in [self.slack, *(self.schedule or [])]:
            if self.mode == "multiplicative" and not s > 1:
                raise ValueError("multiplicative slack must be > 1")
            if self.mode == "additive" and not s > 0:
                raise ValueError("additive slack must be > 0")
        if self.mode not in ("multiplicative", "additive"):
            raise ValueError(f"unknown criterion mode {self.mode!r}")

    def slack_for(self, iteration: int) -> float:
        if not self.schedule:
            return self.slack
        return self.schedule[min(iteration - 1, len(self.schedule) - 1)]

    def threshold(self, prev: float, iteration: int = 1) -> float:
        s = self.slack_for(iteration)
        return prev * s if self.mode == "multiplicative" else prev + s

    def passes(self, prev: float, cand: float, iteration: int = 1) -> bool:
        return cand <= self.threshold(prev, iteration)

    def value(self, rslt: MetricsReport) -> float:
        return float(rslt.flat()[self.metric])


@dataclass
class EvalOutcome:
    evol: list[float]
    traj: list[Step]
    rslt: MetricsReport
    params: QNetworkParams | None = None


class Evaluator(Protocol):
    def __call__(self, program: RewardProgram) -> EvalOutcome: ...


@dataclass
class TrainTestEvaluator:
    """Train a fresh agent on the program, then test it greedily on one seed."""

    scenario: ScenarioConfig
    train_cfg: TrainConfig
    test_seed: int = 70

    def __call__(self, program: RewardProgram) -> EvalOutcome:
        res = run_training(self.scenario, program, self.train_cfg)
        test = run_test(res.params, self.scenario, program, self.test_seed)
        return EvalOutcome(res.evol, test.traj, test.metrics, res.params)


@dataclass
class Attempt:
    kind: str  # modify | refine | initialize | warm-start
    source: str
    metric: float
    results: dict
    evol: list[float]
    accepted: bool
    rejected_reason: str = ""
    reward_file: str = ""


@dataclass
class IterationRecord:
    iteration: int
    reward_source: str
    metric: float
    evol: list[float]
    traj: list[dict]
    results: dict
    suggestions: str
    attempts: list[Attempt] = field(default_factory=list)
    accepted: bool = True
    transcript_refs: list[int] = field(default_factory=list)
    syntax_errors: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EvolveConfig:
    iterations: int = 10
    criterion: RefinerCriterion = field(default_factory=RefinerCriterion)
    refine_cap: int = REFINE_CAP
    syntax_retries: int = SYNTAX_RETRIES
    trajectory_limit: int = TRAJECTORY_LIMIT
    # optional early stop once the accepted metric reaches this value
    target_metric: float | None = None


def _step_dict(s: Step) -> dict:
    return {"t": s.t, "bus": s.bus, "stop": s.stop, "state": s.state, "action": s.action,
            "reward": s.reward, "next_state": s.next_state}


class RewardOrchestrator:
    def __init__(self, scenario: ScenarioConfig, provider, evaluator: Evaluator,
                 cfg: EvolveConfig | None = None, out_dir: str | Path | None = None) -> None:
        self.scenario = scenario
        self.provider = provider if isinstance(provider, RecordingProvider) else RecordingProvider(provider)
        self.evaluate = evaluator
        self.cfg = cfg or EvolveConfig()
        self.cfg.criterion.validate()
        self.ctx = PromptContext.from_scenario(scenario)
        self.out = Path(out_dir) if out_dir is not None else None
        self.syntax_errors = 0
        self.records: list[IterationRecord] = []
        self._paths: list[str] = []

    # provider calls

    def _transcript(self) -> list[dict]:
        return [e.to_dict() for e in self.provider.exchanges]

    def _call(self, template_id: str, **values: object) -> str:
        system, prompt = render_prompt(template_id, self.ctx, **values)
        return self.provider.complete(template_id, system, prompt)

    def _generate(self, template_id: str, origin: str, iteration: int, **values: object) -> RewardProgram:
        system, prompt = render_prompt(template_id, self.ctx, **values)
        base = prompt
        for attempt in range(self.cfg.syntax_retries + 1):
            text = self.provider.complete(template_id, system, prompt)
            source = extract_program(text)
            try:
                program = parse(source, origin=origin, iteration=iteration)
                report = validate_program(program)
                if not report.ok:
                    err = report.errors[0]
                    raise ParseError(f"evaluation failed on a test state: {err.get('message', err)}")
                return program
            except ParseError as e:
                self.syntax_errors += 1
                log.info("%s reply %d did not parse: %s", template_id, attempt, e)
                where = f" (line {e.line}, column {e.col})" if e.line else ""
                prompt = (f"{base}\n\n## Your previous answer was rejected\n```\n{source}```\n"
                          f"Error: {e.message}{where}.\nReturn the complete corrected program in one fenced code block.")
        raise OrchestrationError(f"{template_id}: no valid program after {self.cfg.syntax_retries + 1} replies",
                                 self._transcript())

    def initialize_reward(self, iteration: int = 0) -> RewardProgram:
        return self._generate("initializer", "initializer", iteration)

    def modify_reward(self, prev: RewardProgram, suggestions: str, iteration: int) -> RewardProgram:
        return self._generate("modifier", "modifier", iteration,
                              current_reward_function=prev.source.rstrip("\n"), analysis=suggestions)

    def refine_reward(self, prev_good: RewardProgram, prev_suggestions: str, failed: RewardProgram,
                      failed_rslt: MetricsReport, iteration: int) -> RewardProgram:
        return self._generate("refiner", "refiner", iteration,
                              previous_reward_function=prev_good.source.rstrip("\n"),
                              previous_analysis=prev_suggestions,
                              current_reward_function=failed.source.rstrip("\n"),
                              current_test_results=results_summary(failed_rslt))

    def analyze(self, program: RewardProgram, outcome: EvalOutcome) -> str:
        doc = encode_feedback_json(outcome.evol, outcome.traj, outcome.rslt, self.cfg.trajectory_limit)
        return self._call("analyzer", current_reward_function=program.source.rstrip("\n"),
                          trajectory_length=self.cfg.trajectory_limit, trajectories=doc)

    # persistence

    def _write(self, rel: str, text: str) -> str:
        if self.out is None:
            return rel
        p = self.out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
        self._paths.append(rel)
        return rel

    def _save_reward(self, program: RewardProgram, rel: str) -> str:
        if self.out is None:
            return rel
        (self.out / rel).parent.mkdir(parents=True, exist_ok=True)
        save_reward_file(program, self.out / rel)
        self._paths.append(rel)
        return rel

    def _save_record(self, rec: IterationRecord, outcome: EvalOutcome) -> None:
        self._write(f"iterations/iter_{rec.iteration:02d}.json", json.dumps(rec.to_dict(), indent=2) + "\n")
        if self.out is not None and outcome.params is not None:
            rel = f"checkpoints/iter_{rec.iteration:02d}.npz"
            (self.out / rel).parent.mkdir(parents=True, exist_ok=True)
            save_params(outcome.params, self.out / rel, iteration=rec.iteration)
            self._paths.append(rel)

    def _flush_transcripts(self) -> None:
        text = "".join(json.dumps(e, sort_keys=True) + "\n" for e in self._transcript())
        self._write("transcripts.jsonl", text)

    def _manifest(self, status: str, error: str | None, started: str) -> None:
        if self.out is None:
            return
        self._flush_transcripts()
        crit = self.cfg.criterion
        manifest = {
            "kind": "evolve",
            "status": status,
            "error": error,
            "scenario": self.scenario.to_dict(),
            "config": {"iterations": self.cfg.iterations, "criterion": asdict(crit),
                       "refine_cap": self.cfg.refine_cap, "syntax_retries": self.cfg.syntax_retries,
                       "trajectory_limit": self.cfg.trajectory_limit, "target_metric": self.cfg.target_metric},
            "syntax_errors": self.syntax_errors,
            "accepted_metrics": [r.metric for r in self.records],
            "artifacts": sorted(set(self._paths)),
            "started": started,
            "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")

    # main loop

    def _attempt(self, kind: str, program: RewardProgram, outcome: EvalOutcome, rel: str, accepted: bool,
                 reason: str = "") -> Attempt:
        return Attempt(kind, program.source, self.cfg.criterion.value(outcome.rslt), outcome.rslt.to_dict(),
                       list(outcome.evol), accepted, reason, rel)

    def _run(self, program: RewardProgram) -> EvalOutcome:
        try:
            return self.evaluate(program)
        except RewardFailure as e:
            raise OrchestrationError(f"reward failed during training: {e}", self._transcript()) from e

    def _finish_iteration(self, it: int, program: RewardProgram, outcome: EvalOutcome,
                          attempts: list[Attempt], errors_before: int, calls_before: int) -> IterationRecord:
        sugg = self.analyze(program, outcome)
        rec = IterationRecord(
            iteration=it,
            reward_source=program.source,
            metric=self.cfg.criterion.value(outcome.rslt),
            evol=list(outcome.evol),
            traj=[_step_dict(s) for s in truncate_trajectory(outcome.traj, self.cfg.trajectory_limit)],
            results=outcome.rslt.to_dict(),
            suggestions=sugg,
            attempts=attempts,
            transcript_refs=list(range(calls_before, len(self.provider.exchanges))),
            syntax_errors=self.syntax_errors - errors_before,
        )
        self.records.append(rec)
        self._save_record(rec, outcome)
        return rec

    def evolve(self, warm_start: RewardProgram | None = None,
               progress: Callable[[IterationRecord], None] | None = None) -> list[IterationRecord]:
        started = _dt.datetime.now(_dt.timezone.utc).isoformat()
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)
        try:
            self._evolve(warm_start, progress)
        except Exception as e:
            self._manifest("failed", f"{type(e).__name__}: {e}", started)
            raise
        self._manifest("ok", None, started)
        return self.records

    def _evolve(self, warm_start, progress) -> None:
        crit = self.cfg.criterion
        e0, c0 = self.syntax_errors, len(self.provider.exchanges)
        if warm_start is not None:
            program, kind = warm_start, "warm-start"
        else:
            program, kind = self.initialize_reward(0), "initialize"
        rel = self._save_reward(program, "rewards/iter_00.reward")
        outcome = self._run(program)
        att = [self._attempt(kind, program, outcome, rel, True)]
        rec = self._finish_iteration(0, program, outcome, att, e0, c0)
        if progress:
            progress(rec)
        good, good_rec = program, rec

        for it in range(1, self.cfg.iterations + 1):
            if self.cfg.target_metric is not None and good_rec.metric <= self.cfg.target_metric:
                log.info("target metric reached after iteration %d", it - 1)
                break
            e0, c0 = self.syntax_errors, len(self.provider.exchanges)
            cand = self.modify_reward(good, good_rec.suggestions, it)
            kind = "modify"
            attempts: list[Attempt] = []
            while True:
                rel = self._save_reward(cand, f"rewards/iter_{it:02d}_{len(attempts)}.reward")
                outcome = self._run(cand)
                value = crit.value(outcome.rslt)
                limit = crit.threshold(good_rec.metric, it)
                if crit.passes(good_rec.metric, value, it):
                    attempts.append(self._attempt(kind, cand, outcome, rel, True))
                    break
                reason = f"{crit.metric} {value:.6g} exceeds gate {limit:.6g}"
                log.info("iteration %d candidate rejected: %s", it, reason)
                attempts.append(self._attempt(kind, cand, outcome, rel, False, reason))
                n_rejected = sum(not a.accepted for a in attempts)
                if n_rejected >= self.cfg.refine_cap:
                    self._write(f"iterations/iter_{it:02d}_rejected.json",
                                json.dumps([asdict(a) for a in attempts], indent=2) + "\n")
                    raise OrchestrationError(f"iteration {it}: no candidate passed the gate after "
                                             f"{n_rejected} attempts", self._transcript())
                cand = self.refine_reward(good, good_rec.suggestions, cand, outcome.rslt, it)
                kind = "refine"
            self._save_reward(cand, f"rewards/iter_{it:02d}.reward")
            rec = self._finish_iteration(it, cand, outcome, attempts, e0, c0)
            if progress:
                progress(rec)
            good, good_rec = cand, rec


def check_gate(records: list[IterationRecord], criterion: RefinerCriterion) -> list[str]:
    """Problems with a persisted run: gate violations among accepted records or passing rejects."""
    problems = []
    for prev, rec in zip(records, records[1:]):
        if not criterion.passes(prev.metric, rec.metric, rec.iteration):
            problems.append(f"iteration {rec.iteration} accepted {rec.metric} above gate")
        for a in rec.attempts:
            if not a.accepted and criterion.passes(prev.metric, a.metric, rec.iteration):
                problems.append(f"iteration {rec.iteration} rejected a passing attempt ({a.metric})")
    return problems


def load_records(run_dir: str | Path) -> list[IterationRecord]:
    out = []
    for p in sorted(Path(run_dir).glob("iterations/iter_[0-9][0-9].json")):
        d = json.loads(p.read_text(encoding="utf-8"))
        d["attempts"] = [Attempt(**a) for a in d["attempts"]]
        out.append(IterationRecord(**d))
    return out
