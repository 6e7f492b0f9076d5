import json
from pathlib import Path

import httpx
import jsonschema
import pytest

from holdlab.harness.scenarios import case1, case2_synthetic
from holdlab.llm import (EvolveConfig, LlmProviderConfig, OrchestrationError, RefinerCriterion, ReplayProvider,
                         RewardOrchestrator, TrainTestEvaluator, audit_templates, check_gate, load_records,
                         render_prompt)
from holdlab.llm.feedback import encode_feedback_json, feedback_document, truncate_trajectory, validate_feedback
from holdlab.llm.orchestrator import EvalOutcome, extract_program
from holdlab.llm.providers import HttpProvider, ProviderError, RecordingProvider
from holdlab.llm.templates import PLACEHOLDER_RE, PromptContext, TemplateError, load_template
from holdlab.reward import APPENDIX_B, evaluate, parse, preset
from holdlab.rl import TrainConfig
from holdlab.rl.agent import Step
from holdlab.sim.metrics import LineMetrics, MetricsReport

from conftest import tiny_scenario

HERE = Path(__file__).parent
GATE_FIXTURE = HERE / "fixtures" / "evolve_gate.json"
GOLDEN = HERE / "golden" / "analyzer_prompt.txt"
ZERO = [0.0] * 6


def report(att: float, n_lines: int = 1, shared: bool = False) -> MetricsReport:
    m = LineMetrics(sd_headway=100.5, avg_travel_time=att, avg_waiting_time=att / 3, avg_holding_time=7.25)
    return MetricsReport({str(i): m for i in range(1, n_lines + 1)}, m, m if shared else None, 0.0, 10)


def steps(n: int) -> list[Step]:
    return [Step(t=5 * i, bus=i % 3, stop="s1", state=[float(i), 2.0, 0.0, 0.0, 4.0, 0.0], action=i % 2,
                 reward=0.1 * i, next_state=[float(i), 2.0, 0.0, 0.0, 4.0, 5.0]) for i in range(n)]


class StubEvaluator:
    """Maps a constant reward program to a travel time, no training."""

    def __init__(self, table: dict[float, float]) -> None:
        self.table = table
        self.calls: list[str] = []

    def __call__(self, program):
        key = evaluate(program, ZERO, 1, ZERO)
        self.calls.append(program.source)
        return EvalOutcome([key, key + 1.0], steps(3), report(self.table[key]))


def replay(*entries: tuple[str, str]) -> ReplayProvider:
    counts: dict[str, int] = {}
    rows = []
    for tid, text in entries:
        rows.append({"template_id": tid, "ordinal": counts.get(tid, 0), "response_text": text})
        counts[tid] = counts.get(tid, 0) + 1
    return ReplayProvider(rows)


def orchestrator(provider, table=None, **cfg) -> RewardOrchestrator:
    return RewardOrchestrator(case1(), provider, StubEvaluator(table or {}), EvolveConfig(**cfg))


# initializer / modifier

def test_initializer_constant_program():
    orch = orchestrator(replay(("initializer", "```\nreturn 0;\n```")))
    prog = orch.initialize_reward()
    assert evaluate(prog, ZERO, 0, ZERO) == 0.0 and orch.syntax_errors == 0
    assert prog.origin == "initializer"


def test_initializer_retries_after_invalid_reply():
    orch = orchestrator(replay(("initializer", "```\nreturn cur[9];\n```"), ("initializer", "return action;")))
    prog = orch.initialize_reward()
    assert orch.syntax_errors == 1
    assert prog.structurally_equal(parse("return action;"))
    second_prompt = orch.provider.exchanges[1].prompt
    assert "previous answer was rejected" in second_prompt and "line 1" in second_prompt


def test_eval_failures_count_as_errors():
    orch = orchestrator(replay(("initializer", "return 1 / cur[5];"), ("initializer", "return 1;")))
    orch.initialize_reward()
    assert orch.syntax_errors == 1


def test_retry_budget_exhausted():
    orch = orchestrator(replay(*[("initializer", "return (;")] * 4))
    with pytest.raises(OrchestrationError) as info:
        orch.initialize_reward()
    assert orch.syntax_errors == 4 and len(info.value.transcript) == 4


def test_initializer_appendix_b_transliteration():
    orch = orchestrator(replay(("initializer", f"Thoughts: combine several terms.\n```python\n{APPENDIX_B}```\n")))
    assert orch.initialize_reward().structurally_equal(preset("appendix-b"))


def test_modifier_echo_and_change():
    prev = preset("local", 1650)
    added = prev.source.replace("return (same_line + other_line) / ideal_headway;",
                                "let spread = std([nxt[0], nxt[1]]) - std([cur[0], cur[1]]);\n"
                                "return (same_line + other_line) / ideal_headway - spread / ideal_headway;")
    orch = orchestrator(replay(("modifier", f"```\n{prev.source}```"), ("modifier", f"```\n{added}```")))
    echo = orch.modify_reward(prev, "none", 1)
    assert echo.structurally_equal(prev)
    changed = orch.modify_reward(prev, "penalize growing spread", 1)
    assert not changed.structurally_equal(prev)
    assert "penalize growing spread" in orch.provider.exchanges[1].prompt


def test_modifier_fix_after_syntax_error():
    orch = orchestrator(replay(("modifier", "return abs(;"), ("modifier", "return abs(cur[0] - nxt[0]);")))
    orch.modify_reward(preset("local"), "", 2)
    assert orch.syntax_errors == 1


def test_extract_program():
    assert extract_program("words\n```dsl\nreturn 1;\n```\nmore ```\nreturn 2;\n```") == "return 1;\n"
    assert extract_program("return 3;") == "return 3;\n"


# feedback encoding

@pytest.mark.parametrize("n,kept", [(30, 30), (50, 50), (120, 50)])
def test_truncation(n, kept):
    traj = steps(n)
    out = truncate_trajectory(traj)
    assert len(out) == kept and out == traj[-kept:]


def test_feedback_contains_last_fifty():
    doc = json.loads(encode_feedback_json([1.0], steps(120), report(1300.0, 2, True)))
    hist = doc[1]["test_history"]
    assert all(len(hist[k]) == 50 for k in ("current_states", "actions", "rewards", "next_states"))
    assert hist["current_states"][0][0] == 70.0


def test_feedback_schema_and_shape():
    doc = encode_feedback_json([0.5, 1.25], steps(10), report(1300.0, 2, True))
    validate_feedback(doc)
    second = json.loads(doc)[1]
    assert set(second) == {"test_history", "test_results_line_1", "test_results_line_2",
                           "test_results_shared_part", "test_results_overall"}


def test_single_line_omits_second_line_and_shared():
    second = feedback_document([], steps(2), report(1300.0, 1, False))[1]
    assert "test_results_line_2" not in second and "test_results_shared_part" not in second
    validate_feedback([feedback_document([], steps(2), report(1.0))[0], second])


def test_schema_rejects_extra_keys():
    doc = feedback_document([], steps(2), report(1.0))
    doc[1]["test_results_line_1"]["bogus"] = 1.0
    with pytest.raises(jsonschema.ValidationError):
        validate_feedback(doc)


def test_empty_evol():
    assert json.loads(encode_feedback_json([], [], report(1.0)))[0] == {"training_history": {"total_rewards": []}}


def test_full_precision_round_trip():
    vals = [0.1 + 0.2, 1 / 3, 1e-17, 123456789.123456789]
    assert json.loads(encode_feedback_json(vals, [], report(1.0)))[0]["training_history"]["total_rewards"] == vals


# templates

def test_template_audit_lists_placeholders():
    audit = audit_templates()
    assert audit["initializer"] == ["common"]
    assert audit["analyzer"] == ["common", "current_reward_function", "trajectories", "trajectory_length"]
    assert set(audit["refiner"]) >= {"previous_reward_function", "current_test_results"}


def test_rendered_prompts_have_no_placeholders():
    ctx = PromptContext.from_scenario(case2_synthetic())
    prompts = [render_prompt("initializer", ctx),
               render_prompt("modifier", ctx, current_reward_function="return 0;", analysis="x"),
               render_prompt("analyzer", ctx, current_reward_function="return 0;", trajectory_length=50,
                             trajectories="[]"),
               render_prompt("refiner", ctx, previous_reward_function="return 0;", previous_analysis="a",
                             current_reward_function="return 1;", current_test_results="{}")]
    for system, user in prompts:
        assert not PLACEHOLDER_RE.search(system) and not PLACEHOLDER_RE.search(user)
    assert "2 bus lines" in prompts[0][1]


def test_single_line_prompt_mentions_single_line():
    _, user = render_prompt("initializer", PromptContext.from_scenario(tiny_scenario()))
    assert "a single bus line" in user and "two bus lines" not in user


def test_render_raises_on_missing_value():
    with pytest.raises(TemplateError):
        render_prompt("modifier", PromptContext.from_scenario(case1()), analysis="only one")


def test_analyzer_prompt_matches_golden():
    orch = orchestrator(RecordingProvider(replay(("analyzer", "fine"))))
    outcome = EvalOutcome([1.0, 2.5], steps(3), report(1312.5, 1))
    assert orch.analyze(preset("local", 1650), outcome) == "fine"
    ex = orch.provider.exchanges[0]
    assert ex.system + "\n---\n" + ex.prompt == GOLDEN.read_text(encoding="utf-8")


def test_analyzer_empty_suggestion_is_kept(tmp_path):
    prov = replay(("initializer", "return 1;"), ("analyzer", ""))
    orch = RewardOrchestrator(case1(), prov, StubEvaluator({1.0: 1400.0}), EvolveConfig(iterations=0), tmp_path)
    recs = orch.evolve()
    assert len(recs) == 1 and recs[0].suggestions == ""


# criterion and evolve

def test_criterion_arithmetic():
    c = RefinerCriterion()
    assert c.threshold(1400) == pytest.approx(1540)
    assert c.passes(1400, 1500) and not c.passes(1400, 1600)
    add = RefinerCriterion(mode="additive", slack=50)
    assert add.passes(1400, 1450) and not add.passes(1400, 1451)
    sched = RefinerCriterion(schedule=[1.2, 1.05])
    assert sched.slack_for(1) == 1.2 and sched.slack_for(5) == 1.05
    with pytest.raises(ValueError):
        RefinerCriterion(slack=0.9).validate()


def test_gate_accepts_without_refinement():
    prov = replay(("initializer", "return 1;"), ("analyzer", "a"), ("modifier", "return 2;"), ("analyzer", "b"))
    orch = orchestrator(prov, {1.0: 1400.0, 2.0: 1500.0}, iterations=1)
    recs = orch.evolve()
    assert [r.metric for r in recs] == [1400.0, 1500.0]
    assert all(e.template_id != "refiner" for e in orch.provider.exchanges)


def test_gate_rejects_and_refines():
    prov = replay(("initializer", "return 1;"), ("analyzer", "a"), ("modifier", "return 2;"),
                  ("refiner", "return 3;"), ("analyzer", "b"))
    orch = orchestrator(prov, {1.0: 1400.0, 2.0: 1600.0, 3.0: 1450.0}, iterations=1)
    recs = orch.evolve()
    att = recs[1].attempts
    assert [a.accepted for a in att] == [False, True] and att[0].metric == 1600.0
    refine_prompt = [e for e in orch.provider.exchanges if e.template_id == "refiner"][0].prompt
    assert "1600" in refine_prompt and "return 2;" in refine_prompt


def test_refine_cap(tmp_path):
    prov = replay(("initializer", "return 1;"), ("analyzer", "a"), ("modifier", "return 2;"),
                  ("refiner", "return 2;"), ("refiner", "return 2;"))
    orch = RewardOrchestrator(case1(), prov, StubEvaluator({1.0: 1000.0, 2.0: 9999.0}),
                              EvolveConfig(iterations=1, refine_cap=3), tmp_path)
    with pytest.raises(OrchestrationError):
        orch.evolve()
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "failed" and "gate" in man["error"]
    assert len(json.loads((tmp_path / "iterations/iter_01_rejected.json").read_text())) == 3


def test_zero_iterations():
    orch = orchestrator(replay(("initializer", "return 1;"), ("analyzer", "x")), {1.0: 1400.0}, iterations=0)
    recs = orch.evolve()
    assert len(recs) == 1 and recs[0].attempts[0].kind == "initialize"


def test_warm_start_skips_initializer():
    warm = preset("local", 1650)
    table = {evaluate(warm, ZERO, 1, ZERO): 1400.0}
    orch = orchestrator(replay(("analyzer", "x")), table, iterations=0)
    recs = orch.evolve(warm)
    assert parse(recs[0].reward_source).structurally_equal(warm)
    assert [e.template_id for e in orch.provider.exchanges] == ["analyzer"]


def _gate_run(out: Path):
    table = {1.0: 1450.0, 2.0: 1400.0, 3.0: 1600.0, 4.0: 1420.0, 5.0: 1390.0}
    orch = RewardOrchestrator(case1(), ReplayProvider.from_file(GATE_FIXTURE), StubEvaluator(table),
                              EvolveConfig(iterations=3), out)
    return orch, orch.evolve()


def test_gate_fixture_end_to_end(tmp_path):
    orch, recs = _gate_run(tmp_path)
    assert [r.metric for r in recs] == [1450.0, 1400.0, 1420.0, 1390.0]
    assert [sum(not a.accepted for a in r.attempts) for r in recs] == [0, 0, 1, 0]
    assert recs[2].suggestions == ""
    loaded = load_records(tmp_path)
    assert [r.to_dict() for r in loaded] == [r.to_dict() for r in recs]
    crit = RefinerCriterion()
    assert check_gate(loaded, crit) == []
    for prev, rec in zip(loaded, loaded[1:]):
        assert rec.metric <= 1.10 * prev.metric
        assert all(a.metric > 1.10 * prev.metric for a in rec.attempts if not a.accepted)
    assert len((tmp_path / "transcripts.jsonl").read_text().splitlines()) == 9
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "ok"


def test_check_gate_flags_violations(tmp_path):
    _, recs = _gate_run(tmp_path)
    recs[3].metric = 2000.0
    recs[2].attempts[0].metric = 1500.0
    assert len(check_gate(recs, RefinerCriterion())) == 2


def test_replay_runs_are_byte_identical(tmp_path):
    _gate_run(tmp_path / "a")
    _gate_run(tmp_path / "b")
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files = [p for p in files if p.name != "manifest.json"]
    assert len(files) > 10
    for rel in files:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel


def test_replay_missing_entry():
    with pytest.raises(ProviderError):
        replay(("analyzer", "x")).complete("modifier", "", "")
    with pytest.raises(ProviderError):
        ReplayProvider([{"template_id": "a", "ordinal": 0, "response_text": ""}] * 2)


def test_real_training_replay_run(tmp_path):
    sc = tiny_scenario()
    prov = replay(("initializer", "return if(action == 1, 0.1, 0);"), ("analyzer", "x"),
                  ("modifier", f"```\n{preset('local', sc.ideal_headway()).source}```"), ("analyzer", "y"))
    ev = TrainTestEvaluator(sc, TrainConfig(episodes=2, updates_per_episode=5, hidden=(16, 16), batch_size=16), 5)
    orch = RewardOrchestrator(sc, prov, ev, EvolveConfig(iterations=1, criterion=RefinerCriterion(slack=100)),
                              tmp_path)
    recs = orch.evolve()
    assert len(recs) == 2 and all(len(r.evol) == 2 for r in recs)
    assert (tmp_path / "checkpoints/iter_01.npz").exists()


# HTTP provider

def _http(handler, **kw):
    cfg = LlmProviderConfig(kind="http", endpoint="https://llm.test/v1/chat", max_retries=2, **kw)
    return HttpProvider(cfg, httpx.Client(transport=httpx.MockTransport(handler)))


def test_http_provider_request_shape(monkeypatch):
    monkeypatch.setenv("LLM_API_KEY", "k123")
    seen = {}

    def handler(req: httpx.Request):
        seen["auth"] = req.headers["authorization"]
        seen["body"] = json.loads(req.content)
        return httpx.Response(200, json={"choices": [{"message": {"content": "return 0;"}}]})

    assert _http(handler, temperature=0.5).complete("initializer", "sys", "user") == "return 0;"
    assert seen["auth"] == "Bearer k123"
    assert seen["body"]["messages"] == [{"role": "system", "content": "sys"}, {"role": "user", "content": "user"}]
    assert seen["body"]["temperature"] == 0.5


def test_http_provider_retries(monkeypatch):
    monkeypatch.setenv("LLM_API_KEY", "k")
    monkeypatch.setattr("holdlab.llm.providers.time.sleep", lambda s: None)
    codes = iter([429, 503, 200])

    def handler(req):
        c = next(codes)
        return httpx.Response(c, json={"choices": [{"message": {"content": "ok"}}]} if c == 200 else {})

    assert _http(handler).complete("analyzer", "s", "p") == "ok"


def test_http_provider_gives_up(monkeypatch):
    monkeypatch.setenv("LLM_API_KEY", "k")
    monkeypatch.setattr("holdlab.llm.providers.time.sleep", lambda s: None)
    with pytest.raises(ProviderError):
        _http(lambda req: httpx.Response(500)).complete("analyzer", "s", "p")


def test_http_provider_needs_key(monkeypatch):
    monkeypatch.delenv("LLM_API_KEY", raising=False)
    with pytest.raises(ProviderError):
        _http(lambda req: httpx.Response(200)).complete("analyzer", "s", "p")


def test_template_system_text_is_first_paragraph():
    tpl = load_template("analyzer")
    assert tpl.system and "\n\n" not in tpl.system
