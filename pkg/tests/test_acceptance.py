"""Acceptance suite: one PASS/FAIL line per primary criterion.

Run alone with ``pytest tests/test_acceptance.py -s``; the verdict lines are
also printed when output is captured. The RL and generic-scenario checks
train full-size networks and take tens of minutes on one CPU.
"""

import json
import math

import numpy as np
import pytest

from holdlab.controllers import (ROBUST, STOCHASTIC, FeedbackController, ModelBasedController, PSOConfig,
                                 PSOController)
from holdlab.controllers.pso import PlanProblem, aggregate, brute_force, forecast_slots, pso_optimize
from holdlab.harness.scenarios import case1, case2_synthetic, gen_scenario
from holdlab.llm import EvolveConfig, RefinerCriterion, ReplayProvider, RewardOrchestrator, TrainTestEvaluator
from holdlab.llm import check_gate, load_records
from holdlab.llm.feedback import encode_feedback_json, truncate_trajectory, validate_feedback
from holdlab.reward import evaluate, preset
from holdlab.rl import TrainConfig, run_test, run_training
from holdlab.rl.agent import GreedyPolicy
from holdlab.rl.qnet import dqn_update, init_params, td_loss_and_grad, td_targets
from holdlab.sim.dynamics import alighting_count, boarding_count, dwell_time, line_headways
from holdlab.sim.env import BusEnv
from holdlab.sim.metrics import compute_metrics

from conftest import tiny_scenario
from test_controllers import _Grab
from test_qnet import _batch, _flat_loss
from test_llm import GATE_FIXTURE, StubEvaluator, report, steps
from test_reward_lang import appendix_b_oracle


@pytest.fixture
def verdict(capsys):
    def say(name: str, ok: bool, detail: str = "") -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} [{name}] {detail}".rstrip(), flush=True)
        assert ok, f"{name}: {detail}"
    return say


def paired(sc, make, seeds):
    return [compute_metrics(BusEnv(sc, s, make(), record_events=False).run()).overall for s in seeds]


def mean(xs):
    return math.fsum(xs) / len(xs)


# 1
def test_dynamics_unit_oracles(verdict):
    class P:
        def __init__(self, dest):
            self.alight_stop = dest

    checks = [
        dwell_time(10, 5, 3.0, 1.8) == 30.0,
        dwell_time(0, 0, 3.0, 1.8) == 0.0,
        dwell_time(2, 20, 3.0, 1.8) == 36.0,
        boarding_count(50, 120, 100, 10) == (30, 20),
        boarding_count(0, 120, 10, 0) == (0, 0),
        boarding_count(30, 120, 40, 0) == (30, 0),
        alighting_count([], "S") == 0,
        alighting_count([P("S"), P("T"), P("S")], "S") == 2,
        line_headways(5000.0, [(6500.0, False)], 20000.0, False)[0] == 1500.0,
        line_headways(9990.0, [(666.0, False)], 10656.0, True)[0] == 1332.0,
        line_headways(3000.0, [], 20000.0, False) == (17000.0, 3000.0),
    ]
    verdict("dynamics unit oracles", all(checks), f"{sum(checks)}/{len(checks)} exact matches")


# 2
def test_conservation_suite(verdict):
    runs = 0
    sc = case1()
    rng = np.random.default_rng(2)
    for seed in rng.integers(0, 10**6, size=10):
        BusEnv(sc, int(seed), FeedbackController(), record_events=False, check_invariants=True).run()
        runs += 1
    for g in range(5):
        gen = gen_scenario(seed=g)
        ctrl = FeedbackController() if g % 2 else None
        env = BusEnv(gen, 7, ctrl, record_events=False, check_invariants=True).run()
        c = env.counts()
        assert c["pending"] + c["waiting"] + c["onboard"] + c["alighted"] == c["total"]
        runs += 1
    verdict("conservation suite", runs == 15, f"{runs} runs checked every tick, no invariant violation")


# 3
def test_determinism_all_controllers(verdict):
    sc = tiny_scenario(rate=240, duration=2400, n_stops=3, length=6000.0, fleet=2, interval=200.0)
    params = init_params([6, 16, 16, 2], np.random.default_rng(4))
    small_pso = PSOConfig(window=600, n_scenarios=2, swarm=4, iterations=2)
    makers = {
        "none": lambda: None,
        "feedback": FeedbackController,
        "model": ModelBasedController,
        "pso-robust": lambda: PSOController(ROBUST, small_pso),
        "pso-stochastic": lambda: PSOController(STOCHASTIC, small_pso),
        "rl-greedy": lambda: GreedyPolicy(params, sc),
    }
    same = {}
    for name, make in makers.items():
        a, b = BusEnv(sc, 9, make()).run(), BusEnv(sc, 9, make()).run()
        ma, mb = compute_metrics(a).to_dict(), compute_metrics(b).to_dict()
        same[name] = a.event_log() == b.event_log() and json.dumps(ma) == json.dumps(mb)
    ta = run_test(params, sc, preset("local"), 5)
    tb = run_test(params, sc, preset("local"), 5)
    same["rl-test"] = [vars(s) for s in ta.traj] == [vars(s) for s in tb.traj] and \
        ta.metrics.to_dict() == tb.metrics.to_dict()
    bad = [k for k, v in same.items() if not v]
    verdict("determinism", not bad, f"identical logs and metrics for {len(same)} controllers"
            + (f"; differing: {bad}" if bad else ""))


# 4
def test_feedback_vs_no_holding(verdict):
    sc = case1()
    seeds = range(1, 11)
    no = paired(sc, lambda: None, seeds)
    fb = paired(sc, FeedbackController, seeds)
    sd_no, sd_fb = mean([m.sd_headway for m in no]), mean([m.sd_headway for m in fb])
    wt_no, wt_fb = mean([m.avg_waiting_time for m in no]), mean([m.avg_waiting_time for m in fb])
    sd_cut, wt_cut = 1 - sd_fb / sd_no, 1 - wt_fb / wt_no
    verdict("feedback vs no-holding", sd_cut >= 0.5 and wt_cut >= 0.3,
            f"SD {sd_no:.1f} -> {sd_fb:.1f} ({sd_cut:.0%} lower), WT {wt_no:.1f} -> {wt_fb:.1f} ({wt_cut:.0%} lower)")


# 5
def test_rl_local_learns(verdict):
    sc = case1()
    reward = preset("local", sc.ideal_headway())
    improved, first_params = 0, None
    for seed in range(10):
        res = run_training(sc, reward, TrainConfig(seed=seed))
        assert len(res.evol) == 70
        if mean(res.evol[-10:]) > mean(res.evol[:10]):
            improved += 1
        if first_params is None:
            first_params = res.params
    held_out = range(1000, 1005)
    rl = paired(sc, lambda: GreedyPolicy(first_params, sc), held_out)
    no = paired(sc, lambda: None, held_out)
    att_rl, att_no = mean([m.avg_travel_time for m in rl]), mean([m.avg_travel_time for m in no])
    verdict("RL-local learns", att_rl < att_no and improved >= 8,
            f"held-out ATT {att_rl:.1f} vs no-holding {att_no:.1f}; reward improved on {improved}/10 seeds")


# 6
def test_dqn_gradient_correctness(verdict):
    rng = np.random.default_rng(3)
    p = init_params([6, 8, 8, 2], rng, np.float64)
    batch = _batch(rng, 16)
    targets = td_targets(p, batch[2], batch[3], 0.95)
    _, g = td_loss_and_grad(p, *batch, 0.95, targets)
    h, worst = 1e-5, 0.0
    for arr, garr in zip(p.arrays(), g.arrays()):
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = _flat_loss(p, batch, targets)
            arr[idx] = old - h
            down = _flat_loss(p, batch, targets)
            arr[idx] = old
            num, ana = (up - down) / (2 * h), garr[idx]
            worst = max(worst, abs(num - ana) / max(abs(num), abs(ana), 1e-8))
    q = init_params([6, 400, 400, 400, 400, 2], np.random.default_rng(1), np.float32)
    new, _ = dqn_update(q, _batch(rng, 64), 0.95, 0.0)
    noop = new.equals(q)
    verdict("DQN gradient correctness", worst < 1e-4 and noop,
            f"max relative error {worst:.2e} over {sum(a.size for a in p.arrays())} parameters; "
            f"alpha=0 bitwise no-op: {noop}")


# 7
def test_appendix_b_oracle(verdict):
    prog = preset("appendix-b")
    rng = np.random.default_rng(7)
    worst = 0.0
    vectors = [([1650, 1650, 0, 0, 50, 0], 1, [1650, 1650, 0, 0, 50, 0]),
               ([1650, 1650, 0, 0, 50, 0], 0, [1650, 1650, 0, 0, 50, 5])]
    for _ in range(20):
        cur = [*rng.uniform(0, 4000, 4), float(rng.integers(0, 150)), float(5 * rng.integers(0, 19))]
        act = int(rng.integers(0, 2))
        nxt = [*(np.array(cur[:4]) + rng.normal(0, 60, 4)).clip(0), cur[4], cur[5] + 5 if act == 0 else 0.0]
        vectors.append((cur, act, nxt))
    for cur, act, nxt in vectors:
        want, got = appendix_b_oracle(cur, act, nxt), evaluate(prog, cur, act, nxt)
        worst = max(worst, abs(got - want) / max(abs(want), 1e-300) if want else abs(got))
    fixed = (evaluate(prog, *vectors[0]), evaluate(prog, *vectors[1]))
    verdict("Appendix-B reward oracle", worst <= 1e-9 and fixed == (0.0, -30.0),
            f"{len(vectors)} vectors, max relative error {worst:.1e}, reference values {fixed}")


# 8
def test_refiner_gate(verdict, tmp_path):
    table = {1.0: 1450.0, 2.0: 1400.0, 3.0: 1600.0, 4.0: 1420.0, 5.0: 1390.0}

    def run(out):
        orch = RewardOrchestrator(case1(), ReplayProvider.from_file(GATE_FIXTURE), StubEvaluator(table),
                                  EvolveConfig(iterations=3), out)
        orch.evolve()
        return load_records(out)

    recs = run(tmp_path / "a")
    run(tmp_path / "b")
    crit = RefinerCriterion()
    gate_ok = check_gate(recs, crit) == [] and all(
        r.metric <= 1.10 * p.metric for p, r in zip(recs, recs[1:]))
    rejected = [(r.iteration, a.metric) for r in recs for a in r.attempts if not a.accepted]
    violator_ok = rejected == [(2, 1600.0)] and 1600.0 not in [r.metric for r in recs]

    # two short real trainings behind the same replay machinery
    sc = tiny_scenario()
    ev = TrainTestEvaluator(sc, TrainConfig(episodes=3, updates_per_episode=20), 5)
    fixture = [{"template_id": "initializer", "ordinal": 0, "response_text": "return if(action == 1, 0.1, 0);"},
               {"template_id": "analyzer", "ordinal": 0, "response_text": "hold less"},
               {"template_id": "modifier", "ordinal": 0,
                "response_text": preset("local", sc.ideal_headway()).source},
               {"template_id": "analyzer", "ordinal": 1, "response_text": "fine"}]
    for name in ("c", "d"):
        RewardOrchestrator(sc, ReplayProvider(fixture), ev,
                           EvolveConfig(iterations=1, criterion=RefinerCriterion(slack=100)),
                           tmp_path / name).evolve()

    def same_bytes(x, y):
        files = [p.relative_to(tmp_path / x) for p in (tmp_path / x).rglob("*")
                 if p.is_file() and p.name != "manifest.json" and p.suffix != ".npz"]
        return bool(files) and all((tmp_path / x / f).read_bytes() == (tmp_path / y / f).read_bytes()
                                   for f in files)

    repro = same_bytes("a", "b") and same_bytes("c", "d")
    verdict("refiner gate", gate_ok and violator_ok and repro,
            f"accepted {[r.metric for r in recs]}, rejected {rejected}, byte-reproducible: {repro}")


# 9
def test_feedback_json_conformance(verdict):
    ok = True
    for n, kept in ((0, 0), (30, 30), (49, 49), (50, 50), (51, 50), (120, 50)):
        for lines, shared in ((1, False), (2, True)):
            doc = encode_feedback_json([0.5] * 3, steps(n), report(1300.0, lines, shared))
            validate_feedback(doc)
            hist = json.loads(doc)[1]["test_history"]
            ok &= all(len(v) == kept for v in hist.values()) and len(truncate_trajectory(steps(n))) == kept
    verdict("feedback JSON conformance", ok, "schema-valid at 0/30/49/50/51/120 steps, one and two lines")


# 10
def test_pso_oracle(verdict):
    sc = tiny_scenario(rate=240, duration=3000, n_stops=3, length=6000.0, fleet=2, interval=200.0)
    grab = _Grab(600)
    BusEnv(sc, 1, grab).run(until=601)
    snap = grab.snap
    slots = forecast_slots(snap, 1200)
    rob = PlanProblem(snap, slots, 1200, [11, 12, 13], mode=ROBUST, quantum=45)
    sto = PlanProblem(snap, slots, 1200, [11, 12, 13], mode=STOCHASTIC, quantum=45)
    _, best = brute_force(rob, [0, 45, 90])
    res = pso_optimize(rob, PSOConfig(swarm=20, iterations=25), np.random.default_rng(0))
    gap = res.fitness / best - 1 if best else 0.0
    rng = np.random.default_rng(5)
    order_ok = True
    for _ in range(30):
        x = rng.uniform(0, 90, len(slots))
        costs = rob.scenario_costs(rob.quantize(x))
        order_ok &= aggregate(costs, ROBUST) >= aggregate(costs, STOCHASTIC) and rob.fitness(x) >= sto.fitness(x)
    verdict("PSO oracle", gap <= 0.05 and order_ok,
            f"{len(slots)} slots, PSO {res.fitness:.1f} vs exhaustive {best:.1f} ({gap:+.1%}); "
            f"robust >= stochastic on 30 plans: {order_ok}")


# 11
def test_generic_scenarios(verdict):
    """Case-2 agent (RL-local preset, full training) moved unchanged onto generated systems."""
    base = case2_synthetic()
    agent = run_training(base, preset("local", base.ideal_headway()), TrainConfig(seed=0)).params
    seeds = (100, 101)
    rows, rl_ok, fb_ok = [], True, True
    for g in range(5):
        sc = gen_scenario(seed=g)
        wt = {name: mean([m.avg_waiting_time for m in paired(sc, make, seeds)])
              for name, make in (("none", lambda: None), ("feedback", FeedbackController),
                                 ("rl", lambda: GreedyPolicy(agent, sc)))}
        rl_ok &= wt["rl"] < wt["none"]
        fb_ok &= wt["feedback"] < wt["none"]
        rows.append(f"{wt['none']:.0f}/{wt['feedback']:.0f}/{wt['rl']:.0f}")
    verdict("generic-scenario sanity", rl_ok and fb_ok,
            f"WT none/feedback/rl per scenario: {', '.join(rows)}; feedback reduces: {fb_ok}, rl reduces: {rl_ok}")
