"""Command-line entry point.

    holdlab simulate     --scenario builtin:case1 --controller feedback --seed 1 --out runs/sim
    holdlab train        --scenario builtin:case1 --reward preset:local --episodes 70 --out runs/train
    holdlab evaluate     --scenario builtin:case1 --controller feedback --seeds 1..30 --out runs/eval
    holdlab gen-scenario --seed 7 --out runs/gen
    holdlab evolve       --scenario builtin:case1 --provider replay:fixture.json --iterations 3 --out runs/evo

Failures print a JSON object on stderr and exit with status 1; usage errors
exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from ..llm import EvolveConfig, LlmProviderConfig, RefinerCriterion, RewardOrchestrator, TrainTestEvaluator
from ..llm.providers import make_provider
from ..reward import load_reward_file, save_reward_file
from ..rl.agent import TrainConfig, run_test, run_training
from ..rl.checkpoint import save_params
from ..sim.env import BusEnv
from ..sim.metrics import compute_metrics
from .evaluate import evaluate_multi_seed, format_table, parse_seeds, write_summary
from .factory import CONTROLLER_SPECS, controller_factory, load_reward
from .manifest import RunManifest
from .scenarios import GenParams, gen_scenario, load_scenario

log = logging.getLogger("holdlab")


def _dump(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def cmd_simulate(args: argparse.Namespace) -> int:
    sc = load_scenario(args.scenario)
    out = Path(args.out)
    ctrl = controller_factory(args.controller, sc)()
    env = BusEnv(sc, args.seed, ctrl, record_events=args.events, check_invariants=args.check).run()
    report = compute_metrics(env)
    man = RunManifest("simulate", {"scenario": sc.to_dict(), "controller": args.controller}, [args.seed])
    _dump(out / "metrics.json", report.to_dict())
    man.add("metrics.json")
    if args.events:
        (out / "events.ndjson").write_text(env.event_log(), encoding="utf-8")
        man.add("events.ndjson")
    man.write(out)
    print(json.dumps(report.flat()))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    sc = load_scenario(args.scenario)
    out = Path(args.out)
    reward = load_reward(args.reward, sc)
    cfg = TrainConfig(seed=args.seed, episodes=args.episodes, updates_per_episode=args.updates,
                      learning_rate=args.lr, gamma=args.gamma)
    res = run_training(sc, reward, cfg, progress=lambda ep, r: log.info("episode %d reward %.4f", ep, r))
    out.mkdir(parents=True, exist_ok=True)
    save_params(res.params, out / "checkpoint.npz", episodes=cfg.episodes, seed=cfg.seed)
    save_reward_file(reward, out / "reward.reward")
    _dump(out / "evol.json", {"total_rewards": res.evol, "losses": res.losses, "transitions": res.n_transitions})
    test = run_test(res.params, sc, reward, args.test_seed)
    _dump(out / "test_metrics.json", test.metrics.to_dict())
    man = RunManifest("train", {"scenario": sc.to_dict(), "reward": args.reward, "train": cfg.to_dict(),
                                "test_seed": args.test_seed}, [args.seed, args.test_seed])
    man.add("checkpoint.npz", "reward.reward", "evol.json", "test_metrics.json")
    man.write(out)
    print(json.dumps({"episodes": len(res.evol), "test": test.metrics.flat()}))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    sc = load_scenario(args.scenario)
    out = Path(args.out)
    seeds = parse_seeds(args.seeds) if args.seeds else [args.seed]
    summary = evaluate_multi_seed(sc, args.controller, seeds, workers=args.workers)
    files = write_summary(summary, out)
    man = RunManifest("evaluate", {"scenario": sc.to_dict(), "controller": args.controller},
                      [r.seed for r in summary.rows])
    man.add(*files)
    if summary.failures:
        man.status = "partial"
    man.write(out)
    sys.stdout.write(format_table([summary]))
    return 0


def cmd_gen_scenario(args: argparse.Namespace) -> int:
    params = GenParams()
    if args.lines:
        params.n_lines = tuple(args.lines)
    if args.stops:
        params.n_stops = tuple(args.stops)
    if args.pax:
        params.pax_per_stop = tuple(args.pax)
    sc = gen_scenario(params, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sc.to_json(out / "scenario.json")
    man = RunManifest("gen-scenario", {"params": asdict(params)}, [args.seed])
    man.add("scenario.json")
    man.write(out)
    print(str(out / "scenario.json"))
    return 0


def _provider_config(args: argparse.Namespace) -> LlmProviderConfig:
    if args.provider.startswith("replay:"):
        return LlmProviderConfig(kind="replay", fixture=args.provider[len("replay:"):])
    if args.provider == "http":
        return LlmProviderConfig(kind="http", endpoint=args.endpoint, model=args.model,
                                 temperature=args.temperature, api_key_env=args.api_key_env)
    raise ValueError(f"provider must be 'http' or 'replay:<fixture.json>', got {args.provider!r}")


def cmd_evolve(args: argparse.Namespace) -> int:
    sc = load_scenario(args.scenario)
    out = Path(args.out)
    pcfg = _provider_config(args)
    provider = make_provider(pcfg)
    crit = RefinerCriterion(slack=args.criterion_slack, mode=args.criterion_mode)
    ecfg = EvolveConfig(iterations=args.iterations, criterion=crit, refine_cap=args.refine_cap)
    tcfg = TrainConfig(seed=args.seed, episodes=args.episodes, updates_per_episode=args.updates)
    evaluator = TrainTestEvaluator(sc, tcfg, args.test_seed)
    warm = load_reward_file(args.warm_start, origin="warm-start") if args.warm_start else None
    orch = RewardOrchestrator(sc, provider, evaluator, ecfg, out)
    records = orch.evolve(warm, progress=lambda r: log.info("iteration %d accepted, metric %.2f",
                                                             r.iteration, r.metric))
    print(json.dumps({"iterations": len(records), "metrics": [r.metric for r in records],
                      "syntax_errors": orch.syntax_errors, "provider": pcfg.kind}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default="builtin:case1", help="scenario file or builtin:NAME")
    common.add_argument("--seed", type=int, default=1)
    common.add_argument("--out", default="runs/latest", help="run directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="holdlab", description="Bus holding control experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run one episode")
    s.add_argument("--controller", default="none", help=f"one of {', '.join(CONTROLLER_SPECS)}")
    s.add_argument("--events", action="store_true", help="write the event log")
    s.add_argument("--check", action="store_true", help="check invariants every tick")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("train", parents=[common], help="train a DQN holding policy")
    t.add_argument("--reward", default="preset:local", help="preset:NAME or reward file")
    t.add_argument("--episodes", type=int, default=70)
    t.add_argument("--updates", type=int, default=200, help="gradient updates per episode")
    t.add_argument("--lr", type=float, default=0.001)
    t.add_argument("--gamma", type=float, default=0.95)
    t.add_argument("--test-seed", type=int, default=70)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", parents=[common], help="evaluate a controller over many seeds")
    e.add_argument("--controller", default="none", help=f"one of {', '.join(CONTROLLER_SPECS)}")
    e.add_argument("--seeds", default=None, help="e.g. 1..30 or 1,2,5")
    e.add_argument("--workers", type=int, default=1)
    e.set_defaults(func=cmd_evaluate)

    g = sub.add_parser("gen-scenario", parents=[common], help="generate a random multi-line scenario")
    g.add_argument("--lines", type=int, nargs=2, metavar=("MIN", "MAX"))
    g.add_argument("--stops", type=int, nargs=2, metavar=("MIN", "MAX"))
    g.add_argument("--pax", type=float, nargs=2, metavar=("MIN", "MAX"), help="passengers per stop over the run")
    g.set_defaults(func=cmd_gen_scenario)

    v = sub.add_parser("evolve", parents=[common], help="iterate reward programs with a language model")
    v.add_argument("--iterations", type=int, default=10)
    v.add_argument("--provider", default="http", help="http or replay:<fixture.json>")
    v.add_argument("--endpoint", default=LlmProviderConfig.endpoint)
    v.add_argument("--model", default=LlmProviderConfig.model)
    v.add_argument("--temperature", type=float, default=0.3)
    v.add_argument("--api-key-env", default="LLM_API_KEY")
    v.add_argument("--criterion-slack", type=float, default=1.10)
    v.add_argument("--criterion-mode", choices=["multiplicative", "additive"], default="multiplicative")
    v.add_argument("--refine-cap", type=int, default=8)
    v.add_argument("--warm-start", default=None, help="reward file used instead of the initializer")
    v.add_argument("--episodes", type=int, default=70)
    v.add_argument("--updates", type=int, default=200)
    v.add_argument("--test-seed", type=int, default=70)
    v.set_defaults(func=cmd_evolve)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as e:
        err = {"error": type(e).__name__, "message": str(e), "command": args.command}
        try:
            out = Path(args.out)
            if (out / "manifest.json").exists() and args.command == "evolve":
                raise FileExistsError  # the orchestrator already wrote a failure manifest
            man = RunManifest(args.command, {"argv": list(sys.argv[1:] if argv is None else argv)}, [args.seed],
                              status="failed", error=err)
            man.write(out)
        except Exception:  # the manifest is best effort on failure
            pass
        print(json.dumps(err), file=sys.stderr)
        log.debug("command failed", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
