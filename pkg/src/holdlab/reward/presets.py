"""Built-in reward programs."""

from __future__ import annotations

from .ast import RewardProgram
from .parser import parse
from .printer import format_number

DEFAULT_IDEAL_HEADWAY = 1650.0

_LOCAL_BODY = """let same_line = abs(cur[0] - cur[1]) - abs(nxt[0] - nxt[1]);
let other_line = abs(cur[2] - cur[3]) - abs(nxt[2] - nxt[3]);
"""

APPENDIX_B = """# multi-objective reward: headway deviation, holding cost, spread reduction, waiting cost
let ideal_headway = 1650;
let headway_penalty_same_line = abs(nxt[0] - ideal_headway) + abs(nxt[1] - ideal_headway);
let headway_penalty_diff_line = if(nxt[2] > 0 or nxt[3] > 0, abs(nxt[2] - ideal_headway) + abs(nxt[3] - ideal_headway), 0);
let holding_penalty = if(action == 0, (nxt[5] - cur[5]) ** 2, 0);
let current_std_dev = std([cur[0], cur[1], cur[2], cur[3]]);
let next_std_dev = std([nxt[0], nxt[1], nxt[2], nxt[3]]);
let std_dev_reduction_reward = if(next_std_dev < current_std_dev, (current_std_dev - next_std_dev) * 10, 0);
let waiting_time_penalty = nxt[5] * (cur[4] / 50);
let dynamic_penalty = if(nxt[5] > 60, 1.5 * holding_penalty, holding_penalty);
return 0 - (headway_penalty_same_line + headway_penalty_diff_line + dynamic_penalty + waiting_time_penalty) + std_dev_reduction_reward;
"""


def local_source(ideal_headway: float = DEFAULT_IDEAL_HEADWAY) -> str:
    return ("# local: reward shrinking the imbalance between forward and backward spacing\n"
            f"let ideal_headway = {format_number(ideal_headway)};\n" + _LOCAL_BODY +
            "return (same_line + other_line) / ideal_headway;\n")


def local_global_source(ideal_headway: float = DEFAULT_IDEAL_HEADWAY) -> str:
    return ("# local plus a small cost for each hold step\n"
            f"let ideal_headway = {format_number(ideal_headway)};\n" + _LOCAL_BODY +
            "let hold_cost = if(action == 0, 0.1, 0);\n"
            "return (same_line + other_line) / ideal_headway - hold_cost;\n")


GLOBAL_SOURCE = "# global: sparse; the trainer adds -(total travel time)/1e4 at episode end\nreturn 0;\n"

PRESET_NAMES = ("local", "global", "local+global", "appendix-b")


def preset(name: str, ideal_headway: float = DEFAULT_IDEAL_HEADWAY) -> RewardProgram:
    if name == "local":
        prog = parse(local_source(ideal_headway), name=name)
    elif name == "local+global":
        prog = parse(local_global_source(ideal_headway), name=name)
    elif name == "global":
        prog = parse(GLOBAL_SOURCE, name=name)
        prog.terminal_travel_penalty = True
    elif name == "appendix-b":
        prog = parse(APPENDIX_B, name=name)
    else:
        raise KeyError(f"unknown reward preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    prog.origin = "preset"
    return prog
