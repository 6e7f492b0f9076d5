"""Tree-walking evaluator. Pure float arithmetic, no I/O, no mutable state."""

from __future__ import annotations

import math

from .ast import Action, Binary, Call, EvalError, ListExpr, Num, Program, RewardProgram, StateRef, Unary, Var


def _finite(x: float, what: str) -> float:
    if isinstance(x, complex):
        raise EvalError(f"{what} produced a complex number")
    if not math.isfinite(x):
        raise EvalError(f"{what} produced a non-finite value")
    return x


def _truth(x: float) -> bool:
    return x != 0.0


def _pop_std(xs: list[float]) -> float:
    m = math.fsum(xs) / len(xs)
    return math.sqrt(math.fsum((x - m) ** 2 for x in xs) / len(xs))


class _Frame:
    __slots__ = ("cur", "nxt", "action", "vars")

    def __init__(self, cur, action, nxt) -> None:
        self.cur = cur
        self.nxt = nxt
        self.action = action
        self.vars: dict[str, float] = {}


def _ev(node, f: _Frame) -> float:
    t = type(node)
    if t is Num:
        return node.value
    if t is StateRef:
        return (f.cur if node.which == "cur" else f.nxt)[node.index]
    if t is Var:
        return f.vars[node.name]
    if t is Action:
        return f.action
    if t is Unary:
        if node.op == "-":
            return -_ev(node.operand, f)
        return 0.0 if _truth(_ev(node.operand, f)) else 1.0
    if t is Binary:
        return _binary(node, f)
    if t is Call:
        return _call(node, f)
    if t is ListExpr:
        raise EvalError("list used outside a list function")
    raise EvalError(f"unknown node {t.__name__}")


def _binary(node: Binary, f: _Frame) -> float:
    op = node.op
    if op == "and":
        return 1.0 if _truth(_ev(node.left, f)) and _truth(_ev(node.right, f)) else 0.0
    if op == "or":
        return 1.0 if _truth(_ev(node.left, f)) or _truth(_ev(node.right, f)) else 0.0
    a = _ev(node.left, f)
    b = _ev(node.right, f)
    if op == "+":
        return _finite(a + b, "addition")
    if op == "-":
        return _finite(a - b, "subtraction")
    if op == "*":
        return _finite(a * b, "multiplication")
    if op == "/":
        if b == 0.0:
            raise EvalError("division by zero")
        return _finite(a / b, "division")
    if op == "**":
        try:
            r = a ** b
        except ZeroDivisionError:
            raise EvalError("zero raised to a negative power") from None
        except OverflowError:
            raise EvalError("power overflow") from None
        return _finite(r, "power")
    if op == "<":
        return 1.0 if a < b else 0.0
    if op == "<=":
        return 1.0 if a <= b else 0.0
    if op == ">":
        return 1.0 if a > b else 0.0
    if op == ">=":
        return 1.0 if a >= b else 0.0
    if op == "==":
        return 1.0 if a == b else 0.0
    if op == "!=":
        return 1.0 if a != b else 0.0
    raise EvalError(f"unknown operator {op}")


def _values(args, f: _Frame) -> list[float]:
    if len(args) == 1 and isinstance(args[0], ListExpr):
        return [_ev(x, f) for x in args[0].items]
    return [_ev(x, f) for x in args]


def _call(node: Call, f: _Frame) -> float:
    name = node.name
    if name == "if":
        cond, yes, no = node.args
        return _ev(yes, f) if _truth(_ev(cond, f)) else _ev(no, f)
    xs = _values(node.args, f)
    if name == "abs":
        return abs(xs[0])
    if name == "sqrt":
        if xs[0] < 0:
            raise EvalError("sqrt of a negative number")
        return math.sqrt(xs[0])
    if name == "min":
        return min(xs)
    if name == "max":
        return max(xs)
    if name == "clamp":
        x, lo, hi = xs
        if lo > hi:
            raise EvalError("clamp bounds are reversed")
        return min(max(x, lo), hi)
    if name == "mean":
        return _finite(math.fsum(xs) / len(xs), "mean")
    if name == "std":
        return _finite(_pop_std(xs), "std")
    raise EvalError(f"unknown function {name}")


def evaluate_ast(program: Program, cur, action: int, nxt) -> float:
    cur_f = [float(x) for x in cur]
    nxt_f = [float(x) for x in nxt]
    if len(cur_f) != 6 or len(nxt_f) != 6:
        raise EvalError("state vectors must have 6 entries")
    if not all(math.isfinite(x) for x in cur_f + nxt_f):
        raise EvalError("non-finite state input")
    frame = _Frame(cur_f, float(action), nxt_f)
    try:
        for let in program.lets:
            frame.vars[let.name] = _ev(let.expr, frame)
        out = _ev(program.ret, frame)
    except EvalError as e:
        e.inputs = {"current_state": cur_f, "action": int(action), "next_state": nxt_f}
        raise
    except RecursionError:
        raise EvalError("expression nested too deeply") from None
    return _finite(float(out), "reward")


def evaluate(program: RewardProgram | Program, cur, action: int, nxt) -> float:
    ast = program.ast if isinstance(program, RewardProgram) else program
    return evaluate_ast(ast, cur, action, nxt)
