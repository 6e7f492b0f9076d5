"""Canonical formatting of reward programs with minimal parentheses."""

from __future__ import annotations

import numpy as np

from .ast import COMPARISONS, Action, Binary, Call, ListExpr, Num, Program, RewardProgram, StateRef, Unary, Var

_PREC = {"or": 1, "and": 2, **{c: 4 for c in COMPARISONS}, "+": 5, "-": 5, "*": 6, "/": 6, "**": 8}
_ATOM = 9


def format_number(x: float) -> str:
    return np.format_float_positional(float(x), trim="-")


def _prec(node) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary):
        return 7 if node.op == "-" else 3
    return _ATOM


def expr_to_str(node) -> str:
    if isinstance(node, Num):
        return format_number(node.value)
    if isinstance(node, StateRef):
        return f"{node.which}[{node.index}]"
    if isinstance(node, Action):
        return "action"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, ListExpr):
        return "[" + ", ".join(expr_to_str(x) for x in node.items) + "]"
    if isinstance(node, Call):
        return f"{node.name}(" + ", ".join(expr_to_str(a) for a in node.args) + ")"
    if isinstance(node, Unary):
        inner = expr_to_str(node.operand)
        if _prec(node.operand) < _prec(node):
            inner = f"({inner})"
        return f"-{inner}" if node.op == "-" else f"not {inner}"
    if isinstance(node, Binary):
        p = _PREC[node.op]
        left, right = expr_to_str(node.left), expr_to_str(node.right)
        lp, rp = _prec(node.left), _prec(node.right)
        if node.op == "**":
            # right associative; a unary minus on the left must be wrapped
            wrap_l = lp <= p
            wrap_r = rp < p and not (isinstance(node.right, Unary) and node.right.op == "-")
        else:
            wrap_l = lp < p
            wrap_r = rp <= p
        if node.op in COMPARISONS:
            wrap_l = wrap_l or lp == p
        if wrap_l:
            left = f"({left})"
        if wrap_r:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"cannot print {type(node).__name__}")


def program_to_str(program: Program, comments: list[str] | None = None) -> str:
    lines = [f"# {c}".rstrip() for c in (comments or [])]
    lines += [f"let {let.name} = {expr_to_str(let.expr)};" for let in program.lets]
    lines.append(f"return {expr_to_str(program.ret)};")
    return "\n".join(lines) + "\n"


def pretty_print(program: RewardProgram | Program) -> str:
    if isinstance(program, RewardProgram):
        return program_to_str(program.ast, program.comments)
    return program_to_str(program)
