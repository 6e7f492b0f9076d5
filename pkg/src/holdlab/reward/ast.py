from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class StateRef:
    which: str  # "cur" or "nxt"
    index: int


@dataclass(frozen=True)
class Action:
    pass


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "not"
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class ListExpr:
    items: tuple["Expr", ...]


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]


Expr = Union[Num, StateRef, Action, Var, Unary, Binary, ListExpr, Call]


@dataclass(frozen=True)
class Let:
    name: str
    expr: Expr


@dataclass(frozen=True)
class Program:
    lets: tuple[Let, ...]
    ret: Expr


COMPARISONS = ("<", "<=", ">", ">=", "==", "!=")
ARITH = ("+", "-", "*", "/", "**")
LOGIC = ("and", "or")

# function name -> (min args, max args or None for variadic)
FUNCTIONS = {
    "abs": (1, 1),
    "sqrt": (1, 1),
    "min": (1, None),
    "max": (1, None),
    "clamp": (3, 3),
    "mean": (1, 1),
    "std": (1, 1),
    "if": (3, 3),
}
LIST_FUNCTIONS = ("mean", "std")
STATE_DIM = 6


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0) -> None:
        super().__init__(f"{message} (line {line}, column {col})")
        self.message = message
        self.line = line
        self.col = col

    def to_dict(self) -> dict:
        return {"error": "ParseError", "message": self.message, "line": self.line, "column": self.col}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class EvalError(ArithmeticError):
    def __init__(self, message: str, inputs: dict | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.inputs = inputs or {}

    def to_dict(self) -> dict:
        return {"error": "EvalError", "message": self.message, "inputs": self.inputs}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class RewardProgram:
    """Parsed reward program plus provenance."""

    source: str
    ast: Program
    origin: str = "preset"
    iteration: int | None = None
    comments: list[str] = field(default_factory=list)
    name: str = ""
    # the trainer adds a terminal total-travel-time penalty for this program
    terminal_travel_penalty: bool = False

    def evaluate(self, cur, action: int, nxt) -> float:
        from .evaluator import evaluate
        return evaluate(self, cur, action, nxt)

    def pretty(self) -> str:
        from .printer import pretty_print
        return pretty_print(self)

    def structurally_equal(self, other: "RewardProgram") -> bool:
        return self.ast == other.ast
