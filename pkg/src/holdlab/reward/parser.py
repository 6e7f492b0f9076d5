"""Tokenizer and precedence-climbing parser for reward programs.

    program := ("let" IDENT "=" expr ";")* "return" expr ";"

Binding strength, loosest first: or, and, not, comparisons, + -, * /,
unary minus, ** (right associative). Comparisons do not chain.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (COMPARISONS, FUNCTIONS, LIST_FUNCTIONS, STATE_DIM, Action, Binary, Call, Expr, Let, ListExpr,
                  Num, ParseError, Program, RewardProgram, StateRef, Unary, Var)

KEYWORDS = {"let", "return", "and", "or", "not"}
RESERVED = KEYWORDS | {"cur", "nxt", "action"} | set(FUNCTIONS)

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>\d+(?:\.\d+)?(?![\w.]))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\*\*|<=|>=|==|!=|[-+*/<>=(),;\[\]])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str  # num, ident, op, kw, eof
    text: str
    line: int
    col: int


def tokenize(source: str) -> tuple[list[Token], list[str]]:
    tokens: list[Token] = []
    comments: list[str] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "comment":
            comments.append(text[1:].strip())
        elif kind == "num":
            tokens.append(Token("num", text, line, col))
        elif kind == "ident":
            tokens.append(Token("kw" if text in KEYWORDS else "ident", text, line, col))
        elif kind == "op":
            tokens.append(Token("op", text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens, comments


# binary precedence; unary minus sits at 7, "not" at 3
_BINARY = {"or": 1, "and": 2, **{c: 4 for c in COMPARISONS}, "+": 5, "-": 5, "*": 6, "/": 6, "**": 8}
UNARY_MINUS = 7
NOT = 3


class Parser:
    def __init__(self, source: str) -> None:
        self.tokens, self.comments = tokenize(source)
        self.i = 0
        self.names: set[str] = set()
        # ids of nodes that were written inside parentheses
        self._grouped: set[int] = set()

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        t = tok or self.tok
        return ParseError(msg, t.line, t.col)

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            got = t.text or "end of input"
            raise self.error(f"expected {want!r}, found {got!r}")
        return self.advance()

    def at(self, kind: str, text: str | None = None) -> bool:
        return self.tok.kind == kind and (text is None or self.tok.text == text)

    def program(self) -> Program:
        lets = []
        while self.at("kw", "let"):
            self.advance()
            name_tok = self.expect("ident")
            name = name_tok.text
            if name in RESERVED:
                raise self.error(f"{name!r} is reserved", name_tok)
            if name in self.names:
                raise self.error(f"{name!r} is already defined", name_tok)
            self.expect("op", "=")
            expr = self.expr(0)
            self.expect("op", ";")
            self.names.add(name)
            lets.append(Let(name, expr))
        if not self.at("kw", "return"):
            raise self.error("expected 'let' or 'return'")
        self.advance()
        ret = self.expr(0)
        self.expect("op", ";")
        if not self.at("eof"):
            raise self.error(f"unexpected {self.tok.text!r} after return statement")
        return Program(tuple(lets), ret)

    def expr(self, min_prec: int) -> Expr:
        left = self.prefix()
        while True:
            t = self.tok
            op = t.text if t.kind in ("op", "kw") else None
            prec = _BINARY.get(op) if op else None
            if prec is None or prec < min_prec:
                return left
            self.advance()
            # ** is right associative, everything else left associative
            right = self.expr(prec if op == "**" else prec + 1)
            if op in COMPARISONS and any(isinstance(x, Binary) and x.op in COMPARISONS and id(x) not in self._grouped
                                         for x in (left, right)):
                raise self.error("comparisons cannot be chained", t)
            left = Binary(op, left, right)

    def prefix(self) -> Expr:
        t = self.tok
        if t.kind == "op" and t.text == "-":
            self.advance()
            return Unary("-", self.expr(UNARY_MINUS))
        if t.kind == "op" and t.text == "+":
            raise self.error("unary '+' is not supported")
        if t.kind == "kw" and t.text == "not":
            self.advance()
            return Unary("not", self.expr(NOT))
        return self.atom()

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text))
        if t.kind == "op" and t.text == "(":
            self.advance()
            e = self.expr(0)
            self.expect("op", ")")
            self._grouped.add(id(e))
            return e
        if t.kind == "op" and t.text == "[":
            raise self.error("lists are only allowed as the argument of mean, std, min or max")
        if t.kind == "ident":
            self.advance()
            name = t.text
            if name in ("cur", "nxt"):
                self.expect("op", "[")
                idx_tok = self.tok
                if idx_tok.kind != "num" or "." in idx_tok.text:
                    raise self.error(f"{name} index must be an integer literal", idx_tok)
                idx = int(idx_tok.text)
                if not 0 <= idx < STATE_DIM:
                    raise self.error(f"{name} index {idx} out of range 0..{STATE_DIM - 1}", idx_tok)
                self.advance()
                self.expect("op", "]")
                return StateRef(name, idx)
            if name == "action":
                return Action()
            if name in FUNCTIONS:
                return self.call(t)
            if name in self.names:
                return Var(name)
            raise self.error(f"unknown identifier {name!r}", t)
        got = t.text or "end of input"
        raise self.error(f"unexpected {got!r}")

    def call(self, name_tok: Token) -> Expr:
        name = name_tok.text
        self.expect("op", "(")
        args: list[Expr] = []
        if not self.at("op", ")"):
            while True:
                if self.at("op", "[") and name in LIST_FUNCTIONS + ("min", "max"):
                    args.append(self.list_literal())
                else:
                    args.append(self.expr(0))
                if self.at("op", ","):
                    self.advance()
                    continue
                break
        self.expect("op", ")")
        lo, hi = FUNCTIONS[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            want = str(lo) if lo == hi else f"at least {lo}"
            raise self.error(f"{name}() takes {want} argument(s), got {len(args)}", name_tok)
        if name in LIST_FUNCTIONS and not isinstance(args[0], ListExpr):
            raise self.error(f"{name}() expects a bracketed list like {name}([a, b])", name_tok)
        if name in ("min", "max") and any(isinstance(a, ListExpr) for a in args) and len(args) != 1:
            raise self.error(f"{name}() takes either one list or several values", name_tok)
        return Call(name, tuple(args))

    def list_literal(self) -> ListExpr:
        start = self.expect("op", "[")
        items: list[Expr] = []
        if self.at("op", "]"):
            raise self.error("empty list", start)
        while True:
            items.append(self.expr(0))
            if self.at("op", ","):
                self.advance()
                continue
            break
        self.expect("op", "]")
        return ListExpr(tuple(items))


def parse_program(source: str) -> tuple[Program, list[str]]:
    p = Parser(source)
    return p.program(), p.comments


def parse(source: str, origin: str = "preset", iteration: int | None = None, name: str = "") -> RewardProgram:
    ast, comments = parse_program(source)
    return RewardProgram(source=source, ast=ast, origin=origin, iteration=iteration, comments=comments, name=name)
