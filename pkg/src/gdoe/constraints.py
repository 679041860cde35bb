"""A small boolean language for forbidding trials.

Grammar: expr := clause ("and" clause)* ; clause := operand op operand.
Operands are factor names, numeric literals, or quoted strings; operators
are >, >=, <, <=, ==, !=. Only conjunction is supported. Comparisons run
on raw levels so expressions read the way the experimenter wrote them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ConstraintParseError, ValidationError

OPERATORS = (">=", "<=", "==", "!=", ">", "<")
ORDERING_OPERATORS = (">", ">=", "<", "<=")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<op>>=|<=|==|!=|>|<)
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<string>'[^']*'|"[^"]*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Operand:
    """Either a factor reference or a literal (numeric or string)."""

    kind: str  # "factor" | "number" | "string"
    value: object

    def render(self) -> str:
        if self.kind == "factor":
            return str(self.value)
        if self.kind == "number":
            v = self.value
            return str(int(v)) if float(v).is_integer() else repr(float(v))
        return f'"{self.value}"'


@dataclass(frozen=True)
class Clause:
    lhs: Operand
    op: str
    rhs: Operand

    def render(self) -> str:
        return f"{self.lhs.render()} {self.op} {self.rhs.render()}"


@dataclass(frozen=True)
class ConstraintExpr:
    source: str
    clauses: tuple

    def render(self) -> str:
        return " and ".join(c.render() for c in self.clauses)

    def factor_names(self) -> set:
        names = set()
        for c in self.clauses:
            for operand in (c.lhs, c.rhs):
                if operand.kind == "factor":
                    names.add(operand.value)
        return names


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ConstraintParseError(
                f"syntax error at offset {pos}: unexpected {text[pos]!r}", offset=pos
            )
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    return tokens


def parse_constraint(text: str, factors) -> ConstraintExpr:
    """Parse one constraint against the declared factor specs."""
    by_name = {f.name: f for f in factors}
    tokens = _tokenize(text)
    if not tokens:
        raise ConstraintParseError("empty constraint", offset=0)

    idx = 0

    def peek():
        return tokens[idx] if idx < len(tokens) else (None, "", len(text))

    def take(expected_kind: str, what: str):
        nonlocal idx
        kind, value, pos = peek()
        if kind != expected_kind:
            raise ConstraintParseError(
                f"syntax error at offset {pos}: expected {what}", offset=pos
            )
        idx += 1
        return value, pos

    def operand() -> Operand:
        nonlocal idx
        kind, value, pos = peek()
        if kind == "number":
            idx += 1
            return Operand("number", float(value))
        if kind == "string":
            idx += 1
            return Operand("string", value[1:-1])
        if kind == "name":
            idx += 1
            if value not in by_name:
                raise ConstraintParseError(
                    f"unknown factor {value!r} at offset {pos}", offset=pos
                )
            return Operand("factor", value)
        raise ConstraintParseError(
            f"syntax error at offset {pos}: expected an operand", offset=pos
        )

    def clause() -> Clause:
        lhs = operand()
        op, op_pos = take("op", "a comparison operator")
        rhs = operand()
        if lhs.kind != "factor" and rhs.kind != "factor":
            raise ConstraintParseError(
                f"comparison of two literals at offset {op_pos}", offset=op_pos
            )
        if op in ORDERING_OPERATORS:
            for side in (lhs, rhs):
                if side.kind == "string":
                    raise ConstraintParseError(
                        f"ordering operator {op!r} applied to a string literal", offset=op_pos
                    )
                if side.kind == "factor" and not by_name[side.value].is_numeric:
                    raise ConstraintParseError(
                        f"ordering operator {op!r} applied to categorical factor {side.value!r}",
                        offset=op_pos,
                    )
        return Clause(lhs, op, rhs)

    clauses = [clause()]
    while idx < len(tokens):
        kind, value, pos = peek()
        if kind == "name" and value.lower() == "and":
            idx += 1
            clauses.append(clause())
        else:
            raise ConstraintParseError(
                f"syntax error at offset {pos}: expected 'and'", offset=pos
            )
    return ConstraintExpr(source=text, clauses=tuple(clauses))


_COMPARE = {
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def _resolve(operand: Operand, trial: dict):
    if operand.kind != "factor":
        return operand.value
    if operand.value not in trial:
        raise ValidationError(f"trial has no value for factor {operand.value!r}")
    return trial[operand.value]


def evaluate(expr: ConstraintExpr, trial: dict) -> bool:
    """True iff every clause holds on the trial's raw levels."""
    for c in expr.clauses:
        a = _resolve(c.lhs, trial)
        b = _resolve(c.rhs, trial)
        if not _COMPARE[c.op](a, b):
            return False
    return True
