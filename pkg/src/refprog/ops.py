"""Operator vocabulary and typed program syntax.

A program is a flat sequence of assignments, one per line::

    BOXES0 = FIND(object_name='elephant')
    FINAL_RESULT = RESULT(object=BOXES0)

This module is the single source of truth for the operator set and for each
operator's argument schema; the parser, validator, and interpreter all
consult it.  Values are immutable and freely shareable across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Optional, Tuple, Union

IDENTIFIER_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

#: Reserved target variable of the mandatory final statement.
FINAL_TARGET = "FINAL_RESULT"

DIRECTION_CRITERIA = frozenset({"left", "right", "top", "bottom"})
DEPTH_CRITERIA = frozenset({"front", "behind"})
SIZE_CRITERIA = frozenset({"big", "small"})


class OperatorKind(str, Enum):
    FIND = "FIND"
    LOCATE = "LOCATE"
    ORDER = "ORDER"
    ABSOLUTE_DEPTH = "ABSOLUTE_DEPTH"
    SIZE = "SIZE"
    PROPERTY = "PROPERTY"
    FIND_DIRECTION = "FIND_DIRECTION"
    FIND_NEAR = "FIND_NEAR"
    FIND_INSIDE = "FIND_INSIDE"
    RELATIVE_DEPTH = "RELATIVE_DEPTH"
    RESULT = "RESULT"


class ArgKind(Enum):
    VARIABLE = "variable"
    STRING = "string"
    POSITIVE_INT = "positive integer"
    CRITERIA = "criteria"


@dataclass(frozen=True)
class ArgSpec:
    kind: ArgKind
    choices: Optional[frozenset[str]] = None  # closed vocabulary for CRITERIA slots

    def describe(self) -> str:
        if self.kind is ArgKind.CRITERIA and self.choices:
            return "one of " + "/".join(sorted(self.choices))
        return self.kind.value


_SCHEMAS: dict[OperatorKind, dict[str, ArgSpec]] = {
    OperatorKind.FIND: {"object_name": ArgSpec(ArgKind.STRING)},
    OperatorKind.LOCATE: {
        "object": ArgSpec(ArgKind.VARIABLE),
        "position": ArgSpec(ArgKind.STRING),
    },
    OperatorKind.ORDER: {
        "object": ArgSpec(ArgKind.VARIABLE),
        "criteria": ArgSpec(ArgKind.CRITERIA, DIRECTION_CRITERIA),
        "rank": ArgSpec(ArgKind.POSITIVE_INT),
    },
    OperatorKind.ABSOLUTE_DEPTH: {
        "object": ArgSpec(ArgKind.VARIABLE),
        "criteria": ArgSpec(ArgKind.CRITERIA, DEPTH_CRITERIA),
    },
    OperatorKind.SIZE: {
        "object": ArgSpec(ArgKind.VARIABLE),
        "criteria": ArgSpec(ArgKind.CRITERIA, SIZE_CRITERIA),
    },
    OperatorKind.PROPERTY: {
        "object": ArgSpec(ArgKind.VARIABLE),
        "attribute": ArgSpec(ArgKind.STRING),
    },
    OperatorKind.FIND_DIRECTION: {
        "object": ArgSpec(ArgKind.VARIABLE),
        "reference_object": ArgSpec(ArgKind.VARIABLE),
        "criteria": ArgSpec(ArgKind.CRITERIA, DIRECTION_CRITERIA),
    },
    OperatorKind.FIND_NEAR: {
        "object": ArgSpec(ArgKind.VARIABLE),
        "reference_object": ArgSpec(ArgKind.VARIABLE),
    },
    OperatorKind.FIND_INSIDE: {
        "object": ArgSpec(ArgKind.VARIABLE),
        "reference_object": ArgSpec(ArgKind.VARIABLE),
    },
    OperatorKind.RELATIVE_DEPTH: {
        "object": ArgSpec(ArgKind.VARIABLE),
        "reference_object": ArgSpec(ArgKind.VARIABLE),
        "criteria": ArgSpec(ArgKind.CRITERIA, DEPTH_CRITERIA),
    },
    OperatorKind.RESULT: {"object": ArgSpec(ArgKind.VARIABLE)},
}

#: Every argument name used by any operator (for distinguishing a misplaced
#: argument from a completely unknown one in diagnostics).
ALL_ARG_NAMES: frozenset[str] = frozenset(
    name for schema in _SCHEMAS.values() for name in schema
)


def schema_of(kind: OperatorKind) -> Mapping[str, ArgSpec]:
    """Return the closed argument schema of ``kind`` (total over all kinds)."""
    return _SCHEMAS[kind]


# --- argument values ---------------------------------------------------------


@dataclass(frozen=True)
class VariableRef:
    name: str


@dataclass(frozen=True)
class StringLiteral:
    text: str


@dataclass(frozen=True)
class Number:
    value: int


@dataclass(frozen=True)
class Criteria:
    """A token from one of the closed criteria vocabularies, lowercase."""

    token: str


ArgValue = Union[VariableRef, StringLiteral, Number, Criteria]

_ESCAPES = {"\\": "\\\\", "'": "\\'"}


def format_arg_value(value: ArgValue) -> str:
    if isinstance(value, VariableRef):
        return value.name
    if isinstance(value, Number):
        return str(value.value)
    if isinstance(value, Criteria):
        return "'" + value.token + "'"
    escaped = "".join(_ESCAPES.get(ch, ch) for ch in value.text)
    return "'" + escaped + "'"


# --- statements and programs -------------------------------------------------


@dataclass(frozen=True)
class Statement:
    """One line ``target_var = op(args...)``.

    ``args`` is kept canonicalized: schema arguments first, in schema order,
    then any unknown names in their given order.  ``positional`` holds
    arguments that were supplied without a name; a well-formed statement has
    none (the validator rejects them).
    """

    target_var: str
    op: OperatorKind
    args: Tuple[Tuple[str, ArgValue], ...]
    positional: Tuple[ArgValue, ...] = ()
    source_line: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        schema = _SCHEMAS[self.op]
        given = dict(self.args)
        if len(given) != len(self.args):
            raise ValueError("duplicate argument names in statement")
        ordered = [(n, given[n]) for n in schema if n in given]
        ordered += [(n, v) for n, v in self.args if n not in schema]
        object.__setattr__(self, "args", tuple(ordered))

    def arg(self, name: str) -> Optional[ArgValue]:
        for n, v in self.args:
            if n == name:
                return v
        return None

    def variable_refs(self) -> Iterator[str]:
        for _, v in self.args:
            if isinstance(v, VariableRef):
                yield v.name
        for v in self.positional:
            if isinstance(v, VariableRef):
                yield v.name

    def render(self) -> str:
        parts = [format_arg_value(v) for v in self.positional]
        parts += [f"{n}={format_arg_value(v)}" for n, v in self.args]
        return f"{self.target_var} = {self.op.value}({', '.join(parts)})"


@dataclass(frozen=True)
class Program:
    statements: Tuple[Statement, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.statements)

    def __iter__(self) -> Iterator[Statement]:
        return iter(self.statements)

    @property
    def final(self) -> Statement:
        return self.statements[-1]


def is_identifier(text: str) -> bool:
    return bool(IDENTIFIER_RE.match(text))
