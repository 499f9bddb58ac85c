"""Program text parser and canonical serializer.

The grammar is one statement per physical line::

    statement  :=  IDENT '=' OPNAME '(' [arg {',' arg}] ')'
    arg        :=  [IDENT '='] value
    value      :=  IDENT | INTEGER | STRING

String literals take single or double quotes; the only escapes are ``\\'``,
``\\"`` and ``\\\\``.  Blank lines are skipped, and (unless ``strict``) so are
lines whose first non-blank character is ``#``.  Parsing is purely syntactic:
variable tracking, argument schemas, and the final-line form are the
validator's job.  The one normalization applied here is schema-aware: a
string or bare token in a criteria slot whose lowercase form belongs to the
slot's closed vocabulary becomes a :class:`~refprog.ops.Criteria` value, so
that serialize -> parse is the identity on well-formed statements.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

from .ops import (
    ArgKind,
    ArgValue,
    Criteria,
    Number,
    OperatorKind,
    Program,
    Statement,
    StringLiteral,
    VariableRef,
    schema_of,
)


class ParseErrorKind(Enum):
    MALFORMED_ASSIGNMENT = "MalformedAssignment"
    UNKNOWN_OPERATOR = "UnknownOperator"
    BAD_ARGUMENT_SYNTAX = "BadArgumentSyntax"
    EMPTY_PROGRAM = "EmptyProgram"


@dataclass(frozen=True)
class ParseError:
    line: int
    column: int
    kind: ParseErrorKind
    message: str

    def __str__(self) -> str:
        return f"line {self.line}, column {self.column}: {self.kind.value}: {self.message}"


class ProgramSyntaxError(Exception):
    """Raised by :func:`parse_program`; carries every error found in the text."""

    def __init__(self, errors: List[ParseError]):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in errors))


class _LineScanner:
    """Character cursor over a single line."""

    def __init__(self, text: str, line_no: int):
        self.text = text
        self.pos = 0
        self.line_no = line_no

    def error(self, kind: ParseErrorKind, message: str, column: Optional[int] = None) -> ParseError:
        return ParseError(self.line_no, (self.pos if column is None else column) + 1, kind, message)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def advance(self) -> str:
        ch = self.text[self.pos]
        self.pos += 1
        return ch

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def read_identifier(self) -> Optional[str]:
        start = self.pos
        ch = self.peek()
        if not (ch.isalpha() or ch == "_"):
            return None
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        return self.text[start : self.pos]

    def read_integer(self) -> Optional[int]:
        start = self.pos
        if self.peek() == "-":
            self.pos += 1
        if not self.peek().isdigit():
            self.pos = start
            return None
        while self.peek().isdigit():
            self.pos += 1
        return int(self.text[start : self.pos])

    def read_string(self) -> str:
        quote = self.advance()
        out: List[str] = []
        while True:
            if self.pos >= len(self.text):
                raise ProgramSyntaxError(
                    [self.error(ParseErrorKind.BAD_ARGUMENT_SYNTAX, "unterminated string literal")]
                )
            ch = self.advance()
            if ch == quote:
                return "".join(out)
            if ch == "\\":
                if self.peek() in ("'", '"', "\\"):
                    out.append(self.advance())
                else:
                    raise ProgramSyntaxError(
                        [
                            self.error(
                                ParseErrorKind.BAD_ARGUMENT_SYNTAX,
                                "unsupported escape (only \\', \\\" and \\\\ are allowed)",
                                column=self.pos - 1,
                            )
                        ]
                    )
            else:
                out.append(ch)


def _parse_value(sc: _LineScanner) -> ArgValue:
    ch = sc.peek()
    if ch in ("'", '"'):
        return StringLiteral(sc.read_string())
    if ch == "-" or ch.isdigit():
        value = sc.read_integer()
        if value is None:
            raise ProgramSyntaxError([sc.error(ParseErrorKind.BAD_ARGUMENT_SYNTAX, "malformed number")])
        return Number(value)
    name = sc.read_identifier()
    if name is None:
        raise ProgramSyntaxError(
            [sc.error(ParseErrorKind.BAD_ARGUMENT_SYNTAX, "expected a value (variable, string, or number)")]
        )
    return VariableRef(name)


def _normalize_criteria(op: OperatorKind, name: str, value: ArgValue) -> ArgValue:
    spec = schema_of(op).get(name)
    if spec is None or spec.kind is not ArgKind.CRITERIA or spec.choices is None:
        return value
    token: Optional[str] = None
    if isinstance(value, StringLiteral):
        token = value.text
    elif isinstance(value, VariableRef):
        token = value.name
    if token is not None and token.lower() in spec.choices:
        return Criteria(token.lower())
    return value


def _parse_statement(raw: str, line_no: int) -> Statement:
    sc = _LineScanner(raw, line_no)
    sc.skip_ws()
    target = sc.read_identifier()
    if target is None:
        raise ProgramSyntaxError(
            [sc.error(ParseErrorKind.MALFORMED_ASSIGNMENT, "expected a target variable name")]
        )
    sc.skip_ws()
    if sc.peek() != "=":
        raise ProgramSyntaxError(
            [sc.error(ParseErrorKind.MALFORMED_ASSIGNMENT, "expected '=' after the target variable")]
        )
    sc.advance()
    sc.skip_ws()
    op_col = sc.pos
    op_name = sc.read_identifier()
    if op_name is None:
        raise ProgramSyntaxError([sc.error(ParseErrorKind.MALFORMED_ASSIGNMENT, "expected an operator name")])
    try:
        op = OperatorKind(op_name)
    except ValueError:
        raise ProgramSyntaxError(
            [
                sc.error(
                    ParseErrorKind.UNKNOWN_OPERATOR,
                    f"unknown operator {op_name!r}",
                    column=op_col,
                )
            ]
        ) from None
    sc.skip_ws()
    if sc.peek() != "(":
        raise ProgramSyntaxError(
            [sc.error(ParseErrorKind.MALFORMED_ASSIGNMENT, "expected '(' after the operator name")]
        )
    sc.advance()

    named: List[Tuple[str, ArgValue]] = []
    positional: List[ArgValue] = []
    sc.skip_ws()
    if sc.peek() != ")":
        while True:
            sc.skip_ws()
            mark = sc.pos
            name = sc.read_identifier()
            rest = sc.text[sc.pos :].lstrip(" \t")
            if name is not None and rest.startswith("=") and not rest.startswith("=="):
                sc.skip_ws()
                sc.advance()  # '='
                sc.skip_ws()
                value = _normalize_criteria(op, name, _parse_value(sc))
                if any(n == name for n, _ in named):
                    raise ProgramSyntaxError(
                        [
                            sc.error(
                                ParseErrorKind.BAD_ARGUMENT_SYNTAX,
                                f"duplicate argument name {name!r}",
                                column=mark,
                            )
                        ]
                    )
                named.append((name, value))
            else:
                sc.pos = mark
                positional.append(_parse_value(sc))
            sc.skip_ws()
            if sc.peek() == ",":
                sc.advance()
                continue
            break
    if sc.peek() != ")":
        raise ProgramSyntaxError(
            [sc.error(ParseErrorKind.BAD_ARGUMENT_SYNTAX, "expected ',' or ')' in the argument list")]
        )
    sc.advance()
    sc.skip_ws()
    if sc.pos < len(sc.text):
        raise ProgramSyntaxError(
            [sc.error(ParseErrorKind.BAD_ARGUMENT_SYNTAX, "unexpected text after the closing ')'")]
        )
    return Statement(
        target_var=target,
        op=op,
        args=tuple(named),
        positional=tuple(positional),
        source_line=line_no,
    )


def parse_program(text: str, *, strict: bool = False) -> Program:
    """Parse program text into a :class:`Program`.

    Raises :class:`ProgramSyntaxError` carrying *all* line errors.  With
    ``strict`` set, ``#`` comment lines are not skipped (they become
    malformed-assignment errors).
    """
    statements: List[Statement] = []
    errors: List[ParseError] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        if not strict and stripped.startswith("#"):
            continue
        try:
            statements.append(_parse_statement(raw, line_no))
        except ProgramSyntaxError as exc:
            errors.extend(exc.errors)
    if errors:
        raise ProgramSyntaxError(errors)
    if not statements:
        raise ProgramSyntaxError(
            [ParseError(1, 1, ParseErrorKind.EMPTY_PROGRAM, "the program contains no statements")]
        )
    return Program(tuple(statements))


def serialize_program(program: Program) -> str:
    """Render ``program`` as canonical one-statement-per-line text.

    Arguments are emitted in schema order and strings are single-quoted, so
    ``parse_program(serialize_program(p)) == p`` for any program whose
    statements are well formed (the statement constructor already
    canonicalizes argument order).
    """
    return "\n".join(stmt.render() for stmt in program)
