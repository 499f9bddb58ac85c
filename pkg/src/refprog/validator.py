"""Semantic validation of parsed programs, and feedback rendering.

Five rule families are enforced on top of the grammar:

* statement form     -> ``SyntaxForm`` (positional arguments)
* variable tracking  -> ``UseBeforeDef``, ``Redefinition``
* argument typing    -> ``ArgType``, ``ArgDomain``
* operator contract  -> ``MissingArg``, ``ExtraArg``, ``UnknownOperatorArgs``
* output format      -> ``FinalLineForm``, ``EarlyResult``, ``MissingResult``

``validate_program`` reports every violation in one pass (sorted by line,
then rule) so a single repair round carries as much information as possible.
A program with an empty diagnostic list is guaranteed to execute in the
interpreter without any program-shape error.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Sequence

from .ops import (
    ALL_ARG_NAMES,
    ArgKind,
    ArgValue,
    Criteria,
    FINAL_TARGET,
    Number,
    OperatorKind,
    Program,
    Statement,
    StringLiteral,
    VariableRef,
    schema_of,
)


class Rule(Enum):
    SYNTAX_FORM = "SyntaxForm"
    USE_BEFORE_DEF = "UseBeforeDef"
    REDEFINITION = "Redefinition"
    ARG_TYPE = "ArgType"
    ARG_DOMAIN = "ArgDomain"
    MISSING_ARG = "MissingArg"
    EXTRA_ARG = "ExtraArg"
    UNKNOWN_OPERATOR_ARGS = "UnknownOperatorArgs"
    FINAL_LINE_FORM = "FinalLineForm"
    EARLY_RESULT = "EarlyResult"
    MISSING_RESULT = "MissingResult"


_RULE_ORDER = {rule: i for i, rule in enumerate(Rule)}


@dataclass(frozen=True)
class Diagnostic:
    line: int
    rule: Rule
    message: str
    hint: str

    def to_json(self) -> dict:
        return {"line": self.line, "rule": self.rule.value, "message": self.message, "hint": self.hint}


def _value_kind(value: ArgValue) -> str:
    if isinstance(value, VariableRef):
        return "a variable"
    if isinstance(value, Number):
        return "a number"
    if isinstance(value, Criteria):
        return "a criteria token"
    return "a string"


def _check_args(stmt: Statement, defined: Dict[str, int], out: List[Diagnostic]) -> None:
    schema = schema_of(stmt.op)
    given = dict(stmt.args)

    for name in schema:
        if name not in given:
            out.append(
                Diagnostic(
                    stmt.source_line,
                    Rule.MISSING_ARG,
                    f"{stmt.op.value} is missing its required argument '{name}'",
                    f"add {name}=... ({schema[name].describe()})",
                )
            )
    for name, value in stmt.args:
        if name not in schema:
            if name in ALL_ARG_NAMES:
                out.append(
                    Diagnostic(
                        stmt.source_line,
                        Rule.EXTRA_ARG,
                        f"{stmt.op.value} does not take an argument named '{name}'",
                        f"remove '{name}'; {stmt.op.value} takes exactly: {', '.join(schema)}",
                    )
                )
            else:
                out.append(
                    Diagnostic(
                        stmt.source_line,
                        Rule.UNKNOWN_OPERATOR_ARGS,
                        f"'{name}' is not an argument name of any operator",
                        f"{stmt.op.value} takes exactly: {', '.join(schema)}",
                    )
                )
            continue
        spec = schema[name]
        if spec.kind is ArgKind.VARIABLE:
            if not isinstance(value, VariableRef):
                out.append(
                    Diagnostic(
                        stmt.source_line,
                        Rule.ARG_TYPE,
                        f"'{name}' of {stmt.op.value} must be a variable, got {_value_kind(value)}",
                        f"pass the name of a variable defined on an earlier line as {name}=VAR",
                    )
                )
            elif value.name not in defined:
                out.append(
                    Diagnostic(
                        stmt.source_line,
                        Rule.USE_BEFORE_DEF,
                        f"variable '{value.name}' is referenced before it is defined",
                        f"define '{value.name}' on an earlier line, or reference an existing variable",
                    )
                )
        elif spec.kind is ArgKind.STRING:
            if not isinstance(value, StringLiteral):
                out.append(
                    Diagnostic(
                        stmt.source_line,
                        Rule.ARG_TYPE,
                        f"'{name}' of {stmt.op.value} must be a quoted string, got {_value_kind(value)}",
                        f"write {name}='...'",
                    )
                )
            elif not value.text.strip():
                out.append(
                    Diagnostic(
                        stmt.source_line,
                        Rule.ARG_DOMAIN,
                        f"'{name}' of {stmt.op.value} must not be empty",
                        f"give a non-empty string for {name}",
                    )
                )
        elif spec.kind is ArgKind.POSITIVE_INT:
            if not isinstance(value, Number):
                out.append(
                    Diagnostic(
                        stmt.source_line,
                        Rule.ARG_TYPE,
                        f"'{name}' of {stmt.op.value} must be a number, got {_value_kind(value)}",
                        f"write {name}=1, {name}=2, ...",
                    )
                )
            elif value.value < 1:
                out.append(
                    Diagnostic(
                        stmt.source_line,
                        Rule.ARG_DOMAIN,
                        f"'{name}' must be a positive integer, got {value.value}",
                        f"use {name}=1 for the first element",
                    )
                )
        elif spec.kind is ArgKind.CRITERIA:
            assert spec.choices is not None
            if isinstance(value, Criteria):
                if value.token not in spec.choices:
                    out.append(
                        Diagnostic(
                            stmt.source_line,
                            Rule.ARG_DOMAIN,
                            f"'{value.token}' is not a valid '{name}' for {stmt.op.value}",
                            f"use {spec.describe()}",
                        )
                    )
            elif isinstance(value, StringLiteral):
                out.append(
                    Diagnostic(
                        stmt.source_line,
                        Rule.ARG_DOMAIN,
                        f"'{value.text}' is not a valid '{name}' for {stmt.op.value}",
                        f"use {spec.describe()}",
                    )
                )
            else:
                out.append(
                    Diagnostic(
                        stmt.source_line,
                        Rule.ARG_TYPE,
                        f"'{name}' of {stmt.op.value} must be a quoted criteria token, got {_value_kind(value)}",
                        f"use {spec.describe()}",
                    )
                )


def validate_program(program: Program) -> List[Diagnostic]:
    """Check all semantic rules; an empty list means the program is valid."""
    diags: List[Diagnostic] = []
    defined: Dict[str, int] = {}
    last_index = len(program.statements) - 1

    for index, stmt in enumerate(program.statements):
        is_last = index == last_index

        if stmt.positional:
            diags.append(
                Diagnostic(
                    stmt.source_line,
                    Rule.SYNTAX_FORM,
                    f"{stmt.op.value} was given {len(stmt.positional)} argument(s) without a name",
                    f"every argument must be written name=value; {stmt.op.value} takes: "
                    + ", ".join(schema_of(stmt.op)),
                )
            )
        if not is_last and stmt.target_var == FINAL_TARGET:
            diags.append(
                Diagnostic(
                    stmt.source_line,
                    Rule.FINAL_LINE_FORM,
                    f"'{FINAL_TARGET}' is reserved for the last line",
                    "assign this step to a different variable name",
                )
            )
        if stmt.target_var in defined:
            diags.append(
                Diagnostic(
                    stmt.source_line,
                    Rule.REDEFINITION,
                    f"variable '{stmt.target_var}' is already defined on line {defined[stmt.target_var]}",
                    "each step must assign a fresh variable name",
                )
            )
        if stmt.op is OperatorKind.RESULT and not is_last:
            diags.append(
                Diagnostic(
                    stmt.source_line,
                    Rule.EARLY_RESULT,
                    "RESULT may only appear on the last line",
                    "move RESULT to the end of the program",
                )
            )
        if is_last:
            if stmt.op is not OperatorKind.RESULT:
                diags.append(
                    Diagnostic(
                        stmt.source_line,
                        Rule.MISSING_RESULT,
                        f"the program must end with {FINAL_TARGET} = RESULT(object=VAR)",
                        "append a final RESULT line that names the answer variable",
                    )
                )
            elif stmt.target_var != FINAL_TARGET:
                diags.append(
                    Diagnostic(
                        stmt.source_line,
                        Rule.FINAL_LINE_FORM,
                        f"the last line must assign to '{FINAL_TARGET}', not '{stmt.target_var}'",
                        f"write {FINAL_TARGET} = RESULT(object=...)",
                    )
                )

        if not stmt.positional:
            _check_args(stmt, defined, diags)
        if stmt.target_var not in defined:
            defined[stmt.target_var] = stmt.source_line

    diags.sort(key=lambda d: (d.line, _RULE_ORDER[d.rule], d.message))
    return diags


def render_feedback(diagnostics: Sequence[Diagnostic], original_text: str, *, limit: int = 2000) -> str:
    """Render a deterministic repair prompt: the program, then one bullet per finding.

    The output never exceeds ``limit`` characters.  Hints are dropped first
    (from the last finding backward), then the echoed program is shortened;
    findings themselves are always listed.
    """
    if not diagnostics:
        raise ValueError("render_feedback requires at least one diagnostic")

    def build(with_hints: int, program_text: str) -> str:
        bullets = []
        for i, d in enumerate(diagnostics):
            item = f"- line {d.line} [{d.rule.value}]: {d.message}"
            if i < with_hints and d.hint:
                item += f" (fix: {d.hint})"
            bullets.append(item)
        return (
            f"The program below has {len(diagnostics)} error(s).\n\n"
            f"Program:\n{program_text}\n\n"
            "Errors:\n" + "\n".join(bullets)
        )

    hints = len(diagnostics)
    lines = original_text.rstrip("\n").splitlines() or [""]
    text = build(hints, "\n".join(lines))
    while len(text) > limit and hints > 0:
        hints -= 1
        text = build(hints, "\n".join(lines))
    while len(text) > limit and len(lines) > 1:
        lines = lines[:-1]
        text = build(hints, "\n".join(lines) + "\n...")
    return text[:limit]


def diagnostics_to_json(diagnostics: Sequence[Diagnostic]) -> List[dict]:
    return [d.to_json() for d in diagnostics]
