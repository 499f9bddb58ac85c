"""Program generation: LLM front-end with a validation-feedback repair loop.

``generate_program`` prompts a chat endpoint with operator documentation and
few-shot exemplars, extracts the first statement-shaped block from the reply,
and parses + validates it.  On failure the rendered diagnostics are embedded
in a fresh prompt and the endpoint is asked to revise, up to ``max_iters``
attempts (default 5).  A scripted endpoint stands in for the LLM in tests,
and ``load_canned`` serves pre-generated programs for fully offline runs.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Dict, List, Optional, Protocol, Sequence, Tuple, Union

import httpx

from .errors import SchemaError, TransportError
from .ops import Program
from .parser import ParseError, ProgramSyntaxError, parse_program, serialize_program
from .validator import Diagnostic, Rule, render_feedback, validate_program

Messages = List[Dict[str, str]]

_STATEMENT_LINE_RE = re.compile(r"^\s*[A-Za-z_]\w*\s*=\s*[A-Za-z_]\w*\(.*\)\s*$")
_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class Exemplar:
    query: str
    program_text: str


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt text with ``{{exemplars}}``, ``{{query}}`` and ``{{feedback}}`` slots."""

    template_text: str
    exemplars: Tuple[Exemplar, ...] = ()

    def render(self, query: str, feedback: Optional[str] = None) -> str:
        blocks = "\n\n".join(
            f"Query: {ex.query}\nProgram:\n{ex.program_text}" for ex in self.exemplars
        )
        feedback_block = ""
        if feedback:
            feedback_block = (
                "Your previous attempt was rejected.\n" + feedback + "\nWrite a corrected program.\n"
            )
        return (
            self.template_text.replace("{{exemplars}}", blocks)
            .replace("{{query}}", query)
            .replace("{{feedback}}", feedback_block)
        )


def default_template() -> PromptTemplate:
    """The built-in template plus its exemplar set (every exemplar validates)."""
    data_dir = resources.files("refprog.data")
    text = data_dir.joinpath("prompt_template.txt").read_text("utf-8")
    exemplars = []
    for line in data_dir.joinpath("exemplars.jsonl").read_text("utf-8").splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        exemplars.append(Exemplar(doc["query"], doc["program"]))
    return PromptTemplate(text, tuple(exemplars))


# --- chat endpoints -----------------------------------------------------------


class ChatEndpoint(Protocol):
    def complete(self, messages: Messages) -> str: ...


class HttpChatEndpoint:
    """Minimal client for an OpenAI-compatible chat-completions endpoint."""

    def __init__(
        self,
        url: str,
        model: str = "default",
        api_key: Optional[str] = None,
        temperature: float = 0.0,
        timeout: float = 60.0,
        client: Optional[httpx.Client] = None,
    ):
        self.url = url
        self.model = model
        self.api_key = api_key
        self.temperature = temperature
        self._client = client or httpx.Client(timeout=timeout)

    def complete(self, messages: Messages) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {"model": self.model, "messages": messages, "temperature": self.temperature}
        try:
            response = self._client.post(self.url, json=payload, headers=headers)
            response.raise_for_status()
            doc = response.json()
            return doc["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise TransportError(f"chat endpoint request failed: {exc}") from exc
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise TransportError(f"chat endpoint returned a malformed response: {exc}") from exc


class ScriptedEndpoint:
    """Deterministic stand-in for tests: replays scripted outputs, records prompts."""

    def __init__(self, outputs: Sequence[str], repeat_last: bool = False):
        self.outputs = list(outputs)
        self.repeat_last = repeat_last
        self.prompts: List[Messages] = []
        self.calls = 0

    def complete(self, messages: Messages) -> str:
        self.prompts.append(messages)
        index = self.calls
        self.calls += 1
        if index >= len(self.outputs):
            if self.repeat_last and self.outputs:
                return self.outputs[-1]
            raise TransportError("scripted endpoint exhausted")
        return self.outputs[index]


# --- generation ----------------------------------------------------------------


@dataclass(frozen=True)
class GenSuccess:
    program: Program
    program_text: str
    iterations_used: int
    attempts: Tuple[str, ...] = ()


@dataclass(frozen=True)
class GenFailure:
    last_errors: Tuple[Union[ParseError, Diagnostic], ...]
    attempts: Tuple[str, ...]


GenResult = Union[GenSuccess, GenFailure]


def extract_program_block(text: str) -> str:
    """The first contiguous run of statement-shaped lines in an LLM reply.

    Fenced code blocks are searched first (LLMs habitually wrap programs in
    them); if no line anywhere looks like a statement, the stripped reply is
    returned unchanged so that parsing can report what went wrong.
    """
    fenced = _FENCE_RE.search(text)
    candidates = [fenced.group(1)] if fenced else []
    candidates.append(text)
    for candidate in candidates:
        block: List[str] = []
        for line in candidate.splitlines():
            if _STATEMENT_LINE_RE.match(line):
                block.append(line.strip())
            elif block:
                break
        if block:
            return "\n".join(block)
    return text.strip()


def _parse_errors_as_diagnostics(errors: Sequence[ParseError]) -> List[Diagnostic]:
    return [
        Diagnostic(
            line=e.line,
            rule=Rule.SYNTAX_FORM,
            message=f"{e.kind.value} at column {e.column}: {e.message}",
            hint="write each line as VAR = OPERATOR(name=value, ...)",
        )
        for e in errors
    ]


def generate_program(
    query: str,
    template: PromptTemplate,
    endpoint: ChatEndpoint,
    max_iters: int = 5,
    transport_retries: int = 2,
) -> GenResult:
    """Generate and validate a program for ``query``; never returns an unvalidated one.

    Transport failures are retried up to ``transport_retries`` extra times and
    then raised -- an unreachable endpoint is not a generation failure.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    attempts: List[str] = []
    feedback: Optional[str] = None
    last_errors: Tuple[Union[ParseError, Diagnostic], ...] = ()

    for iteration in range(1, max_iters + 1):
        prompt = template.render(query, feedback)
        messages: Messages = [{"role": "user", "content": prompt}]
        for attempt in range(transport_retries + 1):
            try:
                raw = endpoint.complete(messages)
                break
            except TransportError:
                if attempt == transport_retries:
                    raise
        attempts.append(raw)
        block = extract_program_block(raw)
        try:
            program = parse_program(block)
        except ProgramSyntaxError as exc:
            last_errors = tuple(exc.errors)
            feedback = render_feedback(_parse_errors_as_diagnostics(exc.errors), block)
            continue
        diagnostics = validate_program(program)
        if not diagnostics:
            return GenSuccess(program, serialize_program(program), iteration, tuple(attempts))
        last_errors = tuple(diagnostics)
        feedback = render_feedback(diagnostics, block)

    return GenFailure(last_errors, tuple(attempts))


# --- canned programs ------------------------------------------------------------


def load_canned(data: Union[bytes, str]) -> Dict[str, Program]:
    """Load a JSONL of ``{"query": ..., "program": ...}`` pairs, validating each.

    The whole load fails on the first invalid entry (naming the offending
    query) and on duplicate queries, which would make the lookup ambiguous.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    out: Dict[str, Program] = {}
    for line_no, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"canned line {line_no}: not valid JSON: {exc}") from None
        if not isinstance(doc, dict) or not isinstance(doc.get("query"), str) or not isinstance(
            doc.get("program"), str
        ):
            raise SchemaError(f"canned line {line_no}: expected {{'query': str, 'program': str}}")
        query = doc["query"]
        if query in out:
            raise SchemaError(f"canned line {line_no}: duplicate query {query!r}")
        try:
            program = parse_program(doc["program"])
        except ProgramSyntaxError as exc:
            raise SchemaError(f"canned program for query {query!r} does not parse: {exc}") from None
        diagnostics = validate_program(program)
        if diagnostics:
            details = "; ".join(f"line {d.line} [{d.rule.value}] {d.message}" for d in diagnostics)
            raise SchemaError(f"canned program for query {query!r} is invalid: {details}")
        out[query] = program
    return out


# --- program sources (shared by the batch runner and the CLI) --------------------


class ProgramSource(Protocol):
    def program_for(self, query: str) -> GenResult: ...


class CannedSource:
    """Serves programs from a canned map; unknown queries are a lookup failure."""

    def __init__(self, programs: Dict[str, Program]):
        self.programs = programs

    def program_for(self, query: str) -> GenResult:
        program = self.programs.get(query)
        if program is None:
            return GenFailure((), ())
        return GenSuccess(program, serialize_program(program), 0)


class LlmSource:
    def __init__(self, template: PromptTemplate, endpoint: ChatEndpoint, max_iters: int = 5):
        self.template = template
        self.endpoint = endpoint
        self.max_iters = max_iters

    def program_for(self, query: str) -> GenResult:
        return generate_program(query, self.template, self.endpoint, self.max_iters)
