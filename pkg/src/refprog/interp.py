"""Program interpreter: operator semantics, verification, early exit, tracing.

Each statement binds a set of proposals.  A statement whose verification
holds for nothing yields the empty set; by default that terminates the run
immediately with a :class:`~refprog.scene.NoTarget` outcome and every later
step is recorded as skipped.  With early exit disabled the remaining steps
still run (an empty input propagates as an empty output without computing),
and the outcome is unchanged -- a step that came up empty still means there
is no target.  Execution is a pure function of its inputs.

Geometric conventions: boxes are compared by center point, the image y axis
grows downward (so "top" means smaller y), depth is larger-is-closer, and
direction/depth comparisons are strict -- equality establishes no relation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Dict, List, Mapping, Optional, Tuple, Union

from .errors import InternalError, UnrecognizedPosition
from .ops import Criteria, Number, OperatorKind, Program, Statement, StringLiteral, VariableRef
from .scene import (
    Box,
    NoTarget,
    Outcome,
    Proposal,
    Scene,
    TargetBox,
    depth_of,
    intersection_area,
    lookup_detections,
)
from .verify import CategoryBank, VerifyConfig, ThresholdTable, property_filter, proposal_uv_score, uv_filter

ProposalSet = Tuple[Proposal, ...]

POSITIONS_SCHEMA = "vro-positions/1"


class Verdict(Enum):
    PASSED = "passed"
    EMPTY = "empty"
    SKIPPED = "skipped"


@dataclass(frozen=True)
class StepRecord:
    line: int
    op: OperatorKind
    input_sizes: Tuple[int, ...]
    output_size: Optional[int]
    verdict: Verdict

    def to_json(self) -> dict:
        return {
            "line": self.line,
            "op": self.op.value,
            "input_sizes": list(self.input_sizes),
            "output_size": self.output_size,
            "verdict": self.verdict.value,
        }


@dataclass(frozen=True)
class ExecutionTrace:
    steps: Tuple[StepRecord, ...]
    terminated_at: Optional[int]

    def to_json(self) -> dict:
        return {"steps": [s.to_json() for s in self.steps], "terminated_at": self.terminated_at}


# --- position synonym table ---------------------------------------------------

_ZONES = {"left", "right", "top", "bottom", "center", "top-left", "top-right", "bottom-left", "bottom-right"}
_SUPERLATIVES = {"leftmost", "rightmost", "uppermost", "lowest", "middle"}


def _normalize_position(text: str) -> str:
    cleaned = text.lower().replace("'", "").replace("’", "")
    cleaned = "".join(ch if (ch.isalnum() or ch in " -") else " " for ch in cleaned)
    return " ".join(cleaned.split())


@dataclass(frozen=True)
class PositionTable:
    """Synonym table mapping free-form position strings to canonical targets.

    A canonical target is either one of nine image zones (thirds grid) or a
    superlative that selects a single box along an axis.
    """

    synonyms: Mapping[str, str]

    def resolve(self, position: str) -> str:
        key = _normalize_position(position)
        target = self.synonyms.get(key)
        if target is None:
            raise UnrecognizedPosition(
                f"position {position!r} matches no entry of the synonym table"
            )
        return target


def parse_position_table(data: Union[bytes, str]) -> PositionTable:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    doc = json.loads(data)
    if not isinstance(doc, dict) or doc.get("schema") != POSITIONS_SCHEMA:
        raise ValueError(f"position table must declare schema {POSITIONS_SCHEMA!r}")
    synonyms: Dict[str, str] = {}
    for section, allowed in (("zones", _ZONES), ("superlatives", _SUPERLATIVES)):
        for canonical, words in doc.get(section, {}).items():
            if canonical not in allowed:
                raise ValueError(f"unknown {section} entry {canonical!r}")
            for word in words:
                synonyms[_normalize_position(word)] = canonical
    return PositionTable(synonyms)


@lru_cache(maxsize=1)
def default_positions() -> PositionTable:
    data = resources.files("refprog.data").joinpath("positions.json").read_bytes()
    return parse_position_table(data)


@lru_cache(maxsize=1)
def default_bank() -> CategoryBank:
    text = resources.files("refprog.data").joinpath("coco_categories.txt").read_text("utf-8")
    names = [line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")]
    return CategoryBank(tuple(names))


# --- operator implementations --------------------------------------------------


def exec_find(
    label: str,
    scene: Scene,
    cfg: VerifyConfig,
    bank: CategoryBank,
    table: Optional[ThresholdTable] = None,
    *,
    verified: bool = True,
) -> ProposalSet:
    """Detections for ``label`` above the confidence floor, verification-filtered."""
    proposals = tuple(
        p for p in lookup_detections(scene, label) if p.detector_score >= cfg.detection_floor
    )
    if not verified:
        return proposals
    return uv_filter(proposals, label, scene, bank, cfg, table)


_DIRECTION_TESTS = {
    "left": lambda o, r: o.box.x < r.box.x,
    "right": lambda o, r: o.box.x > r.box.x,
    "top": lambda o, r: o.box.y < r.box.y,
    "bottom": lambda o, r: o.box.y > r.box.y,
}


def exec_find_direction(objs: ProposalSet, refs: ProposalSet, criteria: str) -> ProposalSet:
    """Keep objects positioned on the given side of at least one reference (center test)."""
    test = _DIRECTION_TESTS[criteria]
    return tuple(o for o in objs if any(test(o, r) for r in refs))


def _diagonal(box: Box) -> float:
    return math.hypot(box.w, box.h)


def exec_find_near(objs: ProposalSet, refs: ProposalSet, scale: float = 1.0) -> ProposalSet:
    """Keep objects whose center is within ``scale`` mean diagonals of some reference."""
    kept = []
    for o in objs:
        for r in refs:
            dist = math.hypot(o.box.x - r.box.x, o.box.y - r.box.y)
            if dist <= scale * (_diagonal(o.box) + _diagonal(r.box)) / 2.0:
                kept.append(o)
                break
    return tuple(kept)


def exec_find_inside(objs: ProposalSet, refs: ProposalSet, ratio: float = 0.9) -> ProposalSet:
    """Keep objects mostly contained in some reference; no overlap at all always rejects."""
    kept = []
    for o in objs:
        for r in refs:
            inter = intersection_area(o.box, r.box)
            if inter > 0 and inter / o.box.area >= ratio:
                kept.append(o)
                break
    return tuple(kept)


def exec_relative_depth(
    objs: ProposalSet, refs: ProposalSet, criteria: str, scene: Scene
) -> ProposalSet:
    """Keep objects strictly in front of (closer than) or behind some reference."""
    kept = []
    for o in objs:
        od = depth_of(scene, o.id)
        for r in refs:
            rd = depth_of(scene, r.id)
            if (od > rd) if criteria == "front" else (od < rd):
                kept.append(o)
                break
    return tuple(kept)


def _pick(objs: ProposalSet, key, largest: bool) -> Proposal:
    # ties: larger box area, then lexicographically smallest id
    def rank(p: Proposal):
        k = key(p)
        return (k if largest else -k, p.box.area, _NegStr(p.id))

    return max(objs, key=rank)


class _NegStr:
    """Orders strings reversed, so max() picks the lexicographically smallest id."""

    __slots__ = ("s",)

    def __init__(self, s: str):
        self.s = s

    def __lt__(self, other: "_NegStr") -> bool:
        return self.s > other.s

    def __eq__(self, other: object) -> bool:
        return isinstance(other, _NegStr) and self.s == other.s


def exec_absolute_depth(objs: ProposalSet, criteria: str, scene: Scene) -> ProposalSet:
    """The single closest ("front") or farthest ("behind") object by depth."""
    return (_pick(objs, lambda p: depth_of(scene, p.id), largest=(criteria == "front")),)


def exec_size(objs: ProposalSet, criteria: str) -> ProposalSet:
    """The single biggest or smallest object by box area (ties by id)."""
    if criteria == "big":
        return (min(objs, key=lambda p: (-p.box.area, p.id)),)
    return (min(objs, key=lambda p: (p.box.area, p.id)),)


def exec_order(objs: ProposalSet, criteria: str, rank: int) -> ProposalSet:
    """The rank-th object counting in from the given side; empty if rank exceeds the set."""
    if rank > len(objs):
        return ()
    axis = (lambda p: p.box.x) if criteria in ("left", "right") else (lambda p: p.box.y)
    ordered = sorted(objs, key=lambda p: (axis(p), p.id))
    if criteria in ("right", "bottom"):
        ordered.reverse()
    return (ordered[rank - 1],)


def exec_locate(
    objs: ProposalSet, position: str, scene: Scene, positions: PositionTable
) -> ProposalSet:
    """Filter by absolute image zone, or select one box by a positional superlative."""
    target = positions.resolve(position)
    if target in _SUPERLATIVES:
        xs = sorted(objs, key=lambda p: (p.box.x, p.id))
        ys = sorted(objs, key=lambda p: (p.box.y, p.id))
        if target == "leftmost":
            return (xs[0],)
        if target == "rightmost":
            return (xs[-1],)
        if target == "uppermost":
            return (ys[0],)
        if target == "lowest":
            return (ys[-1],)
        return (xs[(len(xs) - 1) // 2],)  # "middle": lower median along x

    x_lo, x_hi = scene.width / 3.0, 2.0 * scene.width / 3.0
    y_lo, y_hi = scene.height / 3.0, 2.0 * scene.height / 3.0
    zone_tests = {
        "left": lambda b: b.x < x_lo,
        "right": lambda b: b.x > x_hi,
        "top": lambda b: b.y < y_lo,
        "bottom": lambda b: b.y > y_hi,
        "center": lambda b: x_lo <= b.x <= x_hi and y_lo <= b.y <= y_hi,
        "top-left": lambda b: b.x < x_lo and b.y < y_lo,
        "top-right": lambda b: b.x > x_hi and b.y < y_lo,
        "bottom-left": lambda b: b.x < x_lo and b.y > y_hi,
        "bottom-right": lambda b: b.x > x_hi and b.y > y_hi,
    }
    test = zone_tests[target]
    return tuple(o for o in objs if test(o.box))


def exec_result(
    objs: ProposalSet,
    scene: Optional[Scene] = None,
    cfg: Optional[VerifyConfig] = None,
    bank: Optional[CategoryBank] = None,
) -> Box:
    """Map the surviving candidates to the single answer box."""
    if len(objs) == 1:
        return objs[0].box
    cfg = cfg or VerifyConfig()
    if cfg.result_rank == "uv" and scene is not None and bank is not None:
        key = lambda p: proposal_uv_score(p, p.source_label, scene, bank, cfg)  # noqa: E731
    else:
        key = lambda p: p.detector_score  # noqa: E731
    return _pick(objs, key, largest=True).box


# --- the interpreter loop -------------------------------------------------------


def _string_arg(stmt: Statement, name: str) -> str:
    value = stmt.arg(name)
    if not isinstance(value, StringLiteral):
        raise InternalError(f"line {stmt.source_line}: argument {name!r} is not a string")
    return value.text


def _criteria_arg(stmt: Statement, name: str) -> str:
    value = stmt.arg(name)
    if not isinstance(value, Criteria):
        raise InternalError(f"line {stmt.source_line}: argument {name!r} is not a criteria token")
    return value.token


def _set_args(stmt: Statement, env: Mapping[str, ProposalSet]) -> List[ProposalSet]:
    sets = []
    for name, value in stmt.args:
        if isinstance(value, VariableRef):
            if value.name not in env:
                raise InternalError(f"line {stmt.source_line}: unbound variable {value.name!r}")
            sets.append(env[value.name])
    return sets


def _apply(
    stmt: Statement,
    inputs: List[ProposalSet],
    scene: Scene,
    cfg: VerifyConfig,
    bank: CategoryBank,
    table: Optional[ThresholdTable],
    positions: PositionTable,
    verified: bool,
) -> ProposalSet:
    op = stmt.op
    if op is OperatorKind.FIND:
        return exec_find(_string_arg(stmt, "object_name"), scene, cfg, bank, table, verified=verified)
    if op is OperatorKind.PROPERTY:
        return property_filter(inputs[0], _string_arg(stmt, "attribute"), scene, cfg)
    if op is OperatorKind.LOCATE:
        return exec_locate(inputs[0], _string_arg(stmt, "position"), scene, positions)
    if op is OperatorKind.ORDER:
        rank_value = stmt.arg("rank")
        if not isinstance(rank_value, Number):
            raise InternalError(f"line {stmt.source_line}: 'rank' is not a number")
        return exec_order(inputs[0], _criteria_arg(stmt, "criteria"), rank_value.value)
    if op is OperatorKind.SIZE:
        return exec_size(inputs[0], _criteria_arg(stmt, "criteria"))
    if op is OperatorKind.ABSOLUTE_DEPTH:
        return exec_absolute_depth(inputs[0], _criteria_arg(stmt, "criteria"), scene)
    if op is OperatorKind.FIND_DIRECTION:
        return exec_find_direction(inputs[0], inputs[1], _criteria_arg(stmt, "criteria"))
    if op is OperatorKind.FIND_NEAR:
        return exec_find_near(inputs[0], inputs[1], cfg.near_scale)
    if op is OperatorKind.FIND_INSIDE:
        return exec_find_inside(inputs[0], inputs[1], cfg.inside_ratio)
    if op is OperatorKind.RELATIVE_DEPTH:
        return exec_relative_depth(inputs[0], inputs[1], _criteria_arg(stmt, "criteria"), scene)
    raise InternalError(f"line {stmt.source_line}: unexpected operator {op.value}")


def execute(
    program: Program,
    scene: Scene,
    cfg: Optional[VerifyConfig] = None,
    bank: Optional[CategoryBank] = None,
    table: Optional[ThresholdTable] = None,
    positions: Optional[PositionTable] = None,
    *,
    early_exit: bool = True,
    forced: bool = False,
) -> Outcome:
    """Run a validated program against one scene.

    ``early_exit`` only controls whether steps after the first empty set are
    executed or skipped; it never changes the answer.  ``forced`` implements
    the forced-prediction evaluation protocol: detector verification is
    disabled and, when the program comes up empty, the answer is taken from
    the last non-empty binding instead of abstaining.  Forced mode implies
    running every step.
    """
    cfg = cfg or VerifyConfig()
    bank = bank or default_bank()
    positions = positions or default_positions()
    if forced:
        early_exit = False

    env: Dict[str, ProposalSet] = {}
    steps: List[StepRecord] = []
    first_empty: Optional[int] = None
    final_box: Optional[Box] = None
    last_nonempty: Optional[ProposalSet] = None

    for stmt in program:
        if first_empty is not None and early_exit:
            steps.append(StepRecord(stmt.source_line, stmt.op, (), None, Verdict.SKIPPED))
            continue

        inputs = _set_args(stmt, env)
        input_sizes = tuple(len(s) for s in inputs)
        if any(len(s) == 0 for s in inputs):
            result: ProposalSet = ()  # empty propagates without computing
        elif stmt.op is OperatorKind.RESULT:
            final_box = exec_result(inputs[0], scene, cfg, bank)
            result = inputs[0]
        else:
            result = _apply(stmt, inputs, scene, cfg, bank, table, positions, verified=not forced)

        if stmt.op is not OperatorKind.RESULT:
            env[stmt.target_var] = result
            if result:
                last_nonempty = result
        verdict = Verdict.PASSED if result else Verdict.EMPTY
        output_size = len(result) if stmt.op is not OperatorKind.RESULT else (1 if result else 0)
        steps.append(StepRecord(stmt.source_line, stmt.op, input_sizes, output_size, verdict))
        if not result and first_empty is None:
            first_empty = stmt.source_line

    trace = ExecutionTrace(tuple(steps), first_empty)
    if first_empty is None:
        if final_box is None:
            raise InternalError("program finished without producing a result box")
        return TargetBox(final_box, trace)
    if forced and last_nonempty:
        return TargetBox(exec_result(last_nonempty, scene, cfg, bank), trace)
    return NoTarget(trace)
