from __future__ import annotations

import random
from typing import Dict, List, Optional, Sequence, Tuple

import pytest

from refprog import (
    Box,
    CategoryBank,
    Proposal,
    Scene,
    VerifyConfig,
)

DIRECTIONS = ("left", "right", "top", "bottom")


def bx(x: float, y: float, w: float = 10.0, h: float = 10.0) -> Box:
    return Box(x, y, w, h)


def prop(pid: str, box: Box, score: float = 0.9, label: str = "thing") -> Proposal:
    return Proposal(pid, box, score, label)


def make_scene(
    detections: Dict[str, Sequence[Proposal]],
    similarity: Optional[Dict[Tuple[str, str], float]] = None,
    depth: Optional[Dict[str, float]] = None,
    width: float = 300.0,
    height: float = 300.0,
    image_id: str = "test",
) -> Scene:
    return Scene(image_id, width, height, {k: tuple(v) for k, v in detections.items()},
                 similarity or {}, depth or {})


def full_scene(
    rng: random.Random,
    labels: Sequence[str],
    texts: Sequence[str],
    width: float = 300.0,
    height: float = 300.0,
    max_proposals: int = 4,
    min_proposals: int = 0,
    image_id: str = "synthetic",
) -> Scene:
    """A random scene carrying similarity and depth for every (proposal, text) pair."""
    detections: Dict[str, Tuple[Proposal, ...]] = {}
    counter = 0
    for label in labels:
        plist = []
        for _ in range(rng.randint(min_proposals, max_proposals)):
            box = Box(
                rng.uniform(10, width - 10),
                rng.uniform(10, height - 10),
                rng.uniform(5, 80),
                rng.uniform(5, 80),
            )
            plist.append(Proposal(f"p{counter}", box, rng.uniform(0.0, 1.0), label))
            counter += 1
        detections[label] = tuple(plist)
    proposals = [p for plist in detections.values() for p in plist]
    similarity = {(p.id, t): rng.uniform(-1.0, 1.0) for p in proposals for t in set(texts)}
    depth = {p.id: rng.uniform(0.0, 1.0) for p in proposals}
    return Scene(image_id, width, height, detections, similarity, depth)


@pytest.fixture
def tiny_bank() -> CategoryBank:
    return CategoryBank(("chair", "dog", "car"))


@pytest.fixture
def cfg() -> VerifyConfig:
    return VerifyConfig()


ATTRIBUTES = ("red", "striped", "standing", "open")
POSITION_WORDS = ("left", "right", "top", "at the bottom", "center", "outmost left", "middle")

_UNARY = ("LOCATE", "ORDER", "SIZE", "ABSOLUTE_DEPTH", "PROPERTY")
_BINARY = ("FIND_DIRECTION", "FIND_NEAR", "FIND_INSIDE", "RELATIVE_DEPTH")


def random_valid_program_text(
    rng: random.Random,
    labels: Sequence[str],
    attributes: Sequence[str] = ATTRIBUTES,
    position_words: Sequence[str] = POSITION_WORDS,
    max_extra: int = 4,
) -> str:
    lines: List[str] = []
    defined: List[str] = []

    def emit(rhs: str) -> None:
        name = f"B{len(defined)}"
        lines.append(f"{name} = {rhs}")
        defined.append(name)

    emit(f"FIND(object_name='{rng.choice(labels)}')")
    for _ in range(rng.randint(0, max_extra)):
        op = rng.choice(("FIND",) + _UNARY + _BINARY)
        if op == "FIND":
            emit(f"FIND(object_name='{rng.choice(labels)}')")
        elif op == "LOCATE":
            emit(f"LOCATE(object={rng.choice(defined)}, position='{rng.choice(position_words)}')")
        elif op == "ORDER":
            emit(
                f"ORDER(object={rng.choice(defined)}, criteria='{rng.choice(DIRECTIONS)}', "
                f"rank={rng.randint(1, 3)})"
            )
        elif op == "SIZE":
            emit(f"SIZE(object={rng.choice(defined)}, criteria='{rng.choice(('big', 'small'))}')")
        elif op == "ABSOLUTE_DEPTH":
            emit(f"ABSOLUTE_DEPTH(object={rng.choice(defined)}, criteria='{rng.choice(('front', 'behind'))}')")
        elif op == "PROPERTY":
            emit(f"PROPERTY(object={rng.choice(defined)}, attribute='{rng.choice(attributes)}')")
        else:
            a, b = rng.choice(defined), rng.choice(defined)
            if op in ("FIND_DIRECTION", "RELATIVE_DEPTH"):
                choices = DIRECTIONS if op == "FIND_DIRECTION" else ("front", "behind")
                emit(f"{op}(object={a}, reference_object={b}, criteria='{rng.choice(choices)}')")
            else:
                emit(f"{op}(object={a}, reference_object={b})")
    lines.append(f"FINAL_RESULT = RESULT(object={defined[-1]})")
    return "\n".join(lines)
