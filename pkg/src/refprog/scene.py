"""Scene records: the perception boundary the interpreter reads from.

A scene is one image's precomputed perception output: detector proposals per
label query, a sparse (proposal, text) similarity table, and per-proposal
relative depth (larger = closer to the camera).  Scenes are immutable after
construction and safe to share across parallel executions.

The on-disk form is the versioned ``vro-scene/1`` JSON schema::

    {
      "schema": "vro-scene/1",
      "image_id": "...", "width": 640.0, "height": 480.0,
      "detections": {"label": [{"id": "p0", "box": [x, y, w, h], "score": 0.9}]},
      "similarity": [{"id": "p0", "text": "label", "sim": 0.31}],
      "depth":      [{"id": "p0", "value": 0.7}]
    }

Boxes use center coordinates ``(x, y)`` plus width/height, in pixels.
Unknown top-level JSON fields are ignored by the engine but preserved across
a load/save round trip; unknown nested fields are dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Dict, Mapping, Tuple, Union

from .errors import ConsistencyError, MissingEntry, SchemaError

if TYPE_CHECKING:  # pragma: no cover - type-only import, avoids a cycle
    from .interp import ExecutionTrace

SCENE_SCHEMA = "vro-scene/1"

_KNOWN_FIELDS = {"schema", "image_id", "width", "height", "detections", "similarity", "depth"}


@dataclass(frozen=True)
class Box:
    """Axis-aligned box: center (x, y), width w > 0, height h > 0, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box width/height must be positive, got w={self.w}, h={self.h}")
        for name in ("x", "y", "w", "h"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> Tuple[float, float, float, float]:
        """(x0, y0, x1, y1) corner form."""
        return (self.x - self.w / 2, self.y - self.h / 2, self.x + self.w / 2, self.y + self.h / 2)

    def to_list(self) -> list:
        return [self.x, self.y, self.w, self.h]


def intersection_area(a: Box, b: Box) -> float:
    ax0, ay0, ax1, ay1 = a.corners()
    bx0, by0, bx1, by1 = b.corners()
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: Box, b: Box) -> float:
    """Intersection over union, clamped into [0, 1] against float round-off."""
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    return min(1.0, max(0.0, inter / union))


@dataclass(frozen=True)
class Proposal:
    id: str
    box: Box
    detector_score: float
    source_label: str

    def __post_init__(self) -> None:
        if not (0.0 <= self.detector_score <= 1.0):
            raise ValueError(f"detector_score must be in [0, 1], got {self.detector_score}")
        object.__setattr__(self, "detector_score", float(self.detector_score))


@dataclass(frozen=True)
class Scene:
    """One image's perception record.  Validated and normalized on construction:
    proposal ids must be unique, similarity/depth may only reference known ids,
    and detection lists are kept sorted by descending detector score."""

    image_id: str
    width: float
    height: float
    detections: Mapping[str, Tuple[Proposal, ...]]
    similarity: Mapping[Tuple[str, str], float] = field(default_factory=dict)
    depth: Mapping[str, float] = field(default_factory=dict)
    extras: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise ValueError("scene width/height must be positive")
        object.__setattr__(self, "width", float(self.width))
        object.__setattr__(self, "height", float(self.height))
        object.__setattr__(self, "similarity", {k: float(v) for k, v in self.similarity.items()})
        object.__setattr__(self, "depth", {k: float(v) for k, v in self.depth.items()})
        seen: set[str] = set()
        normalized: Dict[str, Tuple[Proposal, ...]] = {}
        for label, proposals in self.detections.items():
            for p in proposals:
                if p.id in seen:
                    raise ConsistencyError(f"duplicate proposal id {p.id!r}")
                seen.add(p.id)
            normalized[label] = tuple(sorted(proposals, key=lambda p: (-p.detector_score, p.id)))
        object.__setattr__(self, "detections", normalized)
        for (pid, _text) in self.similarity:
            if pid not in seen:
                raise ConsistencyError(f"similarity entry references unknown proposal id {pid!r}")
        for pid in self.depth:
            if pid not in seen:
                raise ConsistencyError(f"depth entry references unknown proposal id {pid!r}")

    def proposals(self) -> Tuple[Proposal, ...]:
        return tuple(p for plist in self.detections.values() for p in plist)


def lookup_detections(scene: Scene, label: str) -> Tuple[Proposal, ...]:
    """Proposals recorded for ``label``, highest detector score first.

    An empty tuple is a valid zero-detection answer; a label that was never
    queried at perception time raises :class:`MissingEntry` instead (that is
    a data-preparation gap, not evidence of target absence).
    """
    try:
        return scene.detections[label]
    except KeyError:
        raise MissingEntry(f"scene {scene.image_id!r} has no detection entry for label {label!r}") from None


def similarity_of(scene: Scene, proposal_id: str, text: str) -> float:
    try:
        return scene.similarity[(proposal_id, text)]
    except KeyError:
        raise MissingEntry(
            f"scene {scene.image_id!r} has no similarity entry for ({proposal_id!r}, {text!r})"
        ) from None


def depth_of(scene: Scene, proposal_id: str) -> float:
    try:
        return scene.depth[proposal_id]
    except KeyError:
        raise MissingEntry(f"scene {scene.image_id!r} has no depth entry for {proposal_id!r}") from None


# --- outcomes ----------------------------------------------------------------


@dataclass(frozen=True)
class TargetBox:
    """A grounded answer box plus the trace that produced it."""

    box: Box
    trace: "ExecutionTrace"


@dataclass(frozen=True)
class NoTarget:
    """Explicit target-absent answer; the trace records the terminating step."""

    trace: "ExecutionTrace"


Outcome = Union[TargetBox, NoTarget]


# --- serialization -----------------------------------------------------------


def _require(obj: dict, key: str, types: tuple, where: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{where}: missing field {key!r}")
    value = obj[key]
    if not isinstance(value, types) or isinstance(value, bool):
        raise SchemaError(f"{where}: field {key!r} has the wrong type")
    return value


def _parse_box(raw: Any, where: str) -> Box:
    if not (isinstance(raw, list) and len(raw) == 4 and all(isinstance(v, (int, float)) for v in raw)):
        raise SchemaError(f"{where}: 'box' must be [x, y, w, h]")
    try:
        return Box(float(raw[0]), float(raw[1]), float(raw[2]), float(raw[3]))
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from None


def load_scene(data: Union[bytes, str]) -> Scene:
    """Parse ``vro-scene/1`` JSON; raises SchemaError / ConsistencyError."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"scene file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("scene file must be a JSON object")
    schema = doc.get("schema")
    if schema != SCENE_SCHEMA:
        raise SchemaError(f"unsupported scene schema {schema!r}, expected {SCENE_SCHEMA!r}")

    image_id = _require(doc, "image_id", (str,), "scene")
    width = float(_require(doc, "width", (int, float), "scene"))
    height = float(_require(doc, "height", (int, float), "scene"))
    detections_raw = _require(doc, "detections", (dict,), "scene")

    detections: Dict[str, Tuple[Proposal, ...]] = {}
    for label, plist in detections_raw.items():
        if not isinstance(plist, list):
            raise SchemaError(f"detections[{label!r}] must be a list")
        proposals = []
        for i, entry in enumerate(plist):
            where = f"detections[{label!r}][{i}]"
            if not isinstance(entry, dict):
                raise SchemaError(f"{where}: must be an object")
            pid = _require(entry, "id", (str,), where)
            box = _parse_box(_require(entry, "box", (list,), where), where)
            score = float(_require(entry, "score", (int, float), where))
            try:
                proposals.append(Proposal(pid, box, score, label))
            except ValueError as exc:
                raise SchemaError(f"{where}: {exc}") from None
        detections[label] = tuple(proposals)

    similarity: Dict[Tuple[str, str], float] = {}
    for i, entry in enumerate(doc.get("similarity", []) or []):
        where = f"similarity[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where}: must be an object")
        pid = _require(entry, "id", (str,), where)
        text = _require(entry, "text", (str,), where)
        sim = float(_require(entry, "sim", (int, float), where))
        if not (-1.0 <= sim <= 1.0):
            raise SchemaError(f"{where}: 'sim' must be a cosine similarity in [-1, 1], got {sim}")
        if (pid, text) in similarity:
            raise ConsistencyError(f"{where}: duplicate similarity entry for ({pid!r}, {text!r})")
        similarity[(pid, text)] = sim

    depth: Dict[str, float] = {}
    for i, entry in enumerate(doc.get("depth", []) or []):
        where = f"depth[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where}: must be an object")
        pid = _require(entry, "id", (str,), where)
        value = float(_require(entry, "value", (int, float), where))
        if pid in depth:
            raise ConsistencyError(f"{where}: duplicate depth entry for {pid!r}")
        depth[pid] = value

    extras = {k: v for k, v in doc.items() if k not in _KNOWN_FIELDS}
    try:
        return Scene(image_id, width, height, detections, similarity, depth, extras)
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def save_scene(scene: Scene) -> bytes:
    """Serialize to canonical ``vro-scene/1`` JSON bytes (stable ordering)."""
    doc: Dict[str, Any] = {
        "schema": SCENE_SCHEMA,
        "image_id": scene.image_id,
        "width": scene.width,
        "height": scene.height,
        "detections": {
            label: [
                {"id": p.id, "box": p.box.to_list(), "score": p.detector_score}
                for p in proposals
            ]
            for label, proposals in sorted(scene.detections.items())
        },
        "similarity": [
            {"id": pid, "text": text, "sim": sim}
            for (pid, text), sim in sorted(scene.similarity.items())
        ],
        "depth": [{"id": pid, "value": value} for pid, value in sorted(scene.depth.items())],
    }
    doc.update(scene.extras)
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")
