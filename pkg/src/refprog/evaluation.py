"""Batch execution and evaluation metrics.

The batch runner generates (or looks up) one program per query and reuses it
across every scene, so pre-execution cost does not grow with the number of
images.  Scoring follows a binary confusion view over target-present and
target-absent items: a true positive needs IoU above 0.5, a missed or badly
localized target is a false negative, an emitted box on a target-absent item
is a false positive, and a correct abstention is a true negative.  Items
whose program generation or execution failed are excluded from the confusion
counts; the inclusive accuracy figure charges them as incorrect while the
exclusive figure drops them from the denominator.

Video-style items (carrying a clip id) additionally get per-clip
spatio-temporal IoU -- the ratio of summed per-frame intersection areas to
summed per-frame union areas -- and the per-frame 0/1 accuracy that also
credits correct no-target calls.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from .errors import EngineError
from .interp import PositionTable, execute
from .ops import Program
from .progen import GenFailure, GenResult, ProgramSource
from .scene import Box, NoTarget, Outcome, Scene, TargetBox, intersection_area, iou
from .verify import CategoryBank, ThresholdTable, VerifyConfig


@dataclass(frozen=True)
class EvalItem:
    """One (query, scene) evaluation case with its ground truth.

    ``gt_boxes`` empty means the correct answer is "no target".  Items from
    datasets with several reference boxes per expression keep them all; a
    prediction is credited against the best-matching one.
    """

    query: str
    scene_ref: str
    gt_boxes: Tuple[Box, ...] = ()
    clip_id: Optional[str] = None
    frame_index: Optional[int] = None

    @property
    def target_present(self) -> bool:
        return bool(self.gt_boxes)


def load_items(data: Union[bytes, str]) -> List[EvalItem]:
    """Parse the evaluation JSONL: one item per line.

    Keys: ``query`` (str), ``scene`` (str path or id), ``gt_box`` (one
    [x, y, w, h], a list of them, or null for no-target), optional
    ``clip_id`` and ``frame_index``.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    items: List[EvalItem] = []
    for line_no, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        doc = json.loads(line)
        raw = doc.get("gt_box")
        if raw is None:
            boxes: Tuple[Box, ...] = ()
        else:
            if raw and isinstance(raw[0], (int, float)):
                raw = [raw]
            boxes = tuple(Box(*map(float, b)) for b in raw)
        items.append(
            EvalItem(
                query=doc["query"],
                scene_ref=doc["scene"],
                gt_boxes=boxes,
                clip_id=doc.get("clip_id"),
                frame_index=doc.get("frame_index"),
            )
        )
    return items


# --- batch running --------------------------------------------------------------


@dataclass(frozen=True)
class ItemResult:
    """Outcome of one scene execution, or the reason it failed."""

    outcome: Optional[Outcome] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.outcome is None


@dataclass
class Timing:
    pre_execution_s: float = 0.0
    execution_s: float = 0.0
    scenes: int = 0

    @property
    def fps(self) -> Optional[float]:
        if self.execution_s <= 0 or self.scenes == 0:
            return None
        return self.scenes / self.execution_s

    def to_json(self) -> dict:
        return {
            "pre_execution_s": self.pre_execution_s,
            "execution_s": self.execution_s,
            "scenes": self.scenes,
            "fps": self.fps,
        }


@dataclass(frozen=True)
class ExecSettings:
    """Everything the interpreter needs besides the program and the scene."""

    cfg: VerifyConfig = field(default_factory=VerifyConfig)
    bank: Optional[CategoryBank] = None
    table: Optional[ThresholdTable] = None
    positions: Optional[PositionTable] = None
    early_exit: bool = True
    forced: bool = False

    def run(self, program: Program, scene: Scene) -> Outcome:
        return execute(
            program,
            scene,
            self.cfg,
            self.bank,
            self.table,
            self.positions,
            early_exit=self.early_exit,
            forced=self.forced,
        )


@dataclass
class BatchRun:
    results: List[ItemResult]
    timing: Timing
    generation: GenResult


def _run_one(program: Program, scene: Scene, settings: ExecSettings) -> ItemResult:
    try:
        return ItemResult(outcome=settings.run(program, scene))
    except EngineError as exc:
        return ItemResult(error=f"{type(exc).__name__}: {exc}")


def run_batch(
    query: str,
    scenes: Sequence[Scene],
    source: ProgramSource,
    settings: Optional[ExecSettings] = None,
    jobs: int = 1,
) -> BatchRun:
    """Execute one query over many scenes with a single program generation.

    A generation failure marks every scene as failed; a per-scene engine
    error (missing precomputed data, unknown position word) marks only that
    scene and leaves the rest untouched.  Results are in scene order
    regardless of ``jobs``.
    """
    if not scenes:
        raise ValueError("run_batch requires at least one scene")
    settings = settings or ExecSettings()

    start = time.perf_counter()
    generation = source.program_for(query)
    pre_s = time.perf_counter() - start

    if isinstance(generation, GenFailure):
        results = [ItemResult(error="program generation failed") for _ in scenes]
        return BatchRun(results, Timing(pre_s, 0.0, len(scenes)), generation)

    program = generation.program
    start = time.perf_counter()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda s: _run_one(program, s, settings), scenes))
    else:
        results = [_run_one(program, scene, settings) for scene in scenes]
    exec_s = time.perf_counter() - start
    return BatchRun(results, Timing(pre_s, exec_s, len(scenes)), generation)


def evaluate_items(
    items: Sequence[EvalItem],
    scene_loader: Callable[[str], Scene],
    source: ProgramSource,
    settings: Optional[ExecSettings] = None,
    jobs: int = 1,
) -> Tuple[List[ItemResult], Timing]:
    """Run every item, generating each distinct query's program exactly once."""
    settings = settings or ExecSettings()
    programs: Dict[str, GenResult] = {}
    pre_s = 0.0
    for item in items:
        if item.query not in programs:
            start = time.perf_counter()
            programs[item.query] = source.program_for(item.query)
            pre_s += time.perf_counter() - start

    def run_item(item: EvalItem) -> ItemResult:
        generation = programs[item.query]
        if isinstance(generation, GenFailure):
            return ItemResult(error="program generation failed")
        try:
            scene = scene_loader(item.scene_ref)
        except EngineError as exc:
            return ItemResult(error=f"{type(exc).__name__}: {exc}")
        return _run_one(generation.program, scene, settings)

    start = time.perf_counter()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_item, items))
    else:
        results = [run_item(item) for item in items]
    exec_s = time.perf_counter() - start
    return results, Timing(pre_s, exec_s, len(items))


# --- metrics ---------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_json(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den > 0 else None


@dataclass
class MetricsReport:
    tpr: Optional[float]
    tnr: Optional[float]
    fpr: Optional[float]
    balanced_accuracy: Optional[float]
    acc_at_05: Optional[float]
    acc_inc: Optional[float]
    acc_exc: Optional[float]
    failure_rate: float
    counts: ConfusionCounts
    stiou_per_clip: Dict[str, float] = field(default_factory=dict)
    mstiou: Optional[float] = None
    acc_at_05_plus_n: Optional[float] = None
    runtime: Optional[Timing] = None

    def to_json(self) -> dict:
        doc = {
            "tpr": self.tpr,
            "tnr": self.tnr,
            "fpr": self.fpr,
            "balanced_accuracy": self.balanced_accuracy,
            "acc_at_0.5": self.acc_at_05,
            "acc_inc": self.acc_inc,
            "acc_exc": self.acc_exc,
            "failure_rate": self.failure_rate,
            "counts": self.counts.to_json(),
            "stiou_per_clip": dict(sorted(self.stiou_per_clip.items())),
            "mstiou": self.mstiou,
            "acc_at_0.5_plus_n": self.acc_at_05_plus_n,
        }
        if self.runtime is not None:
            doc["runtime"] = self.runtime.to_json()
        return doc

    def to_table(self) -> str:
        rows = [
            ("items scored", str(self.counts.total)),
            ("TP / TN / FP / FN", f"{self.counts.tp} / {self.counts.tn} / {self.counts.fp} / {self.counts.fn}"),
            ("TPR (Acc@0.5)", _fmt(self.tpr)),
            ("TNR (N-acc)", _fmt(self.tnr)),
            ("FPR", _fmt(self.fpr)),
            ("balanced accuracy", _fmt(self.balanced_accuracy)),
            ("acc incl. failures", _fmt(self.acc_inc)),
            ("acc excl. failures", _fmt(self.acc_exc)),
            ("failure rate", _fmt(self.failure_rate)),
        ]
        if self.mstiou is not None:
            rows.append(("mSTIoU", _fmt(self.mstiou)))
        if self.acc_at_05_plus_n is not None:
            rows.append(("Acc@0.5+n", _fmt(self.acc_at_05_plus_n)))
        if self.runtime is not None:
            rows.append(("pre-execution (s)", f"{self.runtime.pre_execution_s:.4f}"))
            rows.append(("execution (s)", f"{self.runtime.execution_s:.4f}"))
            rows.append(("fps", _fmt(self.runtime.fps)))
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name.ljust(width)}  {value}" for name, value in rows)


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def _best_iou(pred: Box, gt_boxes: Sequence[Box]) -> float:
    return max(iou(pred, gt) for gt in gt_boxes)


def score(
    items: Sequence[EvalItem],
    results: Sequence[ItemResult],
    iou_threshold: float = 0.5,
    runtime: Optional[Timing] = None,
) -> Tuple[ConfusionCounts, MetricsReport]:
    """Tally the confusion matrix and derive every report metric.

    A true positive requires IoU strictly above ``iou_threshold``; an
    IoU-tied prediction counts as a localization miss.
    """
    if len(items) != len(results):
        raise ValueError(f"got {len(items)} items but {len(results)} results")

    tp = tn = fp = fn = failed = 0
    for item, result in zip(items, results):
        if result.failed:
            failed += 1
            continue
        outcome = result.outcome
        if item.target_present:
            if isinstance(outcome, TargetBox) and _best_iou(outcome.box, item.gt_boxes) > iou_threshold:
                tp += 1
            else:
                fn += 1
        else:
            if isinstance(outcome, NoTarget):
                tn += 1
            else:
                fp += 1

    counts = ConfusionCounts(tp, tn, fp, fn)
    tpr = _ratio(tp, tp + fn)
    tnr = _ratio(tn, tn + fp)
    fpr = None if tnr is None else 1.0 - tnr
    balanced = None if (tpr is None or tnr is None) else (tpr + tnr) / 2.0
    correct = tp + tn
    report = MetricsReport(
        tpr=tpr,
        tnr=tnr,
        fpr=fpr,
        balanced_accuracy=balanced,
        acc_at_05=tpr,
        acc_inc=_ratio(correct, len(items)),
        acc_exc=_ratio(correct, len(items) - failed),
        failure_rate=failed / len(items) if items else 0.0,
        counts=counts,
        runtime=runtime,
    )
    _add_clip_metrics(items, results, report, iou_threshold)
    return counts, report


Frame = Tuple[Optional[Box], Optional[Box]]  # (prediction, ground truth)


def stiou(frames: Sequence[Frame]) -> float:
    """Spatio-temporal IoU over one clip's frames.

    A missing box contributes zero intersection and only its counterpart's
    area to the union.  A clip where every frame is empty on both sides is
    perfect agreement and scores 1.0 by convention (the formula is 0/0).
    """
    if not frames:
        raise ValueError("stiou requires at least one frame")
    inter_sum = 0.0
    union_sum = 0.0
    for pred, gt in frames:
        if pred is not None and gt is not None:
            inter = intersection_area(pred, gt)
            inter_sum += inter
            union_sum += pred.area + gt.area - inter
        elif pred is not None:
            union_sum += pred.area
        elif gt is not None:
            union_sum += gt.area
    if union_sum == 0.0:
        return 1.0
    return inter_sum / union_sum


def acc_at_05_plus_n(frames: Sequence[Frame], iou_threshold: float = 0.5) -> float:
    """Per-frame 0/1 accuracy: IoU above threshold, or a correct no-target call."""
    if not frames:
        raise ValueError("acc_at_05_plus_n requires at least one frame")
    credit = 0
    for pred, gt in frames:
        if pred is None and gt is None:
            credit += 1
        elif pred is not None and gt is not None and iou(pred, gt) > iou_threshold:
            credit += 1
    return credit / len(frames)


def _frames_of_clip(
    pairs: Sequence[Tuple[EvalItem, ItemResult]],
) -> List[Frame]:
    ordered = sorted(pairs, key=lambda p: (p[0].frame_index if p[0].frame_index is not None else 0))
    frames: List[Frame] = []
    for item, result in ordered:
        pred = result.outcome.box if isinstance(result.outcome, TargetBox) else None
        gt = item.gt_boxes[0] if item.gt_boxes else None
        frames.append((pred, gt))
    return frames


def _add_clip_metrics(
    items: Sequence[EvalItem],
    results: Sequence[ItemResult],
    report: MetricsReport,
    iou_threshold: float,
) -> None:
    clips: Dict[str, List[Tuple[EvalItem, ItemResult]]] = {}
    for item, result in zip(items, results):
        if item.clip_id is not None:
            clips.setdefault(item.clip_id, []).append((item, result))
    if not clips:
        return
    all_frames: List[Frame] = []
    for clip_id, pairs in clips.items():
        frames = _frames_of_clip(pairs)
        report.stiou_per_clip[clip_id] = stiou(frames)
        all_frames.extend(frames)
    report.mstiou = sum(report.stiou_per_clip.values()) / len(report.stiou_per_clip)
    report.acc_at_05_plus_n = acc_at_05_plus_n(all_frames, iou_threshold)
