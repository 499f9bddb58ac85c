"""Numerical verification: uncertainty scoring, threshold calibration, filters.

``uv_score`` rates how confidently a proposal crop matches a text label by
averaging, over a bank of common distractor categories, the two-way softmax
probability that the crop is the label rather than the distractor::

    score = (1/K) * sum_k  exp(s_t/t) / (exp(s_t/t) + exp(s_k/t))

with ``s_t`` the crop-label cosine similarity, ``s_k`` the crop-distractor
similarity, and ``t`` a temperature.  It is computed here in the equivalent
logistic form ``sigmoid((s_t - s_k)/t)`` for numerical stability; the score
depends only on similarity differences.

``calibrate_threshold`` turns a list of such scores collected on an auxiliary
dataset into a per-label acceptance cutoff: the value such that exactly the
top k% of auxiliary samples score at or above it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

from .errors import DomainError, SchemaError
from .scene import Proposal, Scene, similarity_of

THRESHOLDS_SCHEMA = "vro-thresholds/1"


@dataclass(frozen=True)
class CategoryBank:
    """The distractor categories scored against (the bank size is ``len(categories)``)."""

    categories: Tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.categories:
            raise DomainError("category bank must not be empty")
        lowered = [c.lower() for c in self.categories]
        if len(set(lowered)) != len(lowered):
            raise DomainError("category bank contains duplicates")

    def without(self, label: str) -> Tuple[str, ...]:
        """Categories with the target label removed (case-insensitive exact match)."""
        needle = label.lower()
        return tuple(c for c in self.categories if c.lower() != needle)


@dataclass(frozen=True)
class VerifyConfig:
    """Engine-wide numeric knobs; every score comparison in the engine is inclusive (>=)."""

    temperature: float = 0.01
    fixed_threshold: float = 0.5
    top_k_percent: float = 10.0
    property_weight: float = 0.5  # weight of the softmax term in the PROPERTY combiner
    property_beta: float = 1.0  # PROPERTY keeps candidates with combined score >= beta/n
    detection_floor: float = 0.2
    near_scale: float = 1.0  # FIND_NEAR: distance <= near_scale * mean diagonal
    inside_ratio: float = 0.9  # FIND_INSIDE: intersection / object area >= inside_ratio
    property_allow_empty: bool = False
    result_rank: str = "detector"  # how RESULT breaks ties: "detector" | "uv"

    def __post_init__(self) -> None:
        if not self.temperature > 0:
            raise DomainError("temperature must be > 0")
        if not (0.0 < self.fixed_threshold < 1.0):
            raise DomainError("fixed_threshold must be in (0, 1)")
        if not (0.0 < self.top_k_percent <= 100.0):
            raise DomainError("top_k_percent must be in (0, 100]")
        if not (0.0 <= self.property_weight <= 1.0):
            raise DomainError("property_weight must be in [0, 1]")
        if not (0.0 <= self.detection_floor <= 1.0):
            raise DomainError("detection_floor must be in [0, 1]")
        if self.result_rank not in ("detector", "uv"):
            raise DomainError("result_rank must be 'detector' or 'uv'")


@dataclass(frozen=True)
class ThresholdTable:
    """Per-label adaptive acceptance thresholds, with calibration provenance."""

    thresholds: Mapping[str, float]
    k: float
    aux_dataset_id: Optional[str] = None
    n: Optional[int] = None

    def __post_init__(self) -> None:
        normalized = {}
        for label, delta in self.thresholds.items():
            if not (0.0 < delta < 1.0):
                raise DomainError(f"threshold for {label!r} must be in (0, 1), got {delta}")
            normalized[label.lower()] = float(delta)
        object.__setattr__(self, "thresholds", normalized)

    def get(self, label: str) -> Optional[float]:
        return self.thresholds.get(label.lower())


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def uv_score(sims_target: float, sims_bank: Sequence[float], temperature: float) -> float:
    """Average two-way softmax probability of the target over the bank.

    Equals 0.5 exactly when the target similarity ties every bank similarity;
    strictly increasing in ``sims_target`` and decreasing in each bank entry
    (up to float saturation for |difference|/temperature beyond ~37).
    """
    if not sims_bank:
        raise DomainError("uv_score requires a non-empty similarity bank")
    if not temperature > 0:
        raise DomainError("temperature must be > 0")
    total = 0.0
    for s_k in sims_bank:
        total += _sigmoid((sims_target - s_k) / temperature)
    return total / len(sims_bank)


def calibrate_threshold(scores: Sequence[float], k_percent: float) -> float:
    """The ceil(k% * n)-th largest of ``scores``: the top-k% cutoff value."""
    if not scores:
        raise DomainError("calibrate_threshold requires at least one score")
    if not (0.0 < k_percent <= 100.0):
        raise DomainError("k_percent must be in (0, 100]")
    n = len(scores)
    index = math.ceil(Fraction(k_percent) * n / 100)  # exact: no float rounding at integers
    ranked = sorted(scores, reverse=True)
    return ranked[index - 1]


def _bank_sims(scene: Scene, proposal: Proposal, categories: Sequence[str]) -> list[float]:
    return [similarity_of(scene, proposal.id, c) for c in categories]


def proposal_uv_score(
    proposal: Proposal,
    label: str,
    scene: Scene,
    bank: CategoryBank,
    cfg: VerifyConfig,
) -> float:
    """uv_score of one proposal against ``label``, with the label dropped from the bank."""
    categories = bank.without(label)
    if not categories:
        raise DomainError(f"category bank contains only the target label {label!r}")
    target_sim = similarity_of(scene, proposal.id, label)
    return uv_score(target_sim, _bank_sims(scene, proposal, categories), cfg.temperature)


def uv_filter(
    proposals: Sequence[Proposal],
    label: str,
    scene: Scene,
    bank: CategoryBank,
    cfg: VerifyConfig,
    table: Optional[ThresholdTable] = None,
) -> Tuple[Proposal, ...]:
    """Keep exactly the proposals whose uv_score reaches the label's threshold.

    The threshold is the calibrated per-label value when the table has one,
    else ``cfg.fixed_threshold``.  Input order is preserved; the result is a
    subset of the input and the filter is idempotent.
    """
    if not proposals:
        return ()
    delta = None if table is None else table.get(label)
    if delta is None:
        delta = cfg.fixed_threshold
    return tuple(p for p in proposals if proposal_uv_score(p, label, scene, bank, cfg) >= delta)


def property_filter(
    proposals: Sequence[Proposal],
    attribute: str,
    scene: Scene,
    cfg: VerifyConfig,
) -> Tuple[Proposal, ...]:
    """Keep candidates matching an attribute, by softmaxed similarity + detector score.

    The attribute similarities of the n candidates are softmaxed against each
    other, blended with the detector score (``property_weight`` on the softmax
    side), and thresholded at ``property_beta / n`` -- the uniform-chance
    level, so the cutoff adapts to the candidate count.  If nothing survives,
    the single best candidate is returned instead, unless
    ``property_allow_empty`` is set: attribute filtering refines a set, it
    does not by itself assert the target's absence.
    """
    if not proposals:
        raise DomainError("property_filter requires at least one candidate")
    sims = [similarity_of(scene, p.id, attribute) for p in proposals]
    peak = max(s / cfg.temperature for s in sims)
    weights = [math.exp(s / cfg.temperature - peak) for s in sims]
    total = sum(weights)
    combined = [
        cfg.property_weight * (w / total) + (1.0 - cfg.property_weight) * p.detector_score
        for w, p in zip(weights, proposals)
    ]
    cutoff = cfg.property_beta / len(proposals)
    kept = tuple(p for p, c in zip(proposals, combined) if c >= cutoff)
    if kept or cfg.property_allow_empty:
        return kept
    best = max(range(len(proposals)), key=lambda i: (combined[i], proposals[i].id))
    return (proposals[best],)


# --- threshold table and auxiliary score serialization ------------------------


def calibrate_table(
    aux_scores: Mapping[str, Sequence[float]],
    k_percent: float,
    aux_dataset_id: Optional[str] = None,
) -> ThresholdTable:
    """Calibrate one threshold per label from auxiliary uv scores."""
    thresholds = {label: calibrate_threshold(scores, k_percent) for label, scores in aux_scores.items()}
    total = sum(len(s) for s in aux_scores.values())
    return ThresholdTable(thresholds, k_percent, aux_dataset_id, total or None)


def load_aux_scores(data: Union[bytes, str]) -> Dict[str, list[float]]:
    """Parse the auxiliary score JSON: ``{label: [score, ...]}``."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"aux score file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("aux score file must be a JSON object of label -> [scores]")
    out: Dict[str, list[float]] = {}
    for label, scores in doc.items():
        if not (
            isinstance(scores, list)
            and scores
            and all(isinstance(s, (int, float)) and not isinstance(s, bool) for s in scores)
        ):
            raise SchemaError(f"aux scores for {label!r} must be a non-empty list of numbers")
        out[label] = [float(s) for s in scores]
    return out


def load_threshold_table(data: Union[bytes, str]) -> ThresholdTable:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"threshold file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema") != THRESHOLDS_SCHEMA:
        raise SchemaError(f"threshold file must declare schema {THRESHOLDS_SCHEMA!r}")
    thresholds = doc.get("thresholds")
    if not isinstance(thresholds, dict):
        raise SchemaError("threshold file must carry a 'thresholds' object")
    k = doc.get("k")
    if not isinstance(k, (int, float)) or isinstance(k, bool):
        raise SchemaError("threshold file must carry a numeric 'k'")
    try:
        return ThresholdTable(
            {label: float(v) for label, v in thresholds.items()},
            float(k),
            doc.get("aux_dataset_id"),
            doc.get("n"),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad threshold value: {exc}") from None


def save_threshold_table(table: ThresholdTable) -> bytes:
    doc: Dict[str, Any] = {
        "schema": THRESHOLDS_SCHEMA,
        "k": table.k,
        "aux_dataset_id": table.aux_dataset_id,
        "thresholds": dict(sorted(table.thresholds.items())),
    }
    if table.n is not None:
        doc["n"] = table.n
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")
