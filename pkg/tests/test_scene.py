from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from refprog import (
    Box,
    ConsistencyError,
    MissingEntry,
    Proposal,
    SchemaError,
    iou,
    load_scene,
    lookup_detections,
    save_scene,
)
from refprog.scene import similarity_of, depth_of

from conftest import bx, make_scene, prop


def test_iou_identity():
    a = bx(5, 5, 10, 10)
    assert iou(a, a) == 1.0


def test_iou_disjoint():
    assert iou(bx(5, 5, 10, 10), bx(100, 100, 10, 10)) == 0.0


def test_iou_frozen_example():
    # oracle: intersection 5*10=50, union 100+100-50=150
    assert iou(bx(5, 5, 10, 10), bx(10, 5, 10, 10)) == pytest.approx(1 / 3, abs=1e-15)


boxes = st.builds(
    Box,
    x=st.floats(-100, 100),
    y=st.floats(-100, 100),
    w=st.floats(0.1, 50),
    h=st.floats(0.1, 50),
)


@given(boxes, boxes)
@settings(max_examples=300, deadline=None)
def test_iou_properties(a, b):
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert iou(b, a) == v
    assert iou(a, a) == pytest.approx(1.0, abs=1e-12)


def test_box_rejects_nonpositive_extent():
    with pytest.raises(ValueError):
        Box(0, 0, 0, 5)
    with pytest.raises(ValueError):
        Box(0, 0, 5, -1)


MINIMAL_SCENE = {
    "schema": "vro-scene/1",
    "image_id": "img0",
    "width": 300,
    "height": 200,
    "detections": {"cat": [{"id": "p0", "box": [50, 60, 20, 30], "score": 0.8}]},
}


def test_load_minimal_scene():
    scene = load_scene(json.dumps(MINIMAL_SCENE))
    assert scene.image_id == "img0"
    (p,) = lookup_detections(scene, "cat")
    assert p.box == bx(50, 60, 20, 30)
    assert p.source_label == "cat"


def test_load_rejects_wrong_schema():
    doc = dict(MINIMAL_SCENE, schema="vro-scene/9")
    with pytest.raises(SchemaError):
        load_scene(json.dumps(doc))


def test_load_rejects_missing_field():
    doc = {k: v for k, v in MINIMAL_SCENE.items() if k != "width"}
    with pytest.raises(SchemaError):
        load_scene(json.dumps(doc))


def test_load_rejects_unknown_depth_id():
    doc = dict(MINIMAL_SCENE, depth=[{"id": "ghost", "value": 0.5}])
    with pytest.raises(ConsistencyError):
        load_scene(json.dumps(doc))


def test_load_rejects_unknown_similarity_id():
    doc = dict(MINIMAL_SCENE, similarity=[{"id": "ghost", "text": "cat", "sim": 0.5}])
    with pytest.raises(ConsistencyError):
        load_scene(json.dumps(doc))


def test_load_rejects_out_of_range_similarity():
    doc = dict(MINIMAL_SCENE, similarity=[{"id": "p0", "text": "cat", "sim": 1.5}])
    with pytest.raises(SchemaError):
        load_scene(json.dumps(doc))


def test_duplicate_proposal_ids_rejected():
    doc = dict(
        MINIMAL_SCENE,
        detections={
            "cat": [{"id": "p0", "box": [50, 60, 20, 30], "score": 0.8}],
            "dog": [{"id": "p0", "box": [10, 10, 5, 5], "score": 0.5}],
        },
    )
    with pytest.raises(ConsistencyError):
        load_scene(json.dumps(doc))


def test_unknown_top_level_fields_preserved():
    doc = dict(MINIMAL_SCENE, provenance={"detector": "unit-test"})
    scene = load_scene(json.dumps(doc))
    assert scene.extras == {"provenance": {"detector": "unit-test"}}
    again = load_scene(save_scene(scene))
    assert again.extras == scene.extras


def test_round_trip_is_byte_stable():
    import random

    rng = random.Random(3)
    detections = {
        "cat": tuple(
            prop(f"p{i}", bx(rng.uniform(10, 290), rng.uniform(10, 190), 20, 20), rng.random(), "cat")
            for i in range(50)
        )
    }
    similarity = {(f"p{i}", "cat"): rng.uniform(-1, 1) for i in range(50)}
    depth = {f"p{i}": rng.random() for i in range(50)}
    scene = make_scene(detections, similarity, depth, width=300, height=200)
    first = save_scene(scene)
    second = save_scene(load_scene(first))
    assert first == second
    assert load_scene(first) == load_scene(second)


def test_lookup_distinguishes_empty_from_missing():
    scene = make_scene({"cat": []})
    assert lookup_detections(scene, "cat") == ()
    with pytest.raises(MissingEntry):
        lookup_detections(scene, "dog")


def test_lookup_sorted_by_descending_score():
    plist = [
        prop("a", bx(10, 10), 0.2, "cat"),
        prop("b", bx(20, 20), 0.9, "cat"),
        prop("c", bx(30, 30), 0.5, "cat"),
    ]
    scene = make_scene({"cat": plist})
    assert [p.id for p in lookup_detections(scene, "cat")] == ["b", "c", "a"]


def test_similarity_and_depth_lookups():
    scene = make_scene(
        {"cat": [prop("p0", bx(10, 10), 0.9, "cat")]},
        similarity={("p0", "cat"): 0.4},
        depth={"p0": 0.7},
    )
    assert similarity_of(scene, "p0", "cat") == 0.4
    assert depth_of(scene, "p0") == 0.7
    with pytest.raises(MissingEntry):
        similarity_of(scene, "p0", "dog")
    with pytest.raises(MissingEntry):
        depth_of(scene, "p1")


def test_detector_score_range_enforced():
    with pytest.raises(ValueError):
        Proposal("p0", bx(1, 1), 1.2, "cat")
