"""Acceptance suite: one test per release criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Tolerances are pinned here and nowhere else.
"""

from __future__ import annotations

import json
import math
import random
import subprocess
import sys
import time

import pytest

from refprog import (
    Box,
    CategoryBank,
    EvalItem,
    ExecSettings,
    GenFailure,
    GenSuccess,
    NoTarget,
    ScriptedEndpoint,
    TargetBox,
    VerifyConfig,
    acc_at_05_plus_n,
    calibrate_threshold,
    execute,
    generate_program,
    load_canned,
    load_scene,
    parse_program,
    run_batch,
    save_scene,
    score,
    stiou,
    uv_score,
    validate_program,
)
from refprog.evaluation import ItemResult, evaluate_items
from refprog.interp import (
    Verdict,
    exec_find_direction,
    exec_find_inside,
    exec_find_near,
    exec_relative_depth,
)
from refprog.progen import CannedSource, LlmSource, PromptTemplate
from refprog.validator import render_feedback

from conftest import ATTRIBUTES, bx, full_scene, make_scene, prop, random_valid_program_text
from test_validator import RULE_FIXTURES


def verdict(name: str) -> None:
    print(f"ACCEPTANCE PASS: {name}")


# ---------------------------------------------------------------- criterion 1


def test_validator_rule_coverage_and_soundness(tiny_bank):
    start = time.perf_counter()
    for rule, text in RULE_FIXTURES.items():
        diagnostics = validate_program(parse_program(text))
        assert [d.rule for d in diagnostics] == [rule], f"fixture for {rule} not isolated"

    rng = random.Random(101)
    labels = ("cat", "dog", "bird")
    texts = labels + ATTRIBUTES + tiny_bank.categories
    for _ in range(200):
        program = parse_program(random_valid_program_text(rng, labels))
        assert validate_program(program) == []
        scene = full_scene(rng, labels, texts)
        outcome = execute(program, scene, VerifyConfig(), tiny_bank)
        assert isinstance(outcome, (TargetBox, NoTarget))
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"took {elapsed:.2f}s"
    verdict(f"validator rule coverage (11 isolated rules, 200 random programs, {elapsed:.2f}s < 5s)")


# ---------------------------------------------------------------- criterion 2


def _reference_two_term(target: float, bank, tau: float) -> float:
    total = 0.0
    for s in bank:
        a = math.exp(target / tau)
        b = math.exp(s / tau)
        total += a / (a + b)
    return total / len(bank)


def test_pairwise_softmax_exactness():
    rng = random.Random(103)
    worst = 0.0
    for _ in range(10_000):
        k = rng.randint(1, 10)
        bank = [rng.uniform(-1, 1) for _ in range(k)]
        target = rng.uniform(-1, 1)
        tau = rng.uniform(0.005, 1.0)
        got = uv_score(target, bank, tau)
        want = _reference_two_term(target, bank, tau)
        worst = max(worst, abs(got - want))
        assert abs(got - want) <= 1e-12

    for s in (-1.0, -0.3, 0.0, 0.5, 1.0):
        assert uv_score(s, [s, s, s], 0.01) == 0.5  # exact symmetry

    for _ in range(2_000):
        bank = [rng.uniform(-1, 1) for _ in range(rng.randint(1, 6))]
        target = rng.uniform(-1, 1)
        tau = rng.uniform(0.1, 1.0)
        bump = rng.uniform(1e-3, 0.5)
        base = uv_score(target, bank, tau)
        assert uv_score(target + bump, bank, tau) > base
        lowered = [bank[0] - bump] + bank[1:]
        assert uv_score(target, lowered, tau) > base
    verdict(f"pairwise-softmax exactness (10k tuples, max |diff| = {worst:.2e} <= 1e-12)")


# ---------------------------------------------------------------- criterion 3


def test_threshold_calibration_oracle():
    scores10 = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0]
    assert calibrate_threshold(scores10, 10) == 0.9

    rng = random.Random(107)
    for _ in range(1_000):
        scores = [rng.random() for _ in range(rng.randint(1, 60))]
        n = len(scores)
        ranked = sorted(scores, reverse=True)
        for k in (1, 10, 30, 100):
            m = next(m for m in range(1, n + 1) if 100 * m >= k * n)
            assert calibrate_threshold(scores, k) == ranked[m - 1]
    verdict("threshold calibration equals the sorting oracle (1000 lists x k in {1,10,30,100})")


# ---------------------------------------------------------------- criterion 4


def _random_pairs(rng, count=4):
    def one(prefix, i):
        return prop(
            f"{prefix}{i}",
            bx(rng.uniform(0, 300), rng.uniform(0, 300), rng.uniform(5, 70), rng.uniform(5, 70)),
            0.9,
            prefix,
        )

    n_objs = rng.randint(0, count)
    n_refs = rng.randint(0, count)
    objs = tuple(one("o", i) for i in range(n_objs))
    refs = tuple(one("r", i) for i in range(n_refs))
    return objs, refs


def test_geometric_oracle_equivalence():
    rng = random.Random(109)
    direction_tests = {
        "left": lambda o, r: o.box.x < r.box.x,
        "right": lambda o, r: o.box.x > r.box.x,
        "top": lambda o, r: o.box.y < r.box.y,
        "bottom": lambda o, r: o.box.y > r.box.y,
    }
    for _ in range(500):
        objs, refs = _random_pairs(rng)

        for criteria, rel in direction_tests.items():
            got = exec_find_direction(objs, refs, criteria)
            want = tuple(o for o in objs if any(rel(o, r) for r in refs))
            assert got == want

        got = exec_find_near(objs, refs, scale=1.0)
        want = tuple(
            o
            for o in objs
            if any(
                math.hypot(o.box.x - r.box.x, o.box.y - r.box.y)
                <= (math.hypot(o.box.w, o.box.h) + math.hypot(r.box.w, r.box.h)) / 2
                for r in refs
            )
        )
        assert got == want

        def inter(a, b):
            ax0, ay0, ax1, ay1 = a.corners()
            bx0, by0, bx1, by1 = b.corners()
            w = min(ax1, bx1) - max(ax0, bx0)
            h = min(ay1, by1) - max(ay0, by0)
            return w * h if w > 0 and h > 0 else 0.0

        got = exec_find_inside(objs, refs, ratio=0.9)
        want = tuple(
            o for o in objs
            if any(inter(o.box, r.box) > 0 and inter(o.box, r.box) / (o.box.w * o.box.h) >= 0.9
                   for r in refs)
        )
        assert got == want

        depths = {p.id: rng.random() for p in objs + refs}
        scene = make_scene({"o": objs, "r": refs}, depth=depths)
        for criteria, cmp in (("front", lambda a, b: a > b), ("behind", lambda a, b: a < b)):
            got = exec_relative_depth(objs, refs, criteria, scene)
            want = tuple(o for o in objs if any(cmp(depths[o.id], depths[r.id]) for r in refs))
            assert got == want
    verdict("geometric operators equal the brute-force pair oracle (500 scenes x 4 operators)")


# ---------------------------------------------------------------- criterion 5

FIG_TOP = "BOXES0 = FIND(object_name='elephant')\nFINAL_RESULT = RESULT(object=BOXES0)"
FIG_BOTTOM = (
    "BOXES0 = FIND(object_name='person')\n"
    "BOXES1 = FIND(object_name='elephant')\n"
    "BOXES2 = FIND_DIRECTION(object=BOXES0, reference_object=BOXES1, criteria='left')\n"
    "FINAL_RESULT = RESULT(object=BOXES2)"
)
BANK = CategoryBank(("zebra",))
CFG = VerifyConfig(temperature=0.05)


def _fig_scenes():
    no_elephant = make_scene({"elephant": []}, image_id="fig-top")
    person = prop("per0", bx(220, 150, 40, 80), 0.95, "person")
    eleph = prop("ele0", bx(80, 150, 90, 70), 0.9, "elephant")
    sims = {
        ("per0", "person"): 0.9, ("per0", "zebra"): 0.1,
        ("ele0", "elephant"): 0.9, ("ele0", "zebra"): 0.1,
    }
    person_right = make_scene({"person": [person], "elephant": [eleph]}, sims, image_id="fig-bottom")
    return no_elephant, person_right


def _outcome_fields(outcome):
    return (
        type(outcome).__name__,
        outcome.box if isinstance(outcome, TargetBox) else None,
        outcome.trace.terminated_at,
    )


def test_early_exit_no_target(tmp_path):
    no_elephant, person_right = _fig_scenes()

    for text, scene, stop_line in ((FIG_TOP, no_elephant, 1), (FIG_BOTTOM, person_right, 3)):
        program = parse_program(text)
        assert validate_program(program) == []
        outcome = execute(program, scene, CFG, BANK)
        assert isinstance(outcome, NoTarget)
        assert outcome.trace.terminated_at == stop_line
        after = [s for s in outcome.trace.steps if s.line > stop_line]
        assert after and all(s.verdict is Verdict.SKIPPED and s.output_size is None for s in after)

        relaxed = execute(program, scene, CFG, BANK, early_exit=False)
        assert _outcome_fields(relaxed) == _outcome_fields(outcome)

    # exit code 3 through the real CLI
    program_path = tmp_path / "fig_top.vro"
    program_path.write_text(FIG_TOP)
    scene_path = tmp_path / "fig_top.json"
    scene_path.write_bytes(save_scene(no_elephant))
    bank_path = tmp_path / "bank.txt"
    bank_path.write_text("zebra\n")
    conf = tmp_path / "engine.conf"
    conf.write_text(f"temperature = 0.05\ncategory_bank = {bank_path}\n")
    proc = subprocess.run(
        [sys.executable, "-m", "refprog", "--config", str(conf), "exec",
         str(program_path), str(scene_path), "--trace"],
        capture_output=True,
    )
    assert proc.returncode == 3, proc.stderr.decode()
    doc = json.loads(proc.stdout)
    assert doc["outcome"] == "no_target" and doc["terminated_at"] == 1

    # latency: early exit must not be slower over a 1000-scene no-target batch
    heavy_program = parse_program(
        "A = FIND(object_name='absent')\n"
        "B = FIND(object_name='crowd')\n"
        "C = FIND_NEAR(object=B, reference_object=B)\n"
        "FINAL_RESULT = RESULT(object=C)"
    )
    crowd = [prop(f"c{i}", bx(10 + 5 * i, 150, 20, 20), 0.9, "crowd") for i in range(16)]
    sims = {}
    for p in crowd:
        sims[(p.id, "crowd")] = 0.9
        sims[(p.id, "zebra")] = 0.1
    heavy_scene = make_scene({"absent": [], "crowd": crowd}, sims, image_id="heavy")
    scenes = [heavy_scene] * 1000

    def run_all(early_exit: bool) -> float:
        start = time.perf_counter()
        for s in scenes:
            outcome = execute(heavy_program, s, CFG, BANK, early_exit=early_exit)
            assert isinstance(outcome, NoTarget) and outcome.trace.terminated_at == 1
        return time.perf_counter() - start

    enabled = run_all(True)
    disabled = run_all(False)
    assert enabled <= disabled, f"early exit slower: {enabled:.3f}s vs {disabled:.3f}s"
    verdict(
        "early-exit/no-target (both fixtures stop at the right line, CLI exit 3, "
        f"enabled {enabled:.3f}s <= disabled {disabled:.3f}s on 1000 scenes)"
    )


# ---------------------------------------------------------------- criterion 6


class _PacedEndpoint(ScriptedEndpoint):
    """Scripted endpoint with a fixed per-call cost, standing in for LLM latency."""

    def complete(self, messages):
        time.sleep(0.005)
        return super().complete(messages)


def test_amortization_one_generation_per_query():
    program_text = (
        "B0 = FIND(object_name='cat')\n"
        "B1 = FIND(object_name='dog')\n"
        "B2 = FIND_NEAR(object=B0, reference_object=B1)\n"
        "FINAL_RESULT = RESULT(object=B2)"
    )
    template = PromptTemplate("{{exemplars}}\nQuery: {{query}}\n{{feedback}}Program:\n")

    cat = prop("p0", bx(30, 40, 20, 20), 0.9, "cat")
    dog = prop("p1", bx(45, 40, 20, 20), 0.9, "dog")
    sims = {(pid, text): (0.9 if pid_label == text else 0.1)
            for pid, pid_label in (("p0", "cat"), ("p1", "dog"))
            for text in ("cat", "dog", "zebra")}
    scene = make_scene({"cat": [cat], "dog": [dog]}, sims)
    settings = ExecSettings(cfg=CFG, bank=BANK)

    pre_times = {}
    for n in (1, 10, 100):
        best = math.inf
        calls = []
        for _ in range(5):
            endpoint = _PacedEndpoint([program_text], repeat_last=True)
            run = run_batch("cat near dog", [scene] * n, LlmSource(template, endpoint), settings)
            assert endpoint.calls == 1, f"N={n}: generation called {endpoint.calls} times"
            assert all(not r.failed for r in run.results)
            calls.append(endpoint.calls)
            best = min(best, run.timing.pre_execution_s)
        pre_times[n] = best
    spread = max(pre_times.values()) / min(pre_times.values())
    assert spread < 2.0, f"pre-execution times scale with N: {pre_times}"
    verdict(
        "amortization (1 generation call at N=1/10/100; pre-execution spread "
        f"{spread:.2f}x < 2x: {', '.join(f'N={n}: {t*1e3:.1f}ms' for n, t in pre_times.items())})"
    )


# ---------------------------------------------------------------- criterion 7


def test_metrics_identities():
    from refprog.interp import ExecutionTrace

    trace = ExecutionTrace((), None)
    hit = lambda: ItemResult(outcome=TargetBox(Box(50, 50, 20, 20), trace))  # noqa: E731
    wide = lambda: ItemResult(outcome=TargetBox(Box(200, 200, 20, 20), trace))  # noqa: E731
    absent = lambda: ItemResult(outcome=NoTarget(trace))  # noqa: E731
    present_item = EvalItem("q", "s", (Box(50, 50, 20, 20),))
    absent_item = EvalItem("q", "s", ())

    # 8 items covering all four confusion cells: 2 TP, 2 FN, 3 TN, 1 FP
    items = [present_item] * 4 + [absent_item] * 4
    results = [hit(), hit(), wide(), absent(), absent(), absent(), absent(), wide()]
    counts, report = score(items, results)
    assert (counts.tp, counts.fn, counts.tn, counts.fp) == (2, 2, 3, 1)
    assert report.tpr == 2 / 4 and report.tnr == 3 / 4
    assert abs(report.fpr - (1 - report.tnr)) <= 1e-12
    assert abs(report.balanced_accuracy - (report.tpr + report.tnr) / 2) <= 1e-12
    assert report.acc_inc <= report.acc_exc

    # failures push the inclusive figure strictly below the exclusive one
    items_f = items + [present_item, absent_item]
    results_f = results + [ItemResult(error="x"), ItemResult(error="x")]
    _, report_f = score(items_f, results_f)
    assert report_f.failure_rate == 0.2
    assert report_f.acc_inc < report_f.acc_exc

    frames = [(bx(10, 10, 10, 10), bx(10, 10, 10, 10)), (None, bx(5, 5, 10, 5))]
    assert stiou(frames) == 2 / 3

    box = bx(50, 50, 20, 20)
    assert acc_at_05_plus_n([(box, box)]) == 1.0
    assert acc_at_05_plus_n([(None, None), (bx(50, 50), bx(90, 90))]) == 0.5
    assert acc_at_05_plus_n([(box, None)]) == 0.0
    verdict("metrics identities (hand-tallied confusion, STIoU = 2/3 exact, Acc@0.5+n rule)")


# ---------------------------------------------------------------- criterion 8


def _oracle_suite(tmp_path):
    """30 scenes with programmatically known answers; half are no-target."""
    scenes_dir = tmp_path / "scenes"
    scenes_dir.mkdir()
    canned = {
        "the elephant": (
            "B0 = FIND(object_name='elephant')\nFINAL_RESULT = RESULT(object=B0)"
        ),
        "person left of the elephant": (
            "B0 = FIND(object_name='person')\n"
            "B1 = FIND(object_name='elephant')\n"
            "B2 = FIND_DIRECTION(object=B0, reference_object=B1, criteria='left')\n"
            "FINAL_RESULT = RESULT(object=B2)"
        ),
        "the red ball": (
            "B0 = FIND(object_name='ball')\n"
            "B1 = PROPERTY(object=B0, attribute='red')\n"
            "FINAL_RESULT = RESULT(object=B1)"
        ),
    }
    items = []
    for i in range(30):
        kind = i % 3
        present = i % 2 == 0
        image_id = f"scene{i:02d}"
        if kind == 0:
            if present:
                box = Box(100 + i, 100, 40, 40)
                e = prop("e0", box, 0.9, "elephant")
                scene = make_scene({"elephant": [e]},
                                   {("e0", "elephant"): 0.9, ("e0", "zebra"): 0.1},
                                   image_id=image_id)
                gt = box
            else:
                scene = make_scene({"elephant": []}, image_id=image_id)
                gt = None
            query = "the elephant"
        elif kind == 1:
            px = 60.0 if present else 240.0
            person = prop("p0", bx(px, 150, 30, 60), 0.95, "person")
            eleph = prop("e0", bx(150, 150, 80, 60), 0.9, "elephant")
            sims = {("p0", "person"): 0.9, ("p0", "zebra"): 0.1,
                    ("e0", "elephant"): 0.9, ("e0", "zebra"): 0.1}
            scene = make_scene({"person": [person], "elephant": [eleph]}, sims, image_id=image_id)
            gt = person.box if present else None
            query = "person left of the elephant"
        else:
            if present:
                red = prop("b0", bx(80, 80 + i, 24, 24), 0.6, "ball")
                blue = prop("b1", bx(180, 80, 24, 24), 0.4, "ball")
                sims = {("b0", "ball"): 0.8, ("b0", "zebra"): 0.1, ("b0", "red"): 0.9,
                        ("b1", "ball"): 0.8, ("b1", "zebra"): 0.1, ("b1", "red"): -0.5}
                scene = make_scene({"ball": [red, blue]}, sims, image_id=image_id)
                gt = red.box
            else:
                scene = make_scene({"ball": []}, image_id=image_id)
                gt = None
            query = "the red ball"
        ref = f"{image_id}.json"
        (scenes_dir / ref).write_bytes(save_scene(scene))
        items.append(EvalItem(query, ref, (gt,) if gt else ()))
    canned_text = "\n".join(json.dumps({"query": q, "program": p}) for q, p in canned.items())
    return scenes_dir, items, canned_text


def test_end_to_end_oracle_scenes(tmp_path):
    start = time.perf_counter()
    scenes_dir, items, canned_text = _oracle_suite(tmp_path)
    source = CannedSource(load_canned(canned_text))
    settings = ExecSettings(cfg=CFG, bank=BANK)
    results, timing = evaluate_items(
        items, lambda ref: load_scene((scenes_dir / ref).read_bytes()), source, settings
    )
    counts, report = score(items, results, runtime=timing)
    assert report.failure_rate == 0.0
    assert (counts.tp, counts.tn, counts.fp, counts.fn) == (15, 15, 0, 0)
    assert report.balanced_accuracy == 1.0
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    verdict(f"end-to-end oracle suite (30 scenes, balanced accuracy 1.0, {elapsed:.2f}s < 10s)")


# ---------------------------------------------------------------- criterion 9


def test_repair_loop():
    valid = "B0 = FIND(object_name='cat')\nFINAL_RESULT = RESULT(object=B0)"
    invalid_1 = "B0 = FIND(object_name='cat')\nFINAL_RESULT = RESULT(object=OOPS)"
    invalid_2 = "B0 = FIND(object_name='cat')\nB0 = FIND(object_name='cat')\nFINAL_RESULT = RESULT(object=B0)"
    template = PromptTemplate("{{exemplars}}\nQuery: {{query}}\n{{feedback}}Program:\n")

    endpoint = ScriptedEndpoint([invalid_1, invalid_2, valid])
    result = generate_program("the cat", template, endpoint, max_iters=5)
    assert isinstance(result, GenSuccess)
    assert result.iterations_used == 3
    assert len(result.attempts) == 3

    expected_feedback = render_feedback(
        validate_program(parse_program(invalid_1)), invalid_1
    )
    second_prompt = endpoint.prompts[1][0]["content"]
    assert expected_feedback in second_prompt  # verbatim diagnostics fed back

    always_bad = ScriptedEndpoint([invalid_1], repeat_last=True)
    failure = generate_program("the cat", template, always_bad, max_iters=5)
    assert isinstance(failure, GenFailure)
    assert len(failure.attempts) == 5
    assert always_bad.calls == 5
    verdict("repair loop (success at iteration 3 with verbatim feedback; failure after exactly 5)")
