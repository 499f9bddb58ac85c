"""Command-line interface.

Exit codes are part of the contract so shell pipelines can branch on them:

* 0  success (``validate``: program valid; ``exec``: a target box was found)
* 1  ``validate`` found diagnostics
* 2  usage error
* 3  ``exec``: explicit no-target answer (a first-class result, not an error)
* 4  ``gen``: no valid program within the iteration budget
* 10 engine/data errors (bad schema, missing scene entries, unreadable files)
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .config import Settings, load_settings
from .errors import EngineError, TransportError
from .evaluation import ExecSettings, EvalItem, evaluate_items, load_items, run_batch, score
from .parser import ProgramSyntaxError, parse_program
from .progen import (
    CannedSource,
    GenFailure,
    HttpChatEndpoint,
    LlmSource,
    ProgramSource,
    default_template,
    generate_program,
    load_canned,
)
from .scene import Scene, TargetBox, load_scene
from .validator import diagnostics_to_json, render_feedback, validate_program
from .verify import calibrate_table, load_aux_scores, load_threshold_table, save_threshold_table

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_NO_TARGET = 3
EXIT_GEN_FAILURE = 4
EXIT_ERROR = 10


def _fail(message: str) -> int:
    print(message, file=sys.stderr)
    return EXIT_ERROR


def _read_text(path: str) -> str:
    return Path(path).read_text("utf-8")


def _exec_settings(settings: Settings, table_path: Optional[str], *, forced: bool = False,
                   early_exit: bool = True) -> ExecSettings:
    table = load_threshold_table(Path(table_path).read_bytes()) if table_path else None
    return ExecSettings(
        cfg=settings.verify_config(),
        bank=settings.bank(),
        table=table,
        positions=settings.positions(),
        early_exit=early_exit,
        forced=forced,
    )


def _program_source(settings: Settings, canned_path: Optional[str]) -> ProgramSource:
    if canned_path:
        return CannedSource(load_canned(Path(canned_path).read_bytes()))
    if not settings.endpoint_url:
        raise EngineError("no program source: pass --canned FILE or configure an endpoint URL")
    endpoint = HttpChatEndpoint(
        settings.endpoint_url, model=settings.endpoint_model, api_key=settings.endpoint_auth
    )
    return LlmSource(default_template(), endpoint, settings.max_iters)


def _cmd_validate(args: argparse.Namespace, settings: Settings) -> int:
    try:
        program = parse_program(_read_text(args.program))
    except ProgramSyntaxError as exc:
        if args.json:
            print(json.dumps({"valid": False, "parse_errors": [str(e) for e in exc.errors]}, indent=2))
        else:
            for error in exc.errors:
                print(str(error), file=sys.stderr)
        return EXIT_INVALID
    diagnostics = validate_program(program)
    if args.json:
        print(json.dumps({"valid": not diagnostics, "diagnostics": diagnostics_to_json(diagnostics)}, indent=2))
    elif diagnostics:
        for d in diagnostics:
            print(f"line {d.line} [{d.rule.value}]: {d.message} (fix: {d.hint})", file=sys.stderr)
    return EXIT_OK if not diagnostics else EXIT_INVALID


def _cmd_exec(args: argparse.Namespace, settings: Settings) -> int:
    program = parse_program(_read_text(args.program))
    diagnostics = validate_program(program)
    if diagnostics:
        print(render_feedback(diagnostics, _read_text(args.program)), file=sys.stderr)
        return EXIT_ERROR
    scene = load_scene(Path(args.scene).read_bytes())
    exec_settings = _exec_settings(settings, args.thresholds, forced=args.forced,
                                   early_exit=not args.no_early_exit)
    outcome = exec_settings.run(program, scene)
    doc = {
        "outcome": "target" if isinstance(outcome, TargetBox) else "no_target",
        "box": outcome.box.to_list() if isinstance(outcome, TargetBox) else None,
        "terminated_at": outcome.trace.terminated_at,
        "config": settings.to_json(),
    }
    if args.trace:
        doc["trace"] = outcome.trace.to_json()
    print(json.dumps(doc, indent=2))
    return EXIT_OK if isinstance(outcome, TargetBox) else EXIT_NO_TARGET


def _cmd_gen(args: argparse.Namespace, settings: Settings) -> int:
    if args.canned:
        source = _program_source(settings, args.canned)
        result = source.program_for(args.query)
    else:
        if args.endpoint:
            settings.endpoint_url = args.endpoint
        if not settings.endpoint_url:
            print("gen: pass --canned FILE or --endpoint URL", file=sys.stderr)
            return EXIT_USAGE
        endpoint = HttpChatEndpoint(
            settings.endpoint_url, model=settings.endpoint_model, api_key=settings.endpoint_auth
        )
        result = generate_program(args.query, default_template(), endpoint, settings.max_iters)
    if isinstance(result, GenFailure):
        print(f"gen: no valid program for {args.query!r} "
              f"after {len(result.attempts) or settings.max_iters} attempt(s)", file=sys.stderr)
        for error in result.last_errors:
            print(f"  {error}", file=sys.stderr)
        return EXIT_GEN_FAILURE
    print(result.program_text)
    return EXIT_OK


def _load_scene_dir(path: str) -> List[Scene]:
    files = sorted(Path(path).glob("*.json"))
    if not files:
        raise EngineError(f"no *.json scene files under {path!r}")
    return [load_scene(f.read_bytes()) for f in files]


def _cmd_batch(args: argparse.Namespace, settings: Settings) -> int:
    scenes = _load_scene_dir(args.scene_dir)
    source = _program_source(settings, args.canned)
    exec_settings = _exec_settings(settings, args.thresholds, forced=args.forced,
                                   early_exit=not args.no_early_exit)
    run = run_batch(args.query, scenes, source, exec_settings, jobs=settings.jobs)
    outcomes = []
    for scene, result in zip(scenes, run.results):
        if result.failed:
            outcomes.append({"image_id": scene.image_id, "status": "failed", "error": result.error})
        elif isinstance(result.outcome, TargetBox):
            outcomes.append(
                {"image_id": scene.image_id, "status": "target", "box": result.outcome.box.to_list()}
            )
        else:
            outcomes.append(
                {
                    "image_id": scene.image_id,
                    "status": "no_target",
                    "terminated_at": result.outcome.trace.terminated_at,
                }
            )
    doc = {
        "query": args.query,
        "outcomes": outcomes,
        "runtime": run.timing.to_json(),
        "config": settings.to_json(),
    }
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def _verdict_rows(items: Sequence[EvalItem], results) -> List[dict]:
    rows = []
    for item, result in zip(items, results):
        if result.failed:
            predicted, box = "failed", None
        elif isinstance(result.outcome, TargetBox):
            predicted, box = "target", result.outcome.box.to_list()
        else:
            predicted, box = "no_target", None
        rows.append(
            {
                "query": item.query,
                "scene": item.scene_ref,
                "target_present": item.target_present,
                "predicted": predicted,
                "box": json.dumps(box),
                "error": result.error or "",
            }
        )
    return rows


def _cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    items = load_items(Path(args.items).read_bytes())
    root = Path(args.scenes_root) if args.scenes_root else Path(args.items).parent

    def loader(ref: str) -> Scene:
        return load_scene((root / ref).read_bytes())

    source = _program_source(settings, args.canned)
    exec_settings = _exec_settings(settings, args.thresholds, forced=args.forced,
                                   early_exit=not args.no_early_exit)
    results, timing = evaluate_items(items, loader, source, exec_settings, jobs=settings.jobs)
    _, report = score(items, results, runtime=timing)
    if args.csv:
        with open(args.csv, "w", newline="") as handle:
            rows = _verdict_rows(items, results)
            writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    if args.json:
        doc = report.to_json()
        doc["config"] = settings.to_json()
        print(json.dumps(doc, indent=2))
    else:
        print(report.to_table())
    return EXIT_OK


def _cmd_calibrate(args: argparse.Namespace, settings: Settings) -> int:
    aux = load_aux_scores(Path(args.aux_scores).read_bytes())
    table = calibrate_table(aux, args.k if args.k is not None else settings.top_k_percent,
                            aux_dataset_id=args.dataset_id)
    payload = save_threshold_table(table).decode("utf-8")
    if args.output:
        Path(args.output).write_text(payload, "utf-8")
    else:
        print(payload, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="refprog", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="flat KEY=VALUE config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a program file; exit 0 iff valid")
    p.add_argument("program")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("exec", help="run a program against one scene")
    p.add_argument("program")
    p.add_argument("scene")
    p.add_argument("--trace", action="store_true", help="include the execution trace")
    p.add_argument("--thresholds", help="threshold table JSON")
    p.add_argument("--forced", action="store_true", help="forced-prediction evaluation mode")
    p.add_argument("--no-early-exit", action="store_true")
    p.set_defaults(func=_cmd_exec)

    p = sub.add_parser("gen", help="generate a program for a query")
    p.add_argument("query")
    p.add_argument("--canned", help="canned program JSONL")
    p.add_argument("--endpoint", help="chat-completions endpoint URL")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("batch", help="run one query over a directory of scenes")
    p.add_argument("query")
    p.add_argument("scene_dir")
    p.add_argument("--canned")
    p.add_argument("--thresholds")
    p.add_argument("--forced", action="store_true")
    p.add_argument("--no-early-exit", action="store_true")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=_cmd_batch)

    p = sub.add_parser("eval", help="score an items JSONL against scenes")
    p.add_argument("items")
    p.add_argument("--scenes-root", help="base directory for scene refs (default: items dir)")
    p.add_argument("--canned")
    p.add_argument("--thresholds")
    p.add_argument("--forced", action="store_true")
    p.add_argument("--no-early-exit", action="store_true")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--json", action="store_true")
    p.add_argument("--csv", help="write per-item verdicts to this CSV file")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("calibrate", help="build a threshold table from auxiliary scores")
    p.add_argument("aux_scores")
    p.add_argument("--k", type=float, default=None, help="top-k percent (default from config)")
    p.add_argument("--dataset-id", default=None)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_calibrate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {"jobs": getattr(args, "jobs", None)}
    try:
        settings = load_settings(args.config, overrides)
        return args.func(args, settings)
    except ProgramSyntaxError as exc:
        for error in exc.errors:
            print(str(error), file=sys.stderr)
        return EXIT_ERROR
    except TransportError as exc:
        return _fail(f"transport error: {exc}")
    except EngineError as exc:
        return _fail(f"{type(exc).__name__}: {exc}")
    except FileNotFoundError as exc:
        return _fail(f"file not found: {exc.filename}")


if __name__ == "__main__":
    sys.exit(main())
