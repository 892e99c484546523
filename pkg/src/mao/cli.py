"""Command line interface: generate, validate, diff, convert, eval.

Configuration is resolved in precedence order: command line flags, then
environment variables (MAO_API_BASE, MAO_API_KEY, MAO_MODEL), then an
optional key=value config file passed with --config.

Exit codes are stable: 0 success or clean, 1 findings, 2 pipeline or
computation failure, 3 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .backends import (
    ENV_API_BASE,
    ENV_API_KEY,
    ENV_MODEL,
    BackendError,
    HttpChatBackend,
    ReplayBackend,
    ReplayExhausted,
)
from .diff import (
    ALGORITHMS,
    CostModel,
    SizeExceeded,
    distance_suite,
    exact_ged,
    solve,
)
from .dsl import BpmnParseFailure, parse, serialize
from .evalharness import CaseLayoutError, evaluate_case, load_case, load_graph
from .graph import NonBlockStructured, graph_to_model
from .interop import BpmnImportError, export_xml, import_xml
from .model import structural_check
from .orchestrator import (
    PHASES,
    REFINEMENT,
    REVIEWING,
    TESTING,
    PipelineConfig,
    PipelineError,
    run_pipeline,
    save_transcript,
)
from .validator import render_report, validate

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_FAILURE = 2
EXIT_USAGE = 3

_ALGO_FLAGS = {
    "greedy": "Greedy",
    "tabu": "TabuSearch",
    "annealing": "SimulatedAnnealing",
    "ants": "Ants",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # route argparse's own failures through the exit-code contract
    def error(self, message):
        raise UsageError(message)


_CONFIG_KEYS = (
    "api_base",
    "api_key",
    "model",
    "backend",
    "replay",
    "temperature",
    "seed",
)


@dataclass
class CliConfig:
    api_base: str = ""
    api_key: str = ""
    model: str = ""
    backend: str = ""
    replay: str = ""
    temperature: Optional[float] = None
    seed: Optional[int] = None

    def echo(self, out):
        print("resolved config:", file=out)
        for key in _CONFIG_KEYS:
            value = getattr(self, key)
            if key == "api_key" and value:
                value = "***"
            if value in ("", None):
                value = "-"
            print(f"  {key} = {value}", file=out)


def _read_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


def resolve_config(args, environ=None) -> CliConfig:
    """Merge flags over environment over config file."""
    environ = os.environ if environ is None else environ
    cfg = CliConfig()

    file_vals = {}
    if getattr(args, "config", None):
        file_vals = _read_config_file(args.config)
    for key, value in file_vals.items():
        if key == "temperature":
            try:
                cfg.temperature = float(value)
            except ValueError:
                raise UsageError(f"config temperature is not a number: {value!r}")
        elif key == "seed":
            try:
                cfg.seed = int(value)
            except ValueError:
                raise UsageError(f"config seed is not an integer: {value!r}")
        else:
            setattr(cfg, key, value)

    for env_name, key in (
        (ENV_API_BASE, "api_base"),
        (ENV_API_KEY, "api_key"),
        (ENV_MODEL, "model"),
    ):
        value = environ.get(env_name)
        if value:
            setattr(cfg, key, value)

    for key in ("api_base", "api_key", "model", "backend", "replay"):
        value = getattr(args, key, None)
        if value:
            setattr(cfg, key, value)
    if getattr(args, "temperature", None) is not None:
        cfg.temperature = args.temperature
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(str(exc))


def _print_json(payload) -> None:
    print(json.dumps(payload, indent=2, ensure_ascii=False))


# -- generate ---------------------------------------------------------------


def cmd_generate(args, cfg: CliConfig) -> int:
    if args.requirement_text:
        requirement = args.requirement_text
    elif args.requirement:
        requirement = _read_text(args.requirement)
    else:
        raise UsageError("generate needs -r FILE or --requirement-text TEXT")
    if not requirement.strip():
        raise UsageError("the requirement is empty")

    backend_kind = cfg.backend or ("replay" if cfg.replay else "http")
    if backend_kind == "replay":
        if not cfg.replay:
            raise UsageError("replay backend needs --replay FILE")
        try:
            backend = ReplayBackend.from_path(cfg.replay)
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc))
    elif backend_kind == "http":
        if not cfg.api_base:
            raise UsageError(
                f"{ENV_API_BASE} is not set (flag --api-base, environment, "
                "or config file api_base)"
            )
        if not cfg.api_key:
            raise UsageError(
                f"{ENV_API_KEY} is not set (flag --api-key, environment, "
                "or config file api_key)"
            )
        backend = HttpChatBackend(cfg.api_base, api_key=cfg.api_key, model=cfg.model)
    else:
        raise UsageError(f"unknown backend {backend_kind!r}")

    phases = set(PHASES)
    if args.no_refinement:
        phases.discard(REFINEMENT)
    if args.no_reviewing:
        phases.discard(REVIEWING)
    if args.no_testing:
        phases.discard(TESTING)

    kwargs = {}
    if args.max_review_rounds is not None:
        kwargs["max_review_rounds"] = args.max_review_rounds
    if args.max_test_rounds is not None:
        kwargs["max_test_rounds"] = args.max_test_rounds
    if args.max_parse_retries is not None:
        kwargs["max_parse_retries"] = args.max_parse_retries
    if cfg.temperature is not None:
        kwargs["temperature"] = cfg.temperature
    try:
        pipeline_cfg = PipelineConfig(
            backend=backend, phases_enabled=frozenset(phases), **kwargs
        )
    except ValueError as exc:
        raise UsageError(str(exc))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = run_pipeline(requirement, pipeline_cfg)
    except PipelineError as exc:
        save_transcript(exc.transcript, out_dir / "transcript.jsonl")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (BackendError, ReplayExhausted) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE

    (out_dir / "model.bpmt").write_text(result.final_text, encoding="utf-8")
    save_transcript(result.transcript, out_dir / "transcript.jsonl")
    (out_dir / "report.json").write_text(result.to_json() + "\n", encoding="utf-8")
    if result.final_model is not None and not structural_check(result.final_model):
        (out_dir / "model.bpmn").write_text(
            export_xml(result.final_model), encoding="utf-8"
        )
    else:
        print(
            "note: model.bpmn not written, the final model has structural defects",
            file=sys.stderr,
        )
    if result.clean is False:
        return EXIT_FINDINGS
    return EXIT_OK


# -- validate ---------------------------------------------------------------


def cmd_validate(args, cfg: CliConfig) -> int:
    text = _read_text(args.file)
    report = validate(text, strict=not args.lenient)
    print(render_report(report, "machine" if args.json else "human"))
    return EXIT_OK if report.clean else EXIT_FINDINGS


# -- diff -------------------------------------------------------------------


def _load_graph_arg(path: str):
    try:
        return load_graph(path)
    except CaseLayoutError as exc:
        raise UsageError(str(exc))


def cmd_diff(args, cfg: CliConfig) -> int:
    g1 = _load_graph_arg(args.file_a)
    g2 = _load_graph_arg(args.file_b)
    cost = CostModel(w_del=args.w_del, w_ins=args.w_ins, w_edge=args.w_edge)
    seed = cfg.seed if cfg.seed is not None else 0

    if args.exact:
        try:
            result = exact_ged(g1, g2, cost)
        except SizeExceeded as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAILURE
        print(result.to_json())
        return EXIT_OK

    if args.algo == "suite":
        suite = distance_suite(g1, g2, cost, seed=seed)
        payload = {
            "benchmark": suite.benchmark,
            "seed": seed,
            "algorithms": {
                algo: suite.results[algo].to_dict() for algo in ALGORITHMS
            },
        }
        _print_json(payload)
        return EXIT_OK

    result = solve(g1, g2, cost, algorithm=_ALGO_FLAGS[args.algo], seed=seed)
    print(result.to_json())
    return EXIT_OK


# -- convert ----------------------------------------------------------------


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def cmd_convert(args, cfg: CliConfig) -> int:
    path = Path(args.file)
    text = _read_text(args.file)

    if path.suffix == ".bpmt":
        try:
            model = parse(text)
        except BpmnParseFailure as exc:
            first = exc.errors[0] if exc.errors else None
            detail = f": {first.message} at {first.span}" if first else ""
            print(f"error: {args.file} is not parseable{detail}", file=sys.stderr)
            return EXIT_USAGE
        if args.to == "bpmt":
            _emit(args, serialize(model, check=False))
            return EXIT_OK
        try:
            xml = export_xml(model)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FINDINGS
        _emit(args, xml)
        return EXIT_OK

    if path.suffix == ".bpmn":
        try:
            imported = import_xml(text)
        except BpmnImportError as exc:
            print(f"error: {args.file}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        for note in imported.warnings:
            print(f"warning: {note}", file=sys.stderr)
        try:
            model, warnings = graph_to_model(
                imported.graph, imported.conditions, name=path.stem
            )
        except NonBlockStructured as exc:
            print(
                f"error: {args.file} is not block structured ({exc}); "
                "the diff command can still compare it as a graph",
                file=sys.stderr,
            )
            return EXIT_FINDINGS
        for note in warnings:
            print(f"warning: {note}", file=sys.stderr)
        if args.to == "bpmt":
            _emit(args, serialize(model, check=False))
        else:
            _emit(args, export_xml(model))
        return EXIT_OK

    raise UsageError(f"unsupported input extension {path.suffix!r}")


# -- eval -------------------------------------------------------------------


def cmd_eval(args, cfg: CliConfig) -> int:
    try:
        case = load_case(args.case_dir)
    except CaseLayoutError as exc:
        raise UsageError(str(exc))
    seed = cfg.seed if cfg.seed is not None else 0
    try:
        report = evaluate_case(case, seed=seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(
            report.to_json() + "\n", encoding="utf-8"
        )
        (out_dir / "report.txt").write_text(report.to_text(), encoding="utf-8")
    if args.json:
        print(report.to_json())
    else:
        print(report.to_text(), end="")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="mao",
        description="Generate, validate, and compare block-structured process models.",
    )
    parser.add_argument("--verbose", action="store_true", help="echo resolved config")
    parser.add_argument("--config", metavar="FILE", help="key=value config file")
    # the same two flags are accepted after the subcommand as well
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", dest="sub_verbose", action="store_true")
    common.add_argument("--config", dest="sub_config", metavar="FILE")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run the multi-agent pipeline", parents=[common])
    p.add_argument("-r", "--requirement", metavar="FILE")
    p.add_argument("--requirement-text", metavar="TEXT")
    p.add_argument("-o", "--out", default="out", metavar="DIR")
    p.add_argument("--backend", choices=("http", "replay"))
    p.add_argument("--replay", metavar="FILE", help="scripted replies, JSONL")
    p.add_argument("--api-base", metavar="URL")
    p.add_argument("--api-key", metavar="KEY")
    p.add_argument("--model", metavar="NAME")
    p.add_argument("--temperature", type=float)
    p.add_argument("--no-refinement", action="store_true")
    p.add_argument("--no-reviewing", action="store_true")
    p.add_argument("--no-testing", action="store_true")
    p.add_argument("--max-review-rounds", type=int)
    p.add_argument("--max-test-rounds", type=int)
    p.add_argument("--max-parse-retries", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="report format hallucinations", parents=[common])
    p.add_argument("file")
    p.add_argument("--json", action="store_true", help="machine readable report")
    p.add_argument("--lenient", action="store_true", help="demote recoverable errors")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("diff", help="graph edit distance between two models", parents=[common])
    p.add_argument("file_a")
    p.add_argument("file_b")
    p.add_argument(
        "--algo",
        choices=tuple(_ALGO_FLAGS) + ("suite",),
        default="suite",
    )
    p.add_argument("--exact", action="store_true", help="exact branch and bound")
    p.add_argument("--seed", type=int)
    p.add_argument("--w-del", type=float, default=1.0)
    p.add_argument("--w-ins", type=float, default=1.0)
    p.add_argument("--w-edge", type=float, default=0.5)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("convert", help="convert between .bpmt and .bpmn", parents=[common])
    p.add_argument("file")
    p.add_argument("--to", choices=("bpmt", "bpmn"), required=True)
    p.add_argument("-o", "--out", metavar="FILE", help="write here instead of stdout")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("eval", help="score candidates in a case directory", parents=[common])
    p.add_argument("case_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    p.add_argument("-o", "--out", metavar="DIR", help="also write report files here")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "sub_verbose", False):
            args.verbose = True
        if getattr(args, "sub_config", None):
            args.config = args.sub_config
        cfg = resolve_config(args)
        if args.verbose:
            cfg.echo(sys.stderr)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
