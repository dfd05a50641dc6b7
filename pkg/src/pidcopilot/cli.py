"""Batch command line: compile, validate, describe, dsl, eval, serve.

Exit codes: 0 success, 1 validation failure, 2 input error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backends import DEFAULT_API_KEY_ENV, BackendError, make_backend
from .describe import describe
from .dexpi import graph_from_document, parse_xml, serialize_xml
from .dsl import DslError, dsl_to_graph, graph_to_dsl, parse_dsl, serialize_dsl, validate_and_prune
from .evaluate import check_completeness, render_table, report_payload, run_benchmark
from .layout import auto_layout
from .model import Severity, has_errors
from .render import render_svg

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INPUT = 2
EXIT_BACKEND = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}")


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}")


def _graph_from_xml_file(path: str):
    doc, diags = parse_xml(_read(path))
    if has_errors(diags):
        raise CliError("; ".join(str(d) for d in diags
                                 if d.severity is Severity.ERROR))
    graph, gdiags = graph_from_document(doc)
    if has_errors(gdiags):
        raise CliError("; ".join(str(d) for d in gdiags
                                 if d.severity is Severity.ERROR))
    return graph


def cmd_compile(args: argparse.Namespace) -> int:
    try:
        doc = parse_dsl(_read(args.infile))
    except DslError as exc:
        raise CliError(f"{args.infile}: {exc}")
    pruned, diags = validate_and_prune(doc)
    for diag in diags:
        print(f"{args.infile}: {diag}", file=sys.stderr)
    if has_errors(diags):
        raise CliError(f"{args.infile}: document failed flow validation")
    graph = dsl_to_graph(pruned)
    layout = auto_layout(graph)
    if args.conceptual:
        from .dexpi import emit_conceptual

        xml = serialize_xml(emit_conceptual(graph))
    else:
        from .dexpi import emit_conceptual, merge_layout

        xml = serialize_xml(merge_layout(emit_conceptual(graph), layout))
    _write(args.out, xml)
    if args.svg:
        _write(args.svg, render_svg(graph, layout))
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    report = check_completeness(_read(args.file))
    for row in report.per_section:
        status = "ok" if row.ok else "FAIL"
        detail = "" if row.ok else f"  missing: {', '.join(row.failures)}"
        print(f"{status:4} {row.kind:<22} {row.section_id}{detail}")
    print(f"completeness: {report.sections_passing}/{report.sections_total} "
          f"sections = {report.aggregate:.2f}%")
    return EXIT_OK if report.aggregate == 100.0 else EXIT_VALIDATION


def cmd_describe(args: argparse.Namespace) -> int:
    graph = _graph_from_xml_file(args.file)
    try:
        sys.stdout.write(describe(graph))
    except ValueError as exc:
        raise CliError(str(exc))
    return EXIT_OK


def cmd_dsl(args: argparse.Namespace) -> int:
    graph = _graph_from_xml_file(args.file)
    for el in graph.elements.values():
        el.position = el.scale = None
    for conn in graph.connections.values():
        conn.centerline = None
    try:
        text = serialize_dsl(graph_to_dsl(graph))
    except ValueError as exc:
        raise CliError(str(exc))
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    backend = None
    if args.backend:
        try:
            backend = make_backend(args.backend, model=args.model,
                                   api_key_env=args.api_key_env)
        except (ValueError, OSError) as exc:
            raise CliError(f"bad --backend: {exc}")
    try:
        result = run_benchmark(args.bench, backend=backend, mode=args.mode)
    except ValueError as exc:
        raise CliError(str(exc))
    except BackendError as exc:
        raise CliError(str(exc), code=EXIT_BACKEND)
    sys.stdout.write(result.table)
    if args.report:
        _write(args.report, json.dumps(report_payload(result), indent=2) + "\n")
    return EXIT_OK if result.ok else EXIT_VALIDATION


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig(
        backend_spec=args.backend,
        executor_backend_spec=args.executor_backend or "",
        model=args.model,
        api_key_env=args.api_key_env,
        persist_dir=Path(args.persist_dir) if args.persist_dir else None,
        cors_origins=[args.cors_origin] if args.cors_origin else ["*"],
    )
    try:
        app = create_app(config)
    except ValueError as exc:
        raise CliError(str(exc), code=EXIT_BACKEND)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except OSError as exc:
        raise CliError(f"cannot bind port {args.port}: {exc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pidcopilot",
        description="P&ID copilot: DSL compiler, XML validator, describer, "
                    "evaluation bench and session service.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="DSL file -> plant-model XML (and SVG)")
    p.add_argument("--in", dest="infile", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="FILE")
    p.add_argument("--svg", metavar="FILE", help="also render an SVG preview")
    p.add_argument("--conceptual", action="store_true",
                   help="emit the conceptual model only (no drawing parts)")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("validate", help="completeness-check an XML file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("describe", help="natural-language description of an XML file")
    p.add_argument("file")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("dsl", help="XML file -> editable DSL document")
    p.add_argument("file")
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_dsl)

    p = sub.add_parser("eval", help="run an evaluation bench")
    p.add_argument("--bench", required=True, metavar="DIR")
    p.add_argument("--backend", metavar="SPEC",
                   help="scripted:<file> or http:<base_url> (cases with "
                        "fixtures replay those instead)")
    p.add_argument("--mode", choices=("pipeline", "zeroshot", "fewshot"),
                   default="pipeline")
    p.add_argument("--model", default="gpt-4-turbo")
    p.add_argument("--api-key-env", default=DEFAULT_API_KEY_ENV)
    p.add_argument("--report", metavar="FILE", help="write a JSON report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="start the HTTP session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--backend", required=True, metavar="SPEC",
                   help="planner (and default executor) backend")
    p.add_argument("--executor-backend", metavar="SPEC",
                   help="separate backend for plan execution")
    p.add_argument("--model", default="gpt-4-turbo")
    p.add_argument("--api-key-env", default=DEFAULT_API_KEY_ENV)
    p.add_argument("--persist-dir", metavar="DIR")
    p.add_argument("--cors-origin", metavar="ORIGIN")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
