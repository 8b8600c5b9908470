"""Command-line entry point.

Exit codes: 0 success, 2 operational error, 3 no Kodi installation found.
Machine-readable summaries go to stdout, everything else to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .errors import StreamtraceError
from .evidence import manifest_json, open_source
from .pipeline import RunConfig, RunResult, run
from .report import ReportFormat, emit_report, _json_bytes
from .timestamps import parse_rfc3339_utc

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_NOTHING = 3
NOTHING_FOUND = "no Kodi installations found"
DEFAULT_FIXED_CLOCK = "2000-01-01T00:00:00Z"

log = logging.getLogger("streamtrace")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="streamtrace",
                                description="Extract Kodi artifacts from a mounted evidence tree.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--root", required=True, type=Path, help="mounted evidence root (read only)")
    common.add_argument("--case-id", default="", help="case identifier recorded in the output")
    common.add_argument("--examiner", default="", help="examiner name recorded in the output")
    common.add_argument("--profiles", type=Path, default=None,
                        help="directory of override tables (log profiles, release table, column map)")
    common.add_argument("--fixed-clock", nargs="?", const=DEFAULT_FIXED_CLOCK, default=None,
                        metavar="RFC3339", help="use a fixed clock for reproducible output")
    common.add_argument("-v", "--verbose", action="store_true")
    outputs = argparse.ArgumentParser(add_help=False)
    outputs.add_argument("--out", required=True, type=Path, help="output directory (outside --root)")
    outputs.add_argument("--no-carve", action="store_true", help="skip deleted-record recovery")
    outputs.add_argument("--raw-tables", action="store_true",
                         help="dump rows of databases without a dedicated extractor")
    outputs.add_argument("--workers", type=int, default=4)

    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("scan", parents=[common], help="list Kodi installations")
    sub.add_parser("extract", parents=[common, outputs], help="write per-installation artifacts")
    sub.add_parser("timeline", parents=[common, outputs], help="write the merged timeline")
    rp = sub.add_parser("report", parents=[common, outputs], help="write the evidence report")
    rp.add_argument("--formats", default="json", help="comma-separated: json,csv,html")
    return p


def _inside(path: Path, root: Path) -> bool:
    path, root = path.resolve(), root.resolve()
    return path == root or root in path.parents


def _write(out: Path, name: str, data: bytes) -> None:
    (out / name).write_bytes(data)
    log.info("wrote %s", out / name)


def _print_warnings(result: RunResult) -> None:
    for w in result.report.warnings:
        print(f"warning: {w.get('message', w)}", file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return _run(args)
    except (StreamtraceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _run(args) -> int:
    clock = None
    if args.fixed_clock:
        fixed = parse_rfc3339_utc(args.fixed_clock)
        clock = lambda: fixed  # noqa: E731
    formats: List[ReportFormat] = []
    if args.command == "report":
        formats = [ReportFormat.parse(f) for f in args.formats.split(",") if f.strip()]
    out: Optional[Path] = getattr(args, "out", None)
    if out is not None:
        if _inside(out, args.root):
            print(f"error: output directory {out} is inside the evidence root", file=sys.stderr)
            return EXIT_ERROR
        out.mkdir(parents=True, exist_ok=True)

    source = open_source(args.root, args.case_id, args.examiner, clock=clock)
    config = RunConfig(
        root=args.root, case_id=args.case_id, examiner=args.examiner,
        include_carved=not getattr(args, "no_carve", False),
        formats=[f.value for f in formats], output_dir=out, profiles_dir=args.profiles,
        raw_tables=getattr(args, "raw_tables", False), workers=getattr(args, "workers", 4),
    )
    result = run(source, config, extract=args.command != "scan")

    if args.command == "scan":
        for inst in result.installations:
            print(inst.summary_line())
    else:
        _print_warnings(result)
        if args.command == "extract":
            for n, art in enumerate(result.artifacts, 1):
                name = f"artifacts_{n:02d}_{art.installation.platform}.json"
                _write(out, name, _json_bytes(art.to_dict()))
        elif args.command == "timeline":
            _write(out, "timeline.json", _json_bytes([e.to_dict() for e in result.timeline]))
            _write(out, "timeline.csv", emit_report(result.report, ReportFormat.CSV))
        else:
            for fmt in formats:
                _write(out, f"report.{fmt.value}", emit_report(result.report, fmt))
        _write(out, "manifest.json", manifest_json(source.export_manifest()))
        print(json.dumps({"command": args.command, "out": str(out),
                          "installations": [a.summary() for a in result.artifacts]},
                         sort_keys=True))

    if not result.installations:
        print(NOTHING_FOUND, file=sys.stderr)
        return EXIT_NOTHING
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
