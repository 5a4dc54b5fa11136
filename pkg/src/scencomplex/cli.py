"""Command-line front end.

Exit status: 0 success, 1 diagnostics (invalid scenario, catalog or unknown path),
2 usage or I/O error. Diagnostics always go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence

import yaml

from . import __version__
from .analysis import FORMATS, AnalysisReport, analyze, check_weights, render_report
from .coverage import (
    RuleError,
    SkeletonError,
    coverage,
    default_rules,
    format_coverage,
    gaps,
    generate_skeletons,
    load_rules,
    skeleton_to_dsl,
)
from .detectors import DetectorConfig
from .diagnostics import Diagnostic, DiagnosticError
from .scenario import Scenario, parse_scenario, validate_scenario
from .taxonomy import (
    DIMENSION_LABELS,
    TaxonomyCatalog,
    UnknownElementError,
    default_catalog,
    list_paths,
    load_catalog_file,
    lookup,
    serialize_catalog,
)

EXIT_OK, EXIT_DIAG, EXIT_USAGE = 0, 1, 2
CATALOG_ENV = "SCENCOMPLEX_CATALOG"
SCENARIO_SUFFIX = ".scn"


class UsageError(Exception):
    """Bad flag value or unreadable input; maps to exit status 2."""


@dataclass
class Ctx:
    catalog: TaxonomyCatalog
    config: DetectorConfig
    quiet: bool

    def info(self, message: str) -> None:
        if not self.quiet:
            print(message, file=sys.stderr)


def _diag(diags: Sequence[Diagnostic], source: str = "") -> None:
    for d in diags:
        print(d.format(source or None), file=sys.stderr)


def _out(text: str) -> None:
    sys.stdout.write(text)


def _read(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None


def _yaml_mapping(path: str, what: str) -> Mapping:
    try:
        data = yaml.safe_load(_read(path))
    except yaml.YAMLError as exc:
        raise UsageError(f"{path}: invalid YAML in {what}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise UsageError(f"{path}: {what} must be a mapping")
    return data


def _catalog(args) -> TaxonomyCatalog:
    path = args.catalog or os.environ.get(CATALOG_ENV)
    if not path:
        return default_catalog()
    if not os.path.isfile(path):
        raise UsageError(f"{path}: catalog file not found")
    return load_catalog_file(path)


def _config(args) -> DetectorConfig:
    if not args.config:
        return DetectorConfig()
    try:
        return DetectorConfig.from_mapping(_yaml_mapping(args.config, "detector config"))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{args.config}: {exc}") from None


def _weights(path: Optional[str]) -> Optional[dict]:
    if not path:
        return None
    try:
        return check_weights(_yaml_mapping(path, "weights"))
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _load_scenario(path: str, catalog: TaxonomyCatalog) -> Scenario:
    """Parse and validate; raises DiagnosticError (exit 1) or UsageError (exit 2)."""
    s = parse_scenario(_read(path), source=path)
    diags = validate_scenario(s, catalog, path)
    if diags:
        raise DiagnosticError(diags)
    return s


# taxonomy --------------------------------------------------------------------------------

def _show_text(entry) -> str:
    lines = [f"{entry.path}: {entry.title}", f"part: {entry.part}"]
    if entry.example_categories:
        lines.append("categories: " + "; ".join(entry.example_categories))
    if entry.examples:
        lines.append("examples: " + "; ".join(entry.examples))
    if entry.variants:
        lines.append("variants: " + ", ".join(entry.variants))
    lines.append(f"primary: {entry.primary_dimension}")
    for cell in entry.dimensions:
        mark = "*" if cell.dimension == entry.primary_dimension else " "
        lines.append(f"{mark} {DIMENSION_LABELS[cell.dimension]}: {cell.text or '-'}")
    return "\n".join(lines) + "\n"


def _show_json(entry) -> str:
    data = {
        "path": entry.path,
        "title": entry.title,
        "part": entry.part,
        "section": entry.section,
        "example_categories": list(entry.example_categories),
        "examples": list(entry.examples),
        "variants": list(entry.variants),
        "primary_dimension": entry.primary_dimension,
        "dimensions": {c.dimension: c.text for c in entry.dimensions},
    }
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def cmd_taxonomy(args, ctx: Ctx) -> int:
    if args.action == "list":
        prefix = args.target or ""
        paths = list_paths(ctx.catalog, prefix)
        if prefix and not paths:
            print(f"no element path under {prefix!r}", file=sys.stderr)
            return EXIT_DIAG
        _out("".join(p + "\n" for p in paths))
        return EXIT_OK
    if args.action == "show":
        if not args.target:
            raise UsageError("taxonomy show needs an element path")
        try:
            entry = lookup(ctx.catalog, args.target)
        except UnknownElementError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_DIAG
        _out(_show_json(entry) if args.format == "json" else _show_text(entry))
        return EXIT_OK
    text = serialize_catalog(ctx.catalog)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"{args.out}: {exc.strerror or exc}") from None
        ctx.info(f"wrote {len(ctx.catalog)} entries to {args.out}")
    else:
        _out(text)
    return EXIT_OK


# validate --------------------------------------------------------------------------------

def cmd_validate(args, ctx: Ctx) -> int:
    code = EXIT_OK
    for path in args.files:
        try:
            _load_scenario(path, ctx.catalog)
        except UsageError as exc:
            print(str(exc), file=sys.stderr)
            code = EXIT_USAGE
            continue
        except DiagnosticError as exc:
            _diag(exc.diagnostics, path)
            code = max(code, EXIT_DIAG)
            continue
        if not ctx.quiet:
            _out(f"{path}: ok\n")
    return code


# analyze ---------------------------------------------------------------------------------

def _write(data: bytes, out: Optional[str]) -> None:
    if not out:
        _out(data.decode("utf-8"))
        return
    try:
        with open(out, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise UsageError(f"{out}: {exc.strerror or exc}") from None


def cmd_analyze(args, ctx: Ctx) -> int:
    weights = _weights(args.weights)
    try:
        s = _load_scenario(args.file, ctx.catalog)
    except DiagnosticError as exc:
        _diag(exc.diagnostics, args.file)
        return EXIT_DIAG
    report = analyze(s, ctx.catalog, ctx.config, weights, detect=not args.no_detect, source=args.file)
    _write(render_report(report, args.format), args.out)
    if args.figures:
        from .plotting import report_figures

        for name in report_figures(s, report, args.figures):
            ctx.info(f"wrote {name}")
    return EXIT_OK


# suite -----------------------------------------------------------------------------------

@dataclass
class _Item:
    path: str
    scenario: Optional[Scenario] = None
    report: Optional[AnalysisReport] = None
    diagnostics: List[Diagnostic] = field(default_factory=list)
    error: str = ""


def _analyze_file(path: str, ctx: Ctx, weights, detect: bool) -> _Item:
    item = _Item(path)
    try:
        item.scenario = _load_scenario(path, ctx.catalog)
        item.report = analyze(item.scenario, ctx.catalog, ctx.config, weights, detect=detect, source=path)
    except UsageError as exc:
        item.error = str(exc)
    except DiagnosticError as exc:
        item.diagnostics = exc.diagnostics
    return item


def cmd_suite(args, ctx: Ctx) -> int:
    if not os.path.isdir(args.directory):
        raise UsageError(f"{args.directory}: not a directory")
    weights = _weights(args.weights)
    rules = default_rules(ctx.catalog)
    if args.rules:
        try:
            rules = load_rules(_read(args.rules), ctx.catalog, args.rules)
        except RuleError as exc:
            _diag(exc.diagnostics, args.rules)
            return EXIT_DIAG
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if args.max_elements < 1:
        raise UsageError("--max-elements must be >= 1")
    files = sorted(
        os.path.join(args.directory, n) for n in os.listdir(args.directory)
        if n.endswith(SCENARIO_SUFFIX) and os.path.isfile(os.path.join(args.directory, n))
    )
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        items = list(pool.map(lambda p: _analyze_file(p, ctx, weights, not args.no_detect), files))

    code = EXIT_OK
    for item in items:
        if item.error:
            print(item.error, file=sys.stderr)
            code = EXIT_DIAG
        elif item.diagnostics:
            _diag(item.diagnostics, item.path)
            code = EXIT_DIAG
    reports = [i.report for i in items if i.report is not None]
    cov = coverage(reports, ctx.catalog)
    gap_list = gaps(cov, ctx.catalog)
    skeletons = []
    if args.generate:
        try:
            skeletons = generate_skeletons(gap_list, ctx.catalog, rules, args.seed, args.max_elements, cov.per_variant)
        except SkeletonError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DIAG
        if skeletons:
            try:
                os.makedirs(args.skeleton_dir, exist_ok=True)
                for sk in skeletons:
                    with open(os.path.join(args.skeleton_dir, sk.id + SCENARIO_SUFFIX), "w", encoding="utf-8") as fh:
                        fh.write(skeleton_to_dsl(sk))
            except OSError as exc:
                raise UsageError(f"{args.skeleton_dir}: {exc.strerror or exc}") from None
            ctx.info(f"wrote {len(skeletons)} skeletons to {args.skeleton_dir}")

    if args.format == "json":
        data = {
            "scenarios": [
                {"file": os.path.basename(i.path), "id": i.report.scenario_id,
                 "findings": len(i.report.findings), "leaves": len(i.report.leaves), "total": i.report.score.total}
                for i in items if i.report is not None
            ],
            "failed": [os.path.basename(i.path) for i in items if i.report is None],
        }
        if args.coverage:
            data["coverage"] = cov.to_dict()
        if args.gaps:
            data["gaps"] = gap_list
        if args.generate:
            data["skeletons"] = [
                {"id": sk.id, "elements": [[p, v] for p, v in sk.elements],
                 "required_actors": list(sk.required_actors), "rationale": sk.rationale}
                for sk in skeletons
            ]
        _out(json.dumps(data, sort_keys=True, indent=2) + "\n")
    else:
        lines = []
        for i in items:
            name = os.path.basename(i.path)
            if i.report is None:
                lines.append(f"{name}: failed")
            else:
                r = i.report
                lines.append(f"{name}: {r.scenario_id} findings={len(r.findings)} leaves={len(r.leaves)} total={r.score.total}")
        _out("".join(line + "\n" for line in lines))
        if args.coverage:
            _out("\n" + format_coverage(cov))
        else:
            _out(f"covered {len(cov.covered)}/{len(cov.per_leaf)} leaves\n")
        if args.gaps:
            _out(f"\ngaps ({len(gap_list)}):\n" + "".join(p + "\n" for p in gap_list))
        if args.generate:
            _out(f"\nskeletons ({len(skeletons)}):\n")
            for sk in skeletons:
                _out(f"{sk.id}: " + ", ".join(p + (f"[{v}]" if v else "") for p, v in sk.elements)
                     + " | actors: " + ", ".join(sk.required_actors) + "\n")
    if args.figures:
        from .plotting import plot_coverage, report_figures

        os.makedirs(args.figures, exist_ok=True)
        ctx.info(f"wrote {plot_coverage(cov, os.path.join(args.figures, 'coverage.png'))}")
        for i in items:
            if i.report is not None:
                report_figures(i.scenario, i.report, args.figures)
    return code


# argument parsing ------------------------------------------------------------------------

def _globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    # subcommands accept the global flags too; SUPPRESS keeps them from resetting the top-level value
    none, false = (argparse.SUPPRESS, argparse.SUPPRESS) if suppress else (None, False)
    p.add_argument("--catalog", metavar="FILE", default=none, help=f"catalog YAML (default: ${CATALOG_ENV} or the shipped catalog)")
    p.add_argument("--config", metavar="FILE", default=none, help="detector thresholds (YAML mapping)")
    p.add_argument("--quiet", action="store_true", default=false, help="suppress informational messages")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scencomplex", description="Scenario complexity analysis against a traffic hazard taxonomy.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("taxonomy", help="list, show or export catalog elements")
    _globals(p, suppress=True)
    p.add_argument("action", choices=("list", "show", "export"))
    p.add_argument("target", nargs="?", help="path prefix for list, element path for show")
    p.add_argument("--format", choices=("text", "json"), default="text", help="output format for show")
    p.add_argument("--out", metavar="FILE", help="export destination (default: stdout)")
    p.set_defaults(func=cmd_taxonomy)

    p = sub.add_parser("validate", help="parse and validate scenario files")
    _globals(p, suppress=True)
    p.add_argument("files", nargs="+", metavar="FILE")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="analyze one scenario")
    _globals(p, suppress=True)
    p.add_argument("file")
    p.add_argument("--format", choices=FORMATS, default="markdown")
    p.add_argument("--weights", metavar="FILE", help="dimension weights (YAML mapping)")
    p.add_argument("--no-detect", action="store_true", help="declared elements only")
    p.add_argument("--out", metavar="FILE", help="write the report here instead of stdout")
    p.add_argument("--figures", metavar="DIR", help="also write PNG figures (matplotlib)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("suite", help="analyze a directory of scenarios and report coverage")
    _globals(p, suppress=True)
    p.add_argument("directory")
    p.add_argument("--coverage", action="store_true", help="print the per-part coverage table")
    p.add_argument("--gaps", action="store_true", help="list uncovered leaves")
    p.add_argument("--generate", action="store_true", help="generate skeletons closing the gaps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-elements", type=int, default=4, help="elements per skeleton")
    p.add_argument("--rules", metavar="FILE", help="compatibility rules (YAML) replacing the defaults")
    p.add_argument("--skeleton-dir", metavar="DIR", default="skeletons")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--weights", metavar="FILE")
    p.add_argument("--no-detect", action="store_true")
    p.add_argument("--jobs", type=int, default=4, help="worker threads")
    p.add_argument("--figures", metavar="DIR", help="also write PNG figures (matplotlib)")
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        ctx = Ctx(_catalog(args), _config(args), args.quiet)
        return args.func(args, ctx)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DiagnosticError as exc:
        _diag(exc.diagnostics)
        return EXIT_DIAG


if __name__ == "__main__":
    sys.exit(main())
