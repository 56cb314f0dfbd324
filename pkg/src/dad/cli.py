"""Command-line interface: generate, invert, check, diff.

Exit codes are a CI-friendly contract:
  0  success / Consistent
  1  Inconsistent
  2  invalid input (parse, schema, validation, usage)
  3  I/O failure (unreadable input, unwritable output)

The environment variable DAD_ROLE_TABLE may point at a file with one
``substring=role`` pair per line (blank lines and ``#`` comments ignored); it
replaces the builtin image-to-role table used by --group-by-role.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import compose
from .consistency import (
    Verdict,
    check_diagram_against_descriptor,
    compare_models,
    render_report,
    round_trip_check,
)
from .dac_emit import DEFAULT_ROLE_TABLE, EmitOptions, emit_dac, emit_dot
from .dac_ingest import emit_compose, lift, parse_dac
from .errors import DadError

_EXIT_BY_VERDICT = {Verdict.CONSISTENT: 0, Verdict.INCONSISTENT: 1, Verdict.INVALID: 2}
_DAC_SUFFIXES = {".dac"}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dad",
        description="Transform system descriptors into diagram scripts and back, "
        "and verify that the two stay consistent.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p: argparse.ArgumentParser, inputs_help: str) -> None:
        p.add_argument(
            "-i",
            "--input",
            action="append",
            required=True,
            type=Path,
            metavar="PATH",
            help=inputs_help,
        )
        p.add_argument(
            "-o",
            "--output",
            type=Path,
            metavar="PATH",
            help="write result here instead of stdout",
        )
        p.add_argument(
            "--strict",
            action="store_true",
            help="treat dangling references and conflicting sources as errors",
        )

    p_gen = sub.add_parser("generate", help="descriptor -> diagram script or DOT")
    add_common(p_gen, "descriptor file (exactly one)")
    p_gen.add_argument("--format", choices=("dac", "dot"), default="dac")
    p_gen.add_argument(
        "--group-by-role",
        action="store_true",
        help="order services by image role (database, messaging, gateway, service)",
    )
    p_gen.set_defaults(func=cmd_generate)

    p_inv = sub.add_parser("invert", help="diagram script -> descriptor")
    add_common(p_inv, "diagram script file (exactly one)")
    p_inv.set_defaults(func=cmd_invert)

    p_check = sub.add_parser(
        "check",
        help="verify consistency: one descriptor round-trips, or a script/descriptor pair agrees",
    )
    add_common(p_check, "descriptor file(s), or one descriptor plus one .dac script")
    p_check.add_argument("--report", choices=("text", "machine"), default="text")
    p_check.set_defaults(func=cmd_check)

    p_diff = sub.add_parser("diff", help="structural diff of two inputs (descriptor or script)")
    add_common(p_diff, "input file (give exactly two)")
    p_diff.add_argument("--report", choices=("text", "machine"), default="text")
    p_diff.add_argument(
        "--left-format",
        choices=("compose", "dac"),
        help="override detection by extension for the first input",
    )
    p_diff.add_argument(
        "--right-format",
        choices=("compose", "dac"),
        help="override detection by extension for the second input",
    )
    p_diff.set_defaults(func=cmd_diff)
    return parser


def _load_role_table() -> tuple[tuple[str, str], ...]:
    path = os.environ.get("DAD_ROLE_TABLE")
    if not path:
        return DEFAULT_ROLE_TABLE
    pairs: list[tuple[str, str]] = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        substring, eq, role = line.partition("=")
        substring, role = substring.strip(), role.strip()
        if not eq or not substring or not role:
            raise DadError(f"role table {path} line {lineno}: expected substring=role")
        pairs.append((substring, role))
    return tuple(pairs)


def _write_output(output: Path | None, text: str) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        output.write_text(text, encoding="utf-8")


def _print_issues(issues) -> None:
    for issue in issues:
        print(str(issue), file=sys.stderr)


def _is_dac_path(path: Path) -> bool:
    return path.suffix.lower() in _DAC_SUFFIXES


def _single_input(args, parser_hint: str) -> Path:
    if len(args.input) != 1:
        raise DadError(f"{parser_hint} requires exactly one --input, got {len(args.input)}")
    return args.input[0]


def _descriptor_model(text: str, path: Path, strict: bool):
    """Parse + validate + lower one descriptor; returns (model, spec)."""
    spec = compose.parse_compose(text)
    issues = compose.validate(spec, strict=strict)
    _print_issues(issues)
    if not compose.issues_ok(issues):
        raise DadError("validation failed")
    model = compose.lower(spec, strict=strict, fallback_title=path.stem)
    return model, spec


def cmd_generate(args) -> int:
    path = _single_input(args, "generate")
    model, _ = _descriptor_model(path.read_text(encoding="utf-8"), path, args.strict)
    model.validate()
    opts = EmitOptions(group_by_role=args.group_by_role, role_table=_load_role_table())
    if args.format == "dot":
        _write_output(args.output, emit_dot(model, opts))
    else:
        _write_output(args.output, emit_dac(model, opts).text)
    return 0


def cmd_invert(args) -> int:
    path = _single_input(args, "invert")
    ast = parse_dac(path.read_text(encoding="utf-8"), strict=args.strict)
    _write_output(args.output, emit_compose(lift(ast)))
    return 0


def cmd_check(args) -> int:
    paths: list[Path] = args.input
    dac_paths = [p for p in paths if _is_dac_path(p)]
    if dac_paths:
        if len(paths) != 2 or len(dac_paths) != 1:
            raise DadError(
                "pair mode check takes exactly one .dac script and one descriptor"
            )
        descriptor = next(p for p in paths if not _is_dac_path(p))
        report = check_diagram_against_descriptor(
            dac_paths[0].read_text(encoding="utf-8"),
            descriptor.read_text(encoding="utf-8"),
            strict=args.strict,
        )
        _write_output(args.output, render_report(report, args.report))
        return _EXIT_BY_VERDICT[report.verdict]

    blocks: list[str] = []
    worst = 0
    for path in paths:
        report = round_trip_check(path.read_text(encoding="utf-8"), strict=args.strict)
        rendered = render_report(report, args.report)
        if len(paths) > 1:
            prefix = f"== {path}\n" if args.report == "text" else f"file\t{path}\n"
            rendered = prefix + rendered
        blocks.append(rendered)
        worst = max(worst, _EXIT_BY_VERDICT[report.verdict])
    _write_output(args.output, "".join(blocks))
    return worst


def _side_model(path: Path, fmt: str | None, strict: bool):
    """Load one diff side as (model, notes) honoring the format override."""
    text = path.read_text(encoding="utf-8")
    if fmt == "dac" or (fmt is None and _is_dac_path(path)):
        return lift(parse_dac(text, strict=strict)), ()
    model, spec = _descriptor_model(text, path, strict)
    return model, tuple(f"{path}: {note}" for note in spec.residue_paths())


def cmd_diff(args) -> int:
    if len(args.input) != 2:
        raise DadError(f"diff requires exactly two --input, got {len(args.input)}")
    left_path, right_path = args.input
    left, left_notes = _side_model(left_path, args.left_format, args.strict)
    right, right_notes = _side_model(right_path, args.right_format, args.strict)
    notes = tuple(
        f"residue excluded from diagram: {note}" for note in left_notes + right_notes
    )
    report = compare_models(left, right, notes=notes)
    _write_output(args.output, render_report(report, args.report))
    return _EXIT_BY_VERDICT[report.verdict]


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.func(args)
    except DadError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
