"""``scenebench`` command line entry point.

Errors are reported as a single stderr line ``scenebench: E<code> <kind>: <message>``
and the process exits with that code (2 validation, 3 I/O, 4 incomplete grid).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from scenebench import pipeline

EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_GRID = 4


def _split_dirs(values) -> list[str]:
    out = []
    for v in values:
        out.extend(p for p in v.split(",") if p)
    return out


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # usage problems go through the same single-line error path as everything else
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scenebench", description="Synthetic scene benchmark: generate, evaluate, analyze, report.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file with option defaults; explicit flags win")
        return p

    p = add("generate", "render the scene dataset from an asset pool")
    p.add_argument("--assets", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=("dev", "test"), default="test")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)

    p = add("evaluate", "score system outputs against the ground truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--est", action="append", required=True, help="system output dir(s), comma separated")
    p.add_argument("--out", required=True)
    p.add_argument("--tolerance", type=float, default=0.2)
    p.add_argument("--policy", choices=("exclude_class", "score_zero"), default="exclude_class")
    p.add_argument("--concat", action="store_true", help="also score the time-concatenated corpus")

    p = add("analyze", "repeated-measures ANOVA and post hoc analysis")
    p.add_argument("--results", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", required=True)

    p = add("report", "emit per-figure tables from an analysis directory")
    p.add_argument("--analysis", required=True)
    p.add_argument("--out", required=True)

    p = add("echo", "write a perturbed copy of the ground truth as a system output")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--deletion", type=float, default=0.0)
    p.add_argument("--shift", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        cfg = json.loads(Path(known.config).read_text(encoding="utf-8"))
        if not isinstance(cfg, dict):
            raise ValueError(f"config {known.config} must hold a JSON object")
        subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        command = next((tok for tok in argv if tok in subparsers.choices), None)
        if command is not None:
            sp = subparsers.choices[command]
            unknown = set(cfg) - {a.dest for a in sp._actions}
            if unknown:
                raise ValueError(f"unknown config keys for {command}: {sorted(unknown)}")
            # appended options would extend a config default instead of replacing it
            appended = {a.dest for a in sp._actions if isinstance(a, argparse._AppendAction)} & set(cfg)
            for action in sp._actions:
                if action.dest in cfg:
                    action.required = False
            sp.set_defaults(**{k: v for k, v in cfg.items() if k not in appended})
            args = parser.parse_args(argv)
            for dest in appended:
                if getattr(args, dest) is None:
                    value = cfg[dest]
                    setattr(args, dest, [value] if isinstance(value, str) else list(value))
            return args
    return parser.parse_args(argv)


def run(args: argparse.Namespace):
    if args.command == "generate":
        return pipeline.cmd_generate(args.assets, args.out, args.split, args.seed, args.jobs)
    if args.command == "evaluate":
        return pipeline.cmd_evaluate(args.manifest, _split_dirs(args.est), args.out, args.tolerance,
                                     args.policy, args.concat)
    if args.command == "analyze":
        return pipeline.cmd_analyze(args.results, args.out, args.alpha)
    if args.command == "report":
        return pipeline.cmd_report(args.analysis, args.out)
    if args.command == "echo":
        return pipeline.echo_detector(args.manifest, args.out, args.jitter, args.deletion, args.shift, args.seed)
    raise ValueError(f"unknown command {args.command}")


def _fail(code: int, kind: str, exc: BaseException) -> int:
    msg = " ".join(str(exc).split())
    print(f"scenebench: E{code} {kind}: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        run(args)
    except pipeline.IncompleteGridError as exc:
        return _fail(EXIT_GRID, "incomplete-grid", exc)
    except OSError as exc:
        return _fail(EXIT_IO, "io", exc)
    except UsageError as exc:
        return _fail(EXIT_VALIDATION, "usage", exc)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        return _fail(EXIT_VALIDATION, "validation", exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
