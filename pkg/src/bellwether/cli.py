"""Command-line entry point.

Exits 0 on success. Usage and validation errors exit 1; runtime and
numerical failures exit 2.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .beetle import RacingConfig, RacingConfigError, beetle_outcome, find_bellwether
from .dataset import DatasetError, save_community
from .harness import (
    DEFAULT_FRACTIONS,
    ExperimentPlan,
    render_csv,
    run_rq1,
    run_rq2,
    run_rq3,
    run_rq4,
    write_rq1,
    write_rq2,
    write_rq3,
    write_rq4,
)
from .synthetic import generate, planted_spec

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _fractions(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _racing_flags(p: argparse.ArgumentParser, start: float, step: float):
    p.add_argument("--budget", type=int, default=None, help="total measurements allowed (default: every source row)")
    p.add_argument("--lives", type=int, default=5)
    p.add_argument("--frac-start", type=float, default=start)
    p.add_argument("--frac-step", type=float, default=step)
    p.add_argument("--racing-repeats", type=int, default=5, help="tie-break repeats per racing round")


def _common(p: argparse.ArgumentParser, repeats: int = 30):
    p.add_argument("community", help="manifest path, or planted:SEED for the reference synthetic community")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=repeats)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for repeats")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bellwether", description="Bellwether discovery and transfer for configuration optimization.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    g = sub.add_parser("generate", help="write the planted synthetic community (manifest + CSVs)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--sources", type=int, default=8)
    g.add_argument("--targets", type=int, default=4)
    g.add_argument("--rows", type=int, default=500)
    g.add_argument("--options", type=int, default=10)
    g.add_argument("--out", required=True, help="output directory")

    d = sub.add_parser("discover", help="race the sources down to the bellwether group")
    _common(d, repeats=1)
    _racing_flags(d, 0.1, 0.1)
    d.add_argument("--out", default=None, help="also write the report to this file")

    t = sub.add_parser("transfer", help="discover, then pick a configuration for a target")
    _common(t, repeats=1)
    _racing_flags(t, 0.1, 0.1)
    t.add_argument("--target", required=True)
    t.add_argument("--out", default=None)

    for name, start, step, helptext in (
        ("rq1", 0.1, 0.1, "exhaustive round-robin ranking of sources"),
        ("rq2", 0.01, 0.01, "racing versus exhaustive discovery"),
        ("rq3", 0.1, 0.1, "win/loss against non-transfer over a fraction sweep"),
        ("rq4", 0.1, 0.1, "comparison with transfer baselines and their costs"),
    ):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        _racing_flags(p, start, step)
        p.add_argument("--out", required=True, help="output directory")
        if name == "rq3":
            p.add_argument("--fractions", type=_fractions, default=DEFAULT_FRACTIONS)
            p.add_argument("--beetle-level", choices=("fraction", "discovered"), default="fraction")

    r = sub.add_parser("report", help="render result CSVs as aligned text")
    r.add_argument("paths", nargs="+")
    r.add_argument("--out", default=None, help="write the rendering to this file instead of stdout")
    return parser


def _racing(args) -> RacingConfig:
    return RacingConfig(
        initial_fraction=args.frac_start,
        fraction_step=args.frac_step,
        budget=args.budget,
        lives=args.lives,
        repeats=args.racing_repeats,
    )


def _plan(args) -> ExperimentPlan:
    return ExperimentPlan(
        community=args.community,
        repeats=args.repeats,
        seed=args.seed,
        fractions=getattr(args, "fractions", DEFAULT_FRACTIONS),
        out_dir=args.out or ".",
        racing=_racing(args),
        jobs=args.jobs,
    )


def _emit(text: str, out, stdout) -> None:
    stdout.write(text)
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def _cmd_generate(args, stdout):
    spec = planted_spec(args.seed, args.sources, args.targets, args.rows, args.options)
    path = save_community(generate(spec), args.out)
    stdout.write(f"wrote {path} (planted bellwether: {spec.planted_name})\n")


def _cmd_discover(args, stdout):
    plan = _plan(args)
    result = find_bellwether(plan.load(), plan.racing, args.seed)
    _emit(plan.header("discover") + "\n" + result.to_text(), args.out, stdout)


def _cmd_transfer(args, stdout):
    plan = _plan(args)
    community = plan.load()
    target = community.table(args.target)
    result = find_bellwether(community, plan.racing, args.seed)
    outcome = beetle_outcome(result, community, target, args.seed, train_rows=None)
    names = community.schema.names
    config = ", ".join(f"{n}={o.decode(v)}" for n, o, v in zip(names, community.schema.options, outcome.config))
    text = (
        plan.header("transfer") + "\n"
        f"bellwethers: {', '.join(result.names)}\n"
        f"target: {target.name}\n"
        f"configuration: {config}\n"
        f"predicted: {outcome.predicted:.6g}\n"
        f"nar: {outcome.nar.value:.6g}\n"
        f"cost: {outcome.cost}\n"
    )
    _emit(text, args.out, stdout)


def _cmd_rq(args, stdout):
    plan = _plan(args)
    community = plan.load()
    out = Path(args.out)
    if args.command == "rq1":
        ranking, _ = run_rq1(community, plan.repeats, plan.seed)
        paths = write_rq1(plan, ranking, out)
    elif args.command == "rq2":
        first, report = run_rq2(community, plan.racing, plan.repeats, plan.seed, plan.jobs)
        paths = write_rq2(plan, first, report, out)
    elif args.command == "rq3":
        summary = run_rq3(community, plan.fractions, plan.repeats, plan.seed, plan.racing, plan.jobs, args.beetle_level)
        paths = write_rq3(plan, summary, out)
    else:
        ranking, costs, _ = run_rq4(community, plan.repeats, plan.seed, plan.racing, plan.jobs)
        paths = write_rq4(plan, ranking, costs, out)
    for p in paths:
        stdout.write(f"wrote {p}\n")


def _cmd_report(args, stdout):
    chunks = []
    for p in args.paths:
        path = Path(p)
        if not path.is_file():
            raise FileNotFoundError(f"no such result file: {path}")
        chunks.append(f"== {path.name}\n" + render_csv(path.read_text(encoding="utf-8")))
    _emit("\n".join(chunks), args.out, stdout)


COMMANDS = {
    "generate": _cmd_generate,
    "discover": _cmd_discover,
    "transfer": _cmd_transfer,
    "rq1": _cmd_rq,
    "rq2": _cmd_rq,
    "rq3": _cmd_rq,
    "rq4": _cmd_rq,
    "report": _cmd_report,
}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args, stdout)
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_INVALID
    except ArithmeticError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_RUNTIME
    except (DatasetError, RacingConfigError, ValueError, KeyError, OSError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        stderr.write(f"runtime error: {exc}\n")
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
