"""``pgo`` command line: ingest | analyze | report | optimize | watch |
serve-collector | simulate.

Exit codes: 0 success (including "no findings"), 1 usage error, 2 data
error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import collector, pipeline, simulate
from .adaptive import EmptyStream
from .config import ConfigError, load_config
from .detector import UnknownFormat, parse_report, render_report
from .init_tree import GateResult, NoColdStartData
from .pipeline import EXIT_DATA, EXIT_OK, EXIT_USAGE
from .profile_model import EmptyInput, MalformedRecord
from .rewriter import ParseError, StaleSource

DATA_ERRORS = (EmptyInput, MalformedRecord, ConfigError, NoColdStartData,
               StaleSource, ParseError, EmptyStream, OSError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are exit code 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pgo", description=__doc__)
    parser.add_argument("--config", help="config file (JSON); PGO_CONFIG is the fallback")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="merge agent batches into a profile store")
    p.add_argument("paths", nargs="+", help="batch files or directories of *.pgoprof.jsonl")
    p.add_argument("--out", default="pgo-out", help="output root directory")

    p = sub.add_parser("analyze", help="run the detection pipeline over a store")
    p.add_argument("store", help="merged store file")
    p.add_argument("--out", help="directory for report.json/report.md (default: next to store)")

    p = sub.add_parser("report", help="re-render an existing report.json")
    p.add_argument("report", help="report.json path")
    p.add_argument("--format", choices=("markdown", "json"), default="markdown")

    p = sub.add_parser("optimize", help="apply a report's findings to a source tree")
    p.add_argument("report", help="report.json path")
    p.add_argument("src", help="source tree root")
    p.add_argument("--out", help="directory for patch summaries")
    p.add_argument("--dry-run", action="store_true", help="print diffs, write nothing")

    p = sub.add_parser("watch", help="replay a trace and record workload-shift triggers")
    p.add_argument("trace", help="trace CSV")
    p.add_argument("--out", default="pgo-out", help="output root directory")
    p.add_argument("--auto", action="store_true", help="run analyze+optimize on each trigger")
    p.add_argument("--store", help="store file for --auto")
    p.add_argument("--src", help="source tree for --auto")

    p = sub.add_parser("serve-collector", help="run the batch collector endpoint")
    p.add_argument("--bind", default="127.0.0.1")
    p.add_argument("--port", type=int, default=9714)
    p.add_argument("--out", default="collector-inbox", help="batch storage directory")

    p = sub.add_parser("simulate", help="generate a synthetic invocation trace CSV")
    p.add_argument("--out-file", default="trace.csv")
    p.add_argument("--app", default="sim")
    p.add_argument("--entries", type=int, default=8)
    p.add_argument("--windows", type=int, default=30)
    p.add_argument("--window-ms", type=int, default=43_200_000)
    p.add_argument("--skew", type=float, default=2.0)
    p.add_argument("--volume", type=int, default=100)
    p.add_argument("--shift-at", type=int, nargs="*", default=[])
    p.add_argument("--top-k", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _print_gate(gate: GateResult) -> None:
    verdict = "passes" if gate.passes else "below threshold"
    print(f"gate: init/e2e ratio {float(gate.init_ratio):.4f} "
          f"(threshold {float(gate.threshold):.4f}) -> {verdict}")


def _cmd_ingest(args, cfg) -> int:
    result = pipeline.ingest([Path(p) for p in args.paths], cfg, Path(args.out))
    store = result.store
    print(f"merged {len(store.samples)} samples, {len(store.imports)} import timings, "
          f"{len(store.invocations)} invocations -> {result.store_path}")
    for warning in result.report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return EXIT_OK


def _cmd_analyze(args, cfg) -> int:
    out = Path(args.out) if args.out else None
    result = pipeline.analyze(Path(args.store), cfg, out_dir=out)
    _print_gate(result.analysis.gate)
    for warning in result.analysis.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if result.analysis.findings:
        for finding in result.analysis.findings:
            print(f"  {finding.kind:10s} {finding.library:30s} "
                  f"util {finding.utilization_pct:6.2f}%  init {finding.init_overhead_pct:6.2f}%")
    else:
        print("no findings")
    print(f"wrote {result.report_json_path} and {result.report_md_path}")
    return EXIT_OK


def _cmd_report(args, cfg) -> int:
    text = Path(args.report).read_text(encoding="utf-8")
    gate_raw, findings = parse_report(text)
    if args.format == "json":
        print(text, end="")
        return EXIT_OK
    from fractions import Fraction

    gate = GateResult(
        init_ratio=Fraction(str(gate_raw.get("ratio", 0))),
        threshold=Fraction(str(gate_raw.get("threshold", 0.1))),
        passes=bool(gate_raw.get("passes", False)),
        total_init_us=0, mean_cold_e2e_us=Fraction(0), cold_invocations=0,
    )
    print(render_report(findings, gate, "markdown"), end="")
    return EXIT_OK


def _cmd_optimize(args, cfg) -> int:
    out = Path(args.out) if args.out else None
    result = pipeline.optimize(Path(args.report), Path(args.src), cfg,
                               dry_run=args.dry_run, out_dir=out)
    if not result.flagged_units:
        print("report has no findings; nothing to optimize")
        return EXIT_OK
    if not result.touched:
        print(f"warning: no imports of {', '.join(result.flagged_units)} found under {args.src}",
              file=sys.stderr)
        return EXIT_OK
    for outcome in result.outcomes:
        plan = outcome.plan
        status = "would edit" if args.dry_run else ("edited" if outcome.applied else "FAILED")
        if plan.is_empty:
            status = "skipped"
        print(f"{status}: {plan.file} ({len(plan.removals)} removal(s), "
              f"{len(plan.insertions)} insertion(s), {len(plan.skipped)} skip(s))")
        for skip in plan.skipped:
            print(f"    skip [{skip.reason}] {skip.detail}")
        if outcome.diff:
            print(outcome.diff, end="")
        if not outcome.verified:
            print("    verification failed", file=sys.stderr)
    return result.exit_code


def _cmd_watch(args, cfg) -> int:
    result = pipeline.watch(
        Path(args.trace), cfg, Path(args.out), auto=args.auto,
        store_path=Path(args.store) if args.store else None,
        src_root=Path(args.src) if args.src else None,
    )
    print(f"{len(result.timeline.windows)} window(s), {len(result.fired)} trigger(s) "
          f"-> {result.triggers_path}")
    for decision in result.fired:
        print(f"  fired at window end {decision.window_end_ms} ms, "
              f"total delta {float(decision.total_delta):.4f}")
    return EXIT_OK


def _cmd_serve_collector(args, cfg) -> int:
    collector.serve(args.bind, args.port, args.out)
    return EXIT_OK


def _cmd_simulate(args, cfg) -> int:
    spec = simulate.SimulationSpec(
        app_id=args.app,
        entry_points=args.entries,
        windows=args.windows,
        window_ms=args.window_ms,
        skew=args.skew,
        base_volume=args.volume,
        shift_windows=tuple(args.shift_at),
        shift_top_k=args.top_k,
        seed=args.seed,
    )
    windows = simulate.write_trace_csv(args.out_file, spec)
    share = simulate.cumulative_top_share(windows, top=3)
    print(f"wrote {len(windows)} windows x {args.entries} entry points to {args.out_file} "
          f"(top-3 share {share:.1%})")
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "analyze": _cmd_analyze,
    "report": _cmd_report,
    "optimize": _cmd_optimize,
    "watch": _cmd_watch,
    "serve-collector": _cmd_serve_collector,
    "simulate": _cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except UnknownFormat as exc:
        print(f"pgo: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"pgo: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
