"""Command-level workflow: ingest -> analyze -> optimize, plus watch.

Artifacts are plain files under a run directory (diffable, CI-friendly):

    <out>/store/<app>/<run_id>/store.pgoprof.jsonl   merged profile
    <out>/store/<app>/<run_id>/validation.json       merge warnings
    <out>/store/<app>/<run_id>/manifest.json         run manifest
    report.json / report.md                          next to the store
    <out>/patches/<file>.patch.json                  per-file edit summaries
    <out>/triggers.jsonl                             fired workload shifts

A run id is a digest of the input digests plus the config digest, so
re-running with identical inputs lands in the same directory with identical
artifact digests, which the manifest records.
"""

from __future__ import annotations

import difflib
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import adaptive, detector, init_tree, profile_model, rewriter
from .cct import APP_LIBRARY, CCT, PathMapping, build_cct, library_stats
from .config import Config, config_digest
from .detector import DetectorConfig, Finding, LibraryRow
from .init_tree import GateResult

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3

SKIP_DIRS = {".git", "__pycache__", "venv", ".venv", "node_modules",
             "site-packages", "dist-packages", "build", "dist"}


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _sha256_file(path: Path) -> str:
    return _sha256_bytes(path.read_bytes())


def _utc_stamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


@dataclass
class RunManifest:
    run_id: str
    created_utc: str
    input_digests: dict[str, str]
    config_sha256: str
    artifacts: dict[str, dict[str, str]]

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"


def _write_artifact(path: Path, content: str, manifest: RunManifest) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")
    manifest.artifacts[path.name] = {"path": str(path), "sha256": _sha256_bytes(content.encode())}


# ---------------------------------------------------------------------------
# ingest


@dataclass
class IngestResult:
    store_path: Path
    run_dir: Path
    store: profile_model.ProfileStore
    report: profile_model.ValidationReport
    manifest: RunManifest


def collect_batch_files(paths: list[Path]) -> list[Path]:
    files: list[Path] = []
    for path in paths:
        if path.is_dir():
            files.extend(sorted(path.glob(f"*{profile_model.BATCH_EXTENSION}")))
        elif path.is_file():
            files.append(path)
    return sorted(set(files))


def ingest(paths: list[Path], cfg: Config, out_dir: Path) -> IngestResult:
    batch_files = collect_batch_files(paths)
    if not batch_files:
        raise profile_model.EmptyInput(f"no {profile_model.BATCH_EXTENSION} batches found")

    input_digests = {str(p): _sha256_file(p) for p in batch_files}
    batches = [profile_model.load_batch_file(p) for p in batch_files]
    merged = profile_model.validate_and_merge(batches)
    store = merged.store

    run_id = _sha256_bytes(
        json.dumps([sorted(input_digests.values()), config_digest(cfg)]).encode()
    )[:12]
    app = store.app_id or "unknown-app"
    run_dir = out_dir / "store" / app / run_id
    manifest = RunManifest(
        run_id=run_id,
        created_utc=_utc_stamp(),
        input_digests=input_digests,
        config_sha256=config_digest(cfg),
        artifacts={},
    )

    meta = profile_model.MetaRecord(app_id=app, agent_version="merged", sampling_hz=cfg.sampling_hz)
    _write_artifact(run_dir / f"store{profile_model.BATCH_EXTENSION}",
                    profile_model.dump_store(store, meta), manifest)
    validation = {
        "orphan_invocation_ids": list(merged.report.orphan_invocation_ids),
        "dropped_orphan_records": merged.report.dropped_orphan_records,
        "warnings": list(merged.report.warnings),
    }
    _write_artifact(run_dir / "validation.json",
                    json.dumps(validation, indent=2, sort_keys=True) + "\n", manifest)
    (run_dir / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return IngestResult(
        store_path=run_dir / f"store{profile_model.BATCH_EXTENSION}",
        run_dir=run_dir,
        store=store,
        report=merged.report,
        manifest=manifest,
    )


# ---------------------------------------------------------------------------
# analyze


@dataclass
class Analysis:
    gate: GateResult
    findings: list[Finding]
    library_rows: list[LibraryRow]
    tree: init_tree.InitNode
    stats: list
    cct: CCT | None
    warnings: list[str]


def analyze_store(store: profile_model.ProfileStore, cfg: Config) -> Analysis:
    """init tree -> gate -> (if it passes) CCT -> stats -> findings."""
    mapping = cfg.path_mapping()
    tree = init_tree.build_init_tree(list(store.imports))
    gate = init_tree.gate(tree, list(store.invocations), cfg.gate_threshold)

    warnings: list[str] = []
    if not gate.passes:
        return Analysis(gate=gate, findings=[], library_rows=[], tree=tree,
                        stats=[], cct=None, warnings=warnings)

    cct = build_cct(store, mapping)
    for path in cct.unmatched_paths:
        warnings.append(f"unmatched file path attributed to app: {path}")
    stats = library_stats(cct, store)
    missing = init_tree.libraries_missing_timings(
        {s.library for s in stats}, tree
    )
    for library in missing:
        warnings.append(f"library {library} was sampled but has no import timings")

    dcfg = DetectorConfig(
        utilization_threshold=cfg.utilization_threshold,
        min_init_share=cfg.min_init_share,
        gate_threshold=cfg.gate_threshold,
    )
    findings = detector.detect(stats, tree, dcfg, cct=cct, mapping=mapping)
    rows = _library_rows(stats, tree, mapping)
    return Analysis(gate=gate, findings=findings, library_rows=rows, tree=tree,
                    stats=stats, cct=cct, warnings=warnings)


def _library_rows(stats, tree: init_tree.InitNode, mapping: PathMapping) -> list[LibraryRow]:
    util_by_library = {s.library: s.utilization for s in stats}
    paths_by_library = {s.library: s.call_paths for s in stats}
    rows = []
    names = {c.name for c in tree.children.values()} | set(util_by_library)
    for name in sorted(names):
        if name == APP_LIBRARY:
            continue
        node = tree.find(name)
        share = node.share_of_total if node is not None else None
        file = name.replace(".", "/") + "/__init__.py"
        paths = paths_by_library.get(name) or ()
        if paths:
            file = mapping.short_path(paths[0][0][-1].file_path)
        rows.append(LibraryRow(
            name=name,
            utilization_pct=float(util_by_library.get(name, 0) * 100),
            init_overhead_pct=float(share * 100) if share is not None else 0.0,
            file=file,
        ))
    rows.sort(key=lambda r: (-r.init_overhead_pct, r.name))
    return rows


@dataclass
class AnalyzeResult:
    analysis: Analysis
    report_json_path: Path
    report_md_path: Path
    manifest: RunManifest


def analyze(store_path: Path, cfg: Config, out_dir: Path | None = None) -> AnalyzeResult:
    records = profile_model.load_batch_file(store_path)
    merged = profile_model.validate_and_merge([records])
    analysis = analyze_store(merged.store, cfg)

    target = out_dir if out_dir is not None else store_path.parent
    manifest = RunManifest(
        run_id=_sha256_bytes(
            json.dumps([_sha256_file(store_path), config_digest(cfg)]).encode()
        )[:12],
        created_utc=_utc_stamp(),
        input_digests={str(store_path): _sha256_file(store_path)},
        config_sha256=config_digest(cfg),
        artifacts={},
    )
    report_json = detector.render_report(analysis.findings, analysis.gate, "json")
    report_md = detector.render_report(
        analysis.findings, analysis.gate, "markdown",
        library_rows=analysis.library_rows, app_id=merged.store.app_id,
    )
    json_path = target / "report.json"
    md_path = target / "report.md"
    _write_artifact(json_path, report_json, manifest)
    _write_artifact(md_path, report_md, manifest)
    (target / "analyze-manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return AnalyzeResult(analysis=analysis, report_json_path=json_path,
                         report_md_path=md_path, manifest=manifest)


# ---------------------------------------------------------------------------
# optimize


@dataclass
class FileOutcome:
    path: Path
    plan: rewriter.RewritePlan
    applied: bool
    verified: bool
    diff: str = ""


@dataclass
class OptimizeResult:
    outcomes: list[FileOutcome]
    flagged_units: list[str]
    exit_code: int

    @property
    def touched(self) -> list[FileOutcome]:
        return [o for o in self.outcomes if not o.plan.is_empty]


def iter_source_files(root: Path):
    for path in sorted(root.rglob("*.py")):
        if any(part in SKIP_DIRS for part in path.parts):
            continue
        yield path


def optimize(report_path: Path, src_root: Path, cfg: Config,
             dry_run: bool = False, out_dir: Path | None = None,
             on_planned=None) -> OptimizeResult:
    """Apply the report's findings to a source tree.

    Two phases: plan every file against its current content, then apply and
    verify. ``on_planned`` is a test seam invoked between the phases.
    """
    _, findings = detector.parse_report(report_path.read_text(encoding="utf-8"))
    flagged = sorted({f.library for f in findings})
    if not flagged:
        return OptimizeResult(outcomes=[], flagged_units=[], exit_code=EXIT_OK)

    planned: list[tuple[Path, str, rewriter.RewritePlan]] = []
    for path in iter_source_files(src_root):
        source = path.read_text(encoding="utf-8")
        plan = rewriter.plan(source, set(flagged),
                             filename=str(path.relative_to(src_root)),
                             denylist=cfg.denylist)
        if plan.is_empty and not plan.skipped:
            continue
        planned.append((path, source, plan))

    if on_planned is not None:
        on_planned(planned)

    exit_code = EXIT_OK
    outcomes: list[FileOutcome] = []
    patches_dir = (out_dir / "patches") if out_dir is not None else None
    for path, _, plan in planned:
        source = path.read_text(encoding="utf-8")
        if plan.is_empty:
            outcomes.append(FileOutcome(path=path, plan=plan, applied=False, verified=True))
            continue
        rewritten = rewriter.apply(source, plan)  # raises StaleSource on drift
        report = rewriter.verify(source, rewritten)
        diff = ""
        if dry_run:
            diff = "".join(difflib.unified_diff(
                source.splitlines(keepends=True), rewritten.splitlines(keepends=True),
                fromfile=f"a/{plan.file}", tofile=f"b/{plan.file}",
            ))
        if not report.ok:
            outcomes.append(FileOutcome(path=path, plan=plan, applied=False,
                                        verified=False, diff=diff))
            exit_code = EXIT_VERIFY
            continue
        if not dry_run:
            path.write_text(rewritten, encoding="utf-8")
            if patches_dir is not None:
                patches_dir.mkdir(parents=True, exist_ok=True)
                summary = rewriter.patch_summary(source, plan)
                name = plan.file.replace("/", "__") + ".patch.json"
                (patches_dir / name).write_text(
                    json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        outcomes.append(FileOutcome(path=path, plan=plan, applied=not dry_run,
                                    verified=True, diff=diff))

    return OptimizeResult(outcomes=outcomes, flagged_units=flagged, exit_code=exit_code)


# ---------------------------------------------------------------------------
# watch


@dataclass
class WatchResult:
    timeline: adaptive.TriggerTimeline
    triggers_path: Path
    fired: list[adaptive.TriggerDecision]
    malformed_rows: int


def watch(trace_path: Path, cfg: Config, out_dir: Path,
          auto: bool = False, store_path: Path | None = None,
          src_root: Path | None = None) -> WatchResult:
    events, windows, bad = adaptive.load_trace_csv(trace_path, window_ms=cfg.window_ms)
    if windows is not None:
        timeline = adaptive.run_windows(windows, cfg.epsilon)
    else:
        timeline = adaptive.run_stream(events, cfg.window_ms, cfg.epsilon)

    out_dir.mkdir(parents=True, exist_ok=True)
    triggers_path = out_dir / "triggers.jsonl"
    fired = [d for d in timeline.decisions if d.fired]
    with open(triggers_path, "a", encoding="utf-8") as fh:
        for decision in fired:
            fh.write(json.dumps({
                "window_end_ms": decision.window_end_ms,
                "total_delta": float(decision.total_delta),
                "fired": True,
                "per_entry_delta": {ep: float(d) for ep, d in
                                    sorted(decision.per_entry_delta.items())},
            }, sort_keys=True) + "\n")
    triggers_path.touch()

    if auto and fired and store_path is not None:
        for _ in fired:
            result = analyze(store_path, cfg, out_dir=out_dir)
            if src_root is not None and result.analysis.findings:
                optimize(result.report_json_path, src_root, cfg, out_dir=out_dir)

    if bad:
        print(f"watch: skipped {bad} malformed trace row(s)", file=sys.stderr)
    return WatchResult(timeline=timeline, triggers_path=triggers_path,
                       fired=fired, malformed_rows=bad)
