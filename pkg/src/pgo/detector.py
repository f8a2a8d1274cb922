"""Flags libraries whose initialization cost is out of proportion to their use.

A unit (whole library or dotted sub-package) is flagged when its share of
total initialization time reaches ``min_init_share`` while its runtime
utilization stays below ``utilization_threshold``; zero utilization makes it
``unused``, anything above zero ``infrequent``. When a library as a whole is
too busy to flag but one of its sub-packages qualifies, the sub-package is
flagged on its own, which is what lets the rewriter defer ``nltk.sem``
without touching ``nltk``.

Reports render as markdown (the human summary table plus call paths) or as
the canonical JSON the rewriter consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .cct import CCT, APP_LIBRARY, CallFrame, PathMapping, entry_paths, runtime_counts_by_module
from .init_tree import GateResult, InitNode
from .profile_model import MalformedRecord

KIND_UNUSED = "unused"
KIND_INFREQUENT = "infrequent"

TOP_PATHS_PER_FINDING = 3


class UnknownFormat(ValueError):
    """Report format must be 'json' or 'markdown'."""


def _as_fraction(value) -> Fraction:
    return value if isinstance(value, Fraction) else Fraction(str(value))


@dataclass(frozen=True)
class DetectorConfig:
    utilization_threshold: Fraction = Fraction(1, 50)  # 2% of collected samples
    min_init_share: Fraction = Fraction(1, 20)
    gate_threshold: Fraction = Fraction(1, 10)

    def __post_init__(self) -> None:
        for name in ("utilization_threshold", "min_init_share", "gate_threshold"):
            value = _as_fraction(getattr(self, name))
            object.__setattr__(self, name, value)
            if not (0 < value < 1):
                raise ValueError(f"{name} must be in (0, 1), got {value}")


@dataclass(frozen=True)
class Finding:
    library: str  # dotted name of the flagged unit
    kind: str
    utilization_pct: float
    init_overhead_pct: float
    files: tuple[str, ...]
    top_call_paths: tuple[tuple[tuple[CallFrame, ...], int], ...]
    flagged_subpackages: tuple[tuple[str, float], ...]  # (dotted name, init share pct)


@dataclass(frozen=True)
class LibraryRow:
    """Context row for the markdown table (every library, flagged or not)."""

    name: str
    utilization_pct: float
    init_overhead_pct: float
    file: str


def _default_file(dotted: str) -> str:
    return dotted.replace(".", "/") + "/__init__.py"


def _shorten(frames: tuple[CallFrame, ...], mapping: PathMapping | None) -> tuple[CallFrame, ...]:
    if mapping is None:
        return frames
    return tuple(CallFrame(f.function_name, mapping.short_path(f.file_path), f.line) for f in frames)


def _paths_for(dotted: str, cct: CCT | None, mapping: PathMapping | None,
               top_level: bool) -> tuple[tuple[tuple[CallFrame, ...], int], ...]:
    if cct is None:
        return ()
    raw = entry_paths(cct, dotted, by_module=not top_level)
    return tuple((_shorten(path, mapping), count) for path, count in raw[:TOP_PATHS_PER_FINDING])


def _files_for(dotted: str, paths) -> tuple[str, ...]:
    files = sorted({path[-1].file_path for path, _ in paths})
    return tuple(files) if files else (_default_file(dotted),)


def detect(stats, tree: InitNode, cfg: DetectorConfig,
           cct: CCT | None = None, mapping: PathMapping | None = None) -> list:
    """Rank inefficient units by initialization overhead.

    ``stats`` is the per-library utilization list; ``tree`` the init
    breakdown. The CCT (when given) supplies sub-package utilizations and
    call paths; without it only whole libraries are considered.
    """
    util_by_library = {s.library: s.utilization for s in stats}
    total_runtime = sum(s.runtime_exclusive_samples for s in stats)
    module_counts = runtime_counts_by_module(cct) if cct is not None else {}

    def prefix_util(prefix: str) -> Fraction:
        if total_runtime == 0:
            return Fraction(0)
        count = sum(c for name, c in module_counts.items()
                    if name == prefix or name.startswith(prefix + "."))
        return Fraction(count, total_runtime)

    def qualifies(share: Fraction, util: Fraction) -> bool:
        return share >= cfg.min_init_share and util < cfg.utilization_threshold

    def make_finding(dotted: str, util: Fraction, share: Fraction,
                     subpackages: tuple[tuple[str, float], ...], top_level: bool) -> Finding:
        paths = _paths_for(dotted, cct, mapping, top_level)
        return Finding(
            library=dotted,
            kind=KIND_UNUSED if util == 0 else KIND_INFREQUENT,
            utilization_pct=float(util * 100),
            init_overhead_pct=float(share * 100),
            files=_files_for(dotted, paths),
            top_call_paths=paths,
            flagged_subpackages=subpackages,
        )

    def flagged_descendants(node: InitNode) -> list[tuple[str, float]]:
        out = []
        for child in node.walk():
            if child is node:
                continue
            if qualifies(child.share_of_total, prefix_util(child.name)):
                out.append((child.name, float(child.share_of_total * 100)))
        out.sort(key=lambda item: (-item[1], item[0]))
        return out

    findings: list[Finding] = []
    for lib_node in tree.sorted_children():
        library = lib_node.name
        if library == APP_LIBRARY:
            continue
        util = util_by_library.get(library, Fraction(0))
        if qualifies(lib_node.share_of_total, util):
            findings.append(make_finding(
                library, util, lib_node.share_of_total,
                tuple(flagged_descendants(lib_node)), top_level=True,
            ))
            continue
        # Partially flagged: the library is too busy, but cold corners of it
        # may still qualify. Emit each maximal qualifying sub-package.
        if cct is None:
            continue
        stack = list(lib_node.children.values())
        while stack:
            node = stack.pop()
            if qualifies(node.share_of_total, prefix_util(node.name)):
                findings.append(make_finding(
                    node.name, prefix_util(node.name), node.share_of_total,
                    tuple(flagged_descendants(node)), top_level=False,
                ))
            else:
                stack.extend(node.children.values())

    findings.sort(key=lambda f: (-f.init_overhead_pct, f.library))
    return findings


def _gate_dict(gate: GateResult) -> dict:
    return {
        "ratio": float(gate.init_ratio),
        "threshold": float(gate.threshold),
        "passes": gate.passes,
    }


def _finding_dict(finding: Finding) -> dict:
    return {
        "library": finding.library,
        "kind": finding.kind,
        "utilization_pct": finding.utilization_pct,
        "init_overhead_pct": finding.init_overhead_pct,
        "files": list(finding.files),
        "call_paths": [
            {"path": [[f.function_name, f.file_path, f.line] for f in path], "count": count}
            for path, count in finding.top_call_paths
        ],
        "subpackages": [
            {"name": name, "init_share_pct": share} for name, share in finding.flagged_subpackages
        ],
    }


def render_json(findings: list, gate: GateResult) -> str:
    payload = {"gate": _gate_dict(gate), "findings": [_finding_dict(f) for f in findings]}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def parse_report(text: str) -> tuple[dict, list]:
    """Inverse of render_json; returns (gate dict, findings)."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid report JSON: {exc}") from None
    findings = []
    for raw in payload.get("findings", []):
        findings.append(Finding(
            library=raw["library"],
            kind=raw["kind"],
            utilization_pct=raw["utilization_pct"],
            init_overhead_pct=raw["init_overhead_pct"],
            files=tuple(raw.get("files", [])),
            top_call_paths=tuple(
                (tuple(CallFrame(fn, file, line) for fn, file, line in item["path"]), item["count"])
                for item in raw.get("call_paths", [])
            ),
            flagged_subpackages=tuple(
                (item["name"], item["init_share_pct"]) for item in raw.get("subpackages", [])
            ),
        ))
    return payload.get("gate", {}), findings


def _format_path(path: tuple[CallFrame, ...]) -> str:
    return " → ".join(f"{frame.file_path}:{frame.line}" for frame in path)


def render_markdown(findings: list, gate: GateResult,
                    library_rows: list[LibraryRow] | None = None,
                    app_id: str = "") -> str:
    lines = ["# Inefficiency Report", ""]
    if app_id:
        lines += [f"**Application:** {app_id}", ""]
    verdict = "PASS" if gate.passes else "BELOW THRESHOLD"
    lines += [
        f"Gate: init/e2e ratio {float(gate.init_ratio):.4f} "
        f"vs threshold {float(gate.threshold):.4f} -> {verdict}",
        "",
    ]
    if not gate.passes:
        lines += ["Initialization overhead is below the gate threshold; "
                  "this application was not analyzed further.", ""]

    flagged = {f.library for f in findings}
    rows: list[tuple[str, str, float, float, str]] = []
    if library_rows:
        for row in library_rows:
            mark = "+" if row.name in flagged else "-"
            rows.append((mark, row.name, row.utilization_pct, row.init_overhead_pct, row.file))
        for f in findings:
            if library_rows and any(r.name == f.library for r in library_rows):
                continue
            rows.append(("+", f.library, f.utilization_pct, f.init_overhead_pct,
                         f.files[0] if f.files else ""))
    else:
        rows = [("+", f.library, f.utilization_pct, f.init_overhead_pct,
                 f.files[0] if f.files else "") for f in findings]

    if rows:
        lines += [
            "| | Package | Util. | Init. Overhead | File |",
            "|---|---|---:|---:|---|",
        ]
        for mark, name, util, init, file in rows:
            lines.append(f"| {mark} | {name} | {util:.2f} | {init:.2f} | {file} |")
        lines.append("")
    if not findings:
        lines += ["No findings.", ""]

    paths = [(f.library, path, count) for f in findings for path, count in f.top_call_paths]
    if paths:
        lines += ["## Call Path", "", "| Package | Path | Samples |", "|---|---|---:|"]
        for library, path, count in paths:
            lines.append(f"| {library} | {_format_path(path)} | {count} |")
        lines.append("")
    return "\n".join(lines)


def render_report(findings: list, gate: GateResult, format: str = "json",
                  library_rows: list[LibraryRow] | None = None, app_id: str = "") -> str:
    if format == "json":
        return render_json(findings, gate)
    if format == "markdown":
        return render_markdown(findings, gate, library_rows=library_rows, app_id=app_id)
    raise UnknownFormat(f"unknown report format {format!r}")
