"""Calling context tree: construction, count escalation, library attribution.

Every distinct call path gets its own node, so the same function reached via
two different callers is two contexts. Sample counts land exclusively at the
leaf context and are then escalated toward the root, crediting orchestrating
callers with the activity of everything beneath them.

Utilization is the fraction of runtime-phase exclusive samples attributed to
a library; samples whose call path shows module top-level or package
initializer execution count as initialization phase and are excluded from
both sides of the ratio. Fractions are exact (``fractions.Fraction``), so the
per-library utilizations always sum to exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .profile_model import CallFrame, ProfileStore, StackSample

APP_LIBRARY = "app"

INITIALIZATION = "initialization"
RUNTIME = "runtime"

DEFAULT_LIBRARY_MARKERS = ("site-packages", "dist-packages")


def _segments(path: str) -> list[str]:
    return [seg for seg in path.replace("\\", "/").split("/") if seg]


@dataclass(frozen=True)
class PathMapping:
    """Maps file paths to libraries via root markers.

    ``library_markers`` are single path segments (e.g. ``site-packages``);
    everything after the last marker belongs to a library named by the next
    segment. ``vendor_roots`` are path prefixes treated the same way (for
    bundled dependency directories). Paths under ``app_root`` — and any path
    that matches nothing — belong to the application itself.
    """

    app_root: str = ""
    library_markers: tuple[str, ...] = DEFAULT_LIBRARY_MARKERS
    vendor_roots: tuple[str, ...] = ()

    def library_of(self, file_path: str) -> str:
        name = self.module_of(file_path)
        if name is None:
            return APP_LIBRARY
        return name.split(".", 1)[0]

    def _root_end(self, segs: list[str]) -> int:
        """Index of the first segment after the best-matching library root, or -1.

        The rightmost match wins; among matches ending at the same place, the
        longest configured root wins.
        """
        best = -1
        roots = [_segments(r) for r in self.vendor_roots] + [[m] for m in self.library_markers]
        for root_segs in roots:
            if not root_segs:
                continue
            n = len(root_segs)
            for idx in range(len(segs) - n, -1, -1):
                if segs[idx: idx + n] == root_segs:
                    if idx + n > best:
                        best = idx + n
                    break
        return best

    def module_of(self, file_path: str) -> str | None:
        """Dotted module name for a library file, or None for app/unmatched paths.

        ``.../site-packages/nltk/sem/__init__.py`` -> ``nltk.sem``
        ``.../site-packages/six.py``               -> ``six``
        """
        segs = _segments(file_path)
        start = self._root_end(segs)
        if start < 0 or start >= len(segs):
            return None
        parts = segs[start:]
        if parts[-1].endswith(".py"):
            stem = parts[-1][:-3]
            parts = parts[:-1] if stem == "__init__" else parts[:-1] + [stem]
        if not parts:
            return None
        return ".".join(parts)

    def short_path(self, file_path: str) -> str:
        """Path relative to its library root (or app root) for display."""
        segs = _segments(file_path)
        start = self._root_end(segs)
        if 0 <= start < len(segs):
            return "/".join(segs[start:])
        if self.app_root:
            app_segs = _segments(self.app_root)
            if segs[: len(app_segs)] == app_segs and len(segs) > len(app_segs):
                return "/".join(segs[len(app_segs):])
        return "/".join(segs)

    def is_app_path(self, file_path: str) -> bool:
        if self.module_of(file_path) is not None:
            return False
        if not self.app_root:
            return True
        app_segs = _segments(self.app_root)
        return _segments(file_path)[: len(app_segs)] == app_segs


def attribute_library(frame: CallFrame, mapping: PathMapping,
                      unmatched: set[str] | None = None) -> str:
    """Library id for a frame; unmatched non-app paths fall back to "app".

    Profiles are never rejected for one odd path; ``unmatched`` (when given)
    collects each distinct fallback path once so callers can warn.
    """
    name = mapping.module_of(frame.file_path)
    if name is not None:
        return name.split(".", 1)[0]
    if unmatched is not None and not mapping.is_app_path(frame.file_path):
        unmatched.add(frame.file_path)
    return APP_LIBRARY


def classify_phase(sample: StackSample, mapping: PathMapping) -> str:
    """INITIALIZATION if any frame executes module top-level or package-init code.

    Module bodies run only while being imported, so a ``<module>`` frame in a
    library file — or any ``__init__.py`` frame named ``<module>``/``__init__``
    — marks the whole sample as initialization phase.
    """
    for frame in sample.frames:
        basename = frame.file_path.replace("\\", "/").rsplit("/", 1)[-1]
        if frame.function_name == "<module>" and mapping.module_of(frame.file_path) is not None:
            return INITIALIZATION
        if basename == "__init__.py" and frame.function_name in ("<module>", "__init__"):
            return INITIALIZATION
    return RUNTIME


@dataclass
class CctNode:
    frame: CallFrame | None  # None only at the synthetic root
    library: str | None
    module: str | None  # dotted module name for library files, None otherwise
    children: dict[tuple[str, str], "CctNode"] = field(default_factory=dict)
    exclusive_count: int = 0
    inclusive_count: int = 0
    init_exclusive_count: int = 0

    def child(self, frame: CallFrame, mapping: PathMapping,
              unmatched: set[str] | None = None) -> "CctNode":
        """Find or create the child context for ``frame``.

        Identity is (function, file); the minimum observed line is kept for
        reporting, since one function sampled at different lines is still one
        calling context.
        """
        key = (frame.function_name, frame.file_path)
        node = self.children.get(key)
        if node is None:
            node = CctNode(
                frame=frame,
                library=attribute_library(frame, mapping, unmatched),
                module=mapping.module_of(frame.file_path),
            )
            self.children[key] = node
        elif frame.line < node.frame.line:
            node.frame = CallFrame(frame.function_name, frame.file_path, frame.line)
        return node

    def walk(self):
        yield self
        for key in sorted(self.children):
            yield from self.children[key].walk()


@dataclass
class CCT:
    root: CctNode
    total_samples: int
    unmatched_paths: tuple[str, ...] = ()

    def walk(self):
        return self.root.walk()


def build_cct(store: ProfileStore, mapping: PathMapping) -> CCT:
    """Accumulate call paths into a CCT and escalate counts.

    Each sample increments the exclusive count of its leaf context; samples
    classified as initialization phase also increment the leaf's init count.
    Insertion order does not matter: the result depends only on the multiset
    of samples.
    """
    unmatched: set[str] = set()
    root = CctNode(frame=None, library=None, module=None)
    for sample in store.samples:
        phase = classify_phase(sample, mapping)
        node = root
        for frame in sample.frames:
            node = node.child(frame, mapping, unmatched)
        node.exclusive_count += 1
        if phase == INITIALIZATION:
            node.init_exclusive_count += 1
    cct = CCT(root=root, total_samples=len(store.samples),
              unmatched_paths=tuple(sorted(unmatched)))
    escalate(cct)
    return cct


def escalate(cct: CCT) -> CCT:
    """Propagate exclusive counts toward the root (post-order, in place)."""

    def visit(node: CctNode) -> int:
        total = node.exclusive_count
        for child in node.children.values():
            total += visit(child)
        node.inclusive_count = total
        return total

    visit(cct.root)
    return cct


def check_escalation(cct: CCT) -> list[str]:
    """Full-tree walk of the inclusive-count invariant; returns violations."""
    problems = []
    for node in cct.walk():
        expected = node.exclusive_count + sum(c.inclusive_count for c in node.children.values())
        if node.inclusive_count != expected:
            where = node.frame.function_name if node.frame else "<root>"
            problems.append(f"{where}: inclusive {node.inclusive_count} != {expected}")
        if node.init_exclusive_count > node.exclusive_count:
            where = node.frame.function_name if node.frame else "<root>"
            problems.append(f"{where}: init count exceeds exclusive count")
    return problems


def runtime_counts_by_library(cct: CCT) -> dict[str, int]:
    counts: dict[str, int] = {}
    for node in cct.walk():
        if node.library is None:
            continue
        runtime = node.exclusive_count - node.init_exclusive_count
        if runtime:
            counts[node.library] = counts.get(node.library, 0) + runtime
    return counts


def runtime_counts_by_module(cct: CCT) -> dict[str, int]:
    """Runtime exclusive samples keyed by dotted module name (library files only)."""
    counts: dict[str, int] = {}
    for node in cct.walk():
        if node.module is None:
            continue
        runtime = node.exclusive_count - node.init_exclusive_count
        if runtime:
            counts[node.module] = counts.get(node.module, 0) + runtime
    return counts


def init_counts_by_library(cct: CCT) -> dict[str, int]:
    counts: dict[str, int] = {}
    for node in cct.walk():
        if node.library is None or not node.init_exclusive_count:
            continue
        counts[node.library] = counts.get(node.library, 0) + node.init_exclusive_count
    return counts


def _matches_prefix(name: str | None, prefix: str) -> bool:
    return name is not None and (name == prefix or name.startswith(prefix + "."))


def entry_paths(cct: CCT, prefix: str, by_module: bool = False
                ) -> list[tuple[tuple[CallFrame, ...], int]]:
    """Root-to-entry call paths into a library (or dotted module prefix).

    An entry node is the first node on its path whose attribution matches;
    the path includes that node, and carries its inclusive count. Sorted by
    count descending, then by path for determinism.
    """

    def matches(node: CctNode) -> bool:
        if by_module:
            return _matches_prefix(node.module, prefix)
        return node.library == prefix

    paths: list[tuple[tuple[CallFrame, ...], int]] = []

    def visit(node: CctNode, trail: list[CallFrame]) -> None:
        if node.frame is not None:
            trail = trail + [node.frame]
            if matches(node):
                paths.append((tuple(trail), node.inclusive_count))
                return  # deeper matches are inside the same entry
        for key in sorted(node.children):
            visit(node.children[key], trail)

    visit(cct.root, [])
    paths.sort(key=lambda item: (-item[1], [(f.file_path, f.function_name, f.line) for f in item[0]]))
    return paths


@dataclass(frozen=True)
class LibraryStats:
    library: str
    runtime_exclusive_samples: int
    init_samples: int
    utilization: Fraction  # exact; sums to 1 across libraries when runtime samples exist
    call_paths: tuple[tuple[tuple[CallFrame, ...], int], ...]


def library_stats(cct: CCT, store: ProfileStore) -> list[LibraryStats]:
    """Per-library utilization over runtime-phase exclusive samples.

    If no runtime samples exist at all, every utilization is defined as 0.
    """
    runtime = runtime_counts_by_library(cct)
    init = init_counts_by_library(cct)
    total_runtime = sum(runtime.values())

    stats = []
    for library in sorted(set(runtime) | set(init)):
        count = runtime.get(library, 0)
        util = Fraction(count, total_runtime) if total_runtime > 0 else Fraction(0)
        stats.append(
            LibraryStats(
                library=library,
                runtime_exclusive_samples=count,
                init_samples=init.get(library, 0),
                utilization=util,
                call_paths=tuple(entry_paths(cct, library)),
            )
        )
    stats.sort(key=lambda s: (-s.runtime_exclusive_samples, s.library))
    return stats


def utilization_of_prefix(cct: CCT, prefix: str) -> Fraction:
    """Utilization of a dotted module prefix (e.g. a sub-package)."""
    by_module = runtime_counts_by_module(cct)
    total_runtime = sum(runtime_counts_by_library(cct).values())
    if total_runtime == 0:
        return Fraction(0)
    count = sum(c for name, c in by_module.items() if _matches_prefix(name, prefix))
    return Fraction(count, total_runtime)
