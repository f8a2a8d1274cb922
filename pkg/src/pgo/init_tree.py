"""Hierarchical breakdown of library initialization time and the entry gate.

Import self-times (exclusive of nested imports) are the stored primitive;
because they are additive, summing a subtree gives the exact cumulative cost
of a package, a library, or the whole application:

    total = sum over libraries; library = sum over its modules;
    package = sum over its modules.

The gate admits an application to optimization only when total init time
exceeds the configured fraction (default 10%) of mean cold-start end-to-end
time, strictly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .profile_model import ImportTiming, InvocationEvent

ROOT_NAME = "ALL"


class NoColdStartData(ValueError):
    """The gate needs at least one cold-start invocation."""


@dataclass
class InitNode:
    name: str  # dotted name; "ALL" at the root
    self_time_us: int = 0
    cumulative_time_us: int = 0
    share_of_total: Fraction = Fraction(0)
    children: dict[str, "InitNode"] = field(default_factory=dict)

    def child(self, name: str) -> "InitNode":
        node = self.children.get(name)
        if node is None:
            node = InitNode(name=name)
            self.children[name] = node
        return node

    def walk(self):
        yield self
        for key in sorted(self.children):
            yield from self.children[key].walk()

    def find(self, dotted: str) -> "InitNode | None":
        node = self
        trail = ""
        for part in dotted.split("."):
            trail = f"{trail}.{part}" if trail else part
            node = node.children.get(trail)
            if node is None:
                return None
        return node

    def sorted_children(self) -> list["InitNode"]:
        return sorted(self.children.values(),
                      key=lambda n: (-n.cumulative_time_us, n.name))


def build_init_tree(imports: list[ImportTiming]) -> InitNode:
    """Aggregate import timings into the dotted-name hierarchy.

    A module imported on several cold starts contributes its mean self time,
    rounded to the nearest microsecond. Intermediate packages that never
    reported their own timing still get nodes (self time 0). No imports at
    all yields a root with zero totals.
    """
    per_module: dict[str, list[int]] = {}
    for imp in imports:
        per_module.setdefault(imp.module, []).append(imp.self_time_us)

    root = InitNode(name=ROOT_NAME)
    for module, times in per_module.items():
        mean_us = int(round(sum(times) / len(times)))
        node = root
        trail = ""
        for part in module.split("."):
            trail = f"{trail}.{part}" if trail else part
            node = node.child(trail)
        node.self_time_us = mean_us

    def accumulate(node: InitNode) -> int:
        node.cumulative_time_us = node.self_time_us + sum(
            accumulate(child) for child in node.children.values()
        )
        return node.cumulative_time_us

    accumulate(root)

    total = root.cumulative_time_us
    for node in root.walk():
        node.share_of_total = Fraction(node.cumulative_time_us, total) if total else Fraction(0)
    return root


def check_tree(root: InitNode) -> list[str]:
    """Verify the cumulative invariant at every node; returns violations."""
    problems = []
    for node in root.walk():
        expected = node.self_time_us + sum(c.cumulative_time_us for c in node.children.values())
        if node.cumulative_time_us != expected:
            problems.append(f"{node.name}: cumulative {node.cumulative_time_us} != {expected}")
    return problems


@dataclass(frozen=True)
class GateResult:
    init_ratio: Fraction
    threshold: Fraction
    passes: bool
    total_init_us: int
    mean_cold_e2e_us: Fraction
    cold_invocations: int


def gate(tree: InitNode, invocations: list[InvocationEvent],
         threshold: Fraction | float = Fraction(1, 10)) -> GateResult:
    """Compare total init time against mean cold-start end-to-end time.

    Strict inequality: a ratio exactly at the threshold does not pass.
    """
    cold = [inv for inv in invocations if inv.cold_start]
    if not cold:
        raise NoColdStartData("gate requires at least one cold-start invocation")
    if not isinstance(threshold, Fraction):
        threshold = Fraction(str(threshold))

    mean_e2e = Fraction(sum(inv.e2e_time_us for inv in cold), len(cold))
    ratio = Fraction(tree.cumulative_time_us) / mean_e2e if mean_e2e else Fraction(0)
    return GateResult(
        init_ratio=ratio,
        threshold=threshold,
        passes=ratio > threshold,
        total_init_us=tree.cumulative_time_us,
        mean_cold_e2e_us=mean_e2e,
        cold_invocations=len(cold),
    )


def libraries_missing_timings(sampled_libraries: set[str], tree: InitNode) -> list[str]:
    """Libraries seen in samples but absent from import timings (self time 0)."""
    timed = {child.name for child in tree.children.values()}
    return sorted(lib for lib in sampled_libraries if lib != "app" and lib not in timed)
