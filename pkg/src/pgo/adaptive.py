"""Workload-shift detection over entry-point invocation streams.

Invocations are bucketed into tumbling windows of fixed length, aligned to
the first event. Each window yields a probability per entry point (its share
of the window's traffic); the controller fires when the ℓ1 distance between
two adjacent windows' distributions exceeds the threshold. A window with no
traffic has no distribution at all — an idle period is not a workload shift,
so boundaries touching an empty window never fire.

All probabilities are exact fractions, so the ℓ1 bound 0 ≤ Σ|Δp| ≤ 2 and the
scale invariance of the distribution hold exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction

from .profile_model import InvocationEvent, MalformedRecord


class EmptyStream(ValueError):
    """run_stream needs at least one invocation event."""


@dataclass(frozen=True)
class Window:
    start_ms: int
    end_ms: int
    counts: dict[str, int] = field(default_factory=dict)

    def total(self) -> int:
        return sum(self.counts.values())


def probabilities(window: Window) -> dict[str, Fraction] | None:
    """Per-entry-point share of the window's traffic; None marks an empty window."""
    total = window.total()
    if total == 0:
        return None
    return {ep: Fraction(n, total) for ep, n in window.counts.items() if n}


@dataclass(frozen=True)
class TriggerDecision:
    window_end_ms: int
    total_delta: Fraction
    fired: bool
    per_entry_delta: dict[str, Fraction]
    skipped: bool = False  # an adjacent window was empty


def delta(prev: Window, cur: Window, epsilon: Fraction | float) -> TriggerDecision:
    """ℓ1 distance between adjacent windows' invocation distributions.

    Entry points absent from one window count as probability zero there, but
    only when that window has traffic; if either window is empty the boundary
    is skipped (not fired, delta reported as 0).
    """
    if not isinstance(epsilon, Fraction):
        epsilon = Fraction(str(epsilon))
    p_prev = probabilities(prev)
    p_cur = probabilities(cur)
    if p_prev is None or p_cur is None:
        return TriggerDecision(
            window_end_ms=cur.end_ms,
            total_delta=Fraction(0),
            fired=False,
            per_entry_delta={},
            skipped=True,
        )
    per_entry: dict[str, Fraction] = {}
    for ep in sorted(set(p_prev) | set(p_cur)):
        per_entry[ep] = p_cur.get(ep, Fraction(0)) - p_prev.get(ep, Fraction(0))
    total = sum(abs(d) for d in per_entry.values())
    return TriggerDecision(
        window_end_ms=cur.end_ms,
        total_delta=total,
        fired=total > epsilon,
        per_entry_delta=per_entry,
    )


@dataclass(frozen=True)
class TriggerTimeline:
    windows: tuple[Window, ...]
    decisions: tuple[TriggerDecision, ...]  # decisions[i] compares windows i and i+1

    def fired_window_indices(self) -> list[int]:
        """Indices (into ``windows``) of the incoming window of each fired boundary."""
        return [i + 1 for i, d in enumerate(self.decisions) if d.fired]


def bucket_events(events: list[InvocationEvent], window_ms: int) -> list[Window]:
    """Contiguous tumbling windows aligned to the first event's timestamp."""
    if not events:
        raise EmptyStream("no invocation events")
    ordered = sorted(events, key=lambda e: e.timestamp_ms)
    t0 = ordered[0].timestamp_ms
    last = ordered[-1].timestamp_ms
    n_windows = (last - t0) // window_ms + 1
    windows = [
        Window(start_ms=t0 + i * window_ms, end_ms=t0 + (i + 1) * window_ms, counts={})
        for i in range(n_windows)
    ]
    for event in ordered:
        idx = (event.timestamp_ms - t0) // window_ms
        counts = windows[idx].counts
        counts[event.entry_point] = counts.get(event.entry_point, 0) + 1
    return windows


def run_windows(windows: list[Window], epsilon: Fraction | float) -> TriggerTimeline:
    decisions = [
        delta(windows[i], windows[i + 1], epsilon) for i in range(len(windows) - 1)
    ]
    return TriggerTimeline(windows=tuple(windows), decisions=tuple(decisions))


def run_stream(events: list[InvocationEvent], window_ms: int,
               epsilon: Fraction | float) -> TriggerTimeline:
    """Bucket a time-sorted event stream (sorted defensively) and diff windows.

    A single window produces an empty timeline: there is no pair to compare.
    """
    windows = bucket_events(events, window_ms)
    return run_windows(windows, epsilon)


def load_trace_csv(path, window_ms: int | None = None):
    """Read a trace CSV; returns (events, windows) with exactly one non-None.

    Two schemas: per-invocation rows ``app_id,entry_point,timestamp_ms`` or
    pre-bucketed rows ``app_id,entry_point,window_start_ms,count`` (the
    latter needs ``window_ms`` to place window ends). Malformed rows are
    skipped and counted, never fatal.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise MalformedRecord(f"{path}: empty trace file")
        fields = set(reader.fieldnames)
        if {"app_id", "entry_point", "timestamp_ms"} <= fields:
            events, bad = [], 0
            for row in reader:
                try:
                    events.append(InvocationEvent(
                        timestamp_ms=int(row["timestamp_ms"]),
                        entry_point=row["entry_point"],
                        invocation_id=f"trace-{len(events)}",
                        e2e_time_us=0,
                        cold_start=False,
                    ))
                except (TypeError, ValueError, MalformedRecord):
                    bad += 1
            return events, None, bad
        if {"app_id", "entry_point", "window_start_ms", "count"} <= fields:
            if window_ms is None:
                raise MalformedRecord("pre-bucketed traces need a window length")
            buckets: dict[int, dict[str, int]] = {}
            bad = 0
            for row in reader:
                try:
                    start = int(row["window_start_ms"])
                    count = int(row["count"])
                    if count < 0:
                        raise ValueError(count)
                except (TypeError, ValueError):
                    bad += 1
                    continue
                ep = row["entry_point"]
                buckets.setdefault(start, {})
                buckets[start][ep] = buckets[start].get(ep, 0) + count
            windows = [
                Window(start_ms=start, end_ms=start + window_ms, counts=counts)
                for start, counts in sorted(buckets.items())
            ]
            return None, windows, bad
        raise MalformedRecord(f"{path}: unrecognized trace header {sorted(fields)}")
