"""Synthetic invocation traces with a skewed entry-point distribution.

Counts are integer weights times a per-window volume multiplier, so the
distribution is exactly constant between shifts (the controller's scale
invariance guarantees Σ|Δp| = 0 there). A shift swaps the heaviest and
lightest weights at the named window and persists, so replaying the trace
fires the trigger exactly at the shift windows and nowhere else.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass

from .adaptive import Window


@dataclass(frozen=True)
class SimulationSpec:
    app_id: str = "sim"
    entry_points: int = 8
    windows: int = 30
    window_ms: int = 43_200_000
    skew: float = 2.0  # weight of rank i is proportional to 1 / i**skew
    base_volume: int = 100
    shift_windows: tuple[int, ...] = ()
    shift_top_k: int = 2
    seed: int = 0
    start_ms: int = 0

    def entry_names(self) -> list[str]:
        width = len(str(self.entry_points - 1))
        return [f"ep{str(i).zfill(width)}" for i in range(self.entry_points)]


def skew_weights(n: int, skew: float, scale: int = 1_000_000) -> list[int]:
    """Integer Zipf-like weights; rank 0 is the heaviest."""
    raw = [scale / (i + 1) ** skew for i in range(n)]
    return [max(1, round(w)) for w in raw]


def _swap_top_bottom(weights: list[int], k: int) -> list[int]:
    out = list(weights)
    n = len(out)
    for i in range(min(k, n // 2)):
        out[i], out[n - 1 - i] = out[n - 1 - i], out[i]
    return out


def simulate_windows(spec: SimulationSpec) -> list[Window]:
    """Tumbling-window counts; shifts toggle the weight permutation and persist."""
    rng = random.Random(spec.seed)
    names = spec.entry_names()
    weights = skew_weights(spec.entry_points, spec.skew)

    windows: list[Window] = []
    for w in range(spec.windows):
        if w in spec.shift_windows:
            weights = _swap_top_bottom(weights, spec.shift_top_k)
        # Per-window volume jitter scales every count identically, which the
        # distribution is invariant to.
        multiplier = rng.randint(max(1, spec.base_volume // 2), spec.base_volume)
        counts = {name: weight * multiplier for name, weight in zip(names, weights)}
        start = spec.start_ms + w * spec.window_ms
        windows.append(Window(start_ms=start, end_ms=start + spec.window_ms, counts=counts))
    return windows


def write_trace_csv(path, spec: SimulationSpec) -> list[Window]:
    """Write the pre-bucketed trace schema; returns the generated windows."""
    windows = simulate_windows(spec)
    names = spec.entry_names()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["app_id", "entry_point", "window_start_ms", "count"])
        for window in windows:
            for name in names:
                writer.writerow([spec.app_id, name, window.start_ms, window.counts.get(name, 0)])
    return windows


def cumulative_top_share(windows: list[Window], top: int) -> float:
    """Fraction of all invocations landing on the ``top`` busiest entry points."""
    totals: dict[str, int] = {}
    for window in windows:
        for ep, count in window.counts.items():
            totals[ep] = totals.get(ep, 0) + count
    ranked = sorted(totals.values(), reverse=True)
    whole = sum(ranked)
    return sum(ranked[:top]) / whole if whole else 0.0
