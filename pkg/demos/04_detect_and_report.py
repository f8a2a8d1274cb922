"""Detection over a recorded profile: a busy library with cold sub-packages.

Uses the committed fixture profile of an NLP app whose main library is
genuinely used (5.33% of runtime samples) while four of its sub-packages
never run outside initialization.

Run from the repo root:  python demos/04_detect_and_report.py
"""

from pathlib import Path

from pgo.config import Config
from pgo.detector import render_report
from pgo.pipeline import analyze_store
from pgo.profile_model import load_batch_file, validate_and_merge

BATCHES = Path(__file__).parent.parent / "tests" / "fixtures" / "batches" / "sentiment"

batches = [load_batch_file(p) for p in sorted(BATCHES.glob("*.pgoprof.jsonl"))]
store = validate_and_merge(batches).store
print(f"loaded profile: {len(store.samples)} samples, {len(store.imports)} import timings")

analysis = analyze_store(store, Config(app_root="app"))
print(f"gate ratio {float(analysis.gate.init_ratio):.3f} -> "
      f"{'passes' if analysis.gate.passes else 'below threshold'}\n")

print("== findings ==")
for f in analysis.findings:
    print(f"  {f.kind:10s} {f.library:12s} util {f.utilization_pct:5.2f}%  "
          f"init {f.init_overhead_pct:5.2f}%")

print("\n== rendered report ==\n")
print(render_report(analysis.findings, analysis.gate, "markdown",
                    library_rows=analysis.library_rows, app_id=store.app_id))
