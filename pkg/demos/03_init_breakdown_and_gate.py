"""Hierarchical initialization breakdown and the 10% admission gate.

Module self-times are additive, so every package's cumulative cost is an
exact sum over the modules beneath it.

Run from the repo root:  python demos/03_init_breakdown_and_gate.py
"""

from pgo.init_tree import build_init_tree, gate
from pgo.profile_model import ImportTiming, InvocationEvent


def imp(module, us):
    return ImportTiming(module=module, self_time_us=us, invocation_id="c1")


imports = [
    imp("bigml", 40_000),
    imp("bigml.models", 620_000),
    imp("bigml.models.linear", 130_000),
    imp("bigml.io", 160_000),
    imp("requests", 50_000),
]
tree = build_init_tree(imports)

print("== init tree (cumulative = self + children) ==")


def show(node, depth=0):
    print(f"  {'  ' * depth}{node.name:24s} self={node.self_time_us:>8d} us  "
          f"cum={node.cumulative_time_us:>8d} us  share={float(node.share_of_total):6.2%}")
    for child in node.sorted_children():
        show(child, depth + 1)


show(tree)

cold = InvocationEvent(timestamp_ms=0, entry_point="handler", invocation_id="c1",
                       e2e_time_us=2_500_000, cold_start=True)
result = gate(tree, [cold], threshold=0.10)
print(f"\n== gate ==\n  total init {result.total_init_us} us over mean cold e2e "
      f"{float(result.mean_cold_e2e_us):.0f} us -> ratio {float(result.init_ratio):.3f}")
print(f"  threshold {float(result.threshold):.2f}, passes: {result.passes}")
