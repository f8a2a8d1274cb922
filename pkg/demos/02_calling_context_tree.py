"""Why escalation matters: an orchestrator library that barely samples.

The orchestrator's own code collects 1 sample in 100, yet everything the
application does funnels through it. Escalated (inclusive) counts credit it
with the downstream work; exclusive counts still drive the utilization
metric so that utilizations add up to 1.

Run from the repo root:  python demos/02_calling_context_tree.py
"""

from pgo.cct import PathMapping, build_cct, classify_phase, library_stats
from pgo.profile_model import CallFrame, ProfileStore, StackSample

SP = "/var/task/site-packages"
HANDLER = CallFrame("handler", "app/handler.py", 2)


def sample(*frames):
    return StackSample(timestamp_ms=0, invocation_id="w", entry_point="handler",
                       frames=(HANDLER, *frames))


orch = CallFrame("dispatch", f"{SP}/orchestrator/core.py", 40)
worker = CallFrame("transform", f"{SP}/worker/ops.py", 12)
codec = CallFrame("encode", f"{SP}/codec/codec.py", 9)
boot = CallFrame("<module>", f"{SP}/bootlib/__init__.py", 5)

samples = (
    [sample()] * 14
    + [sample(orch)] * 1
    + [sample(orch, worker)] * 55
    + [sample(orch, codec)] * 22
    + [sample(orch, worker, boot)] * 8  # initialization-phase: module body running
)
store = ProfileStore(samples=tuple(samples), imports=(), invocations=())
mapping = PathMapping(app_root="app")

cct = build_cct(store, mapping)
print(f"== CCT over {cct.total_samples} samples ==")


def show(node, depth=0):
    if node.frame is not None:
        label = f"{node.frame.function_name} [{node.library}]"
        print(f"  {'  ' * depth}{label:32s} excl={node.exclusive_count:3d} "
              f"incl={node.inclusive_count:3d} init={node.init_exclusive_count}")
    for key in sorted(node.children):
        show(node.children[key], depth + (node.frame is not None))


show(cct.root)

init_count = sum(1 for s in samples if classify_phase(s, mapping) == "initialization")
print(f"\n{init_count} samples classified initialization-phase (excluded from utilization)")

print("\n== utilization (exclusive runtime counts; exact fractions) ==")
for stat in library_stats(cct, store):
    print(f"  {stat.library:14s} U = {str(stat.utilization):8s} "
          f"({float(stat.utilization):6.2%})  runtime={stat.runtime_exclusive_samples}")
total = sum(s.utilization for s in library_stats(cct, store))
print(f"  sum of utilizations = {total} (exactly 1)")
