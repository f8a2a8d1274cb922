"""The whole loop on the demo app: collect -> ingest -> analyze -> optimize.

Posts the recorded demo batches to a local collector, merges its inbox,
flags the library that sleeps 200 ms in its module body, rewrites the app,
and measures the import-time win.

Run from the repo root:  python demos/07_full_pipeline.py
"""

import shutil
import subprocess
import sys
import tempfile
import threading
import time
import urllib.request
from pathlib import Path

from pgo import pipeline
from pgo.collector import make_server
from pgo.config import Config

ROOT = Path(__file__).parent.parent
BATCHES = ROOT / "tests" / "fixtures" / "batches" / "demo"
DEMO = ROOT / "tests" / "fixtures" / "demo_app"


def measure_import(src: Path) -> float:
    code = (
        "import sys, time, importlib\n"
        f"sys.path.insert(0, {str(src)!r})\n"
        f"sys.path.insert(0, {str(DEMO / 'libs')!r})\n"
        "t0 = time.perf_counter()\n"
        "importlib.import_module('handler')\n"
        "print(time.perf_counter() - t0)\n"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, check=True)
    return float(out.stdout)


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)

    print("== 1. collector receives the agent batches ==")
    inbox = tmp / "inbox"
    server = make_server("127.0.0.1", 0, inbox)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    port = server.server_address[1]
    for batch in sorted(BATCHES.glob("*.pgoprof.jsonl")):
        req = urllib.request.Request(f"http://127.0.0.1:{port}/v1/batch",
                                     data=batch.read_bytes(), method="POST")
        with urllib.request.urlopen(req) as resp:
            print(f"  POST {batch.name}: {resp.status} {resp.read().decode()}")
    server.shutdown()
    server.server_close()

    print("\n== 2. ingest the inbox into a profile store ==")
    result = pipeline.ingest([inbox], Config(), tmp / "out")
    print(f"  {result.store_path}")

    print("\n== 3. analyze ==")
    analysis = pipeline.analyze(result.store_path, Config())
    for f in analysis.analysis.findings:
        print(f"  {f.kind}: {f.library} (util {f.utilization_pct:.2f}%, "
              f"init {f.init_overhead_pct:.2f}%)")

    print("\n== 4. optimize a working copy of the app ==")
    src = tmp / "src"
    shutil.copytree(DEMO / "src", src)
    before = measure_import(src)
    pipeline.optimize(analysis.report_json_path, src, Config(), out_dir=tmp / "out")
    after = measure_import(src)
    print(f"  handler import time: {before * 1000:.0f} ms -> {after * 1000:.0f} ms")
    print("  rewritten handler.py:")
    for line in (src / "handler.py").read_text().splitlines()[:14]:
        print(f"    {line}")
