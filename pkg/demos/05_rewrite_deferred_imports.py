"""Deferring flagged global imports into the scopes that use them.

Shows the whole transform on one source file: plan, apply, verify, and the
idempotence of re-planning. Unsafe cases (star import, module-level use)
surface as recorded skips, never as silent edits.

Run from the repo root:  python demos/05_rewrite_deferred_imports.py
"""

import difflib

from pgo.rewriter import apply, patch_summary, plan, verify

SOURCE = '''\
import json
import nlplib.sem
import nlplib.stem
from heavylib import greet

BANNER = "ready"


def semantics(text):
    """Deep analysis; rarely called."""
    return nlplib.sem.analyze(text)


def stems(word):
    return nlplib.stem.reduce_word(word)


def welcome(name):
    return greet(name)


def status():
    return json.dumps({"banner": BANNER})
'''

flagged = {"nlplib.sem", "nlplib.stem", "heavylib"}
p = plan(SOURCE, flagged, filename="service.py")

print("== plan ==")
print(f"  removals: {p.removals}")
for ins in p.insertions:
    print(f"  insert into {ins.scope!r}: {ins.statement_text!r}")
for skip in p.skipped:
    print(f"  skip [{skip.reason}] {skip.detail}")

rewritten = apply(SOURCE, p)
print("\n== diff ==")
print("".join(difflib.unified_diff(SOURCE.splitlines(keepends=True),
                                   rewritten.splitlines(keepends=True),
                                   fromfile="a/service.py", tofile="b/service.py")))

report = verify(SOURCE, rewritten)
print(f"verification ok: {report.ok}; deferred bindings: {report.deferred_bindings}")

replanned = plan(rewritten, flagged, filename="service.py")
print(f"re-planning the rewritten file is empty: {replanned.is_empty}")

print("\n== patch summary (machine format) ==")
print(patch_summary(SOURCE, p))
