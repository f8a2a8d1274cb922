"""Wire format basics: parse agent records, merge batches, catch orphans.

Run from the repo root:  python demos/01_wire_format_and_merge.py
"""

from pgo.profile_model import parse_record, serialize_record, validate_and_merge

lines = [
    '{"k":"invk","ts":1710000000000,"inv":"i1","ep":"handler","e2e_us":950000,"cold":true}',
    '{"k":"sample","ts":1710000000120,"inv":"i1","ep":"handler",'
    '"fr":[["handler","app/handler.py",2],["<module>","site-packages/igraph/__init__.py",104]]}',
    '{"k":"imp","inv":"i1","mod":"igraph","self_us":310000}',
    '{"k":"imp","inv":"i1","mod":"igraph.drawing","self_us":120000}',
]

print("== parsing one record per line ==")
records = [parse_record(line) for line in lines]
for record in records:
    print(f"  {type(record).__name__:16s} {serialize_record(record)[:76]}")

print("\n== round trip ==")
assert all(parse_record(serialize_record(r)) == r for r in records)
print("  parse(serialize(r)) == r for every record")

print("\n== merging two batches with an overlap and an orphan ==")
orphan = parse_record('{"k":"imp","inv":"ghost","mod":"lost","self_us":5}')
batch_a = records[:3]
batch_b = records[2:] + [orphan]  # records[2] is duplicated on purpose
merged = validate_and_merge([batch_a, batch_b])

store = merged.store
print(f"  merged store: {len(store.samples)} sample(s), {len(store.imports)} import(s), "
      f"{len(store.invocations)} invocation(s)")
print(f"  duplicate import timing kept once: {len(store.imports)} of 3 submitted")
print(f"  orphan invocation ids reported: {merged.report.orphan_invocation_ids}")
for warning in merged.report.warnings:
    print(f"  warning: {warning}")
