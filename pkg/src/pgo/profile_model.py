"""Profile data model and newline-delimited wire format.

One record per line, UTF-8 JSON. Four record kinds:

    sample:     {"k":"sample","ts":<int ms>,"inv":<str>,"ep":<str>,"fr":[[fn,file,line],...]}
    import:     {"k":"imp","inv":<str>,"mod":<str>,"self_us":<int>}
    invocation: {"k":"invk","ts":<int ms>,"inv":<str>,"ep":<str>,"e2e_us":<int>,"cold":<bool>}
    meta:       {"k":"meta","app":<str>,"agent_ver":<str>,"hz":<number>}

Batch files carry the extension ``.pgoprof.jsonl``. Parsing and merging are
pure functions; the resulting ProfileStore is immutable and safe to share
read-only across concurrent analyses.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, Union

MODULE_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*\Z")

BATCH_EXTENSION = ".pgoprof.jsonl"


class MalformedRecord(ValueError):
    """A wire record with bad syntax, a missing required field, or a negative time."""


class EmptyInput(ValueError):
    """No batches (or no records) were supplied."""


@dataclass(frozen=True)
class CallFrame:
    function_name: str
    file_path: str
    line: int

    def __post_init__(self) -> None:
        if not self.function_name or not self.file_path:
            raise MalformedRecord("frame function_name and file_path must be non-empty")
        if not isinstance(self.line, int) or isinstance(self.line, bool) or self.line < 1:
            raise MalformedRecord(f"frame line must be a positive integer, got {self.line!r}")


@dataclass(frozen=True)
class StackSample:
    timestamp_ms: int
    invocation_id: str
    entry_point: str
    frames: tuple[CallFrame, ...]  # root-first; frames[0] is the handler frame

    def __post_init__(self) -> None:
        if not self.frames:
            raise MalformedRecord("sample must carry at least one frame")
        if self.frames[0].function_name != self.entry_point:
            raise MalformedRecord(
                f"root frame {self.frames[0].function_name!r} does not match "
                f"entry point {self.entry_point!r}"
            )


@dataclass(frozen=True)
class ImportTiming:
    module: str
    self_time_us: int  # module body only, nested imports excluded
    invocation_id: str

    def __post_init__(self) -> None:
        if self.self_time_us < 0:
            raise MalformedRecord("self_time_us must be non-negative")
        if not MODULE_NAME_RE.match(self.module):
            raise MalformedRecord(f"invalid module name {self.module!r}")


@dataclass(frozen=True)
class InvocationEvent:
    timestamp_ms: int
    entry_point: str
    invocation_id: str
    e2e_time_us: int
    cold_start: bool

    def __post_init__(self) -> None:
        if self.e2e_time_us < 0:
            raise MalformedRecord("e2e_time_us must be non-negative")


@dataclass(frozen=True)
class MetaRecord:
    app_id: str
    agent_version: str
    sampling_hz: float


ProfileRecord = Union[StackSample, ImportTiming, InvocationEvent, MetaRecord]


@dataclass(frozen=True)
class ValidationReport:
    """Warning-level findings from a merge; never blocks store construction."""

    orphan_invocation_ids: tuple[str, ...] = ()
    dropped_orphan_records: int = 0
    warnings: tuple[str, ...] = ()

    @property
    def clean(self) -> bool:
        return not self.orphan_invocation_ids and not self.warnings


@dataclass(frozen=True)
class ProfileStore:
    samples: tuple[StackSample, ...]
    imports: tuple[ImportTiming, ...]
    invocations: tuple[InvocationEvent, ...]
    app_id: str = ""

    def total_samples(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class MergeResult:
    store: ProfileStore
    report: ValidationReport


def _require(raw: dict, key: str, kind: str):
    if key not in raw:
        raise MalformedRecord(f"{kind} record missing field {key!r}")
    return raw[key]


def _int_field(raw: dict, key: str, kind: str) -> int:
    value = _require(raw, key, kind)
    if not isinstance(value, int) or isinstance(value, bool):
        raise MalformedRecord(f"{kind} field {key!r} must be an integer, got {value!r}")
    return value


def _str_field(raw: dict, key: str, kind: str) -> str:
    value = _require(raw, key, kind)
    if not isinstance(value, str):
        raise MalformedRecord(f"{kind} field {key!r} must be a string, got {value!r}")
    return value


def parse_record(line: str) -> ProfileRecord:
    """Parse one wire-format line into a typed record.

    Unknown record kinds are an error; unknown extra fields are ignored so
    newer agents can add fields without breaking older analyzers.
    """
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise MalformedRecord(f"record must be a JSON object, got {type(raw).__name__}")

    kind = raw.get("k")
    if kind == "sample":
        frames_raw = _require(raw, "fr", kind)
        if not isinstance(frames_raw, list) or not frames_raw:
            raise MalformedRecord("sample field 'fr' must be a non-empty list")
        frames = []
        for item in frames_raw:
            if not isinstance(item, list) or len(item) != 3:
                raise MalformedRecord(f"frame must be [function, file, line], got {item!r}")
            fn, file_path, line_no = item
            if not isinstance(fn, str) or not isinstance(file_path, str) or not isinstance(line_no, int):
                raise MalformedRecord(f"frame fields have wrong types: {item!r}")
            frames.append(CallFrame(fn, file_path, line_no))
        return StackSample(
            timestamp_ms=_int_field(raw, "ts", kind),
            invocation_id=_str_field(raw, "inv", kind),
            entry_point=_str_field(raw, "ep", kind),
            frames=tuple(frames),
        )
    if kind == "imp":
        return ImportTiming(
            module=_str_field(raw, "mod", kind),
            self_time_us=_int_field(raw, "self_us", kind),
            invocation_id=_str_field(raw, "inv", kind),
        )
    if kind == "invk":
        cold = _require(raw, "cold", kind)
        if not isinstance(cold, bool):
            raise MalformedRecord(f"invk field 'cold' must be a boolean, got {cold!r}")
        return InvocationEvent(
            timestamp_ms=_int_field(raw, "ts", kind),
            entry_point=_str_field(raw, "ep", kind),
            invocation_id=_str_field(raw, "inv", kind),
            e2e_time_us=_int_field(raw, "e2e_us", kind),
            cold_start=cold,
        )
    if kind == "meta":
        hz = _require(raw, "hz", kind)
        if not isinstance(hz, (int, float)) or isinstance(hz, bool):
            raise MalformedRecord(f"meta field 'hz' must be a number, got {hz!r}")
        return MetaRecord(
            app_id=_str_field(raw, "app", kind),
            agent_version=_str_field(raw, "agent_ver", kind),
            sampling_hz=float(hz),
        )
    raise MalformedRecord(f"unknown record kind {kind!r}")


def serialize_record(record: ProfileRecord) -> str:
    """Canonical one-line serialization; parse(serialize(r)) == r.

    Canonical bytes are also the identity used for duplicate detection, so
    field order is fixed per kind.
    """
    if isinstance(record, StackSample):
        obj = {
            "k": "sample",
            "ts": record.timestamp_ms,
            "inv": record.invocation_id,
            "ep": record.entry_point,
            "fr": [[f.function_name, f.file_path, f.line] for f in record.frames],
        }
    elif isinstance(record, ImportTiming):
        obj = {"k": "imp", "inv": record.invocation_id, "mod": record.module, "self_us": record.self_time_us}
    elif isinstance(record, InvocationEvent):
        obj = {
            "k": "invk",
            "ts": record.timestamp_ms,
            "inv": record.invocation_id,
            "ep": record.entry_point,
            "e2e_us": record.e2e_time_us,
            "cold": record.cold_start,
        }
    elif isinstance(record, MetaRecord):
        obj = {"k": "meta", "app": record.app_id, "agent_ver": record.agent_version, "hz": record.sampling_hz}
    else:
        raise TypeError(f"not a profile record: {record!r}")
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def parse_batch(lines: Iterable[str]) -> list[ProfileRecord]:
    """Parse a batch (one agent flush); blank lines are skipped."""
    records = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            records.append(parse_record(stripped))
        except MalformedRecord as exc:
            raise MalformedRecord(f"line {lineno}: {exc}") from None
    return records


def _sort_key(record: ProfileRecord) -> tuple:
    ts = getattr(record, "timestamp_ms", -1)
    inv = getattr(record, "invocation_id", "")
    # Canonical bytes as final tie-break keeps the merge order-insensitive:
    # permuting input batches cannot reorder distinct records.
    return (ts, inv, serialize_record(record))


def validate_and_merge(batches: list[list[ProfileRecord]]) -> MergeResult:
    """Merge agent batches into one deduplicated, deterministically ordered store.

    Duplicates (identical canonical bytes) collapse to one record. Samples and
    import timings whose invocation_id has no invocation event are orphans:
    they are excluded from the store and reported, never silently dropped.
    """
    if not batches or all(not batch for batch in batches):
        raise EmptyInput("no profile records to merge")

    seen: set[str] = set()
    records: list[ProfileRecord] = []
    for batch in batches:
        for record in batch:
            key = serialize_record(record)
            if key in seen:
                continue
            seen.add(key)
            records.append(record)
    records.sort(key=_sort_key)

    samples = [r for r in records if isinstance(r, StackSample)]
    imports = [r for r in records if isinstance(r, ImportTiming)]
    invocations = [r for r in records if isinstance(r, InvocationEvent)]
    metas = [r for r in records if isinstance(r, MetaRecord)]

    warnings: list[str] = []
    app_id = ""
    if metas:
        app_id = metas[0].app_id
        other_apps = sorted({m.app_id for m in metas} - {app_id})
        if other_apps:
            warnings.append(f"batches carry conflicting app ids: {app_id!r} vs {other_apps}")

    known = {inv.invocation_id for inv in invocations}
    orphan_ids = sorted(
        {r.invocation_id for r in (*samples, *imports) if r.invocation_id not in known}
    )
    dropped = 0
    if orphan_ids:
        orphan_set = set(orphan_ids)
        dropped = sum(1 for r in (*samples, *imports) if r.invocation_id in orphan_set)
        samples = [s for s in samples if s.invocation_id not in orphan_set]
        imports = [i for i in imports if i.invocation_id not in orphan_set]
        warnings.append(
            f"{dropped} record(s) reference unknown invocation ids: {', '.join(orphan_ids)}"
        )

    # Cross-record sanity: a cold invocation's wall time bounds its import work.
    import_totals: dict[str, int] = {}
    for imp in imports:
        import_totals[imp.invocation_id] = import_totals.get(imp.invocation_id, 0) + imp.self_time_us
    for inv in invocations:
        if inv.cold_start and import_totals.get(inv.invocation_id, 0) > inv.e2e_time_us:
            warnings.append(
                f"invocation {inv.invocation_id!r}: import self-times "
                f"({import_totals[inv.invocation_id]} us) exceed e2e time ({inv.e2e_time_us} us)"
            )

    store = ProfileStore(
        samples=tuple(samples),
        imports=tuple(imports),
        invocations=tuple(invocations),
        app_id=app_id,
    )
    report = ValidationReport(
        orphan_invocation_ids=tuple(orphan_ids),
        dropped_orphan_records=dropped,
        warnings=tuple(warnings),
    )
    return MergeResult(store=store, report=report)


def load_batch_file(path) -> list[ProfileRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_batch(fh)


def dump_store(store: ProfileStore, meta: MetaRecord | None = None) -> str:
    """Serialize a store back to wire format (meta line first when given)."""
    lines = []
    if meta is not None:
        lines.append(serialize_record(meta))
    for record in (*store.invocations, *store.samples, *store.imports):
        lines.append(serialize_record(record))
    return "\n".join(lines) + "\n" if lines else ""
