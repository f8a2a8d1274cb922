"""Wire-format parsing, serialization round-trips, and merge semantics."""

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgo.profile_model import (
    CallFrame,
    EmptyInput,
    ImportTiming,
    InvocationEvent,
    MalformedRecord,
    MetaRecord,
    StackSample,
    parse_batch,
    parse_record,
    serialize_record,
    validate_and_merge,
)

SAMPLE_LINE = (
    '{"k":"sample","ts":1710000000000,"inv":"i1","ep":"handler",'
    '"fr":[["handler","app/handler.py",2],["<module>","site-packages/igraph/__init__.py",104]]}'
)


class TestParseRecord:
    def test_sample_line_root_first(self):
        record = parse_record(SAMPLE_LINE)
        assert isinstance(record, StackSample)
        assert len(record.frames) == 2
        assert record.frames[0] == CallFrame("handler", "app/handler.py", 2)
        assert record.frames[1].file_path.endswith("igraph/__init__.py")
        assert record.timestamp_ms == 1710000000000

    def test_zero_cost_import(self):
        record = parse_record('{"k":"imp","inv":"i1","mod":"nltk.sem","self_us":0}')
        assert isinstance(record, ImportTiming)
        assert record.module == "nltk.sem"
        assert record.self_time_us == 0

    def test_empty_stack_is_malformed(self):
        with pytest.raises(MalformedRecord):
            parse_record('{"k":"sample","ts":1,"inv":"i1","ep":"h","fr":[]}')

    def test_invocation(self):
        record = parse_record(
            '{"k":"invk","ts":5,"inv":"i1","ep":"h","e2e_us":1200,"cold":true}'
        )
        assert isinstance(record, InvocationEvent)
        assert record.cold_start is True

    def test_meta(self):
        record = parse_record('{"k":"meta","app":"demo","agent_ver":"0.1","hz":100}')
        assert isinstance(record, MetaRecord)
        assert record.sampling_hz == 100.0

    def test_unknown_kind_rejected(self):
        with pytest.raises(MalformedRecord):
            parse_record('{"k":"nope","x":1}')

    def test_unknown_extra_fields_ignored(self):
        record = parse_record('{"k":"imp","inv":"i1","mod":"a","self_us":3,"future":"y"}')
        assert record == ImportTiming(module="a", self_time_us=3, invocation_id="i1")

    def test_missing_field(self):
        with pytest.raises(MalformedRecord):
            parse_record('{"k":"imp","inv":"i1","mod":"a"}')

    def test_negative_time(self):
        with pytest.raises(MalformedRecord):
            parse_record('{"k":"imp","inv":"i1","mod":"a","self_us":-1}')

    def test_bad_module_name(self):
        with pytest.raises(MalformedRecord):
            parse_record('{"k":"imp","inv":"i1","mod":"1bad.name","self_us":0}')

    def test_bad_json(self):
        with pytest.raises(MalformedRecord):
            parse_record("not json at all")

    def test_root_frame_must_match_entry_point(self):
        with pytest.raises(MalformedRecord):
            parse_record(
                '{"k":"sample","ts":1,"inv":"i1","ep":"handler","fr":[["other","f.py",1]]}'
            )

    def test_zero_line_rejected(self):
        with pytest.raises(MalformedRecord):
            parse_record('{"k":"sample","ts":1,"inv":"i","ep":"h","fr":[["h","f.py",0]]}')


def _inv(inv_id="i1", ts=1000, ep="handler", e2e=5000, cold=True):
    return InvocationEvent(timestamp_ms=ts, entry_point=ep, invocation_id=inv_id,
                           e2e_time_us=e2e, cold_start=cold)


def _sample(inv_id="i1", ts=1000, ep="handler", leaf="work"):
    return StackSample(
        timestamp_ms=ts,
        invocation_id=inv_id,
        entry_point=ep,
        frames=(CallFrame(ep, "app/handler.py", 2), CallFrame(leaf, "app/util.py", 9)),
    )


frames_strategy = st.lists(
    st.tuples(
        st.text(alphabet="abcdefgh_", min_size=1, max_size=8),
        st.text(alphabet="abcdefgh/_.", min_size=1, max_size=16),
        st.integers(min_value=1, max_value=5000),
    ),
    min_size=1,
    max_size=12,
)


@st.composite
def record_strategy(draw):
    kind = draw(st.sampled_from(["sample", "imp", "invk", "meta"]))
    inv = draw(st.text(alphabet="iv0123456789", min_size=1, max_size=6))
    if kind == "sample":
        frames = [CallFrame(fn, path, line) for fn, path, line in draw(frames_strategy)]
        return StackSample(
            timestamp_ms=draw(st.integers(min_value=0, max_value=2**48)),
            invocation_id=inv,
            entry_point=frames[0].function_name,
            frames=tuple(frames),
        )
    if kind == "imp":
        module = ".".join(draw(st.lists(
            st.text(alphabet="abcdefgh_", min_size=1, max_size=6), min_size=1, max_size=4)))
        return ImportTiming(module=module, invocation_id=inv,
                            self_time_us=draw(st.integers(min_value=0, max_value=10**9)))
    if kind == "invk":
        return InvocationEvent(
            timestamp_ms=draw(st.integers(min_value=0, max_value=2**48)),
            entry_point=draw(st.text(alphabet="abcdefgh", min_size=1, max_size=8)),
            invocation_id=inv,
            e2e_time_us=draw(st.integers(min_value=0, max_value=10**10)),
            cold_start=draw(st.booleans()),
        )
    return MetaRecord(
        app_id=draw(st.text(alphabet="abcdefgh-", min_size=1, max_size=10)),
        agent_version="0.1.0",
        sampling_hz=float(draw(st.integers(min_value=1, max_value=1000))),
    )


class TestRoundTrip:
    @given(record_strategy())
    @settings(max_examples=200)
    def test_parse_serialize_identity(self, record):
        assert parse_record(serialize_record(record)) == record

    def test_serialized_form_is_single_json_line(self):
        line = serialize_record(_sample())
        assert "\n" not in line
        json.loads(line)


class TestValidateAndMerge:
    def test_duplicate_sample_kept_once(self):
        inv = _inv()
        dup = _sample()
        result = validate_and_merge([[inv, dup], [dup]])
        assert result.store.samples == (dup,)

    def test_sorted_by_timestamp(self):
        inv_a, inv_b = _inv("a", ts=2000), _inv("b", ts=1000)
        result = validate_and_merge([[inv_a], [inv_b]])
        assert [i.invocation_id for i in result.store.invocations] == ["b", "a"]

    def test_orphan_reported_not_silent(self):
        # Fixture built by deleting the invocation record for "ghost".
        records = [_inv("i1"), _sample("i1"), _sample("ghost")]
        result = validate_and_merge([records])
        assert result.store.samples == (_sample("i1"),)
        assert result.report.orphan_invocation_ids == ("ghost",)
        assert result.report.dropped_orphan_records == 1
        assert not result.report.clean

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            validate_and_merge([])
        with pytest.raises(EmptyInput):
            validate_and_merge([[], []])

    def test_batch_permutation_yields_identical_store(self):
        records = [
            _inv("i1", ts=10), _inv("i2", ts=20, cold=False),
            _sample("i1", ts=11), _sample("i2", ts=21), _sample("i2", ts=21, leaf="other"),
            ImportTiming(module="nltk", self_time_us=5, invocation_id="i1"),
            MetaRecord(app_id="demo", agent_version="0.1.0", sampling_hz=100.0),
        ]
        batches = [records[:3], records[3:5], records[5:]]
        rng = random.Random(7)
        base = validate_and_merge(batches)
        for _ in range(10):
            shuffled = [list(b) for b in batches]
            rng.shuffle(shuffled)
            for b in shuffled:
                rng.shuffle(b)
            assert validate_and_merge(shuffled).store == base.store

    def test_merge_does_not_mutate_records(self):
        sample = _sample()
        before = serialize_record(sample)
        validate_and_merge([[_inv(), sample]])
        assert serialize_record(sample) == before

    def test_app_id_from_meta(self):
        meta = MetaRecord(app_id="demo", agent_version="x", sampling_hz=10.0)
        result = validate_and_merge([[meta, _inv()]])
        assert result.store.app_id == "demo"

    def test_cold_e2e_smaller_than_imports_warns(self):
        records = [
            _inv("i1", e2e=10, cold=True),
            ImportTiming(module="big", self_time_us=50, invocation_id="i1"),
        ]
        result = validate_and_merge([records])
        assert any("exceed" in w for w in result.report.warnings)

    def test_parse_batch_skips_blank_lines(self):
        lines = [SAMPLE_LINE, "", "   ", SAMPLE_LINE]
        assert len(parse_batch(lines)) == 2
