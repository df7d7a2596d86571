import math
import re

import pytest
from hypothesis import given, settings, strategies as st

from pdfresidue.cos import ByteSpan, ObjectId
from pdfresidue.errors import CorruptStream, LocatorOutOfRange, NoSafeInsertionPoint
from pdfresidue.extract import extract_text
from pdfresidue.fixture import PageSpec, WriterOptions, table1_fixture, write_pdf
from pdfresidue.residual import coverage_map
from pdfresidue.revisions import build_revision_chain
from pdfresidue.stego import (
    SLACK_INJECTION,
    SUPERSEDED_STREAM,
    HiddenPayloadLocator,
    detect_hidden,
    extract_payload,
    hide_in_slack,
    hide_superseded,
    shannon_entropy,
)


def all_texts(data):
    doc = build_revision_chain(data)
    return [[p.joined for p in extract_text(doc, r)] for r in range(len(doc.revisions))]


def covers(candidates, span):
    return any(c.locator.span.start <= span.start and span.end <= c.locator.span.end for c in candidates)


def printable_runs(data, minimum=8):
    return re.findall(rb"[\x20-\x7e]{%d,}" % minimum, data)


# -- locators and entropy ----------------------------------------------------


@pytest.mark.parametrize(
    "loc, text",
    [
        (HiddenPayloadLocator(SLACK_INJECTION, ByteSpan(526, 4096)), "SlackInjection:526:4096"),
        (HiddenPayloadLocator(SUPERSEDED_STREAM, ByteSpan(1739, 80), ObjectId(11, 0)), "SupersededStream:1739:80:11"),
    ],
)
def test_locator_text_round_trip(loc, text):
    assert str(loc) == text
    assert HiddenPayloadLocator.parse(text) == loc


def test_locator_technique_aliases():
    assert HiddenPayloadLocator.parse("2:10:5").technique == SLACK_INJECTION
    assert HiddenPayloadLocator.parse("supersededstream:1:2:3").object_id == ObjectId(3, 0)


@pytest.mark.parametrize("bad", ["", "SlackInjection:1", "Other:1:2", "2:-1:4", "2:a:b", "2:1:2:3:4"])
def test_locator_rejects(bad):
    with pytest.raises(ValueError):
        HiddenPayloadLocator.parse(bad)


@pytest.mark.parametrize(
    "data, bits",
    [(b"", 0.0), (b"aaaa", 0.0), (b"ab", 1.0), (b"abcd", 2.0), (bytes(range(256)), 8.0)],
)
def test_entropy_hand_oracle(data, bits):
    assert math.isclose(shannon_entropy(data), bits)


# -- technique 2 -------------------------------------------------------------


def test_slack_4096(table1, rng_bytes):
    _, modified, _ = table1
    payload = rng_bytes(4096)
    out, loc = hide_in_slack(modified, payload)
    assert len(out) == len(modified) + 4096
    assert loc.technique == SLACK_INJECTION and loc.span.length == 4096
    assert out[loc.span.start : loc.span.end] == payload
    (u,) = coverage_map(out).unaccounted
    assert u.span == loc.span
    assert all_texts(out) == all_texts(modified)
    assert build_revision_chain(out).anomalies == []
    assert extract_payload(out, loc) == payload


def test_slack_default_lands_after_last_shadow(table1):
    _, modified, manifest = table1
    out, loc = hide_in_slack(modified, b"x" * 32)
    old8 = next(r.span for r in manifest.objects if r.id.number == 8 and r.revision == 0)
    following = min(r.span.start for r in manifest.objects if r.span.start > old8.end)
    assert loc.span.start == following


def test_slack_width_growth_rewrites_numbers(table1):
    # offsets around 1000-1700 grow to five digits; /Prev and startxref widen
    _, modified, _ = table1
    doc = build_revision_chain(modified)
    assert doc.revisions[-1].xref_offset < 10_000
    payload = b"\xa5" * 9000
    out, loc = hide_in_slack(modified, payload)
    after = build_revision_chain(out)
    assert after.revisions[-1].xref_offset >= 10_000
    assert after.anomalies == []
    assert len(out) > len(modified) + 9000
    assert extract_payload(out, loc) == payload
    assert all_texts(out) == all_texts(modified)


def test_slack_explicit_offset(table1):
    _, modified, _ = table1
    doc = build_revision_chain(modified)
    at = doc.revisions[0].xref_offset
    out, loc = hide_in_slack(modified, b"P" * 20, at=at)
    assert loc.span.start == at
    assert build_revision_chain(out).revisions[0].xref_offset == at + 20


@pytest.mark.parametrize("where", ["header", "final block", "mid object"])
def test_slack_refuses_unsafe_offsets(table1, where):
    _, modified, _ = table1
    doc = build_revision_chain(modified)
    at = {
        "header": 3,
        "final block": doc.revisions[1].xref_offset,
        "mid object": doc.revisions[0].xref_offset + 2,
    }[where]
    with pytest.raises(NoSafeInsertionPoint):
        hide_in_slack(modified, b"p" * 20, at=at)


def test_slack_single_revision_refused():
    data, _ = write_pdf([PageSpec([("solo", "latin")])])
    with pytest.raises(NoSafeInsertionPoint):
        hide_in_slack(data, b"payload")


def test_slack_empty_payload_is_identity(table1):
    _, modified, _ = table1
    out, loc = hide_in_slack(modified, b"")
    assert out == modified and loc.span.length == 0
    assert extract_payload(out, loc) == b""


def test_slack_xref_stream_file():
    _, modified, _ = table1_fixture(options=WriterOptions(xref_stream=True))
    payload = bytes(range(256)) * 4
    out, loc = hide_in_slack(modified, payload)
    doc = build_revision_chain(out)
    assert [r.xref.kind for r in doc.revisions] == ["stream", "stream"]
    assert doc.anomalies == []
    assert extract_payload(out, loc) == payload
    assert all_texts(out) == all_texts(modified)
    assert covers(detect_hidden(out).candidates, loc.span)


def test_slack_detected(table1):
    _, modified, _ = table1
    out, loc = hide_in_slack(modified, b"\x00\x01secret payload bytes\xff")
    report = detect_hidden(out)
    (c,) = report.candidates
    assert c.reason == "UnaccountedSpan" and c.locator.span == loc.span
    assert c.locator.technique == SLACK_INJECTION
    assert c.entropy == pytest.approx(shannon_entropy(out[loc.span.start : loc.span.end]))


# -- technique 1 -------------------------------------------------------------


def test_superseded_round_trip(table1):
    _, modified, _ = table1
    payload = b"quarterly numbers: do not share " * 20
    out, loc = hide_superseded(modified, payload)
    doc = build_revision_chain(out)
    assert len(doc.revisions) == 4 and doc.anomalies == []
    assert loc.technique == SUPERSEDED_STREAM and loc.object_id == ObjectId(11, 0)
    assert extract_payload(out, loc) == payload
    texts = all_texts(out)
    assert texts[-1] == texts[1] == all_texts(modified)[1]
    assert not any(payload[i : i + 8] in run for run in printable_runs(out) for i in range(0, len(payload) - 8))


def test_superseded_detected_by_object(table1):
    _, modified, _ = table1
    out, loc = hide_superseded(modified, b"0123456789abcdef")
    (c,) = detect_hidden(out).candidates
    assert c.reason == "UnreferencedStream"
    assert c.locator.object_id == loc.object_id and c.locator.span == loc.span


def test_superseded_empty_payload(table1):
    _, modified, _ = table1
    out, loc = hide_superseded(modified, b"")
    assert extract_payload(out, loc) == b""


# -- detection and extraction ------------------------------------------------


def test_clean_files_have_no_candidates(table1):
    original, modified, _ = table1
    for data in (original, modified):
        assert detect_hidden(data).candidates == []
        assert detect_hidden(build_revision_chain(data)).candidates == []


def test_orphan_object_after_eof(table1):
    _, modified, _ = table1
    out = modified + b"99 0 obj\n(an object no table lists)\nendobj\n"
    reasons = {c.reason for c in detect_hidden(out).candidates}
    assert reasons == {"UnaccountedSpan", "OrphanObject"}


def test_detect_on_non_pdf():
    report = detect_hidden(b"just some bytes that are long enough to flag")
    (c,) = report.candidates
    assert c.reason == "UnaccountedSpan" and c.locator.span.start == 0


def test_extract_errors(table1):
    _, modified, _ = table1
    with pytest.raises(LocatorOutOfRange):
        extract_payload(modified, HiddenPayloadLocator(SLACK_INJECTION, ByteSpan(len(modified) - 2, 10)))
    with pytest.raises(LocatorOutOfRange):
        extract_payload(modified, HiddenPayloadLocator(SUPERSEDED_STREAM, ByteSpan(1, 4)))
    doc = build_revision_chain(modified)
    catalog = doc.resolve(1, (1, 0))[1]
    with pytest.raises(CorruptStream):
        extract_payload(modified, HiddenPayloadLocator(SUPERSEDED_STREAM, catalog, ObjectId(1, 0)))
    with pytest.raises(LocatorOutOfRange):
        extract_payload(modified, HiddenPayloadLocator(SUPERSEDED_STREAM, catalog, ObjectId(2, 0)))


@settings(max_examples=20, deadline=None)
@given(st.binary(min_size=1, max_size=3000))
def test_round_trip_property(payload):
    _, modified, _ = table1_fixture()
    for hide in (hide_in_slack, hide_superseded):
        out, loc = hide(modified, payload)
        assert extract_payload(out, loc) == payload
        assert str(HiddenPayloadLocator.parse(str(loc))) == str(loc)
