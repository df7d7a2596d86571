"""Planting and detecting payloads in a PDF's unused areas.

Technique 1 (superseded stream): the payload goes into a Flate-compressed
stream added by one update and replaced by an empty stream in the next, so
no revision's page tree ever references it.

Technique 2 (slack injection): the payload bytes are inserted verbatim
between two objects of an earlier block, and every byte offset at or past
the insertion point is shifted so all revisions still resolve.
"""

from __future__ import annotations

import math
import re
import zlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .cos import (
    ByteSpan,
    Name,
    ObjectId,
    Stream,
    make_stream,
    parse_indirect_object,
    scan_all_objects,
    serialize_indirect,
)
from .errors import CorruptStream, LocatorOutOfRange, NoSafeInsertionPoint, PdfError
from .filters import decode_stream
from .fixture import _max_object_number, append_update
from .residual import coverage_map, reachable, shadow_objects, trailer_roots
from .revisions import Document, build_revision_chain

SUPERSEDED_STREAM = "SupersededStream"
SLACK_INJECTION = "SlackInjection"
TECHNIQUES = (SUPERSEDED_STREAM, SLACK_INJECTION)
MIN_UNACCOUNTED = 16

_WS = rb"[\x00\t\n\x0c\r ]"
_STARTXREF_NUM_RE = re.compile(rb"startxref" + _WS + rb"+(\d+)")
_OBJ_NUM_RE = re.compile(rb"(\d+)" + _WS + rb"+(\d+)" + _WS + rb"+obj")


@dataclass(frozen=True)
class HiddenPayloadLocator:
    technique: str
    span: ByteSpan
    object_id: Optional[ObjectId] = None

    def __str__(self):
        text = f"{self.technique}:{self.span.start}:{self.span.length}"
        if self.object_id is not None:
            text += f":{self.object_id.number}"
        return text

    @classmethod
    def parse(cls, text: str) -> "HiddenPayloadLocator":
        parts = text.strip().split(":")
        if len(parts) not in (3, 4):
            raise ValueError(f"locator {text!r} is not technique:offset:length[:obj]")
        names = {t.lower(): t for t in TECHNIQUES}
        names.update({"1": SUPERSEDED_STREAM, "2": SLACK_INJECTION})
        technique = names.get(parts[0].lower())
        if technique is None:
            raise ValueError(f"unknown technique {parts[0]!r}")
        start, length = int(parts[1]), int(parts[2])
        if start < 0 or length < 0:
            raise ValueError("negative offset or length in locator")
        oid = ObjectId(int(parts[3]), 0) if len(parts) == 4 else None
        return cls(technique, ByteSpan(start, length), oid)


@dataclass
class Candidate:
    locator: HiddenPayloadLocator
    entropy: float
    reason: str  # UnaccountedSpan | UnreferencedStream | OrphanObject


@dataclass
class HiddenRegionReport:
    candidates: List[Candidate] = field(default_factory=list)


def shannon_entropy(data: bytes) -> float:
    """Bits per byte."""
    if not data:
        return 0.0
    n = len(data)
    return max(0.0, -sum(c / n * math.log2(c / n) for c in Counter(data).values()))


# -- technique 1 -------------------------------------------------------------


def hide_superseded(data: bytes, payload: bytes) -> Tuple[bytes, HiddenPayloadLocator]:
    doc = build_revision_chain(data)
    number = _max_object_number(doc) + 1
    kind = {Name("Type"): Name("Metadata"), Name("Subtype"): Name("XML")}
    carrier = make_stream({**kind, Name("Filter"): Name("FlateDecode")}, zlib.compress(payload, 9))
    first, spans = append_update(data, {number: carrier}, doc)
    second, _ = append_update(first, {number: make_stream(kind, b"")})
    return second, HiddenPayloadLocator(SUPERSEDED_STREAM, spans[number], ObjectId(number, 0))


# -- technique 2 -------------------------------------------------------------


def _insertion_candidates(doc: Document, cov) -> Dict[int, int]:
    """Allowed insertion offsets -> owning revision (non-final blocks only)."""
    final_start = doc.revisions[-1].block_span.start
    allowed = {}
    for s in cov.spans:
        if s.cls in ("ObjectBody", "XrefTable") and s.span.start < final_start:
            if doc.header_span is None or s.span.start >= doc.header_span.end:
                allowed[s.span.start] = s.owner
    return allowed


def _default_insertion(doc: Document, cov, allowed) -> int:
    last = doc.last
    old_ends = {}
    for sh in shadow_objects(doc):
        for rev in doc.revisions[:last]:
            if sh.old_span.start in rev.block_span:
                old_ends.setdefault(rev.index, []).append(sh.old_span.end)
    for rev_index in sorted(old_ends):
        end = max(old_ends[rev_index])
        after = [p for p in allowed if p >= end]
        if after:
            return min(after)
    for rev in doc.revisions[:last]:
        if rev.xref_offset in allowed:
            return rev.xref_offset
    raise NoSafeInsertionPoint("no earlier block to hide in (single-revision file)")


class _Edits:
    """Byte edits against the original image plus the offset map they imply."""

    def __init__(self, insert_at: int, payload: bytes):
        self.insert_at = insert_at
        self.payload = payload
        self.replacements: Dict[int, Tuple[int, bytes]] = {}  # pos -> (old_len, new)

    def shift(self, value: int) -> int:
        delta = len(self.payload) if value >= self.insert_at else 0
        for pos, (old_len, new) in self.replacements.items():
            if pos < value:
                delta += len(new) - old_len
        return value + delta

    def payload_start(self) -> int:
        return self.insert_at + sum(
            len(new) - old for pos, (old, new) in self.replacements.items() if pos < self.insert_at
        )

    def apply(self, data: bytes) -> bytes:
        ops = [(self.insert_at, 0, self.payload)]
        ops += [(pos, old, new) for pos, (old, new) in self.replacements.items()]
        ops.sort(key=lambda t: (t[0], t[1]))
        out = bytearray()
        cursor = 0
        for pos, old, new in ops:
            out += data[cursor:pos]
            out += new
            cursor = pos + old
        out += data[cursor:]
        return bytes(out)


def _number_field(m) -> Tuple[int, int, int]:
    return m.start(1), m.end(1) - m.start(1), int(m.group(1))


def _rewrite_xref_stream(data: bytes, section, trailer_dict, edits: _Edits) -> bytes:
    m = _OBJ_NUM_RE.match(data, section.span.start)
    rows = []
    for _, entries in section.subsections:
        for e in entries:
            if e.container is not None:
                rows.append((2, e.container, e.offset))
            elif e.in_use:
                rows.append((1, edits.shift(e.offset), e.generation))
            else:
                rows.append((0, e.offset, e.generation))
    old_w = trailer_dict.get("W") or [1, 4, 2]
    w1 = max(old_w[1], max((r[1].bit_length() + 7) // 8 for r in rows) if rows else 1, 1)
    w2 = max(old_w[2], max((r[2].bit_length() + 7) // 8 for r in rows) if rows else 1, 1)
    raw = b"".join(
        bytes([t]) + a.to_bytes(w1, "big") + b.to_bytes(w2, "big") for t, a, b in rows
    )
    d = {Name(k): v for k, v in trailer_dict.items() if k not in ("DecodeParms", "Filter", "Length", "F", "DP")}
    d[Name("W")] = [1, w1, w2]
    d[Name("Index")] = [v for first, entries in section.subsections for v in (first, len(entries))]
    if type(d.get("Prev")) is int:
        d[Name("Prev")] = edits.shift(d["Prev"])
    if type(d.get("XRefStm")) is int:
        d[Name("XRefStm")] = edits.shift(d["XRefStm"])
    d[Name("Filter")] = Name("FlateDecode")
    return serialize_indirect((int(m.group(1)), int(m.group(2))), make_stream(d, zlib.compress(raw)))[:-1]


def _plan(doc: Document, edits: _Edits):
    """One pass: compute every replacement under the current offset map."""
    data = doc.bytes
    repl: Dict[int, Tuple[int, bytes]] = {}
    for rev in doc.revisions:
        sections = [rev.xref] + ([rev.xref.companion] if rev.xref.companion else [])
        for section in sections:
            if section.kind == "stream":
                tdict = rev.trailer.dict if section is rev.xref else _stream_dict(doc, section)
                repl[section.span.start] = (
                    section.span.length,
                    _rewrite_xref_stream(data, section, tdict, edits),
                )
                continue
            for _, entries in section.subsections:
                for e in entries:
                    if not e.in_use or e.position is None:
                        continue
                    new = edits.shift(e.offset)
                    if new != e.offset:
                        if new > 9_999_999_999:
                            raise NoSafeInsertionPoint("shifted offset exceeds 10 digits")
                        repl[e.position] = (10, b"%010d" % new)
        t = rev.trailer
        if rev.xref.kind == "table":
            for key in (b"Prev", b"XRefStm"):
                m = re.compile(rb"/" + key + _WS + rb"*(\d+)").search(data, t.span.start, t.span.end)
                if m is not None:
                    pos, length, value = _number_field(m)
                    repl[pos] = (length, b"%d" % edits.shift(value))
        if t.startxref_span is not None:
            m = _STARTXREF_NUM_RE.match(data, t.startxref_span.start)
            if m is not None:
                pos, length, value = _number_field(m)
                repl[pos] = (length, b"%d" % edits.shift(value))
    return repl


def _stream_dict(doc: Document, section):
    _, value, _ = parse_indirect_object(doc.bytes, section.span.start, lenient_length=True)
    return value.dict


def _audit(before: Document, after_bytes: bytes):
    after = build_revision_chain(after_bytes)
    if len(after.revisions) != len(before.revisions):
        raise NoSafeInsertionPoint("insertion changed the revision count")
    for r in range(len(before.revisions)):
        for n, e in before.view(r).items():
            if not e.in_use:
                continue
            try:
                old = before.resolve(r, (n, e.generation))[0]
            except PdfError:
                continue
            if isinstance(old, Stream) and old.get("Type") == "XRef":
                continue
            try:
                new = after.resolve(r, (n, e.generation))[0]
            except PdfError as exc:
                raise NoSafeInsertionPoint(f"object {n} unresolvable after insertion: {exc}") from None
            if new != old:
                raise NoSafeInsertionPoint(f"object {n} resolves differently after insertion")


def hide_in_slack(
    data: bytes, payload: bytes, at: Optional[int] = None, audit: bool = True
) -> Tuple[bytes, HiddenPayloadLocator]:
    """Insert ``payload`` verbatim at ``at`` (default: just after the last
    superseded object of the oldest block that has one)."""
    doc = build_revision_chain(data)
    cov = coverage_map(doc)
    allowed = _insertion_candidates(doc, cov)
    if at is None:
        at = _default_insertion(doc, cov, allowed)
    elif at not in allowed:
        raise NoSafeInsertionPoint(
            f"offset {at} is not the start of an object or xref section in a non-final block"
        )
    if not payload:
        return bytes(data), HiddenPayloadLocator(SLACK_INJECTION, ByteSpan(at, 0))
    edits = _Edits(at, bytes(payload))
    for _ in range(32):
        repl = _plan(doc, edits)
        if repl == edits.replacements:
            break
        edits.replacements = repl
    else:
        raise NoSafeInsertionPoint("offset rewrite did not converge")
    out = edits.apply(doc.bytes)
    if audit:
        _audit(doc, out)
    return out, HiddenPayloadLocator(SLACK_INJECTION, ByteSpan(edits.payload_start(), len(payload)))


# -- detection ---------------------------------------------------------------


def _unreferenced_streams(doc: Document):
    reached: Dict[Tuple[int, int], bool] = {}
    for r in range(len(doc.revisions)):
        reach = reachable(doc, r, trailer_roots(doc, r))
        for n, e in doc.view(r).items():
            if not e.in_use or e.container is not None:
                continue
            key = (n, e.offset)
            reached[key] = reached.get(key, False) or n in reach
    for (n, offset), hit in sorted(reached.items(), key=lambda kv: kv[0][1]):
        if hit:
            continue
        try:
            oid, value, span = doc.object_at(offset)
        except PdfError:
            continue
        if oid.number != n or not isinstance(value, Stream):
            continue
        if value.get("Type") in ("XRef", "ObjStm") or not value.encoded:
            continue
        yield oid, span


def detect_hidden(source: Union[Document, bytes]) -> HiddenRegionReport:
    if isinstance(source, Document):
        doc, data = source, source.bytes
    else:
        data = bytes(source)
        try:
            doc = build_revision_chain(data, carve=True)
        except PdfError:
            doc = None
    cov = coverage_map(doc if doc is not None else data)
    report = HiddenRegionReport()

    def add(technique, span, oid, reason):
        loc = HiddenPayloadLocator(technique, span, oid)
        report.candidates.append(Candidate(loc, shannon_entropy(data[span.start : span.end]), reason))

    for s in cov.unaccounted:
        if s.span.length >= MIN_UNACCOUNTED:
            add(SLACK_INJECTION, s.span, None, "UnaccountedSpan")
    if doc is not None:
        for oid, span in _unreferenced_streams(doc):
            add(SUPERSEDED_STREAM, span, oid, "UnreferencedStream")
        known = set()
        for rev in doc.revisions:
            for section in [rev.xref] + ([rev.xref.companion] if rev.xref.companion else []):
                if section.kind == "stream":
                    known.add(section.span.start)
                for e in section.entries().values():
                    if e.in_use and e.container is None:
                        known.add(e.offset)
        for oid, span in scan_all_objects(data):
            if span.start not in known:
                add(SLACK_INJECTION, span, oid, "OrphanObject")
    report.candidates.sort(key=lambda c: (c.locator.span.start, c.reason))
    return report


def extract_payload(data: bytes, locator: HiddenPayloadLocator) -> bytes:
    span = locator.span
    if span.start < 0 or span.length < 0 or span.end > len(data):
        raise LocatorOutOfRange(f"{locator} lies outside the {len(data)}-byte file")
    if locator.technique == SLACK_INJECTION:
        return bytes(data[span.start : span.end])
    try:
        oid, value, _ = parse_indirect_object(data, span.start, lenient_length=True)
    except PdfError as exc:
        raise LocatorOutOfRange(f"no object at {span.start}: {exc}") from None
    if locator.object_id is not None and oid.number != locator.object_id.number:
        raise LocatorOutOfRange(f"object at {span.start} is {oid}, not {locator.object_id}")
    if not isinstance(value, Stream):
        raise CorruptStream(f"object {oid} is not a stream")
    payload, terminal = decode_stream(value)
    if terminal is not None:
        raise CorruptStream(f"carrier uses undecodable filter /{terminal.name}")
    return payload
