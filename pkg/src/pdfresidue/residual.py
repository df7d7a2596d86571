"""Residual information: shadow objects, byte coverage and revision diffs."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Union

from .cos import ByteSpan, Name, ObjectId, Reference, Stream, scan_all_objects
from .errors import InvalidRevisionRange, PdfError
from .pagetree import content_program, pages
from .revisions import (
    Document,
    XrefEntry,
    _carve_chain,
    build_revision_chain,
)

WHITESPACE_LIMIT = 16
_WS_BYTES = b"\x00\t\n\x0c\r "
_EOL_RE = re.compile(rb"\r\n|\r|\n")
_HEADER_RE = re.compile(rb"%PDF-\d+\.\d+[^\r\n]*(?:\r\n|\r|\n)?")
_EOF_RE = re.compile(rb"%%EOF")
_STARTXREF_RE = re.compile(rb"startxref[\x00\t\n\x0c\r ]+\d+")

SPAN_CLASSES = (
    "Header", "ObjectBody", "XrefTable", "Trailer",
    "StartxrefBlock", "EofMarker", "Whitespace", "Unaccounted",
)
SHADOW_KINDS = ("ContentStream", "Page", "Resource", "Catalog", "Other")
_RESOURCE_TYPES = {
    "Font", "FontDescriptor", "XObject", "ExtGState", "Pattern", "Shading",
    "ColorSpace", "Encoding", "CMap",
}


@dataclass
class ShadowObject:
    object_number: int
    superseded_revision: int
    superseding_revision: int
    old_span: ByteSpan
    new_span: ByteSpan
    kind: str


@dataclass
class SpanClass:
    span: ByteSpan
    cls: str
    owner: Union[ObjectId, int, None] = None


@dataclass
class CoverageMap:
    spans: List[SpanClass]
    file_length: int

    @property
    def unaccounted_bytes(self) -> int:
        return sum(s.span.length for s in self.unaccounted)

    @property
    def unaccounted(self) -> List[SpanClass]:
        return [s for s in self.spans if s.cls == "Unaccounted"]


@dataclass
class RevisionDiff:
    from_rev: int
    to_rev: int
    pages_changed: List[int]
    text_before: Dict[int, str]
    text_after: Dict[int, str]
    page_count_before: int
    page_count_after: int
    objects_added: List[ObjectId] = field(default_factory=list)
    objects_superseded: List[ObjectId] = field(default_factory=list)
    objects_freed: List[ObjectId] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)


# -- graph helpers -------------------------------------------------------------


def _refs(value, out: list, depth=0):
    if depth > 64:
        return
    if isinstance(value, Reference):
        out.append(value)
    elif isinstance(value, dict):
        for v in value.values():
            _refs(v, out, depth + 1)
    elif isinstance(value, list):
        for v in value:
            _refs(v, out, depth + 1)
    elif isinstance(value, Stream):
        _refs(value.dict, out, depth + 1)


def reachable(doc: Document, rev: int, roots: Iterable) -> Set[int]:
    """Object numbers reachable from ``roots`` in revision ``rev``."""
    seen: Set[int] = set()
    stack = []
    _refs(list(roots), stack)
    while stack:
        ref = stack.pop()
        if ref.number in seen:
            continue
        seen.add(ref.number)
        try:
            value = doc.resolve(rev, ref)[0]
        except PdfError:
            continue
        _refs(value, stack)
    return seen


def trailer_roots(doc: Document, rev: int) -> list:
    t = doc.revisions[rev].trailer.dict
    return [t.get(k) for k in ("Root", "Info") if t.get(k) is not None]


# -- shadows -------------------------------------------------------------------


def _object_span(doc: Document, entry: XrefEntry, rev: int) -> Optional[ByteSpan]:
    try:
        if entry.container is not None:
            return doc.resolve(rev, (entry.object_number, entry.generation))[1]
        return doc.object_at(entry.offset, rev)[2]
    except PdfError:
        return None


def _supersessions(doc: Document):
    """(number, old_entry, old_rev, new_entry, new_rev) per supersession edge."""
    owner: Dict[int, int] = {}
    for r, revision in enumerate(doc.revisions):
        entries = revision.xref.entries()
        if r > 0:
            prev = doc.view(r - 1)
            for n, new in sorted(entries.items()):
                old = prev.get(n)
                if old is None or not old.in_use or not new.in_use:
                    continue
                if (old.offset, old.container) == (new.offset, new.container):
                    continue
                yield n, old, owner.get(n, 0), new, r
        for n in entries:
            owner[n] = r


def _kind(doc: Document, rev: int, number: int, content_ids, resource_ids) -> str:
    try:
        value = doc.resolve(rev, (number, 0))[0]
    except PdfError:
        return "Other"
    if number in content_ids:
        return "ContentStream"
    d = value.dict if isinstance(value, Stream) else value
    if isinstance(d, dict):
        t = d.get("Type")
        if t == "Catalog":
            return "Catalog"
        if t in ("Page", "Pages"):
            return "Page"
        if t in _RESOURCE_TYPES or d.get("Subtype") in ("Image", "Form"):
            return "Resource"
    if number in resource_ids:
        return "Resource"
    return "Other"


def _page_sets(doc: Document, rev: int):
    content, resources = set(), set()
    try:
        refs = pages(doc, rev)
    except PdfError:
        return content, resources
    for page in refs:
        content.update(c.number for c in page.contents)
        res = page.resources
        roots = [Reference(*res)] if isinstance(res, ObjectId) else [res]
        resources |= reachable(doc, rev, roots)
    return content, resources


def shadow_objects(doc: Document) -> List[ShadowObject]:
    """One entry per superseded in-use object instance."""
    result = []
    sets = {}
    for n, old, old_rev, new, new_rev in _supersessions(doc):
        if old_rev not in sets:
            sets[old_rev] = _page_sets(doc, old_rev)
        old_span = _object_span(doc, old, old_rev) or ByteSpan(old.offset, 0)
        new_span = _object_span(doc, new, new_rev) or ByteSpan(new.offset, 0)
        result.append(
            ShadowObject(n, old_rev, new_rev, old_span, new_span, _kind(doc, old_rev, n, *sets[old_rev]))
        )
    return result


# -- coverage ------------------------------------------------------------------


def _structure_spans(doc: Document):
    data_len = len(doc.bytes)
    spans = []
    if doc.header_span is not None:
        spans.append((doc.header_span, "Header", None))
    seen_offsets = set()
    for rev in doc.revisions:
        sections = [rev.xref] + ([rev.xref.companion] if rev.xref.companion else [])
        for section in sections:
            spans.append((section.span, "XrefTable", rev.index))
            for e in section.entries().values() if section is rev.xref else []:
                if not e.in_use or e.container is not None or e.offset in seen_offsets:
                    continue
                seen_offsets.add(e.offset)
                if not 0 <= e.offset < data_len:
                    continue
                try:
                    oid, _, span = doc.object_at(e.offset, rev.index)
                except PdfError:
                    continue
                spans.append((span, "ObjectBody", oid))
        if rev.xref.kind == "table":
            spans.append((rev.trailer.span, "Trailer", rev.index))
        if rev.trailer.startxref_span is not None:
            spans.append((rev.trailer.startxref_span, "StartxrefBlock", rev.index))
        if rev.eof_span is not None:
            spans.append((rev.eof_span, "EofMarker", rev.index))
    return spans


def _carved_spans(data: bytes):
    spans = []
    m = _HEADER_RE.search(data, 0, 1024)
    if m is not None:
        spans.append((ByteSpan(m.start(), m.end() - m.start()), "Header", None))
    for oid, span in scan_all_objects(data):
        spans.append((span, "ObjectBody", oid))
    for i, (offset, section, trailer) in enumerate(_carve_chain(data)):
        if section.kind == "table":
            spans.append((section.span, "XrefTable", i))
            spans.append((trailer.span, "Trailer", i))
        if trailer.startxref_span is not None:
            spans.append((trailer.startxref_span, "StartxrefBlock", i))
    for m in _EOF_RE.finditer(data):
        spans.append((ByteSpan(m.start(), 5), "EofMarker", None))
    return spans


def _classify_gap(data: bytes, start: int, end: int, out: list):
    gap = data[start:end]
    if not gap.strip(_WS_BYTES) and len(gap) <= WHITESPACE_LIMIT:
        out.append(SpanClass(ByteSpan(start, end - start), "Whitespace"))
        return
    m = _EOL_RE.match(data, start, end)
    if m is not None:
        out.append(SpanClass(ByteSpan(start, m.end() - start), "Whitespace"))
        start = m.end()
    if start < end:
        out.append(SpanClass(ByteSpan(start, end - start), "Unaccounted"))


def coverage_map(source: Union[Document, bytes]) -> CoverageMap:
    """Classify every byte of the file; unclassified runs are Unaccounted.

    Accepts a parsed Document or raw bytes. Raw bytes that do not parse
    fall back to carving objects and xref tables by scanning.
    """
    if isinstance(source, Document):
        data = source.bytes
        raw = _structure_spans(source)
    else:
        data = bytes(source)
        try:
            raw = _structure_spans(build_revision_chain(data, carve=True))
        except PdfError:
            raw = _carved_spans(data)
    n = len(data)
    raw = [(ByteSpan(max(0, s.start), min(s.end, n) - max(0, s.start)), c, o) for s, c, o in raw]
    raw.sort(key=lambda t: (t[0].start, -t[0].length))
    result: List[SpanClass] = []
    cursor = 0
    for span, cls, owner in raw:
        if span.length <= 0 or span.end <= cursor:
            continue
        start = max(span.start, cursor)
        if start > cursor:
            _classify_gap(data, cursor, start, result)
        result.append(SpanClass(ByteSpan(start, span.end - start), cls, owner))
        cursor = span.end
    if cursor < n:
        _classify_gap(data, cursor, n, result)
    return CoverageMap(result, n)


# -- diff ------------------------------------------------------------------------


def _page_programs(doc: Document, rev: int, errors: list):
    programs = []
    for page in pages(doc, rev):
        try:
            programs.append(content_program(doc, rev, page))
        except PdfError as exc:
            errors.append(f"revision {rev}: {exc}")
            programs.append(None)
    return programs


def diff_revisions(doc: Document, i: int, j: int) -> RevisionDiff:
    from .extract import extract_text

    doc._check_rev(i)
    doc._check_rev(j)
    if not i < j:
        raise InvalidRevisionRange(f"diff needs from < to, got {i} and {j}")
    errors: List[str] = []
    before = _page_programs(doc, i, errors)
    after = _page_programs(doc, j, errors)
    changed = [
        k for k in range(max(len(before), len(after)))
        if k >= len(before) or k >= len(after) or before[k] != after[k]
    ]
    text_i = {p.page_index: p for p in extract_text(doc, i)}
    text_j = {p.page_index: p for p in extract_text(doc, j)}
    for p in list(text_i.values()) + list(text_j.values()):
        if p.error:
            errors.append(f"page {p.page_index}: {p.error}")

    view_i, view_j = doc.view(i), doc.view(j)
    listed = set()
    for r in range(i + 1, j + 1):
        listed |= set(doc.revisions[r].xref.entries())
    added = [
        n for n in sorted(listed)
        if view_j.get(n) is not None and view_j[n].in_use
        and (view_i.get(n) is None or not view_i[n].in_use)
    ]
    freed = [
        n for n in sorted(listed)
        if view_j.get(n) is not None and not view_j[n].in_use
        and view_i.get(n) is not None and view_i[n].in_use
    ]
    superseded = sorted({n for n, _, _, _, r in _supersessions(doc) if i < r <= j})

    def ids(numbers, view):
        return [ObjectId(n, view[n].generation if n in view else 0) for n in numbers]

    return RevisionDiff(
        i, j, changed,
        {k: text_i[k].joined if k in text_i else "" for k in changed},
        {k: text_j[k].joined if k in text_j else "" for k in changed},
        len(before), len(after),
        ids(added, view_j), ids(superseded, view_i), ids(freed, view_i),
        errors,
    )
