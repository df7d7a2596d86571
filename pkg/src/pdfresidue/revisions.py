"""Cross-reference sections, trailers and the incremental-update chain.

A file saved with incremental updates is a sequence of blocks, each ending
in its own xref section, trailer, ``startxref`` and ``%%EOF``. Following the
trailer ``/Prev`` links from the final ``startxref`` enumerates every saved
state of the document; :func:`build_revision_chain` returns them oldest
first, and :func:`resolve` looks objects up as of any one of them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .cos import (
    ByteSpan,
    Lexer,
    Name,
    ObjectId,
    PdfString,
    Reference,
    Stream,
    lex_value,
    parse_indirect_object,
)
from .encodings import decode_text_string
from .errors import (
    EncryptedDocument,
    FreeObject,
    MalformedToken,
    NoStartxref,
    NotAnXref,
    OffsetMismatch,
    PdfError,
    PrevCycle,
    RevisionOutOfRange,
    TruncatedTable,
    UnknownObject,
    UnsupportedXrefStreamField,
)
from .filters import decode_stream

STARTXREF_WINDOW = 2048
MAX_FILE_SIZE = 2**63 - 1

_WS = rb"\x00\t\n\x0c\r "
_NOT_REGULAR = rb"(?![^" + _WS + rb"()<>\[\]{}/%])"
_HEADER_RE = re.compile(rb"%PDF-(\d+\.\d+)")
_STARTXREF_RE = re.compile(rb"startxref[" + _WS + rb"]*(?:%[^\r\n]*[\r\n]+[" + _WS + rb"]*)*([+-]?\d+)")
_STARTXREF_AT_RE = re.compile(
    rb"(?:[" + _WS + rb"]|%[^\r\n]*)*(startxref[" + _WS + rb"]+(\d+))"
)
_XREF_KW_RE = re.compile(rb"xref" + _NOT_REGULAR)
_CARVE_XREF_RE = re.compile(rb"(?<![^" + _WS + rb"()<>\[\]{}/%])xref" + _NOT_REGULAR)
_SUBSECTION_RE = re.compile(
    rb"[" + _WS + rb"]*(\d+)[ \t]+(\d+)[ \t]*(?:\r\n|\r|\n)"
)
_ENTRY_RE = re.compile(
    rb"[" + _WS + rb"]*(\d{1,10})[ \t]+(\d{1,5})[ \t]+([nf])(?:[ \t]*(?:\r\n|\r|\n))?"
)
_STRICT_ENTRY_RE = re.compile(rb"\d{10} \d{5} [nf](?: \r| \n|\r\n)")
_EOF_RE = re.compile(rb"%%EOF(?:\r\n|\r|\n)?")
_OBJ_AT_RE = re.compile(rb"[" + _WS + rb"]*(\d+)[" + _WS + rb"]+(\d+)[" + _WS + rb"]+obj")

INFO_KEYS = ("Title", "Author", "Subject", "Creator", "Producer", "CreationDate", "ModDate")


@dataclass(frozen=True)
class XrefEntry:
    object_number: int
    offset: int
    generation: int
    in_use: bool
    # compressed entries (xref streams, type 2): number of the object stream;
    # ``offset`` then holds the index within that stream
    container: Optional[int] = None
    # byte position of the entry line for classic tables
    position: Optional[int] = None

    def serialize(self) -> bytes:
        return b"%010d %05d %s\r\n" % (
            self.offset,
            self.generation,
            b"n" if self.in_use else b"f",
        )


@dataclass
class XrefSection:
    subsections: List[Tuple[int, List[XrefEntry]]]
    span: ByteSpan
    kind: str = "table"  # or "stream"
    # /XRefStm companion of a hybrid file; classic entries win over it
    companion: Optional["XrefSection"] = None

    def entries(self) -> Dict[int, XrefEntry]:
        result = {}
        if self.companion is not None:
            result.update(self.companion.entries())
        for _, items in self.subsections:
            for e in items:
                result[e.object_number] = e
        return result


@dataclass
class Trailer:
    dict: dict
    startxref_value: Optional[int]
    span: ByteSpan
    startxref_span: Optional[ByteSpan] = None


@dataclass
class Revision:
    index: int
    xref_offset: int
    xref: XrefSection
    trailer: Trailer
    block_span: ByteSpan
    cumulative_end: int
    eof_span: Optional[ByteSpan] = None


@dataclass(eq=False)
class Document:
    bytes: bytes
    header_version: Optional[str]
    revisions: List[Revision]
    anomalies: List[str] = field(default_factory=list)
    header_span: Optional[ByteSpan] = None
    append_only: bool = True
    _views: dict = field(default_factory=dict, repr=False)
    _objects: dict = field(default_factory=dict, repr=False)
    _objstms: dict = field(default_factory=dict, repr=False)

    @property
    def last(self) -> int:
        return len(self.revisions) - 1

    def view(self, rev: int) -> Dict[int, XrefEntry]:
        """Effective object table as of revision ``rev``."""
        self._check_rev(rev)
        cached = self._views.get(rev)
        if cached is not None:
            return cached
        r = rev
        while r >= 0 and r not in self._views:
            r -= 1
        view = dict(self._views[r]) if r >= 0 else {}
        for i in range(r + 1, rev + 1):
            view.update(self.revisions[i].xref.entries())
            self._views[i] = dict(view)
        return self._views[rev]

    def _check_rev(self, rev):
        if not isinstance(rev, int) or not 0 <= rev < len(self.revisions):
            raise RevisionOutOfRange(
                f"revision {rev} out of range (document has {len(self.revisions)})"
            )

    def resolve(self, rev: int, oid) -> Tuple[object, ByteSpan]:
        number = oid[0]
        entry = self.view(rev).get(number)
        if entry is None:
            raise UnknownObject(f"object {number} not in revision {rev}")
        if not entry.in_use:
            raise FreeObject(f"object {number} is free in revision {rev}")
        if entry.container is not None:
            return self._resolve_compressed(rev, entry)
        found, value, span = self.object_at(entry.offset, rev)
        if found.number != number:
            raise OffsetMismatch(entry.offset, ObjectId(number, entry.generation), found)
        return value, span

    def object_at(self, offset: int, rev: Optional[int] = None):
        """Parse the indirect object at ``offset`` (cached)."""
        cached = self._objects.get(offset)
        if cached is not None:
            if isinstance(cached, PdfError):
                raise cached
            return cached
        resolver = self.length_resolver(rev if rev is not None else self.last)
        try:
            result = parse_indirect_object(self.bytes, offset, resolver=resolver)
        except PdfError as exc:
            self._objects[offset] = exc
            raise
        self._objects[offset] = result
        return result

    def length_resolver(self, rev: int):
        def resolve_length(ref):
            entry = self.view(rev).get(ref.number)
            if entry is None or not entry.in_use or entry.container is not None:
                raise UnknownObject(f"/Length object {ref.number} unavailable")
            _, value, _ = parse_indirect_object(self.bytes, entry.offset, lenient_length=True)
            return value

        return resolve_length

    def _resolve_compressed(self, rev, entry):
        container = self.view(rev).get(entry.container)
        if container is None or not container.in_use or container.container is not None:
            raise UnknownObject(
                f"object stream {entry.container} for object {entry.object_number} unavailable"
            )
        key = container.offset
        parsed = self._objstms.get(key)
        if parsed is None:
            stm_id, stm, span = self.object_at(container.offset, rev)
            if not isinstance(stm, Stream):
                raise UnknownObject(f"object {entry.container} is not an object stream")
            data, terminal = decode_stream(stm, self.resolver(rev))
            first = stm.get("First")
            count = stm.get("N")
            if type(first) is not int or type(count) is not int or terminal is not None:
                raise MalformedToken(f"object stream {entry.container} is malformed")
            lexer = Lexer(data, 0, min(first, len(data)))
            pairs = []
            for _ in range(max(0, count)):
                a = lexer.next_token()
                b = lexer.next_token()
                if type(a) is not int or type(b) is not int:
                    break
                pairs.append((a, b))
            parsed = (data, first, pairs, span)
            self._objstms[key] = parsed
        data, first, pairs, span = parsed
        if not 0 <= entry.offset < len(pairs):
            raise UnknownObject(f"object {entry.object_number}: index out of range")
        number, rel = pairs[entry.offset]
        if number != entry.object_number:
            raise OffsetMismatch(
                span.start, ObjectId(entry.object_number, 0), ObjectId(number, 0)
            )
        value, _ = lex_value(data, first + rel)
        return value, span

    def resolver(self, rev: int):
        """Reference -> value for revision ``rev``; raises PdfError."""

        def resolve_ref(ref):
            return self.resolve(rev, ref)[0]

        return resolve_ref

    def deref(self, rev: int, value):
        """Resolve ``value`` if it is a reference; unresolvable -> None."""
        seen = 0
        while isinstance(value, Reference):
            seen += 1
            if seen > 32:
                return None
            try:
                value = self.resolve(rev, value)[0]
            except PdfError:
                return None
        return value


def parse_startxref(data: bytes) -> int:
    """Return the integer following the last ``startxref`` near the end."""
    window_start = max(0, len(data) - STARTXREF_WINDOW)
    idx = data.rfind(b"startxref", window_start)
    while idx >= 0:
        m = _STARTXREF_RE.match(data, idx)
        if m is not None:
            value = int(m.group(1))
            if value < 0:
                raise NoStartxref(f"negative startxref value {value}")
            return value
        idx = data.rfind(b"startxref", window_start, idx)
    raise NoStartxref("no startxref in the last %d bytes" % STARTXREF_WINDOW)


def parse_xref_at(data: bytes, offset: int):
    """Parse the xref section (classic table or xref stream) at ``offset``."""
    if not 0 <= offset < len(data):
        raise NotAnXref(f"xref offset {offset} outside file")
    lexer = Lexer(data, offset)
    lexer.skip_ws()
    start = lexer.pos
    if _XREF_KW_RE.match(data, start):
        return _parse_classic(data, start)
    if _OBJ_AT_RE.match(data, start):
        return _parse_xref_stream(data, start)
    raise NotAnXref(f"no xref at offset {offset}")


def _parse_classic(data, start):
    pos = start + 4
    subsections = []
    last_end = pos
    while True:
        m = _SUBSECTION_RE.match(data, pos)
        if m is None:
            break
        first, count = int(m.group(1)), int(m.group(2))
        pos = m.end()
        entries = []
        for k in range(count):
            em = _ENTRY_RE.match(data, pos)
            if em is None:
                raise TruncatedTable(
                    f"xref subsection {first} {count} at {m.start(1)} ends after {k} entries"
                )
            entries.append(
                XrefEntry(
                    object_number=first + k,
                    offset=int(em.group(1)),
                    generation=int(em.group(2)),
                    in_use=em.group(3) == b"n",
                    position=em.start(1),
                )
            )
            pos = em.end()
        subsections.append((first, entries))
        last_end = pos
    section = XrefSection(subsections, ByteSpan(start, last_end - start))
    lexer = Lexer(data, last_end)
    lexer.skip_ws()
    trailer_start = lexer.pos
    try:
        tok = lexer.next_token()
        if tok != "trailer":
            raise TruncatedTable(f"expected 'trailer' at {trailer_start}")
        tdict = lexer.read_object()
    except MalformedToken as exc:
        raise TruncatedTable(f"bad trailer at {trailer_start}: {exc}") from None
    if type(tdict) is not dict:
        raise TruncatedTable(f"trailer at {trailer_start} is not a dictionary")
    trailer = Trailer(tdict, None, ByteSpan(trailer_start, lexer.pos - trailer_start))
    _attach_startxref(data, trailer, lexer.pos)
    return section, trailer


def _attach_startxref(data, trailer, pos):
    m = _STARTXREF_AT_RE.match(data, pos)
    if m is not None:
        trailer.startxref_value = int(m.group(2))
        trailer.startxref_span = ByteSpan(m.start(1), m.end(1) - m.start(1))


def _parse_xref_stream(data, start):
    try:
        oid, value, span = parse_indirect_object(data, start, lenient_length=True)
    except PdfError as exc:
        raise NotAnXref(f"no xref at offset {start}: {exc}") from None
    if not isinstance(value, Stream) or value.get("Type") != "XRef":
        raise NotAnXref(f"object {oid} at {start} is not a cross-reference stream")
    sdict = value.dict
    widths = sdict.get("W")
    if (
        not isinstance(widths, list)
        or len(widths) != 3
        or any(type(w) is not int or not 0 <= w <= 8 for w in widths)
    ):
        raise UnsupportedXrefStreamField(f"/W {widths!r} in object {oid}")
    size = sdict.get("Size")
    index = sdict.get("Index", [0, size] if type(size) is int else None)
    if (
        not isinstance(index, list)
        or len(index) % 2
        or any(type(v) is not int or v < 0 for v in index)
    ):
        raise UnsupportedXrefStreamField(f"/Index {index!r} in object {oid}")
    raw, terminal = decode_stream(value)
    if terminal is not None:
        raise UnsupportedXrefStreamField(f"xref stream filter /{terminal.name}")
    w0, w1, w2 = widths
    row = w0 + w1 + w2
    if row == 0:
        raise UnsupportedXrefStreamField(f"/W {widths!r} in object {oid}")
    pos = 0
    subsections = []
    for i in range(0, len(index), 2):
        first, count = index[i], index[i + 1]
        entries = []
        for k in range(count):
            if pos + row > len(raw):
                raise TruncatedTable(f"xref stream {oid} ends after {k} entries")
            f0 = int.from_bytes(raw[pos : pos + w0], "big") if w0 else 1
            f1 = int.from_bytes(raw[pos + w0 : pos + w0 + w1], "big")
            f2 = int.from_bytes(raw[pos + w0 + w1 : pos + row], "big")
            pos += row
            num = first + k
            if f0 == 0:
                entries.append(XrefEntry(num, f1, min(f2, 65535), False))
            elif f0 == 1:
                entries.append(XrefEntry(num, f1, min(f2, 65535), True))
            elif f0 == 2:
                entries.append(XrefEntry(num, f2, 0, True, container=f1))
        subsections.append((first, entries))
    section = XrefSection(subsections, span, kind="stream")
    trailer = Trailer(sdict, None, span)
    _attach_startxref(data, trailer, span.end)
    return section, trailer


def build_revision_chain(data: bytes, carve: bool = False) -> Document:
    """Enumerate every revision of ``data``, oldest first.

    With ``carve=True`` a file whose ``startxref`` or xref chain is
    unusable is rebuilt from the xref tables found by scanning, in byte
    order, and the fact is recorded as an anomaly.
    """
    data = bytes(data)
    if len(data) > MAX_FILE_SIZE:
        raise PdfError("file too large")
    anomalies: List[str] = []
    hm = _HEADER_RE.search(data, 0, 1024)
    header_version = hm.group(1).decode("ascii") if hm else None
    header_span = None
    if hm is None:
        anomalies.append("no %PDF- header in the first 1024 bytes")
    else:
        end = _line_end(data, hm.end())
        # binary-marker comment line conventionally follows the header
        if data[end : end + 1] == b"%" and data[end : end + 5] != b"%%EOF":
            end = _line_end(data, end)
        header_span = ByteSpan(hm.start(), end - hm.start())
        if hm.start() != 0:
            anomalies.append(f"header found at offset {hm.start()}, not 0")

    try:
        chain = _follow_prev_chain(data, anomalies)
    except (NoStartxref, NotAnXref, TruncatedTable, UnsupportedXrefStreamField) as exc:
        if not carve:
            raise
        anomalies.append(f"xref chain unusable ({exc}); carved xref sections by scanning")
        chain = _carve_chain(data)
        if not chain:
            raise
    for _, _, trailer in chain:
        if "Encrypt" in trailer.dict:
            raise EncryptedDocument("document is encrypted (/Encrypt in trailer)")

    revisions = _assign_blocks(data, chain, header_span, anomalies)
    doc = Document(
        bytes=data,
        header_version=header_version,
        revisions=revisions,
        anomalies=anomalies,
        header_span=header_span,
    )
    doc.append_only = _check_append_only(doc)
    _audit(doc)
    return doc


_LINE_RE = re.compile(rb"[^\r\n]*(?:\r\n|\r|\n)?")


def _line_end(data, pos):
    return _LINE_RE.match(data, pos).end()


def _follow_prev_chain(data, anomalies):
    offset = parse_startxref(data)
    visited = set()
    chain = []
    while True:
        if offset in visited:
            raise PrevCycle(f"/Prev chain revisits offset {offset}")
        visited.add(offset)
        section, trailer = parse_xref_at(data, offset)
        stm_offset = trailer.dict.get("XRefStm") if section.kind == "table" else None
        if type(stm_offset) is int:
            try:
                companion, _ = parse_xref_at(data, stm_offset)
                section.companion = companion
            except PdfError as exc:
                anomalies.append(f"/XRefStm {stm_offset} unreadable: {exc}")
        chain.append((offset, section, trailer))
        prev = trailer.dict.get("Prev")
        if prev is None:
            break
        if type(prev) is not int:
            anomalies.append(f"non-integer /Prev {prev!r} at xref {offset}; chain cut")
            break
        if prev >= offset:
            anomalies.append(f"/Prev {prev} points forward from xref {offset}")
        offset = prev
    chain.reverse()
    return chain


def _carve_chain(data):
    chain = []
    seen = set()
    for m in _CARVE_XREF_RE.finditer(data):
        try:
            section, trailer = parse_xref_at(data, m.start())
        except PdfError:
            continue
        chain.append((m.start(), section, trailer))
        seen.add(m.start())
    return chain


def _assign_blocks(data, chain, header_span, anomalies):
    revisions = []
    block_start = header_span.start if header_span else 0
    n = len(data)
    for i, (offset, section, trailer) in enumerate(chain):
        tail = trailer.startxref_span.end if trailer.startxref_span else trailer.span.end
        if trailer.startxref_span is None:
            anomalies.append(f"revision {i}: no startxref after trailer")
        elif trailer.startxref_value != offset:
            anomalies.append(
                f"revision {i}: startxref {trailer.startxref_value} != xref offset {offset}"
            )
        m = _EOF_RE.search(data, tail)
        next_start = None
        if i + 1 < len(chain):
            next_start = _first_byte(chain[i + 1])
        eof_span = None
        if m is not None and (next_start is None or m.start() < next_start):
            block_end = m.end()
            eof_span = ByteSpan(m.start(), 5)
        elif next_start is not None and next_start > tail:
            anomalies.append(f"revision {i}: no %%EOF before next revision")
            block_end = next_start
        else:
            anomalies.append(f"revision {i}: no %%EOF")
            block_end = n if next_start is None else max(tail, block_start)
        if block_end < block_start:
            anomalies.append(f"revision {i}: block ends before it starts")
            block_end = block_start
        revisions.append(
            Revision(
                index=i,
                xref_offset=offset,
                xref=section,
                trailer=trailer,
                block_span=ByteSpan(block_start, block_end - block_start),
                cumulative_end=block_end,
                eof_span=eof_span,
            )
        )
        block_start = block_end
    return revisions


def _first_byte(link):
    offset, section, _ = link
    starts = [offset]
    for e in section.entries().values():
        if e.in_use and e.container is None and e.offset > 0:
            starts.append(e.offset)
    return min(starts)


def _check_append_only(doc):
    data = doc.bytes
    prev_end = doc.revisions[0].block_span.start
    for rev in doc.revisions:
        span = rev.block_span
        if span.start != prev_end or span.length == 0:
            return False
        if not span.start <= rev.xref_offset < span.end:
            return False
        for e in rev.xref.entries().values():
            if e.in_use and e.container is None and e.offset >= span.end:
                return False
        prev_end = span.end
    trailing = data[prev_end:]
    return not trailing.strip(b"\x00\t\n\x0c\r ")


def _audit(doc):
    data = doc.bytes
    checked = set()
    for rev in doc.revisions:
        for e in rev.xref.entries().values():
            if not e.in_use or e.container is not None:
                continue
            key = (e.object_number, e.offset)
            if key in checked:
                continue
            checked.add(key)
            m = _OBJ_AT_RE.match(data, e.offset) if 0 <= e.offset < len(data) else None
            if m is None:
                doc.anomalies.append(
                    f"revision {rev.index}: object {e.object_number} offset {e.offset} "
                    f"does not start 'N G obj'"
                )
                continue
            number, gen = int(m.group(1)), int(m.group(2))
            if number != e.object_number:
                doc.anomalies.append(
                    f"revision {rev.index}: object {e.object_number} offset {e.offset} "
                    f"holds object {number}"
                )
            elif gen != e.generation:
                doc.anomalies.append(
                    f"revision {rev.index}: object {e.object_number} generation "
                    f"{e.generation} in xref, {gen} in file"
                )


def resolve(doc: Document, rev: int, oid) -> Tuple[object, ByteSpan]:
    """Resolve ``oid`` in the view of revision ``rev``."""
    return doc.resolve(rev, oid)


def extract_info(doc: Document, rev: int, notes: Optional[list] = None) -> Dict[str, str]:
    """Document information dictionary as of revision ``rev``."""
    doc._check_rev(rev)
    info = doc.revisions[rev].trailer.dict.get("Info")
    if info is None:
        return {}
    value = doc.deref(rev, info)
    if not isinstance(value, dict):
        if notes is not None:
            notes.append(f"revision {rev}: /Info {info!r} unresolvable")
        return {}
    result = {}
    for key in INFO_KEYS:
        v = doc.deref(rev, value.get(key))
        if v is None:
            continue
        result[key] = info_text(v)
    return result


def info_text(value) -> str:
    if isinstance(value, PdfString):
        return decode_text_string(value)
    if isinstance(value, Name):
        return str.__str__(value)
    if isinstance(value, bytes):
        return decode_text_string(value)
    return str(value)


def is_strict_entry(data: bytes, entry: XrefEntry) -> bool:
    """True when the entry occupies a standard 20-byte line in place."""
    return entry.position is not None and bool(_STRICT_ENTRY_RE.match(data, entry.position))
