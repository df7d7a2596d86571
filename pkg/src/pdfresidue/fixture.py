"""Minimal PDF writer and incremental-save emulation.

Files written here are the ground truth for the rest of the package: the
writer knows every object it emitted, where, and what the stream payload
was before encoding, and records that in a :class:`Manifest`.

Object layout of :func:`write_pdf`::

    1 catalog, 2 page-tree root, 3 /Info, 4 Helvetica (WinAnsi),
    then per page: page, content stream(s), unicode font objects, images.

:func:`incremental_save` appends an update block the way an editor's
"Save" does: changed objects reuse their numbers, the new xref section
lists only those, and the trailer's /Prev points at the previous section.
"""

from __future__ import annotations

import base64
import binascii
import json
import zlib
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .cos import (
    ByteSpan,
    Name,
    ObjectId,
    PdfString,
    Reference,
    Stream,
    make_stream,
    serialize,
    serialize_indirect,
)
from .errors import BadEditScript, PdfError, UnsupportedImageFormat
from .revisions import Document, build_revision_chain

LATIN = "latin"
UNICODE = "unicode"

HEADER = b"%PDF-1.7\n%\xe2\xe3\xcf\xd3\n"

CATALOG, PAGES, INFO, LATIN_FONT = 1, 2, 3, 4
FIRST_PAGE_OBJECT = 5

IMAGE_FILTERS = {"jpeg": "DCTDecode", "jpx": "JPXDecode", "raw": None}


@dataclass
class ImageSpec:
    format: str  # jpeg | jpx | raw
    payload: bytes
    width: int
    height: int
    bits_per_component: int = 8
    color_space: str = "DeviceRGB"


@dataclass
class PageSpec:
    # (text, font) pairs; font is "latin" or "unicode"; one line each
    texts: List[Tuple[str, str]] = field(default_factory=list)
    images: List[ImageSpec] = field(default_factory=list)
    content_streams: int = 1

    @property
    def strings(self) -> List[str]:
        return [t for t, _ in self.texts]


@dataclass
class EditScript:
    page_edits: Dict[int, PageSpec] = field(default_factory=dict)
    pages_appended: List[PageSpec] = field(default_factory=list)
    info_updates: Dict[str, str] = field(default_factory=dict)


@dataclass
class WriterOptions:
    content_filters: Tuple[str, ...] = ("FlateDecode",)
    xref_stream: bool = False
    info: Dict[str, str] = field(default_factory=lambda: {"Producer": "pdfresidue fixture"})
    # intermediate /Pages nodes: e.g. [2, 3] -> two subtrees of 2 and 3 pages
    page_groups: Optional[List[int]] = None
    encrypt_stub: bool = False

    @classmethod
    def raw(cls, **kw):
        return cls(content_filters=(), **kw)


@dataclass
class ObjectRecord:
    id: ObjectId
    span: ByteSpan
    revision: int
    kind: str
    payload: Optional[bytes] = None  # stream data before encoding


@dataclass
class RevisionRecord:
    xref_offset: int
    end: int
    objects: List[int]


@dataclass
class Manifest:
    objects: List[ObjectRecord] = field(default_factory=list)
    revisions: List[RevisionRecord] = field(default_factory=list)
    page_count: int = 0

    def spans(self):
        return [(r.id, r.span) for r in self.objects]

    def to_json(self) -> str:
        def obj(r: ObjectRecord):
            return {
                "id": [r.id.number, r.id.generation],
                "span": [r.span.start, r.span.length],
                "revision": r.revision,
                "kind": r.kind,
                "payload_length": None if r.payload is None else len(r.payload),
            }

        return json.dumps(
            {
                "schema_version": 1,
                "page_count": self.page_count,
                "revisions": [asdict(r) for r in self.revisions],
                "objects": [obj(r) for r in self.objects],
            },
            indent=2,
        )


# -- stream encoders (inverse of filters.apply_filter) ----------------------


def encode_filter(name: str, data: bytes) -> bytes:
    if name == "FlateDecode":
        return zlib.compress(data)
    if name == "ASCIIHexDecode":
        return binascii.hexlify(data).upper() + b">"
    if name == "ASCII85Decode":
        return base64.a85encode(data) + b"~>"
    if name == "RunLengthDecode":
        return _runlength_encode(data)
    if name == "LZWDecode":
        return _lzw_encode(data)
    raise ValueError(f"no encoder for /{name}")


def encode_chain(filters: Sequence[str], data: bytes) -> bytes:
    """Encode for a /Filter array listed in decode order."""
    for name in reversed(filters):
        data = encode_filter(name, data)
    return data


def _runlength_encode(data: bytes) -> bytes:
    out = bytearray()
    i, n = 0, len(data)
    while i < n:
        j = i + 1
        while j < n and j - i < 128 and data[j] == data[i]:
            j += 1
        if j - i >= 2:
            out.append(257 - (j - i))
            out.append(data[i])
            i = j
            continue
        j = i + 1
        while j < n and j - i < 128 and not (j + 1 < n and data[j] == data[j + 1]):
            j += 1
        out.append(j - i - 1)
        out += data[i:j]
        i = j
    out.append(128)
    return bytes(out)


class _BitWriter:
    def __init__(self):
        self.out = bytearray()
        self.acc = 0
        self.nbits = 0

    def write(self, code, width):
        self.acc = (self.acc << width) | code
        self.nbits += width
        while self.nbits >= 8:
            self.nbits -= 8
            self.out.append((self.acc >> self.nbits) & 0xFF)
        self.acc &= (1 << self.nbits) - 1

    def flush(self):
        if self.nbits:
            self.out.append((self.acc << (8 - self.nbits)) & 0xFF)
        return bytes(self.out)


def _lzw_width(next_code, early=1):
    size = next_code - 1 + early
    if size >= 2048:
        return 12
    if size >= 1024:
        return 11
    if size >= 512:
        return 10
    return 9


def _lzw_encode(data: bytes, early: int = 1) -> bytes:
    bw = _BitWriter()
    bw.write(256, 9)
    table = {bytes([i]): i for i in range(256)}
    next_code = 258
    w = b""
    for c in data:
        wc = w + bytes([c])
        if wc in table:
            w = wc
            continue
        bw.write(table[w], _lzw_width(next_code, early))
        table[wc] = next_code
        next_code += 1
        w = bytes([c])
        if next_code >= 4000:
            bw.write(256, _lzw_width(next_code, early))
            table = {bytes([i]): i for i in range(256)}
            next_code = 258
    if w:
        bw.write(table[w], _lzw_width(next_code, early))
        next_code += 1
    bw.write(257, _lzw_width(next_code, early))
    return bw.flush()


# -- writer core -------------------------------------------------------------


class _Block:
    """Accumulates one block (original or update) onto a buffer."""

    def __init__(self, base: bytes, revision: int):
        self.buf = bytearray(base)
        self.revision = revision
        self.offsets: Dict[int, int] = {}
        self.records: List[ObjectRecord] = []

    def add(self, number: int, value, kind: str = "", payload: Optional[bytes] = None):
        offset = len(self.buf)
        chunk = serialize_indirect((number, 0), value)
        self.buf += chunk
        self.offsets[number] = offset
        self.records.append(
            ObjectRecord(
                ObjectId(number, 0),
                ByteSpan(offset, len(chunk) - 1),
                self.revision,
                kind,
                payload,
            )
        )

    def finish(self, trailer: dict, xref_stream: bool, full: bool, compress: bool = True):
        if xref_stream:
            return self._finish_stream(trailer, full, compress)
        xref_offset = len(self.buf)
        table = self._entries(full)
        self.buf += b"xref\n"
        for first, entries in _subsections(table):
            self.buf += b"%d %d\n" % (first, len(entries))
            for offset, gen, in_use in entries:
                self.buf += b"%010d %05d %s\r\n" % (offset, gen, b"n" if in_use else b"f")
        self.buf += b"trailer\n" + serialize(trailer) + b"\n"
        self.buf += b"startxref\n%d\n%%%%EOF\n" % xref_offset
        return xref_offset

    def _entries(self, full):
        table = {n: (off, 0, True) for n, off in self.offsets.items()}
        if full:
            top = max(table, default=0)
            for n in range(0, top + 1):
                table.setdefault(n, (0, 65535, False))
        elif not table:
            table[0] = (0, 65535, False)
        return table

    def _finish_stream(self, trailer, full, compress):
        number = trailer["Size"]
        xref_offset = len(self.buf)
        self.offsets[number] = xref_offset
        table = self._entries(full)
        rows = bytearray()
        index = []
        for first, entries in _subsections(table):
            index += [first, len(entries)]
            for offset, gen, in_use in entries:
                rows += bytes([1 if in_use else 0]) + offset.to_bytes(4, "big") + gen.to_bytes(2, "big")
        sdict = dict(trailer)
        sdict.update(
            {
                Name("Type"): Name("XRef"),
                Name("Size"): number + 1,
                Name("W"): [1, 4, 2],
                Name("Index"): index,
            }
        )
        data = bytes(rows)
        if compress:
            sdict[Name("Filter")] = Name("FlateDecode")
            data = zlib.compress(data)
        chunk = serialize_indirect((number, 0), make_stream(sdict, data))
        self.buf += chunk
        self.records.append(
            ObjectRecord(ObjectId(number, 0), ByteSpan(xref_offset, len(chunk) - 1),
                         self.revision, "xref", bytes(rows))
        )
        self.buf += b"startxref\n%d\n%%%%EOF\n" % xref_offset
        return xref_offset


def _subsections(table):
    groups = []
    for n in sorted(table):
        if groups and groups[-1][0] + len(groups[-1][1]) == n:
            groups[-1][1].append(table[n])
        else:
            groups.append((n, [table[n]]))
    return groups


def _ref(n):
    return Reference(n, 0)


class _PageWriter:
    """Emits the objects of one page into a block."""

    def __init__(self, block: _Block, filters: Sequence[str], alloc):
        self.block = block
        self.filters = tuple(filters)
        self.alloc = alloc

    def content_stream(self, number, program: bytes):
        sdict = {}
        if self.filters:
            sdict[Name("Filter")] = (
                Name(self.filters[0]) if len(self.filters) == 1 else [Name(f) for f in self.filters]
            )
        self.block.add(number, make_stream(sdict, encode_chain(self.filters, program)),
                       "content", program)

    def image(self, number, img: ImageSpec):
        fmt = img.format.lower()
        if fmt not in IMAGE_FILTERS:
            raise UnsupportedImageFormat(f"image format {img.format!r}")
        sdict = {
            Name("Type"): Name("XObject"),
            Name("Subtype"): Name("Image"),
            Name("Width"): img.width,
            Name("Height"): img.height,
            Name("ColorSpace"): Name(img.color_space),
            Name("BitsPerComponent"): img.bits_per_component,
        }
        data = img.payload
        if IMAGE_FILTERS[fmt]:
            sdict[Name("Filter")] = Name(IMAGE_FILTERS[fmt])
        elif "FlateDecode" in self.filters:
            sdict[Name("Filter")] = Name("FlateDecode")
            data = zlib.compress(data)
        self.block.add(number, make_stream(sdict, data), "image", img.payload)

    def unicode_fonts(self, numbers, codes: Dict[str, int], write_fonts: bool = True):
        type0, cidfont, tounicode = numbers
        if write_fonts:
            self.block.add(
                type0,
                {
                    Name("Type"): Name("Font"),
                    Name("Subtype"): Name("Type0"),
                    Name("BaseFont"): Name("FixtureUnicode"),
                    Name("Encoding"): Name("Identity-H"),
                    Name("DescendantFonts"): [_ref(cidfont)],
                    Name("ToUnicode"): _ref(tounicode),
                },
                "font",
            )
            self.block.add(
                cidfont,
                {
                    Name("Type"): Name("Font"),
                    Name("Subtype"): Name("CIDFontType2"),
                    Name("BaseFont"): Name("FixtureUnicode"),
                    Name("CIDSystemInfo"): {
                        Name("Registry"): PdfString(b"Adobe"),
                        Name("Ordering"): PdfString(b"Identity"),
                        Name("Supplement"): 0,
                    },
                    Name("CIDToGIDMap"): Name("Identity"),
                },
                "font",
            )
        cmap = to_unicode_cmap(codes)
        sdict = {}
        data = cmap
        if "FlateDecode" in self.filters:
            sdict[Name("Filter")] = Name("FlateDecode")
            data = zlib.compress(cmap)
        self.block.add(tounicode, make_stream(sdict, data), "cmap", cmap)


def unicode_codes(spec: PageSpec) -> Dict[str, int]:
    """Two-byte code per distinct character of the page's unicode lines."""
    codes: Dict[str, int] = {}
    for text, font in spec.texts:
        if font == UNICODE:
            for ch in text:
                codes.setdefault(ch, len(codes) + 1)
    return codes


def to_unicode_cmap(codes: Dict[str, int]) -> bytes:
    lines = [
        b"/CIDInit /ProcSet findresource begin",
        b"12 dict begin",
        b"begincmap",
        b"/CIDSystemInfo << /Registry (Adobe) /Ordering (UCS) /Supplement 0 >> def",
        b"/CMapName /Adobe-Identity-UCS def",
        b"/CMapType 2 def",
        b"1 begincodespacerange",
        b"<0000> <FFFF>",
        b"endcodespacerange",
    ]
    items = sorted(codes.items(), key=lambda kv: kv[1])
    for i in range(0, len(items), 100):
        chunk = items[i : i + 100]
        lines.append(b"%d beginbfchar" % len(chunk))
        for ch, code in chunk:
            lines.append(b"<%04X> <%s>" % (code, ch.encode("utf-16-be").hex().upper().encode()))
        lines.append(b"endbfchar")
    lines += [
        b"endcmap",
        b"CMapName currentdict /CMap defineresource pop",
        b"end",
        b"end",
    ]
    return b"\n".join(lines) + b"\n"


def content_programs(spec: PageSpec, codes: Dict[str, int]) -> List[bytes]:
    """Content program(s) for a page: one BT..ET line per text item."""
    ops = []
    y = 750
    for text, font in spec.texts:
        if font == UNICODE:
            shown = b"<" + b"".join(b"%04X" % codes[ch] for ch in text) + b">"
            res = b"/U1"
        elif font == LATIN:
            try:
                shown = serialize(PdfString(text.encode("cp1252")))
            except UnicodeEncodeError:
                raise BadEditScript(f"{text!r} is not WinAnsi-encodable; use the unicode font") from None
            res = b"/F1"
        else:
            raise BadEditScript(f"unknown font kind {font!r}")
        ops.append(b"BT %s 12 Tf 72 %d Td %s Tj ET" % (res, y, shown))
        y -= 20
    for k, img in enumerate(spec.images):
        ops.append(b"q %d 0 0 %d 72 %d cm /Im%d Do Q" % (img.width, img.height, 100 + 10 * k, k))
    n = max(1, spec.content_streams)
    if n == 1:
        return [b"\n".join(ops)]
    per = -(-len(ops) // n) if ops else 0
    return [b"\n".join(ops[i * per : (i + 1) * per]) for i in range(n)]


def _resources(spec: PageSpec, image_numbers, font_numbers, latin_font):
    fonts = {Name("F1"): _ref(latin_font)}
    if font_numbers:
        fonts[Name("U1")] = _ref(font_numbers[0])
    res = {Name("Font"): fonts}
    if image_numbers:
        res[Name("XObject")] = {Name(f"Im{k}"): _ref(n) for k, n in enumerate(image_numbers)}
    return res


def _page_dict(parent, content_numbers, resources):
    d = {
        Name("Type"): Name("Page"),
        Name("Parent"): _ref(parent),
        Name("MediaBox"): [0, 0, 612, 792],
        Name("Resources"): resources,
    }
    if len(content_numbers) == 1:
        d[Name("Contents")] = _ref(content_numbers[0])
    elif content_numbers:
        d[Name("Contents")] = [_ref(n) for n in content_numbers]
    return d


def _info_dict(info: Dict[str, str]):
    return {Name(k): v for k, v in info.items()}


def _encrypt_stub():
    return {
        Name("Filter"): Name("Standard"),
        Name("V"): 1,
        Name("R"): 2,
        Name("O"): PdfString(b"\x00" * 32, hex=True),
        Name("U"): PdfString(b"\x00" * 32, hex=True),
        Name("P"): -4,
    }


def write_pdf(pages: Sequence[PageSpec], options: Optional[WriterOptions] = None):
    """Write a single-revision PDF. Returns ``(bytes, Manifest)``."""
    options = options or WriterOptions()
    block = _Block(HEADER, 0)
    counter = [FIRST_PAGE_OBJECT]

    def alloc():
        counter[0] += 1
        return counter[0] - 1

    pw = _PageWriter(block, options.content_filters, alloc)

    groups = options.page_groups
    if groups is not None and sum(groups) != len(pages):
        raise BadEditScript(f"page_groups {groups} do not add up to {len(pages)} pages")
    group_nodes = [alloc() for _ in groups] if groups else []
    parents = []
    if groups:
        for node, size in zip(group_nodes, groups):
            parents += [node] * size
    else:
        parents = [PAGES] * len(pages)

    page_numbers = []
    for spec, parent in zip(pages, parents):
        page_numbers.append(_emit_page(pw, spec, parent, alloc))

    block.add(CATALOG, {Name("Type"): Name("Catalog"), Name("Pages"): _ref(PAGES)}, "catalog")
    if groups:
        kids, i = [], 0
        for node, size in zip(group_nodes, groups):
            block.add(node, {
                Name("Type"): Name("Pages"),
                Name("Parent"): _ref(PAGES),
                Name("Kids"): [_ref(n) for n in page_numbers[i : i + size]],
                Name("Count"): size,
            }, "pages")
            kids.append(_ref(node))
            i += size
    else:
        kids = [_ref(n) for n in page_numbers]
    block.add(PAGES, {Name("Type"): Name("Pages"), Name("Kids"): kids, Name("Count"): len(pages)},
              "pages")
    block.add(INFO, _info_dict(options.info), "info")
    block.add(LATIN_FONT, {
        Name("Type"): Name("Font"),
        Name("Subtype"): Name("Type1"),
        Name("BaseFont"): Name("Helvetica"),
        Name("Encoding"): Name("WinAnsiEncoding"),
    }, "font")

    size = counter[0]
    trailer = {Name("Size"): size, Name("Root"): _ref(CATALOG), Name("Info"): _ref(INFO)}
    if options.encrypt_stub:
        trailer[Name("Encrypt")] = _encrypt_stub()
    xref_offset = block.finish(trailer, options.xref_stream, full=True,
                               compress="FlateDecode" in options.content_filters)
    data = bytes(block.buf)
    records = sorted(block.records, key=lambda r: r.span.start)
    manifest = Manifest(
        objects=records,
        revisions=[RevisionRecord(xref_offset, len(data), sorted(block.offsets))],
        page_count=len(pages),
    )
    return data, manifest


def _emit_page(pw: _PageWriter, spec: PageSpec, parent: int, alloc) -> int:
    page_no = alloc()
    programs_n = max(1, spec.content_streams)
    content_nos = [alloc() for _ in range(programs_n)]
    codes = unicode_codes(spec)
    font_nos = [alloc() for _ in range(3)] if codes else []
    image_nos = [alloc() for _ in spec.images]
    pw.block.add(page_no, _page_dict(parent, content_nos,
                                     _resources(spec, image_nos, font_nos, LATIN_FONT)), "page")
    for n, program in zip(content_nos, content_programs(spec, codes)):
        pw.content_stream(n, program)
    if codes:
        pw.unicode_fonts(font_nos, codes)
    for n, img in zip(image_nos, spec.images):
        pw.image(n, img)
    return page_no


def _max_object_number(doc: Document) -> int:
    top = 0
    for rev in doc.revisions:
        size = rev.trailer.dict.get("Size")
        if type(size) is int:
            top = max(top, size - 1)
        for n in rev.xref.entries():
            top = max(top, n)
    return top


def incremental_save(
    data: bytes,
    edits: Optional[EditScript] = None,
    options: Optional[WriterOptions] = None,
    manifest: Optional[Manifest] = None,
):
    """Append one update block applying ``edits``; returns ``(bytes, Manifest)``.

    The original bytes are never touched. When the previous ``manifest``
    is supplied the returned one extends it; otherwise it is rebuilt from
    the parsed xref chain.
    """
    from .pagetree import catalog, page_resources, pages

    edits = edits or EditScript()
    options = options or WriterOptions()
    doc = build_revision_chain(data)
    last = doc.last
    prev_trailer = doc.revisions[last].trailer.dict
    page_refs = pages(doc, last)
    for idx in edits.page_edits:
        if not isinstance(idx, int) or not 0 <= idx < len(page_refs):
            raise BadEditScript(f"page {idx} does not exist (document has {len(page_refs)})")

    block = _Block(data, last + 1)
    counter = [_max_object_number(doc) + 1]

    def alloc():
        counter[0] += 1
        return counter[0] - 1

    pw = _PageWriter(block, options.content_filters, alloc)
    cat = catalog(doc, last)
    pages_ref = cat.get("Pages")
    if not isinstance(pages_ref, Reference):
        raise BadEditScript("page-tree root is not an indirect object")

    latin_font = LATIN_FONT
    for page in page_refs:
        f1 = page_resources(doc, last, page).get("Font")
        f1 = doc.deref(last, f1)
        if isinstance(f1, dict) and isinstance(f1.get("F1"), Reference):
            latin_font = f1["F1"].number
            break

    for idx in sorted(edits.page_edits):
        spec = edits.page_edits[idx]
        page = page_refs[idx]
        old_res = page_resources(doc, last, page)
        old_images = doc.deref(last, old_res.get("XObject"))
        old_image_nos = []
        if isinstance(old_images, dict):
            k = 0
            while isinstance(old_images.get(f"Im{k}"), Reference):
                old_image_nos.append(old_images[f"Im{k}"].number)
                k += 1
        old_fonts = doc.deref(last, old_res.get("Font"))
        old_font_nos = []
        if isinstance(old_fonts, dict) and isinstance(old_fonts.get("U1"), Reference):
            t0 = old_fonts["U1"].number
            t0d = doc.deref(last, old_fonts["U1"])
            if isinstance(t0d, dict):
                desc = doc.deref(last, t0d.get("DescendantFonts"))
                tu = t0d.get("ToUnicode")
                if isinstance(desc, list) and desc and isinstance(desc[0], Reference) and isinstance(tu, Reference):
                    old_font_nos = [t0, desc[0].number, tu.number]

        codes = unicode_codes(spec)
        n_streams = max(1, spec.content_streams)
        content_nos = [c.number for c in page.contents[:n_streams]]
        while len(content_nos) < n_streams:
            content_nos.append(alloc())
        image_nos = old_image_nos[: len(spec.images)]
        while len(image_nos) < len(spec.images):
            image_nos.append(alloc())
        font_nos = []
        write_fonts = False
        if codes:
            font_nos = old_font_nos or [alloc() for _ in range(3)]
            write_fonts = not old_font_nos

        new_res = _resources(spec, image_nos, font_nos, latin_font)
        same_contents = [c.number for c in page.contents] == content_nos
        if page.page_object is None:
            raise BadEditScript(f"page {idx} is not an indirect object")
        if new_res != old_res or not same_contents:
            new_page = dict(page.dict)
            new_page[Name("Resources")] = new_res
            new_page.pop("Contents", None)
            if len(content_nos) == 1:
                new_page[Name("Contents")] = _ref(content_nos[0])
            else:
                new_page[Name("Contents")] = [_ref(n) for n in content_nos]
            block.add(page.page_object.number, new_page, "page")
        for n, program in zip(content_nos, content_programs(spec, codes)):
            pw.content_stream(n, program)
        if codes:
            pw.unicode_fonts(font_nos, codes, write_fonts=write_fonts)
        for n, img in zip(image_nos, spec.images):
            pw.image(n, img)

    if edits.pages_appended:
        root = doc.deref(last, pages_ref)
        if not isinstance(root, dict) or not isinstance(doc.deref(last, root.get("Kids")), list):
            raise BadEditScript("page-tree root has no /Kids array")
        kids = list(doc.deref(last, root["Kids"]))
        for spec in edits.pages_appended:
            kids.append(_ref(_emit_page(pw, spec, pages_ref.number, alloc)))
        new_root = dict(root)
        new_root[Name("Kids")] = kids
        new_root[Name("Count")] = len(page_refs) + len(edits.pages_appended)
        block.add(pages_ref.number, new_root, "pages")

    info_ref = prev_trailer.get("Info")
    if edits.info_updates:
        old_info = doc.deref(last, info_ref) if info_ref is not None else None
        new_info = dict(old_info) if isinstance(old_info, dict) else {}
        new_info.update(_info_dict(edits.info_updates))
        if not isinstance(info_ref, Reference):
            info_ref = _ref(alloc())
        block.add(info_ref.number, new_info, "info")

    trailer = {
        Name("Size"): counter[0],
        Name("Root"): prev_trailer.get("Root"),
    }
    if info_ref is not None:
        trailer[Name("Info")] = info_ref
    trailer[Name("Prev")] = doc.revisions[last].xref_offset
    xref_stream = options.xref_stream or doc.revisions[last].xref.kind == "stream"
    xref_offset = block.finish(trailer, xref_stream, full=False,
                               compress="FlateDecode" in options.content_filters)
    out = bytes(block.buf)

    if manifest is None:
        manifest = _manifest_from_document(doc)
    new_manifest = Manifest(
        objects=list(manifest.objects) + sorted(block.records, key=lambda r: r.span.start),
        revisions=list(manifest.revisions)
        + [RevisionRecord(xref_offset, len(out), sorted(block.offsets))],
        page_count=len(page_refs) + len(edits.pages_appended),
    )
    return out, new_manifest


def append_update(data: bytes, objects: Dict[int, object], doc: Optional[Document] = None):
    """Append one update block holding ``objects`` (number -> value).

    The xref flavour follows the previous revision. Returns
    ``(bytes, {number: ByteSpan})``.
    """
    doc = doc or build_revision_chain(data)
    last = doc.last
    prev = doc.revisions[last].trailer.dict
    block = _Block(data, last + 1)
    for number in sorted(objects):
        block.add(number, objects[number])
    size = max(_max_object_number(doc), max(objects, default=0)) + 1
    trailer = {Name("Size"): size}
    for key in ("Root", "Info", "ID"):
        if key in prev:
            trailer[Name(key)] = prev[key]
    trailer[Name("Prev")] = doc.revisions[last].xref_offset
    block.finish(trailer, doc.revisions[last].xref.kind == "stream", full=False)
    spans = {r.id.number: r.span for r in block.records if r.kind != "xref"}
    return bytes(block.buf), spans


def _manifest_from_document(doc: Document) -> Manifest:
    from .pagetree import page_count

    records = []
    seen = set()
    for rev in doc.revisions:
        for n, e in sorted(rev.xref.entries().items()):
            if not e.in_use or e.container is not None or e.offset in seen:
                continue
            seen.add(e.offset)
            try:
                oid, value, span = doc.object_at(e.offset, rev.index)
            except PdfError:
                continue
            payload = value.encoded if isinstance(value, Stream) else None
            records.append(ObjectRecord(oid, span, rev.index, "", payload))
    records.sort(key=lambda r: r.span.start)
    revisions = [
        RevisionRecord(r.xref_offset, r.cumulative_end, sorted(r.xref.entries()))
        for r in doc.revisions
    ]
    return Manifest(records, revisions, page_count(doc, doc.last))


def full_save(data: bytes) -> bytes:
    """Rewrite the final revision as a single block ("Save As")."""
    doc = build_revision_chain(data)
    last = doc.last
    view = doc.view(last)
    buf = bytearray(b"%%PDF-%s\n%%\xe2\xe3\xcf\xd3\n" % (doc.header_version or "1.7").encode())
    offsets = {}
    for n in sorted(view):
        e = view[n]
        if not e.in_use or n == 0:
            continue
        value, span = doc.resolve(last, (n, e.generation))
        if isinstance(value, Stream) and value.get("Type") in ("XRef", "ObjStm"):
            continue
        offsets[n] = (len(buf), e.generation)
        if e.container is None:
            buf += doc.bytes[span.start : span.end] + b"\n"
        else:
            buf += serialize_indirect((n, e.generation), value)
    top = max(offsets, default=0)
    xref_offset = len(buf)
    buf += b"xref\n0 %d\n" % (top + 1)
    for n in range(top + 1):
        if n in offsets:
            buf += b"%010d %05d n\r\n" % offsets[n]
        else:
            buf += b"0000000000 65535 f\r\n"
    prev = doc.revisions[last].trailer.dict
    trailer = {Name("Size"): top + 1}
    for key in ("Root", "Info"):
        if key in prev:
            trailer[Name(key)] = prev[key]
    buf += b"trailer\n" + serialize(trailer) + b"\n"
    buf += b"startxref\n%d\n%%%%EOF\n" % xref_offset
    return bytes(buf)


def table1_fixture(
    original: Optional[Sequence[PageSpec]] = None,
    edited: Optional[Dict[int, PageSpec]] = None,
    options: Optional[WriterOptions] = None,
):
    """Three pages, pages 1-2 edited, one incremental save.

    Returns ``(original_bytes, modified_bytes, manifest)``.
    """
    if original is None:
        original = [
            PageSpec([("Original first page", LATIN)]),
            PageSpec([("Original second page", LATIN)]),
            PageSpec([("Third page stays the same", LATIN)]),
        ]
    if edited is None:
        edited = {
            0: PageSpec([("Edited first page", LATIN)]),
            1: PageSpec([("Edited second page", LATIN)]),
        }
    first, manifest = write_pdf(original, options)
    modified, manifest = incremental_save(first, EditScript(page_edits=dict(edited)), options, manifest)
    return first, modified, manifest
