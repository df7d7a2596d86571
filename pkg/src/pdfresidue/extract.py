"""Text and image extraction for one revision of a document."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .cos import Keyword, Lexer, Name, ObjectId, PdfString, Reference, Stream
from .encodings import BASE_ENCODINGS, WINANSI, decode_utf16be, glyph_to_unicode
from .errors import MalformedCMap, MalformedContent, MalformedToken, PdfError
from .filters import decode_stream
from .pagetree import content_program, page_resources, pages
from .revisions import Document

KERNING_THRESHOLD = 200
MAX_BFRANGE = 65536
MAX_XOBJECT_DEPTH = 8
REPLACEMENT = "�"

_WS = b"\x00\t\n\x0c\r "
_EI_RE = re.compile(rb"[\x00\t\n\x0c\r ]EI(?=[\x00\t\n\x0c\r ]|$)")


@dataclass
class TextRun:
    text: str
    page_index: int
    order: int


@dataclass
class PageText:
    page_index: int
    runs: List[TextRun] = field(default_factory=list)
    joined: str = ""
    error: Optional[str] = None
    warnings: List[str] = field(default_factory=list)


@dataclass
class ExtractedImage:
    page_index: int
    object_id: Optional[ObjectId]
    format: str  # JPEG | JPEG2000 | RawPixmap
    width: Optional[int]
    height: Optional[int]
    bits_per_component: Optional[int]
    color_space: Optional[str]
    payload: bytes
    soft_mask_of: Optional[ObjectId] = None

    @property
    def extension(self) -> str:
        return {"JPEG": "jpg", "JPEG2000": "jp2"}.get(self.format, "raw")


# -- content tokenizer -------------------------------------------------------


def tokenize_content(program: bytes, warnings: Optional[list] = None, strict: bool = False):
    """Split a content program into ``(operands, operator)`` pairs.

    Inline images come back as a single ``BI`` operation whose operands
    are the image dictionary and its raw data.
    """
    ops = []
    lexer = Lexer(program)
    operands: list = []
    while True:
        try:
            lexer.skip_ws()
            if lexer.pos >= lexer.end:
                break
            start = lexer.pos
            tok = _read_operand(lexer, 0)
        except MalformedToken as exc:
            if strict:
                raise MalformedContent(str(exc)) from None
            if warnings is not None:
                warnings.append(f"malformed content at {lexer.pos}: {exc}")
            operands = []
            _resync(lexer, start)
            continue
        if type(tok) is not Keyword:
            operands.append(tok)
            continue
        if tok in ("]", ">>", "}", "{"):
            if strict:
                raise MalformedContent(f"unexpected {tok!r} at {start}")
            if warnings is not None:
                warnings.append(f"unexpected {tok!r} at {start}")
            operands = []
            continue
        if tok == "BI":
            try:
                ops.append((_read_inline_image(lexer), Keyword("BI")))
            except MalformedToken as exc:
                if strict:
                    raise MalformedContent(str(exc)) from None
                if warnings is not None:
                    warnings.append(f"bad inline image at {start}: {exc}")
                lexer.pos = lexer.end
            operands = []
            continue
        ops.append((operands, tok))
        operands = []
    return ops


def _resync(lexer: Lexer, start: int):
    """Skip past the offending token to the next whitespace."""
    data, pos = lexer.data, max(start, lexer.pos) + 1
    while pos < lexer.end and data[pos] not in _WS:
        pos += 1
    lexer.pos = pos


def _read_operand(lexer: Lexer, depth: int):
    # like Lexer.read_object, minus indirect references
    if depth > 64:
        raise MalformedToken("operand nesting too deep")
    tok = lexer.next_token()
    if type(tok) is not Keyword:
        return tok
    if tok == "[":
        items = []
        while True:
            lexer.skip_ws()
            if lexer.pos >= lexer.end:
                raise MalformedToken("unterminated array")
            v = _read_operand(lexer, depth + 1)
            if type(v) is Keyword:
                if v == "]":
                    return items
                raise MalformedToken(f"operator {v!r} inside array")
            items.append(v)
    if tok == "<<":
        d = {}
        while True:
            key = lexer.next_token()
            if type(key) is Keyword and key == ">>":
                return d
            if type(key) is not Name:
                raise MalformedToken(f"bad dictionary key {key!r}")
            v = _read_operand(lexer, depth + 1)
            if type(v) is Keyword:
                raise MalformedToken(f"operator {v!r} inside dictionary")
            d[key] = v
    if tok == "true":
        return True
    if tok == "false":
        return False
    if tok == "null":
        return None
    return tok


def _read_inline_image(lexer: Lexer):
    params = {}
    while True:
        key = lexer.next_token()
        if key is None:
            raise MalformedToken("inline image without ID")
        if type(key) is Keyword and key == "ID":
            break
        if type(key) is not Name:
            raise MalformedToken(f"bad inline image key {key!r}")
        v = _read_operand(lexer, 1)
        if type(v) is Keyword:
            raise MalformedToken(f"operator {v!r} in inline image dictionary")
        params[key] = v
    data = lexer.data
    begin = lexer.pos + 1  # one whitespace byte after ID
    m = _EI_RE.search(data, begin, lexer.end)
    if m is None:
        raise MalformedToken("inline image without EI")
    lexer.pos = m.end()
    return [params, data[begin : m.start()]]


# -- fonts -------------------------------------------------------------------


def parse_to_unicode(cmap: bytes, warnings: Optional[list] = None, strict: bool = False) -> Dict[int, str]:
    """Code -> text map from the bfchar/bfrange sections of a CMap."""
    result: Dict[int, str] = {}
    lexer = Lexer(cmap)

    def fail(msg):
        if strict:
            raise MalformedCMap(msg)
        if warnings is not None:
            warnings.append(f"ToUnicode: {msg}")

    try:
        while True:
            tok = lexer.next_token()
            if tok is None:
                break
            if tok == "beginbfchar" and type(tok) is Keyword:
                while True:
                    src = _read_operand(lexer, 0)
                    if type(src) is Keyword and src == "endbfchar":
                        break
                    dst = _read_operand(lexer, 0)
                    if not isinstance(src, bytes) or not isinstance(dst, (bytes, Name)):
                        raise MalformedToken(f"bad bfchar pair {src!r} {dst!r}")
                    result[int.from_bytes(src, "big")] = _dest_text(dst)
            elif tok == "beginbfrange" and type(tok) is Keyword:
                while True:
                    lo = _read_operand(lexer, 0)
                    if type(lo) is Keyword and lo == "endbfrange":
                        break
                    hi = _read_operand(lexer, 0)
                    dst = _read_operand(lexer, 0)
                    if not isinstance(lo, bytes) or not isinstance(hi, bytes):
                        raise MalformedToken(f"bad bfrange bounds {lo!r} {hi!r}")
                    _expand_range(result, int.from_bytes(lo, "big"), int.from_bytes(hi, "big"), dst, fail)
    except MalformedToken as exc:
        fail(str(exc))
    return result


def _dest_text(dst) -> str:
    if isinstance(dst, Name):
        return glyph_to_unicode(str.__str__(dst))
    return decode_utf16be(dst)


def _expand_range(result, lo, hi, dst, fail):
    if hi < lo:
        fail(f"bfrange {lo:#x}..{hi:#x} is empty")
        return
    if hi - lo >= MAX_BFRANGE:
        fail(f"bfrange {lo:#x}..{hi:#x} too large; truncated")
        hi = lo + MAX_BFRANGE - 1
    if isinstance(dst, list):
        for code, item in zip(range(lo, hi + 1), dst):
            if isinstance(item, (bytes, Name)):
                result[code] = _dest_text(item)
        return
    if not isinstance(dst, bytes) or len(dst) < 2:
        fail(f"bfrange destination {dst!r}")
        return
    head, last = bytes(dst[:-2]), int.from_bytes(dst[-2:], "big")
    for i, code in enumerate(range(lo, hi + 1)):
        unit = last + i
        if unit > 0xFFFF:
            break
        result[code] = decode_utf16be(head + unit.to_bytes(2, "big"))


@dataclass
class FontMap:
    resource_name: str
    base_encoding: str = "WinAnsi"  # Standard | WinAnsi | MacRoman | IdentityTwoByte
    to_unicode: Optional[Dict[int, str]] = None
    differences: Dict[int, str] = field(default_factory=dict)

    @property
    def two_byte(self) -> bool:
        return self.base_encoding == "IdentityTwoByte"

    def decode(self, raw: bytes, warnings: Optional[list] = None) -> str:
        out = []
        if self.two_byte:
            missing = 0
            for i in range(0, len(raw) - 1, 2):
                code = (raw[i] << 8) | raw[i + 1]
                text = self.to_unicode.get(code) if self.to_unicode else None
                if text is None:
                    missing += 1
                    text = REPLACEMENT
                out.append(text)
            if len(raw) % 2:
                missing += 1
                out.append(REPLACEMENT)
            if missing and warnings is not None:
                warnings.append(f"font /{self.resource_name}: {missing} unmapped two-byte code(s)")
            return "".join(out)
        table = BASE_ENCODINGS.get(self.base_encoding, WINANSI)
        for b in raw:
            if self.to_unicode and b in self.to_unicode:
                out.append(self.to_unicode[b])
            elif b in self.differences:
                out.append(self.differences[b])
            else:
                out.append(table[b])
        return "".join(out)


_ENCODING_NAMES = {
    "WinAnsiEncoding": "WinAnsi",
    "MacRomanEncoding": "MacRoman",
    "StandardEncoding": "Standard",
}


def font_map(doc: Document, rev: int, name: str, font, warnings: Optional[list] = None) -> FontMap:
    font = doc.deref(rev, font)
    fm = FontMap(name)
    if not isinstance(font, dict):
        return fm
    if font.get("Subtype") == "Type0":
        fm.base_encoding = "IdentityTwoByte"
    enc = doc.deref(rev, font.get("Encoding"))
    if not fm.two_byte:
        if isinstance(enc, Name):
            fm.base_encoding = _ENCODING_NAMES.get(enc, "WinAnsi")
        elif isinstance(enc, dict):
            base = doc.deref(rev, enc.get("BaseEncoding"))
            if isinstance(base, Name):
                fm.base_encoding = _ENCODING_NAMES.get(base, "WinAnsi")
            diffs = doc.deref(rev, enc.get("Differences"))
            if isinstance(diffs, list):
                code = 0
                for item in diffs:
                    if type(item) is int:
                        code = item
                    elif isinstance(item, Name):
                        if 0 <= code < 256:
                            fm.differences[code] = glyph_to_unicode(str.__str__(item))
                        code += 1
    tu = doc.deref(rev, font.get("ToUnicode"))
    if isinstance(tu, Stream):
        try:
            data, terminal = decode_stream(tu, doc.resolver(rev), warnings=warnings)
            if terminal is None:
                fm.to_unicode = parse_to_unicode(data, warnings)
        except PdfError as exc:
            if warnings is not None:
                warnings.append(f"font /{name}: ToUnicode unreadable: {exc}")
    return fm


# -- text --------------------------------------------------------------------


def page_text(
    program: bytes,
    fonts: Dict[str, FontMap],
    page_index: int = 0,
    kerning_threshold: float = KERNING_THRESHOLD,
    warnings: Optional[list] = None,
) -> PageText:
    """Interpret the text operators of one content program."""
    result = PageText(page_index, warnings=warnings if warnings is not None else [])
    warns = result.warnings
    pieces: List[str] = []
    font = FontMap("")
    pending_break = False
    y = 0.0

    def show(text):
        nonlocal pending_break
        if pending_break and pieces:
            pieces.append("\n")
        pending_break = False
        result.runs.append(TextRun(text, page_index, len(result.runs)))
        pieces.append(text)

    def num(v):
        return v if type(v) in (int, float) else 0

    for operands, op in tokenize_content(program, warns):
        if op == "Tf":
            if operands and isinstance(operands[0], Name):
                font = fonts.get(operands[0]) or FontMap(operands[0])
        elif op == "Tj":
            if operands and isinstance(operands[-1], bytes):
                show(font.decode(operands[-1], warns))
        elif op in ("'", '"'):
            pending_break = True
            if operands and isinstance(operands[-1], bytes):
                show(font.decode(operands[-1], warns))
        elif op == "TJ":
            if operands and isinstance(operands[-1], list):
                parts = []
                for item in operands[-1]:
                    if isinstance(item, bytes):
                        parts.append(font.decode(item, warns))
                    elif type(item) in (int, float) and abs(item) > kerning_threshold:
                        parts.append(" ")
                show("".join(parts))
        elif op in ("Td", "TD"):
            ty = num(operands[1]) if len(operands) >= 2 else 0
            if ty != 0:
                pending_break = True
                y += ty
        elif op == "T*":
            pending_break = True
        elif op == "Tm":
            f = num(operands[5]) if len(operands) >= 6 else 0
            if f != y:
                pending_break = True
            y = f
        elif op == "BT":
            y = 0.0
        elif op == "ET":
            pending_break = True
    result.joined = "".join(pieces)
    return result


def _fonts_for(doc: Document, rev: int, resources: dict, warnings) -> Dict[str, FontMap]:
    fonts = doc.deref(rev, resources.get("Font"))
    if not isinstance(fonts, dict):
        return {}
    return {name: font_map(doc, rev, name, f, warnings) for name, f in fonts.items()}


def extract_text(doc: Document, rev: int, kerning_threshold: float = KERNING_THRESHOLD) -> List[PageText]:
    """Per-page text of revision ``rev``. Page failures are recorded on
    that page's ``error`` and do not stop the others."""
    doc._check_rev(rev)
    out = []
    for page in pages(doc, rev):
        warns: List[str] = []
        try:
            program = content_program(doc, rev, page, warns)
            fonts = _fonts_for(doc, rev, page_resources(doc, rev, page), warns)
            out.append(page_text(program, fonts, page.page_index, kerning_threshold, warns))
        except PdfError as exc:
            out.append(PageText(page.page_index, error=str(exc), warnings=warns))
    return out


# -- images ------------------------------------------------------------------


def _image_from_stream(doc, rev, page_index, oid, stream: Stream, soft_mask_of=None):
    data, terminal = decode_stream(stream, doc.resolver(rev))
    d = stream.dict

    def geo(key, alt):
        v = doc.deref(rev, d.get(key, d.get(alt)))
        return v if type(v) is int else None

    cs = doc.deref(rev, d.get("ColorSpace", d.get("CS")))
    if isinstance(cs, list) and cs and isinstance(cs[0], Name):
        cs = cs[0]
    color_space = str.__str__(cs) if isinstance(cs, Name) else None
    if terminal is None:
        fmt = "RawPixmap"
    elif terminal.name == "DCTDecode":
        fmt = "JPEG"
    elif terminal.name == "JPXDecode":
        fmt = "JPEG2000"
    else:
        raise PdfError(f"image filter /{terminal.name} is not extracted")
    return ExtractedImage(
        page_index, oid, fmt,
        geo("Width", "W"), geo("Height", "H"), geo("BitsPerComponent", "BPC"),
        color_space, data, soft_mask_of,
    )


def extract_images(doc: Document, rev: int, errors: Optional[list] = None) -> List[ExtractedImage]:
    """Image XObjects reachable from each page's resources.

    Soft masks are returned as their own entries (``soft_mask_of`` set).
    Failures are appended to ``errors`` as ``(page_index, object_id, message)``.
    """
    doc._check_rev(rev)
    result: List[ExtractedImage] = []

    def note(page_index, oid, msg):
        if errors is not None:
            errors.append((page_index, oid, msg))

    for page in pages(doc, rev):
        seen = set()

        def walk(resources, depth):
            xobjects = doc.deref(rev, resources.get("XObject"))
            if not isinstance(xobjects, dict) or depth > MAX_XOBJECT_DEPTH:
                return
            for name in sorted(xobjects):
                ref = xobjects[name]
                oid = ref.id if isinstance(ref, Reference) else None
                if oid is not None:
                    if oid in seen:
                        continue
                    seen.add(oid)
                try:
                    stream = doc.resolve(rev, oid)[0] if oid is not None else ref
                except PdfError as exc:
                    note(page.page_index, oid, str(exc))
                    continue
                if not isinstance(stream, Stream):
                    continue
                subtype = stream.get("Subtype")
                if subtype == "Form":
                    res = doc.deref(rev, stream.get("Resources"))
                    if isinstance(res, dict):
                        walk(res, depth + 1)
                    continue
                if subtype != "Image":
                    continue
                try:
                    result.append(_image_from_stream(doc, rev, page.page_index, oid, stream))
                except PdfError as exc:
                    note(page.page_index, oid, str(exc))
                    continue
                smask = stream.get("SMask")
                if isinstance(smask, Reference) and smask.id not in seen:
                    seen.add(smask.id)
                    try:
                        ms = doc.resolve(rev, smask.id)[0]
                        if isinstance(ms, Stream):
                            result.append(
                                _image_from_stream(doc, rev, page.page_index, smask.id, ms, oid)
                            )
                    except PdfError as exc:
                        note(page.page_index, smask.id, str(exc))

        walk(page_resources(doc, rev, page), 0)
    return result
