"""COS object model: lexer, indirect-object framing and object carving.

Values map onto Python types as follows::

    null        -> None
    true/false  -> bool
    integer     -> int
    real        -> float
    /Name       -> Name (str subclass)
    (string)    -> PdfString (bytes subclass, ``.hex`` records the form)
    [array]     -> list
    <<dict>>    -> dict keyed by Name
    stream      -> Stream
    N G R       -> Reference

All functions here are pure over an immutable ``bytes`` image.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

from .errors import IdMismatch, MalformedToken, PdfError, StreamLengthUnresolvable

WHITESPACE = b"\x00\t\n\x0c\r "
DELIMITERS = b"()<>[]{}/%"

_WS = rb"\x00\t\n\x0c\r "
_DELIM = rb"()<>\[\]{}/%"
_REGULAR = rb"[^" + _WS + _DELIM + rb"]"

_SKIP_RE = re.compile(rb"(?:[" + _WS + rb"]+|%[^\r\n]*)*")
_REGULAR_RUN_RE = re.compile(_REGULAR + rb"+")
_NAME_RE = re.compile(rb"/(" + _REGULAR + rb"*)")
_HEX_RE = re.compile(rb"<([0-9A-Fa-f" + _WS + rb"]*)>")
_NUMBER_RE = re.compile(rb"[+-]?(?:\d+\.?\d*|\.\d+)\Z")
_LITERAL_SPECIAL_RE = re.compile(rb"[()\\\r]")
_REF_TAIL_RE = re.compile(
    rb"[" + _WS + rb"]+(\d+)[" + _WS + rb"]+R(?!" + _REGULAR + rb")"
)
_OBJ_HEADER_RE = re.compile(
    rb"(\d+)[" + _WS + rb"]+(\d+)[" + _WS + rb"]+obj(?!" + _REGULAR + rb")"
)
_CARVE_RE = re.compile(rb"(?<!" + _REGULAR + rb")" + _OBJ_HEADER_RE.pattern)
_STREAM_KW_RE = re.compile(rb"stream(?:\r\n|\n|\r)?")
_ENDSTREAM_AT_RE = re.compile(rb"[" + _WS + rb"]*endstream(?!" + _REGULAR + rb")")
_ENDOBJ_RE = re.compile(rb"endobj(?!" + _REGULAR + rb")")

_ESCAPES = {
    ord("n"): 0x0A,
    ord("r"): 0x0D,
    ord("t"): 0x09,
    ord("b"): 0x08,
    ord("f"): 0x0C,
    ord("("): 0x28,
    ord(")"): 0x29,
    ord("\\"): 0x5C,
}

MAX_DEPTH = 256


class ObjectId(NamedTuple):
    number: int
    generation: int = 0

    def __str__(self):
        return f"{self.number} {self.generation}"


class Reference(ObjectId):
    """An indirect reference ``N G R``."""

    __slots__ = ()

    def __repr__(self):
        return f"Reference({self.number} {self.generation} R)"

    @property
    def id(self) -> ObjectId:
        return ObjectId(self.number, self.generation)


class ByteSpan(NamedTuple):
    start: int
    length: int

    @property
    def end(self) -> int:
        return self.start + self.length

    def __contains__(self, offset):
        return self.start <= offset < self.end


class Name(str):
    __slots__ = ()

    def __repr__(self):
        return "/" + str.__str__(self)


class Keyword(str):
    """A bare word that is not a value: operators, ``obj``, ``stream``..."""

    __slots__ = ()

    def __repr__(self):
        return f"Keyword({str.__str__(self)})"


class PdfString(bytes):
    """Decoded string bytes. ``hex`` is True for the ``<...>`` form."""

    def __new__(cls, value=b"", hex=False):
        obj = super().__new__(cls, value)
        obj.hex = hex
        return obj

    def __repr__(self):
        return f"PdfString({bytes(self)!r})"


@dataclass(eq=True)
class Stream:
    dict: dict
    raw: ByteSpan = field(compare=False)
    encoded: bytes = b""

    def get(self, key, default=None):
        return self.dict.get(key, default)


Resolver = Callable[[Reference], object]


class Lexer:
    """Token reader over ``data[pos:end]``."""

    def __init__(self, data: bytes, pos: int = 0, end: Optional[int] = None):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    def skip_ws(self):
        self.pos = _SKIP_RE.match(self.data, self.pos, self.end).end()

    def at_eof(self) -> bool:
        self.skip_ws()
        return self.pos >= self.end

    def next_token(self):
        """Return the next token or None at end of input."""
        self.skip_ws()
        data, pos, end = self.data, self.pos, self.end
        if pos >= end:
            return None
        c = data[pos]
        if c == 0x2F:  # /
            m = _NAME_RE.match(data, pos, end)
            self.pos = m.end()
            return Name(_decode_name(m.group(1)))
        if c == 0x28:  # (
            return self._read_literal()
        if c == 0x3C:  # <
            if pos + 1 < end and data[pos + 1] == 0x3C:
                self.pos = pos + 2
                return Keyword("<<")
            m = _HEX_RE.match(data, pos, end)
            if m is None:
                raise MalformedToken(f"bad hex string at {pos}")
            self.pos = m.end()
            digits = bytes(b for b in m.group(1) if b not in WHITESPACE)
            if len(digits) % 2:
                digits += b"0"
            return PdfString(bytes.fromhex(digits.decode("ascii")), hex=True)
        if c == 0x3E:  # >
            if pos + 1 < end and data[pos + 1] == 0x3E:
                self.pos = pos + 2
                return Keyword(">>")
            raise MalformedToken(f"stray '>' at {pos}")
        if c in b"[]{}":
            self.pos = pos + 1
            return Keyword(chr(c))
        if c == 0x29:
            raise MalformedToken(f"stray ')' at {pos}")
        m = _REGULAR_RUN_RE.match(data, pos, end)
        run = m.group(0)
        self.pos = m.end()
        if _NUMBER_RE.match(run):
            if b"." in run:
                return float(run)
            return int(run)
        if run[0] in b"0123456789+-.":
            raise MalformedToken(f"bad number {run[:32]!r} at {pos}")
        return Keyword(run.decode("latin-1"))

    def _read_literal(self) -> PdfString:
        data, end = self.data, self.end
        start = self.pos
        i = start + 1
        depth = 1
        out = bytearray()
        while True:
            m = _LITERAL_SPECIAL_RE.search(data, i, end)
            if m is None:
                raise MalformedToken(f"unterminated string at {start}")
            j = m.start()
            out += data[i:j]
            c = data[j]
            if c == 0x28:
                depth += 1
                out.append(c)
                i = j + 1
            elif c == 0x29:
                depth -= 1
                if depth == 0:
                    self.pos = j + 1
                    return PdfString(bytes(out))
                out.append(c)
                i = j + 1
            elif c == 0x0D:
                # bare EOL inside a string reads as LF
                out.append(0x0A)
                i = j + 1
                if i < end and data[i] == 0x0A:
                    i += 1
            else:
                if j + 1 >= end:
                    raise MalformedToken(f"unterminated string at {start}")
                e = data[j + 1]
                i = j + 2
                if e in _ESCAPES:
                    out.append(_ESCAPES[e])
                elif 0x30 <= e <= 0x37:
                    value = e - 0x30
                    for _ in range(2):
                        if i < end and 0x30 <= data[i] <= 0x37:
                            value = value * 8 + data[i] - 0x30
                            i += 1
                        else:
                            break
                    out.append(value & 0xFF)
                elif e == 0x0D:
                    if i < end and data[i] == 0x0A:
                        i += 1
                elif e == 0x0A:
                    pass
                else:
                    out.append(e)

    def read_object(self, depth: int = 0):
        """Read one value; bare keywords other than true/false/null are
        returned as :class:`Keyword` for the caller to interpret."""
        if depth > MAX_DEPTH:
            raise MalformedToken("nesting too deep")
        tok = self.next_token()
        if tok is None:
            raise MalformedToken("unexpected end of data")
        if type(tok) is int:
            if tok >= 0:
                m = _REF_TAIL_RE.match(self.data, self.pos, self.end)
                if m is not None:
                    self.pos = m.end()
                    gen = int(m.group(1))
                    if gen > 65535:
                        raise MalformedToken(f"generation {gen} out of range")
                    return Reference(tok, gen)
            return tok
        if type(tok) is Keyword:
            if tok == "[":
                items = []
                while True:
                    value = self.read_object(depth + 1)
                    if type(value) is Keyword:
                        if value == "]":
                            return items
                        raise MalformedToken(f"unexpected {value!r} in array")
                    items.append(value)
            if tok == "<<":
                result = {}
                while True:
                    key = self.next_token()
                    if key is None:
                        raise MalformedToken("unterminated dictionary")
                    if type(key) is Keyword and key == ">>":
                        return result
                    if type(key) is not Name:
                        raise MalformedToken(f"dictionary key {key!r} is not a name")
                    value = self.read_object(depth + 1)
                    if type(value) is Keyword:
                        raise MalformedToken(f"unexpected {value!r} in dictionary")
                    result[key] = value
            if tok == "true":
                return True
            if tok == "false":
                return False
            if tok == "null":
                return None
        return tok


def _decode_name(raw: bytes) -> str:
    if b"#" in raw:
        out = bytearray()
        i = 0
        while i < len(raw):
            if raw[i] == 0x23 and _is_hex2(raw[i + 1 : i + 3]):
                out.append(int(raw[i + 1 : i + 3], 16))
                i += 3
            else:
                out.append(raw[i])
                i += 1
        raw = bytes(out)
    return raw.decode("latin-1")


def _is_hex2(b: bytes) -> bool:
    return len(b) == 2 and all(c in b"0123456789abcdefABCDEF" for c in b)


def lex_value(data: bytes, offset: int = 0):
    """Parse the value starting at ``offset``; return ``(value, span)``."""
    if not 0 <= offset <= len(data):
        raise MalformedToken(f"offset {offset} outside file")
    lexer = Lexer(data, offset)
    lexer.skip_ws()
    start = lexer.pos
    value = lexer.read_object()
    if type(value) is Keyword:
        raise MalformedToken(f"expected a value, found {value!r} at {start}")
    return value, ByteSpan(start, lexer.pos - start)


def parse_indirect_object(
    data: bytes,
    offset: int,
    resolver: Optional[Resolver] = None,
    warnings: Optional[list] = None,
    lenient_length: bool = False,
):
    """Parse ``N G obj ... endobj`` at ``offset``.

    Returns ``(ObjectId, value, ByteSpan)`` where the span runs from the
    object number through ``endobj``. A stream whose ``/Length`` is an
    indirect reference needs ``resolver`` unless ``lenient_length`` is set,
    in which case the payload is delimited by scanning for ``endstream``.
    """
    if not 0 <= offset <= len(data):
        raise IdMismatch(f"offset {offset} outside file")
    lexer = Lexer(data, offset)
    lexer.skip_ws()
    start = lexer.pos
    m = _OBJ_HEADER_RE.match(data, start)
    if m is None:
        raise IdMismatch(f"no 'N G obj' header at {start}")
    oid = ObjectId(int(m.group(1)), int(m.group(2)))
    if oid.generation > 65535:
        raise IdMismatch(f"generation {oid.generation} out of range at {start}")
    lexer.pos = m.end()
    value = lexer.read_object()
    if type(value) is Keyword:
        if value != "endobj":
            raise MalformedToken(f"unexpected {value!r} in object {oid}")
        # empty body: "N G obj endobj"
        return oid, None, ByteSpan(start, lexer.pos - start)
    lexer.skip_ws()
    if type(value) is dict:
        sm = _STREAM_KW_RE.match(data, lexer.pos)
        if sm is not None and (sm.end() - lexer.pos > 6 or _at_delimiter(data, sm.end())):
            value, pos = _read_stream_body(
                data, oid, value, sm.end(), resolver, warnings, lenient_length
            )
            lexer.pos = pos
            lexer.skip_ws()
    em = _ENDOBJ_RE.match(data, lexer.pos)
    if em is None:
        raise MalformedToken(f"missing endobj for object {oid}")
    return oid, value, ByteSpan(start, em.end() - start)


def _at_delimiter(data: bytes, pos: int) -> bool:
    return pos >= len(data) or data[pos] in WHITESPACE or data[pos] in DELIMITERS


def _read_stream_body(data, oid, sdict, body_start, resolver, warnings, lenient):
    length = sdict.get("Length")
    if isinstance(length, Reference):
        if resolver is not None:
            try:
                length = resolver(length)
            except PdfError:
                length = None
        elif lenient:
            length = None
        else:
            raise StreamLengthUnresolvable(
                f"object {oid}: /Length {length.number} {length.generation} R needs a resolver"
            )
    if type(length) is int and 0 <= length <= len(data) - body_start:
        em = _ENDSTREAM_AT_RE.match(data, body_start + length)
        if em is not None:
            span = ByteSpan(body_start, length)
            return Stream(sdict, span, data[span.start : span.end]), em.end()
    idx = data.find(b"endstream", body_start)
    if idx < 0:
        raise MalformedToken(f"unterminated stream in object {oid}")
    body_end = idx
    if body_end > body_start and data[body_end - 1] == 0x0A:
        body_end -= 1
        if body_end > body_start and data[body_end - 1] == 0x0D:
            body_end -= 1
    elif body_end > body_start and data[body_end - 1] == 0x0D:
        body_end -= 1
    if warnings is not None:
        warnings.append(
            f"object {oid}: /Length {length!r} disagrees with endstream position; "
            f"using scanned length {body_end - body_start}"
        )
    span = ByteSpan(body_start, body_end - body_start)
    return Stream(sdict, span, data[body_start:body_end]), idx + len(b"endstream")


def scan_all_objects(data: bytes, warnings: Optional[list] = None):
    """Carve every syntactic ``N G obj ... endobj`` in file order.

    Spans are non-overlapping; ids are not deduplicated. Candidates that
    fail to parse are skipped and noted in ``warnings``.
    """
    found = []
    pos = 0
    n = len(data)
    while pos < n:
        m = _CARVE_RE.search(data, pos)
        if m is None:
            break
        try:
            oid, _, span = parse_indirect_object(data, m.start(), lenient_length=True)
        except PdfError as exc:
            if warnings is not None:
                warnings.append(f"skipped object candidate at {m.start()}: {exc}")
            pos = m.start() + 1
            continue
        found.append((oid, span))
        pos = span.end
    return found


# -- serialization (writer side, used by fixture and stego) -----------------

_NAME_SAFE = frozenset(
    b for b in range(0x21, 0x7F) if b not in DELIMITERS and b != 0x23
)


def serialize(value) -> bytes:
    """Serialize a value back to PDF syntax."""
    if value is None:
        return b"null"
    if value is True:
        return b"true"
    if value is False:
        return b"false"
    if isinstance(value, Reference):
        return b"%d %d R" % (value.number, value.generation)
    if isinstance(value, int):
        return b"%d" % value
    if isinstance(value, float):
        text = f"{value:.6f}".rstrip("0").rstrip(".")
        return (text or "0").encode("ascii")
    if isinstance(value, Name):
        raw = str.__str__(value).encode("latin-1")
        return b"/" + b"".join(
            bytes([c]) if c in _NAME_SAFE else b"#%02X" % c for c in raw
        )
    if isinstance(value, Keyword):
        return str.__str__(value).encode("latin-1")
    if isinstance(value, PdfString):
        if value.hex:
            return b"<" + bytes.hex(value).upper().encode("ascii") + b">"
        return _literal(value)
    if isinstance(value, (bytes, bytearray)):
        return _literal(bytes(value))
    if isinstance(value, str):
        from .encodings import encode_text_string

        return serialize(encode_text_string(value))
    if isinstance(value, (list, tuple)):
        return b"[" + b" ".join(serialize(v) for v in value) + b"]"
    if isinstance(value, dict):
        parts = [b"<<"]
        for k, v in value.items():
            parts.append(serialize(Name(k)) + b" " + serialize(v))
        parts.append(b">>")
        return b" ".join(parts)
    if isinstance(value, Stream):
        return (
            serialize(value.dict) + b"\nstream\n" + value.encoded + b"\nendstream"
        )
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _literal(raw: bytes) -> bytes:
    escaped = (
        raw.replace(b"\\", b"\\\\")
        .replace(b"(", b"\\(")
        .replace(b")", b"\\)")
        .replace(b"\r", b"\\r")
    )
    return b"(" + escaped + b")"


def make_stream(sdict: dict, encoded: bytes) -> Stream:
    """Build a stream value whose ``/Length`` matches ``encoded``."""
    d = {Name(k): v for k, v in sdict.items()}
    d[Name("Length")] = len(encoded)
    return Stream(d, ByteSpan(0, len(encoded)), bytes(encoded))


def serialize_indirect(oid, value) -> bytes:
    return b"%d %d obj\n%s\nendobj\n" % (oid[0], oid[1], serialize(value))
