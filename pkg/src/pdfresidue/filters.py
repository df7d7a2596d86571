"""Stream filter chains.

Decodable filters are applied in order; image codecs (DCT, JPX, CCITT)
are terminal and their still-encoded bytes are handed back untouched so
image payloads can be passed through byte-for-byte.
"""

from __future__ import annotations

import base64
import binascii
import zlib
from dataclasses import dataclass, field
from typing import Optional

from .cos import Reference, Stream
from .errors import CorruptStream, PdfError, UnknownFilter

DEFAULT_MAX_OUTPUT = 256 * 1024 * 1024

DECODABLE = frozenset(
    {"FlateDecode", "ASCIIHexDecode", "ASCII85Decode", "RunLengthDecode", "LZWDecode"}
)
IMAGE_CODECS = frozenset({"DCTDecode", "JPXDecode", "CCITTFaxDecode"})

ABBREVIATIONS = {
    "Fl": "FlateDecode",
    "AHx": "ASCIIHexDecode",
    "A85": "ASCII85Decode",
    "RL": "RunLengthDecode",
    "LZW": "LZWDecode",
    "DCT": "DCTDecode",
    "CCF": "CCITTFaxDecode",
}


@dataclass(frozen=True)
class FilterSpec:
    name: str
    params: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def decodable(self) -> bool:
        return self.name in DECODABLE

    @property
    def is_image_codec(self) -> bool:
        return self.name in IMAGE_CODECS


def filter_chain(sdict: dict, resolver=None):
    """Return the list of FilterSpecs declared by a stream dictionary."""

    def res(v):
        if isinstance(v, Reference) and resolver is not None:
            try:
                return resolver(v)
            except PdfError:
                return None
        return v

    names = res(sdict.get("Filter", sdict.get("F")))
    parms = res(sdict.get("DecodeParms", sdict.get("DP")))
    if names is None:
        return []
    if not isinstance(names, list):
        names = [names]
        parms = [parms]
    elif not isinstance(parms, list):
        parms = [parms] * len(names) if parms is not None else []
    chain = []
    for i, n in enumerate(names):
        n = res(n)
        p = res(parms[i]) if i < len(parms) else None
        if not isinstance(p, dict):
            p = {}
        else:
            p = {k: res(v) for k, v in p.items()}
        name = str(n) if isinstance(n, str) else repr(n)
        chain.append(FilterSpec(ABBREVIATIONS.get(name, name), p))
    return chain


def decode_stream(
    stream: Stream,
    resolver=None,
    max_output: int = DEFAULT_MAX_OUTPUT,
    warnings: Optional[list] = None,
):
    """Decode ``stream`` through its filter chain.

    Returns ``(data, terminal)``. ``terminal`` is None when every filter
    was applied, the image codec that stopped decoding, or the unknown
    filter that could not be applied (``data`` is then its input, and a
    note is appended to ``warnings``).
    """
    data = stream.encoded
    for spec in filter_chain(stream.dict, resolver):
        if spec.is_image_codec:
            return data, spec
        if not spec.decodable:
            if warnings is not None:
                warnings.append(f"unknown filter /{spec.name}; returning raw bytes")
            return data, spec
        data = apply_filter(spec, data, max_output)
    return data, None


def apply_filter(spec: FilterSpec, data: bytes, max_output: int = DEFAULT_MAX_OUTPUT) -> bytes:
    name = spec.name
    if name == "FlateDecode":
        out = _inflate(data, max_output)
    elif name == "ASCIIHexDecode":
        out = _asciihex_decode(data)
    elif name == "ASCII85Decode":
        out = _ascii85_decode(data)
    elif name == "RunLengthDecode":
        out = _runlength_decode(data, max_output)
    elif name == "LZWDecode":
        early = spec.params.get("EarlyChange", 1)
        out = _lzw_decode(data, 1 if early is None else early, max_output)
    else:
        raise UnknownFilter(f"/{name} is not decodable")
    if len(out) > max_output:
        raise CorruptStream("expansion cap")
    if name in ("FlateDecode", "LZWDecode"):
        out = _unpredict(out, spec.params)
    return out


def _inflate(data: bytes, cap: int) -> bytes:
    d = zlib.decompressobj()
    try:
        out = d.decompress(data, cap + 1)
    except zlib.error as exc:
        raise CorruptStream(f"inflate failed: {exc}") from None
    if len(out) > cap or d.unconsumed_tail:
        raise CorruptStream("expansion cap")
    return out


def _asciihex_decode(data: bytes) -> bytes:
    end = data.find(b">")
    if end >= 0:
        data = data[:end]
    digits = bytes(c for c in data if c not in b"\x00\t\n\x0c\r ")
    if len(digits) % 2:
        digits += b"0"
    try:
        return binascii.unhexlify(digits)
    except (binascii.Error, ValueError) as exc:
        raise CorruptStream(f"bad ASCIIHex data: {exc}") from None


def _ascii85_decode(data: bytes) -> bytes:
    data = data.strip(b"\x00\t\n\x0c\r ")
    if data.startswith(b"<~"):
        data = data[2:]
    end = data.find(b"~>")
    if end >= 0:
        data = data[:end]
    data = bytes(c for c in data if c not in b"\x00\t\n\x0c\r ")
    if len(data) % 5 == 1:
        raise CorruptStream("bad ASCII85 group")
    try:
        return base64.a85decode(data)
    except ValueError as exc:
        raise CorruptStream(f"bad ASCII85 data: {exc}") from None


def _runlength_decode(data: bytes, cap: int) -> bytes:
    out = bytearray()
    i = 0
    n = len(data)
    while i < n:
        length = data[i]
        i += 1
        if length == 128:
            break
        if length < 128:
            chunk = data[i : i + length + 1]
            if len(chunk) < length + 1:
                raise CorruptStream("truncated run-length literal")
            out += chunk
            i += length + 1
        else:
            if i >= n:
                raise CorruptStream("truncated run-length repeat")
            out += bytes([data[i]]) * (257 - length)
            i += 1
        if len(out) > cap:
            raise CorruptStream("expansion cap")
    return bytes(out)


def _lzw_decode(data: bytes, early: int, cap: int) -> bytes:
    out = bytearray()
    table = [bytes([i]) for i in range(256)] + [b"", b""]
    code_len = 9
    prev = None
    bitbuf = 0
    bitcount = 0
    for byte in data:
        bitbuf = (bitbuf << 8) | byte
        bitcount += 8
        while bitcount >= code_len:
            bitcount -= code_len
            code = (bitbuf >> bitcount) & ((1 << code_len) - 1)
            bitbuf &= (1 << bitcount) - 1
            if code == 256:
                table = table[:258]
                code_len = 9
                prev = None
                continue
            if code == 257:
                return bytes(out)
            if prev is None:
                if code >= 256:
                    raise CorruptStream("LZW stream starts with a table code")
                entry = table[code]
            elif code < len(table):
                entry = table[code]
                if len(table) < 4096:
                    table.append(prev + entry[:1])
            elif code == len(table):
                entry = prev + prev[:1]
                if len(table) < 4096:
                    table.append(entry)
            else:
                raise CorruptStream(f"LZW code {code} out of range")
            out += entry
            if len(out) > cap:
                raise CorruptStream("expansion cap")
            prev = entry
            size = len(table) + early
            if size >= 2048:
                code_len = 12
            elif size >= 1024:
                code_len = 11
            elif size >= 512:
                code_len = 10
            else:
                code_len = 9
    return bytes(out)


def _int_param(params, key, default):
    v = params.get(key, default)
    return v if type(v) is int and v > 0 else default


def _unpredict(data: bytes, params: dict) -> bytes:
    predictor = params.get("Predictor", 1)
    if type(predictor) is not int or predictor <= 1:
        return data
    colors = _int_param(params, "Colors", 1)
    bpc = _int_param(params, "BitsPerComponent", 8)
    columns = _int_param(params, "Columns", 1)
    bits_per_pixel = colors * bpc
    if bits_per_pixel * columns > 8 * DEFAULT_MAX_OUTPUT:
        raise CorruptStream("predictor row too wide")
    rowlen = (bits_per_pixel * columns + 7) // 8
    bpp = max(1, bits_per_pixel // 8)
    if predictor == 2:
        if bpc != 8:
            raise CorruptStream(f"TIFF predictor with {bpc} bits per component")
        out = bytearray(data)
        for r in range(0, len(out) - len(out) % rowlen, rowlen):
            for i in range(r + bpp, r + rowlen):
                out[i] = (out[i] + out[i - bpp]) & 0xFF
        return bytes(out)
    if predictor < 10:
        raise CorruptStream(f"unsupported predictor {predictor}")
    out = bytearray()
    prior = bytearray(rowlen)
    stride = rowlen + 1
    for r in range(0, len(data), stride):
        ftype = data[r]
        row = bytearray(data[r + 1 : r + stride])
        if len(row) < rowlen:
            row += bytes(rowlen - len(row))
        if ftype == 0:
            pass
        elif ftype == 1:
            for i in range(bpp, rowlen):
                row[i] = (row[i] + row[i - bpp]) & 0xFF
        elif ftype == 2:
            row = bytearray((a + b) & 0xFF for a, b in zip(row, prior))
        elif ftype == 3:
            for i in range(rowlen):
                left = row[i - bpp] if i >= bpp else 0
                row[i] = (row[i] + ((left + prior[i]) >> 1)) & 0xFF
        elif ftype == 4:
            for i in range(rowlen):
                a = row[i - bpp] if i >= bpp else 0
                b = prior[i]
                c = prior[i - bpp] if i >= bpp else 0
                p = a + b - c
                pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                if pa <= pb and pa <= pc:
                    pred = a
                elif pb <= pc:
                    pred = b
                else:
                    pred = c
                row[i] = (row[i] + pred) & 0xFF
        else:
            raise CorruptStream(f"bad PNG filter type {ftype}")
        out += row
        prior = row
    return bytes(out)

