"""Single-byte font encodings and PDF text-string decoding."""

from __future__ import annotations

import re

from .cos import PdfString

_PDFDOC_DIFF = {
    0x18: "˘", 0x19: "ˇ", 0x1A: "ˆ", 0x1B: "˙",
    0x1C: "˝", 0x1D: "˛", 0x1E: "˚", 0x1F: "˜",
    0x80: "•", 0x81: "†", 0x82: "‡", 0x83: "…",
    0x84: "—", 0x85: "–", 0x86: "ƒ", 0x87: "⁄",
    0x88: "‹", 0x89: "›", 0x8A: "−", 0x8B: "‰",
    0x8C: "„", 0x8D: "“", 0x8E: "”", 0x8F: "‘",
    0x90: "’", 0x91: "‚", 0x92: "™", 0x93: "ﬁ",
    0x94: "ﬂ", 0x95: "Ł", 0x96: "Œ", 0x97: "Š",
    0x98: "Ÿ", 0x99: "Ž", 0x9A: "ı", 0x9B: "ł",
    0x9C: "œ", 0x9D: "š", 0x9E: "ž", 0x9F: "�",
    0xA0: "€", 0xAD: "�",
}

PDFDOC = tuple(_PDFDOC_DIFF.get(i, chr(i)) for i in range(256))
_PDFDOC_REVERSE = {ch: i for i, ch in enumerate(PDFDOC) if ch != "�"}

WINANSI = tuple(bytes([i]).decode("cp1252", errors="replace") for i in range(256))
MACROMAN = tuple(bytes([i]).decode("mac_roman") for i in range(256))

_STANDARD_HIGH = {
    0x27: "’", 0x60: "‘",
    0xA1: "¡", 0xA2: "¢", 0xA3: "£", 0xA4: "⁄",
    0xA5: "¥", 0xA6: "ƒ", 0xA7: "§", 0xA8: "¤",
    0xA9: "'", 0xAA: "“", 0xAB: "«", 0xAC: "‹",
    0xAD: "›", 0xAE: "ﬁ", 0xAF: "ﬂ", 0xB1: "–",
    0xB2: "†", 0xB3: "‡", 0xB4: "·", 0xB6: "¶",
    0xB7: "•", 0xB8: "‚", 0xB9: "„", 0xBA: "”",
    0xBB: "»", 0xBC: "…", 0xBD: "‰", 0xBF: "¿",
    0xC1: "`", 0xC2: "´", 0xC3: "ˆ", 0xC4: "˜",
    0xC5: "¯", 0xC6: "˘", 0xC7: "˙", 0xC8: "¨",
    0xCA: "˚", 0xCB: "¸", 0xCD: "˝", 0xCE: "˛",
    0xCF: "ˇ", 0xD0: "—", 0xE1: "Æ", 0xE3: "ª",
    0xE8: "Ł", 0xE9: "Ø", 0xEA: "Œ", 0xEB: "º",
    0xF1: "æ", 0xF5: "ı", 0xF8: "ł", 0xF9: "ø",
    0xFA: "œ", 0xFB: "ß",
}
STANDARD = tuple(
    _STANDARD_HIGH.get(i, chr(i) if 0x20 <= i < 0x7F else "�")
    for i in range(256)
)

BASE_ENCODINGS = {
    "Standard": STANDARD,
    "WinAnsi": WINANSI,
    "MacRoman": MACROMAN,
}

# enough of the Adobe glyph list for /Differences arrays seen in practice
_GLYPHS = {
    "space": " ", "exclam": "!", "quotedbl": '"', "numbersign": "#",
    "dollar": "$", "percent": "%", "ampersand": "&", "quotesingle": "'",
    "quoteright": "’", "quoteleft": "‘", "parenleft": "(",
    "parenright": ")", "asterisk": "*", "plus": "+", "comma": ",",
    "hyphen": "-", "minus": "−", "period": ".", "slash": "/",
    "zero": "0", "one": "1", "two": "2", "three": "3", "four": "4",
    "five": "5", "six": "6", "seven": "7", "eight": "8", "nine": "9",
    "colon": ":", "semicolon": ";", "less": "<", "equal": "=",
    "greater": ">", "question": "?", "at": "@", "bracketleft": "[",
    "backslash": "\\", "bracketright": "]", "asciicircum": "^",
    "underscore": "_", "grave": "`", "braceleft": "{", "bar": "|",
    "braceright": "}", "asciitilde": "~", "bullet": "•",
    "endash": "–", "emdash": "—", "ellipsis": "…",
    "quotedblleft": "“", "quotedblright": "”",
    "fi": "ﬁ", "fl": "ﬂ", "Euro": "€", "trademark": "™",
    "copyright": "©", "registered": "®", "degree": "°",
}
_UNI_RE = re.compile(r"uni((?:[0-9A-F]{4})+)$")
_U_RE = re.compile(r"u([0-9A-F]{4,6})$")


def glyph_to_unicode(name: str) -> str:
    if name in _GLYPHS:
        return _GLYPHS[name]
    if len(name) == 1 and name.isalpha():
        return name
    m = _UNI_RE.match(name)
    if m:
        hexes = m.group(1)
        return "".join(chr(int(hexes[i : i + 4], 16)) for i in range(0, len(hexes), 4))
    m = _U_RE.match(name)
    if m:
        return chr(int(m.group(1), 16))
    return "�"


def decode_utf16be(raw: bytes) -> str:
    return raw.decode("utf-16-be", errors="replace")


def decode_text_string(raw) -> str:
    """Decode a PDF text string (UTF-16BE with BOM, UTF-8 with BOM, or
    PDFDocEncoding)."""
    raw = bytes(raw)
    if raw[:2] == b"\xfe\xff":
        return decode_utf16be(raw[2:])
    if raw[:3] == b"\xef\xbb\xbf":
        return raw[3:].decode("utf-8", errors="replace")
    return "".join(PDFDOC[b] for b in raw)


def encode_text_string(text: str) -> PdfString:
    try:
        return PdfString(bytes(_PDFDOC_REVERSE[ch] for ch in text))
    except KeyError:
        return PdfString(b"\xfe\xff" + text.encode("utf-16-be"), hex=True)
