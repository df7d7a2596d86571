"""Rebuild an earlier revision as a standalone PDF.

Two methods:

* truncation cuts the file at the end of the chosen revision's block.
  The result is byte-exact but needs an append-only file.
* offset rewrite keeps every byte and redirects the final xref entries
  to the chosen revision's objects. The output has the same size as the
  input, and the later blocks stay in place but are no longer referenced.
"""

from __future__ import annotations

import re
from enum import Enum
from typing import List, Optional

from .cos import Reference
from .errors import EntryNotRewritable, NotAppendOnly
from .revisions import Document, XrefEntry, is_strict_entry

_WS = rb"[\x00\t\n\x0c\r ]"


class RecoveryMethod(str, Enum):
    TRUNCATE = "truncate"
    OFFSET_REWRITE = "rewrite"


def recover_by_truncation(doc: Document, rev: int) -> bytes:
    doc._check_rev(rev)
    if not doc.append_only:
        raise NotAppendOnly(
            "revision blocks do not tile the file (full save or in-place edit); truncation would corrupt it"
        )
    return doc.bytes[: doc.revisions[rev].cumulative_end]


def _same_target(a: Optional[XrefEntry], b: Optional[XrefEntry]) -> bool:
    if a is None or b is None:
        return a is b
    return (a.in_use, a.offset, a.generation, a.container) == (
        b.in_use, b.offset, b.generation, b.container
    )


def recover_by_offset_rewrite(doc: Document, rev: int, warnings: Optional[List[str]] = None) -> bytes:
    """Redirect the final revision's xref entries to revision ``rev``.

    Each differing entry is rewritten in its 20-byte line; objects unknown
    to ``rev`` become free entries. ``/Root`` and ``/Info`` in the final
    trailer are rewritten in place when the new reference fits.
    """
    doc._check_rev(rev)
    last = doc.last
    out = bytearray(doc.bytes)
    if rev == last:
        return bytes(out)
    if doc.revisions[last].xref.kind != "table":
        raise EntryNotRewritable(
            "final revision uses a cross-reference stream; use truncation instead"
        )
    final_view = doc.view(last)
    target_view = doc.view(rev)
    for number in sorted(set(final_view) | set(target_view)):
        if number == 0:
            continue
        current = final_view.get(number)
        wanted = target_view.get(number)
        if _same_target(current, wanted):
            continue
        if current is None:
            continue  # views only grow; nothing to redirect
        if current.container is not None or not is_strict_entry(doc.bytes, current):
            raise EntryNotRewritable(
                f"object {number}: final entry is not a 20-byte table line"
            )
        if wanted is None or (wanted.in_use is False and current.in_use is False):
            line = b"%010d %05d f" % (0, 65535)
        elif wanted.container is not None:
            raise EntryNotRewritable(
                f"object {number}: revision {rev} stores it in an object stream"
            )
        else:
            line = b"%010d %05d %s" % (wanted.offset, wanted.generation, b"n" if wanted.in_use else b"f")
        out[current.position : current.position + 18] = line

    final_trailer = doc.revisions[last].trailer
    old = doc.revisions[rev].trailer.dict
    for key in ("Root", "Info"):
        want = old.get(key)
        have = final_trailer.dict.get(key)
        if want == have or want is None:
            continue
        _rewrite_trailer_ref(out, final_trailer.span, key, want, warnings)
    return bytes(out)


def _rewrite_trailer_ref(out: bytearray, span, key, ref, warnings):
    pattern = re.compile(rb"/" + key.encode() + _WS + rb"*(\d+" + _WS + rb"+\d+" + _WS + rb"+R)")
    m = pattern.search(out, span.start, span.end)
    text = b"%d %d R" % (ref.number, ref.generation) if isinstance(ref, Reference) else None
    if m is None or text is None or len(text) > len(m.group(1)):
        if warnings is not None:
            warnings.append(f"trailer /{key} could not be rewritten in place")
        return
    out[m.start(1) : m.end(1)] = text.ljust(len(m.group(1)), b" ")
