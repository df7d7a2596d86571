"""Page tree walk: /Root -> /Pages -> /Kids -> /Page -> /Contents."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Union

from .cos import ObjectId, Reference, Stream
from .errors import BrokenPageTree, PageContentError, PdfError
from .filters import decode_stream
from .revisions import Document

MAX_DEPTH = 64
INHERITABLE = ("Resources", "MediaBox", "CropBox", "Rotate")


@dataclass
class PageRef:
    revision: int
    page_index: int
    page_object: Optional[ObjectId]
    contents: List[ObjectId]
    resources: Union[ObjectId, dict, None]
    dict: dict = field(default_factory=dict, repr=False, compare=False)


def catalog(doc: Document, rev: int) -> dict:
    root = doc.revisions[rev].trailer.dict.get("Root")
    value = doc.deref(rev, root)
    if not isinstance(value, dict):
        raise BrokenPageTree(f"revision {rev}: /Root {root!r} does not resolve to a dictionary")
    return value


def _walk(doc: Document, rev: int, warnings: Optional[list]):
    cat = catalog(doc, rev)
    if "Pages" not in cat:
        raise BrokenPageTree(f"revision {rev}: catalog has no /Pages")
    leaves = []
    visited = set()

    def visit(node, depth, inherited):
        if depth > MAX_DEPTH:
            raise BrokenPageTree(f"revision {rev}: page tree deeper than {MAX_DEPTH}")
        oid = None
        if isinstance(node, Reference):
            oid = node.id
            if oid.number in visited:
                raise BrokenPageTree(f"revision {rev}: page tree cycle at object {oid.number}")
            visited.add(oid.number)
            try:
                node = doc.resolve(rev, oid)[0]
            except PdfError as exc:
                raise BrokenPageTree(f"revision {rev}: page tree node {oid.number}: {exc}") from exc
        if not isinstance(node, dict):
            raise BrokenPageTree(f"revision {rev}: page tree node {oid} is not a dictionary")
        kind = node.get("Type")
        if kind == "Pages" or ("Kids" in node and kind != "Page"):
            inh = dict(inherited)
            for key in INHERITABLE:
                if key in node:
                    inh[key] = node[key]
            kids = doc.deref(rev, node.get("Kids"))
            if not isinstance(kids, list):
                raise BrokenPageTree(f"revision {rev}: /Kids of node {oid} is not an array")
            before = len(leaves)
            for kid in kids:
                visit(kid, depth + 1, inh)
            count = doc.deref(rev, node.get("Count"))
            if warnings is not None and count != len(leaves) - before:
                warnings.append(
                    f"revision {rev}: node {oid} /Count {count!r} but {len(leaves) - before} leaves"
                )
        else:
            leaves.append((oid, node, inherited))

    visit(cat["Pages"], 0, {})
    return leaves


def page_count(doc: Document, rev: int, warnings: Optional[list] = None) -> int:
    return len(_walk(doc, rev, warnings))


def pages(doc: Document, rev: int, warnings: Optional[list] = None) -> List[PageRef]:
    """PageRefs for revision ``rev`` in document order."""
    result = []
    for i, (oid, node, inherited) in enumerate(_walk(doc, rev, warnings)):
        contents = node.get("Contents")
        if isinstance(contents, Reference):
            target = doc.deref(rev, contents)
            if isinstance(target, list):
                contents = target
        if isinstance(contents, Reference):
            content_ids = [contents.id]
        elif isinstance(contents, list):
            content_ids = [c.id for c in contents if isinstance(c, Reference)]
        else:
            content_ids = []
        resources = node.get("Resources", inherited.get("Resources"))
        if isinstance(resources, Reference):
            resources = resources.id
        elif not isinstance(resources, dict):
            resources = None
        result.append(PageRef(rev, i, oid, content_ids, resources, node))
    return result


def page_resources(doc: Document, rev: int, page: PageRef) -> dict:
    res = page.resources
    if isinstance(res, ObjectId):
        res = doc.deref(rev, Reference(*res))
    return res if isinstance(res, dict) else {}


def content_program(
    doc: Document, rev: int, page: PageRef, warnings: Optional[list] = None
) -> bytes:
    """Decoded content streams of ``page``, joined with single spaces."""
    parts = []
    for cid in page.contents:
        try:
            value = doc.resolve(rev, cid)[0]
            if not isinstance(value, Stream):
                raise BrokenPageTree(f"contents object {cid.number} is not a stream")
            data, _ = decode_stream(value, doc.resolver(rev), warnings=warnings)
        except PdfError as exc:
            raise PageContentError(page.page_index, exc) from exc
        parts.append(data)
    return b" ".join(parts)
