import random

import pytest
from hypothesis import given, settings, strategies as st

from pdfresidue.cos import ObjectId
from pdfresidue.errors import EntryNotRewritable, NotAppendOnly, RevisionOutOfRange
from pdfresidue.extract import extract_text
from pdfresidue.fixture import EditScript, PageSpec, WriterOptions, incremental_save, table1_fixture, write_pdf
from pdfresidue.pagetree import page_count
from pdfresidue.recover import recover_by_offset_rewrite, recover_by_truncation
from pdfresidue.revisions import build_revision_chain

from conftest import ORIGINAL_STRINGS, random_edit, random_options, random_page


def texts(data, rev=None):
    doc = build_revision_chain(data)
    return [p.joined for p in extract_text(doc, doc.last if rev is None else rev)]


def _pad_to(buf: bytearray, target: int):
    while len(buf) < target:
        room = target - len(buf)
        if room == 1:
            buf += b"\n"
        else:
            chunk = min(room, 200)
            buf += b"%" + b"." * (chunk - 2) + b"\n"


def _obj(buf, number, body):
    offset = len(buf)
    buf += b"%d 0 obj\n%s\nendobj\n" % (number, body)
    return offset


def _content(text):
    program = b"BT (%s) Tj ET" % text
    return b"<< /Length %d >>\nstream\n%s\nendstream" % (len(program), program)


def paper_layout():
    """Two-revision file whose page contents sit at the offsets of the
    paper's experiment: 108 at 1484 then 119465, 1 at 53665 then 114777."""
    buf = bytearray(b"%PDF-1.4\n")
    off = {}
    off[2] = _obj(buf, 2, b"<< /Type /Catalog /Pages 3 0 R >>")
    off[3] = _obj(buf, 3, b"<< /Type /Pages /Kids [4 0 R 5 0 R 7 0 R] /Count 3 >>")
    off[4] = _obj(buf, 4, b"<< /Type /Page /Parent 3 0 R /Contents 108 0 R >>")
    off[5] = _obj(buf, 5, b"<< /Type /Page /Parent 3 0 R /Contents 1 0 R >>")
    off[6] = _obj(buf, 6, _content(b"third page"))
    off[7] = _obj(buf, 7, b"<< /Type /Page /Parent 3 0 R /Contents 6 0 R >>")
    _pad_to(buf, 1484)
    off[108] = _obj(buf, 108, _content(b"first page, original"))
    _pad_to(buf, 53665)
    off[1] = _obj(buf, 1, _content(b"second page, original"))
    xref0 = len(buf)
    buf += b"xref\n0 8\n0000000000 65535 f\r\n"
    for n in range(1, 8):
        buf += b"%010d 00000 n\r\n" % off[n]
    buf += b"108 1\n%010d 00000 n\r\n" % off[108]
    buf += b"trailer\n<< /Size 109 /Root 2 0 R >>\nstartxref\n%d\n%%%%EOF\n" % xref0
    original = bytes(buf)

    _pad_to(buf, 114777)
    new1 = _obj(buf, 1, _content(b"second page, edited"))
    _pad_to(buf, 119465)
    new108 = _obj(buf, 108, _content(b"first page, edited"))
    xref1 = len(buf)
    buf += b"xref\n1 1\n%010d 00000 n\r\n108 1\n%010d 00000 n\r\n" % (new1, new108)
    buf += b"trailer\n<< /Size 109 /Root 2 0 R /Prev %d >>\nstartxref\n%d\n%%%%EOF\n" % (xref0, xref1)
    return original, bytes(buf)


def test_paper_layout_offsets():
    original, modified = paper_layout()
    doc = build_revision_chain(modified)
    assert doc.anomalies == [] and len(doc.revisions) == 2
    last = doc.view(1)
    assert (last[108].offset, last[1].offset) == (119465, 114777)
    assert (doc.view(0)[108].offset, doc.view(0)[1].offset) == (1484, 53665)
    assert texts(modified) == ["first page, edited", "second page, edited", "third page"]


def test_paper_layout_offset_rewrite():
    original, modified = paper_layout()
    doc = build_revision_chain(modified)
    third_line = doc.revisions[0].xref.entries()[6].position
    out = recover_by_offset_rewrite(doc, 0)
    assert len(out) == len(modified)
    final = build_revision_chain(out).revisions[-1].xref.entries()
    # 114777 -> 53665 and 119465 -> 1484, nothing else touched
    assert final[1].offset == 53665 and final[108].offset == 1484
    changed = [i for i, (a, b) in enumerate(zip(out, modified)) if a != b]
    lines = {final[1].position, final[108].position}
    assert all(any(p <= i < p + 10 for p in lines) for i in changed)
    assert out[third_line : third_line + 20] == modified[third_line : third_line + 20]
    assert texts(out) == ["first page, original", "second page, original", "third page"]
    assert recover_by_truncation(doc, 0) == original


def test_truncation_table1_byte_identical(table1):
    original, modified, _ = table1
    doc = build_revision_chain(modified)
    assert recover_by_truncation(doc, 0) == original
    assert recover_by_truncation(doc, 1) == modified


def test_truncation_middle_revision_reparses():
    data, _ = write_pdf([PageSpec([("a", "latin")])])
    data, _ = incremental_save(data, EditScript({0: PageSpec([("b", "latin")])}))
    data, _ = incremental_save(data, EditScript({0: PageSpec([("c", "latin")])}))
    doc = build_revision_chain(data)
    mid = recover_by_truncation(doc, 1)
    assert len(build_revision_chain(mid).revisions) == 2
    assert texts(mid) == ["b"]


def test_truncation_refuses_non_append_only(table1):
    _, modified, _ = table1
    doc = build_revision_chain(modified + b"trailing residue that is not whitespace\n")
    assert not doc.append_only
    with pytest.raises(NotAppendOnly):
        recover_by_truncation(doc, 0)


def test_revision_out_of_range(table1):
    _, modified, _ = table1
    doc = build_revision_chain(modified)
    for fn in (recover_by_truncation, recover_by_offset_rewrite):
        with pytest.raises(RevisionOutOfRange):
            fn(doc, 5)


def test_rewrite_table1_size_and_content(table1):
    original, modified, _ = table1
    out = recover_by_offset_rewrite(build_revision_chain(modified), 0)
    assert len(out) == len(modified)
    assert texts(out) == texts(original, 0) == ORIGINAL_STRINGS


def test_rewrite_last_is_identity(table1):
    _, modified, _ = table1
    assert recover_by_offset_rewrite(build_revision_chain(modified), 1) == modified


def test_rewrite_idempotent(table1):
    _, modified, _ = table1
    once = recover_by_offset_rewrite(build_revision_chain(modified), 0)
    assert recover_by_offset_rewrite(build_revision_chain(once), 0) == once


def test_rewrite_frees_objects_added_later():
    data, _ = write_pdf([PageSpec([("only page", "latin")])])
    data, manifest = incremental_save(data, EditScript(pages_appended=[PageSpec([("new page", "latin")])]))
    doc = build_revision_chain(data)
    added = set(doc.revisions[1].xref.entries()) - set(doc.revisions[0].xref.entries())
    assert added
    out = recover_by_offset_rewrite(doc, 0)
    final = build_revision_chain(out).revisions[-1].xref.entries()
    for n in added:
        e = final[n]
        assert not e.in_use and (e.offset, e.generation) == (0, 65535)
        assert out[e.position : e.position + 18] == b"0000000000 65535 f"
    assert texts(out) == ["only page"]


def test_rewrite_refuses_xref_stream():
    _, modified, _ = table1_fixture(options=WriterOptions(xref_stream=True))
    doc = build_revision_chain(modified)
    with pytest.raises(EntryNotRewritable):
        recover_by_offset_rewrite(doc, 0)
    # truncation still works for such files
    assert len(build_revision_chain(recover_by_truncation(doc, 0)).revisions) == 1


def test_rewrite_refuses_short_entry_lines(table1):
    _, modified, _ = table1
    doc = build_revision_chain(modified)
    start = doc.revisions[1].xref_offset
    squeezed = modified[:start] + modified[start:].replace(b" n\r\n", b" n\n")
    doc = build_revision_chain(squeezed)
    assert doc.revisions[1].xref.entries()[6].in_use
    with pytest.raises(EntryNotRewritable):
        recover_by_offset_rewrite(doc, 0)


def test_rewrite_redirects_root_when_it_changed():
    original, modified = paper_layout()
    # second revision points /Root at a fresh catalog 9 0 R
    doc = build_revision_chain(modified)
    catalog = b"9 0 obj\n<< /Type /Catalog /Pages 3 0 R >>\nendobj\n"
    cut = doc.revisions[1].xref_offset
    body = modified[len(original) : cut] + catalog
    xref = len(original) + len(body)
    entries = doc.revisions[1].xref.entries()
    table = b"xref\n1 1\n%010d 00000 n\r\n9 1\n%010d 00000 n\r\n108 1\n%010d 00000 n\r\n" % (
        entries[1].offset, cut, entries[108].offset,
    )
    tail = b"trailer\n<< /Size 109 /Root 9 0 R /Prev %d >>\nstartxref\n%d\n%%%%EOF\n" % (
        doc.revisions[0].xref_offset, xref,
    )
    data = original + body + table + tail
    doc = build_revision_chain(data)
    assert doc.anomalies == []
    warnings = []
    out = recover_by_offset_rewrite(doc, 0, warnings)
    assert warnings == []
    assert build_revision_chain(out).revisions[-1].trailer.dict["Root"].id == ObjectId(2, 0)
    assert texts(out) == ["first page, original", "second page, original", "third page"]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_recovery_laws_random(seed):
    rng = random.Random(seed)
    options = random_options(rng)
    options.xref_stream = False
    data, _ = write_pdf([random_page(rng) for _ in range(rng.randint(1, 3))], options)
    versions = [data]
    for _ in range(rng.randint(1, 3)):
        doc = build_revision_chain(data)
        data, _ = incremental_save(data, random_edit(rng, page_count(doc, doc.last)), options)
        versions.append(data)
    doc = build_revision_chain(data)
    for r, version in enumerate(versions):
        assert recover_by_truncation(doc, r) == version
        rewritten = recover_by_offset_rewrite(doc, r)
        assert len(rewritten) == len(data)
        assert texts(rewritten) == texts(version)
