import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from pdfresidue.cos import Stream
from pdfresidue.errors import BadEditScript, UnsupportedImageFormat
from pdfresidue.extract import extract_images, extract_text
from pdfresidue.filters import decode_stream
from pdfresidue.fixture import (
    EditScript,
    ImageSpec,
    PageSpec,
    WriterOptions,
    append_update,
    full_save,
    incremental_save,
    write_pdf,
)
from pdfresidue.pagetree import page_count
from pdfresidue.residual import shadow_objects
from pdfresidue.revisions import build_revision_chain

from conftest import make_jpeg, random_edit, random_options, random_page


def test_three_pages_with_images():
    jpeg = make_jpeg()
    specs = [PageSpec([(f"page {i}", "latin")], [ImageSpec("jpeg", jpeg, 8, 8)]) for i in range(3)]
    data, manifest = write_pdf(specs)
    doc = build_revision_chain(data)
    assert len(doc.revisions) == 1 and page_count(doc, 0) == 3 == manifest.page_count
    assert [p.joined for p in extract_text(doc, 0)] == ["page 0", "page 1", "page 2"]
    assert [i.payload for i in extract_images(doc, 0)] == [jpeg] * 3


def test_manifest_payloads_match_decoded_streams():
    spec = PageSpec([("abc", "latin"), ("한글", "unicode")], [ImageSpec("raw", bytes(12), 2, 2)])
    data, manifest = write_pdf([spec], WriterOptions(content_filters=("ASCII85Decode", "FlateDecode")))
    doc = build_revision_chain(data)
    for rec in manifest.objects:
        if rec.payload is None or rec.kind == "xref":
            continue
        value = doc.object_at(rec.span.start)[1]
        assert isinstance(value, Stream)
        assert decode_stream(value)[0] == rec.payload


def test_table1_update_lists_only_edited_contents(table1):
    original, modified, manifest = table1
    doc = build_revision_chain(modified)
    assert sorted(doc.revisions[1].xref.entries()) == [6, 8]
    added = {r.id.number for r in manifest.objects if r.revision == 1}
    assert added == {6, 8}
    assert b"10 0 obj" not in modified[len(original):]
    assert modified.startswith(original) and len(modified) > len(original)


def test_empty_update_still_adds_a_revision():
    data, _ = write_pdf([PageSpec([("x", "latin")])])
    out, _ = incremental_save(data, EditScript())
    doc = build_revision_chain(out)
    assert len(doc.revisions) == 2 and len(out) > len(data)
    (entry,) = doc.revisions[1].xref.entries().values()
    assert entry.object_number == 0 and not entry.in_use


def test_revision_count_is_one_plus_saves():
    data, manifest = write_pdf([PageSpec([("x", "latin")])])
    for k in range(4):
        data, manifest = incremental_save(data, EditScript({0: PageSpec([(f"v{k}", "latin")])}), manifest=manifest)
        assert len(build_revision_chain(data).revisions) == k + 2 == len(manifest.revisions)


def test_manifest_json():
    _, manifest = write_pdf([PageSpec([("x", "latin")])])
    doc = json.loads(manifest.to_json())
    assert doc["schema_version"] == 1 and doc["page_count"] == 1
    assert {"id", "span", "revision", "kind", "payload_length"} <= set(doc["objects"][0])


def test_full_save(table1):
    _, modified, _ = table1
    saved = full_save(modified)
    doc = build_revision_chain(saved)
    assert len(doc.revisions) == 1 and shadow_objects(doc) == [] and doc.anomalies == []
    assert len(saved) < len(modified)
    assert [p.joined for p in extract_text(doc, 0)] == [
        p.joined for p in extract_text(build_revision_chain(modified), 1)
    ]


def test_full_save_of_xref_stream_file():
    data, _ = write_pdf([PageSpec([("s", "latin")])], WriterOptions(xref_stream=True))
    data, _ = incremental_save(data, EditScript({0: PageSpec([("t", "latin")])}))
    doc = build_revision_chain(full_save(data))
    assert [p.joined for p in extract_text(doc, 0)] == ["t"]


def test_append_update_spans():
    data, _ = write_pdf([PageSpec([("x", "latin")])])
    out, spans = append_update(data, {40: 123, 41: [1, 2]})
    doc = build_revision_chain(out)
    assert doc.resolve(1, (40, 0)) == (123, spans[40])
    assert doc.resolve(1, (41, 0))[0] == [1, 2]
    assert doc.revisions[1].trailer.dict["Root"] == doc.revisions[0].trailer.dict["Root"]


@pytest.mark.parametrize(
    "pages, options, edit",
    [
        ([PageSpec([("x", "latin")])], None, EditScript({3: PageSpec()})),
        ([PageSpec([("x", "latin")])], None, EditScript({0: PageSpec([("한", "latin")])})),
        ([PageSpec([("x", "wingdings")])], None, None),
        ([PageSpec(), PageSpec()], WriterOptions(page_groups=[1, 2]), None),
    ],
)
def test_bad_edit_scripts(pages, options, edit):
    with pytest.raises(BadEditScript):
        data, _ = write_pdf(pages, options)
        incremental_save(data, edit)


def test_unsupported_image_format():
    with pytest.raises(UnsupportedImageFormat):
        write_pdf([PageSpec(images=[ImageSpec("png", b"\x89PNG", 1, 1)])])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_incremental_save_grows_and_preserves_prefix(seed):
    rng = random.Random(seed)
    data, _ = write_pdf([random_page(rng) for _ in range(rng.randint(0, 3))], random_options(rng))
    doc = build_revision_chain(data)
    out, manifest = incremental_save(data, random_edit(rng, page_count(doc, 0)))
    assert len(out) > len(data) and out.startswith(data)
    assert page_count(build_revision_chain(out), 1) == manifest.page_count
