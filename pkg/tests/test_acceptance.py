"""Acceptance criteria, one test each.

The terminal summary (see conftest) prints one PASS/FAIL line per criterion.
Oracles come from the fixture writer: it keeps the pre-edit file, the
manifest of what it wrote, and the strings it put on each page.
"""

import random
import re

import pytest

from pdfresidue.cos import scan_all_objects
from pdfresidue.errors import PdfError
from pdfresidue.extract import extract_images, extract_text
from pdfresidue.fixture import (
    LATIN,
    UNICODE,
    EditScript,
    ImageSpec,
    PageSpec,
    WriterOptions,
    full_save,
    incremental_save,
    table1_fixture,
    write_pdf,
)
from pdfresidue.pagetree import page_count
from pdfresidue.recover import recover_by_offset_rewrite, recover_by_truncation
from pdfresidue.residual import coverage_map, shadow_objects
from pdfresidue.revisions import build_revision_chain
from pdfresidue.stego import detect_hidden, extract_payload, hide_in_slack, hide_superseded

from conftest import ORIGINAL_STRINGS, make_jpeg, random_edit, random_options, random_page

CORPUS_SIZE = 100
DETECTION_TRIALS = 50
FUZZ_INPUTS = 10_000
PAYLOAD_SIZES = (0, 1, 4096, 1 << 20)


def texts(doc, rev):
    return [p.joined for p in extract_text(doc, rev)]


def all_texts(data):
    doc = build_revision_chain(data)
    return [texts(doc, r) for r in range(len(doc.revisions))]


def assert_total(cov, n):
    cursor = 0
    for s in cov.spans:
        assert s.span.start == cursor and s.span.length > 0
        cursor = s.span.end
    assert cursor == n


@pytest.fixture(scope="module")
def corpus():
    """(original, modified) pairs from randomized pages, options and edits."""
    rng = random.Random(0xC0FFEE)
    pairs = []
    for _ in range(CORPUS_SIZE):
        options = random_options(rng)
        original, _ = write_pdf([random_page(rng) for _ in range(rng.randint(1, 4))], options)
        edit = random_edit(rng, page_count(build_revision_chain(original), 0))
        modified, _ = incremental_save(original, edit, options)
        pairs.append((original, modified))
    return pairs


def test_criterion_01_revision_enumeration(table1):
    original, modified, manifest = table1
    doc = build_revision_chain(modified)
    assert len(doc.revisions) == 2
    # third page's content object: written once, in the original block only
    third = doc.view(1)[10]
    copies = [span for oid, span in scan_all_objects(modified) if oid.number == 10]
    assert len(copies) == 1
    assert copies[0].start == third.offset < len(original)
    assert 10 not in doc.revisions[1].xref.entries()
    # the edited pages' content objects exist in both blocks
    for n in (6, 8):
        starts = [span.start for oid, span in scan_all_objects(modified) if oid.number == n]
        assert len(starts) == 2 and starts[0] < len(original) <= starts[1]


def test_criterion_02_size_monotonicity(corpus):
    violations = [i for i, (a, b) in enumerate(corpus) if not len(b) > len(a)]
    assert violations == []


def test_criterion_03_truncation_recovery(corpus):
    mismatches = [
        i for i, (original, modified) in enumerate(corpus)
        if recover_by_truncation(build_revision_chain(modified), 0) != original
    ]
    assert mismatches == []


def test_criterion_04_offset_rewrite_recovery(table1, corpus):
    cases = [table1[:2]] + [
        pair for pair in corpus if build_revision_chain(pair[1]).revisions[-1].xref.kind == "table"
    ]
    assert len(cases) > CORPUS_SIZE // 2
    for original, modified in cases:
        out = recover_by_offset_rewrite(build_revision_chain(modified), 0)
        assert len(out) == len(modified)
        recovered = build_revision_chain(out)
        assert texts(recovered, recovered.last) == texts(build_revision_chain(original), 0)


def test_criterion_05_residual_extraction():
    _, ascii_modified, _ = table1_fixture()
    assert texts(build_revision_chain(ascii_modified), 0) == ORIGINAL_STRINGS

    korean = ["첫 번째 쪽 원본", "두 번째 쪽 원본", "세 번째 쪽"]
    _, modified, _ = table1_fixture(
        original=[PageSpec([(t, UNICODE)]) for t in korean],
        edited={0: PageSpec([("첫 번째 쪽 수정", UNICODE)]), 1: PageSpec([("둘째 수정", UNICODE)])},
    )
    doc = build_revision_chain(modified)
    assert texts(doc, 0) == korean
    assert texts(doc, 1) == ["첫 번째 쪽 수정", "둘째 수정", korean[2]]


def test_criterion_06_image_recovery():
    before = make_jpeg(color=(250, 0, 0))
    after = make_jpeg(color=(0, 0, 250))
    data, _ = write_pdf([PageSpec([("photo", LATIN)], [ImageSpec("jpeg", before, 8, 8)])])
    data, _ = incremental_save(
        data, EditScript({0: PageSpec([("photo", LATIN)], [ImageSpec("jpeg", after, 8, 8)])})
    )
    doc = build_revision_chain(data)
    assert [i.payload for i in extract_images(doc, 0)] == [before]
    assert [i.payload for i in extract_images(doc, 1)] == [after]
    superseded = [s for s in shadow_objects(doc) if s.kind == "Resource"]
    assert len(superseded) == 1
    assert data[superseded[0].old_span.start : superseded[0].old_span.end].find(before) > 0


def test_criterion_07_shadow_object_audit(table1, corpus):
    violations = 0
    for _, modified in [table1[:2]] + corpus:
        doc = build_revision_chain(modified)
        live = {e.offset for e in doc.view(doc.last).values() if e.in_use and e.container is None}
        violations += sum(1 for s in shadow_objects(doc) if s.old_span.start in live)
        saved = build_revision_chain(full_save(modified))
        assert shadow_objects(saved) == []
    assert violations == 0


def _ascii_payload(rng, n):
    return bytes(rng.choice(b"abcdefghijklmnopqrstuvwxyz ") for _ in range(n))


def test_criterion_08_hiding_round_trips(table1):
    _, modified, _ = table1
    rng = random.Random(8)
    before = all_texts(modified)
    for size in PAYLOAD_SIZES:
        for hide in (hide_superseded, hide_in_slack):
            payload = _ascii_payload(rng, size) if hide is hide_superseded else rng.randbytes(size)
            out, locator = hide(modified, payload)
            assert extract_payload(out, locator) == payload
            after = all_texts(out)
            if hide is hide_in_slack:
                assert after == before
            else:
                # two extra updates; every revision keeps the last edit's pages
                assert after[: len(before)] == before
                assert all(t == before[-1] for t in after[len(before):])
            if hide is hide_superseded and size >= 8:
                runs = re.findall(rb"[\x20-\x7e]{8,}", out)
                grams = {payload[i : i + 8] for i in range(len(payload) - 7)}
                assert not any(run[i : i + 8] in grams for run in runs for i in range(len(run) - 7))


def test_criterion_09_detection(corpus):
    rng = random.Random(9)
    clean_hits = sum(len(detect_hidden(m).candidates) for o, m in corpus)
    clean_hits += sum(len(detect_hidden(o).candidates) for o, m in corpus)
    assert clean_hits == 0

    missed = []
    for trial in range(DETECTION_TRIALS):
        _, base = corpus[trial]
        payload = rng.randbytes(rng.randint(16, 8192))
        out, loc = hide_superseded(base, payload)
        found = detect_hidden(out).candidates
        if not any(c.locator.object_id == loc.object_id and c.reason == "UnreferencedStream" for c in found):
            missed.append(("superseded", trial))
        out, loc = hide_in_slack(base, payload)
        span = loc.span
        if not any(c.locator.span.start <= span.start and span.end <= c.locator.span.end
                   for c in detect_hidden(out).candidates):
            missed.append(("slack", trial))
    assert missed == []


def _mutate(rng, base: bytes) -> bytes:
    d = bytearray(base)
    for _ in range(rng.randint(1, 8)):
        op = rng.randrange(5)
        pos = rng.randrange(len(d) + 1)
        if op == 0 and d:
            d[min(pos, len(d) - 1)] = rng.randrange(256)
        elif op == 1:
            del d[pos : pos + rng.randint(1, 64)]
        elif op == 2:
            d[pos:pos] = rng.randbytes(rng.randint(1, 24))
        elif op == 3:
            d[pos:pos] = rng.choice(
                [b"<<", b"[", b"(", b" 0 R", b"obj", b"endobj", b"stream\n", b"xref\n0 1\n", b"/Prev 0",
                 b"startxref 1", b"%%EOF", b"/Length 9999", b"/Filter /FlateDecode"]
            )
        else:
            d = d[:pos]
    return bytes(d)


def test_criterion_10_coverage_totality(table1, corpus):
    rng = random.Random(10)
    _, modified, _ = table1
    seeds = [modified, table1_fixture(options=WriterOptions(xref_stream=True))[1]]
    seeds += [m for _, m in corpus[:10]]
    seeds.append(hide_in_slack(modified, rng.randbytes(300))[0])

    for data in [o for o, _ in corpus] + [m for _, m in corpus] + seeds:
        assert_total(coverage_map(data), len(data))

    crashes = []
    for i in range(FUZZ_INPUTS):
        if i % 10 == 0:
            data = rng.randbytes(rng.randint(0, 600))
        else:
            data = _mutate(rng, rng.choice(seeds))
        try:
            try:
                doc = build_revision_chain(data, carve=True)
            except PdfError:
                doc = None
            cov = coverage_map(doc if doc is not None else data)
            assert_total(cov, len(data))
            detect_hidden(doc if doc is not None else data)
        except PdfError:
            pass
        except AssertionError:
            raise
        except Exception as exc:  # anything else is a crash
            crashes.append((i, type(exc).__name__, str(exc)[:80]))
    assert crashes == []
