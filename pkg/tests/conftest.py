import io
import random

import pytest

from pdfresidue.fixture import LATIN, UNICODE, EditScript, ImageSpec, PageSpec, WriterOptions

ORIGINAL_STRINGS = ["Original first page", "Original second page", "Third page stays the same"]
EDITED_STRINGS = ["Edited first page", "Edited second page"]


def make_jpeg(width=8, height=8, color=(200, 30, 30)) -> bytes:
    Image = pytest.importorskip("PIL.Image")
    buf = io.BytesIO()
    Image.new("RGB", (width, height), color).save(buf, format="JPEG")
    return buf.getvalue()


_WORDS = "alpha beta gamma delta evidence ledger invoice draft final memo page note".split()
_HANGUL = "가나다라마바사아자차카타파하한글"


def random_text(rng: random.Random, unicode=False) -> str:
    if unicode:
        return "".join(rng.choice(_HANGUL) for _ in range(rng.randint(1, 12)))
    return " ".join(rng.choice(_WORDS) for _ in range(rng.randint(1, 6)))


def random_page(rng: random.Random, allow_unicode=True) -> PageSpec:
    texts = []
    for _ in range(rng.randint(0, 4)):
        if allow_unicode and rng.random() < 0.3:
            texts.append((random_text(rng, True), UNICODE))
        else:
            texts.append((random_text(rng), LATIN))
    images = []
    if rng.random() < 0.2:
        images.append(ImageSpec("raw", bytes(rng.randrange(256) for _ in range(12)), 2, 2))
    return PageSpec(texts, images, content_streams=rng.choice([1, 1, 1, 2]))


def random_options(rng: random.Random) -> WriterOptions:
    filters = rng.choice(
        [("FlateDecode",), (), ("ASCII85Decode", "FlateDecode"), ("ASCIIHexDecode",), ("LZWDecode",), ("RunLengthDecode",)]
    )
    return WriterOptions(content_filters=filters, xref_stream=rng.random() < 0.25)


def random_edit(rng: random.Random, page_count: int) -> EditScript:
    edits = {}
    if page_count:
        for idx in rng.sample(range(page_count), rng.randint(0, page_count)):
            edits[idx] = random_page(rng)
    appended = [random_page(rng) for _ in range(rng.choice([0, 0, 1, 2]))]
    info = {"ModDate": f"D:2024010{rng.randint(1, 9)}120000Z"} if rng.random() < 0.5 else {}
    return EditScript(edits, appended, info)


@pytest.fixture
def table1():
    from pdfresidue.fixture import table1_fixture

    return table1_fixture()


def hand_pdf(bodies, trailer=b"/Root 1 0 R"):
    """Single-revision file with offsets computed here, not by the writer."""
    out = bytearray(b"%PDF-1.4\n")
    offsets = []
    for n, body in enumerate(bodies, start=1):
        offsets.append(len(out))
        out += b"%d 0 obj\n%s\nendobj\n" % (n, body)
    xref = len(out)
    out += b"xref\n0 %d\n0000000000 65535 f\r\n" % (len(bodies) + 1)
    for off in offsets:
        out += b"%010d 00000 n\r\n" % off
    out += b"trailer\n<< /Size %d %s >>\nstartxref\n%d\n%%%%EOF\n" % (len(bodies) + 1, trailer, xref)
    return bytes(out), offsets, xref


def stream_body(data: bytes, extra: bytes = b"") -> bytes:
    return b"<< /Length %d %s >>\nstream\n%s\nendstream" % (len(data), extra, data)


# -- acceptance summary -------------------------------------------------------

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        outcome = _ACCEPTANCE[name]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        number = name.split("_")[2]
        title = " ".join(name.split("_")[3:])
        terminalreporter.write_line(f"criterion {int(number):2d}: {verdict}  {title}")


@pytest.fixture
def rng_bytes():
    rng = random.Random(20240501)
    return rng.randbytes
