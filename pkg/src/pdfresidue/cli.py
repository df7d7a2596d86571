"""``pdfresidue`` command line.

Every command prints one JSON report on stdout. Errors print a JSON
object on stderr. Exit codes: 0 ok, 1 parse or usage error, 2 unsupported
input (encrypted, xref-stream rewrite, over the size limit), 3 I/O.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .errors import (
    EncryptedDocument,
    EntryNotRewritable,
    PdfError,
    UnsupportedImageFormat,
    UnsupportedXrefStreamField,
)
from .extract import extract_images, extract_text
from .fixture import EditScript, ImageSpec, PageSpec, WriterOptions, incremental_save, write_pdf
from .recover import recover_by_offset_rewrite, recover_by_truncation
from .residual import coverage_map, diff_revisions, shadow_objects
from .revisions import Document, build_revision_chain, extract_info
from .stego import HiddenPayloadLocator, detect_hidden, extract_payload, hide_in_slack, hide_superseded

SCHEMA_VERSION = 1
DEFAULT_MAX_FILE_SIZE = 1 << 30

EXIT_OK, EXIT_PARSE, EXIT_UNSUPPORTED, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class FileTooLarge(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class _Context:
    def __init__(self, args):
        self.args = args
        self.quiet = args.quiet

    def log(self, msg: str):
        if not self.quiet:
            print(msg, file=sys.stderr)

    def read(self, path) -> bytes:
        p = Path(path)
        size = p.stat().st_size
        if size > self.args.max_file_size:
            raise FileTooLarge(f"{path}: {size} bytes exceeds --max-file-size {self.args.max_file_size}")
        return p.read_bytes()

    def write(self, path, data: bytes):
        p = Path(path)
        if p.exists() and not self.args.force:
            raise FileExistsError(f"{path} exists; use --force to overwrite")
        p.write_bytes(data)
        self.log(f"wrote {len(data)} bytes to {path}")


def _span(span):
    return [span.start, span.end]


def _oid(oid):
    return None if oid is None else [oid.number, oid.generation]


def base_report(command: str, path, data: bytes, doc: Optional[Document]) -> dict:
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "input_path": str(path),
        "file_size": len(data),
        "header_version": doc.header_version if doc else None,
        "revision_count": len(doc.revisions) if doc else 0,
        "revisions": [],
        "anomalies": list(doc.anomalies) if doc else [],
    }
    if doc is None:
        return report
    for rev in doc.revisions:
        notes: List[str] = []
        report["revisions"].append(
            {
                "index": rev.index,
                "byte_range": _span(rev.block_span),
                "cumulative_end": rev.cumulative_end,
                "xref_kind": rev.xref.kind,
                "object_count": sum(1 for e in rev.xref.entries().values() if e.in_use),
                "info_metadata": extract_info(doc, rev.index, notes),
            }
        )
        report["anomalies"].extend(notes)
    return report


def _revisions_arg(doc: Document, rev, all_revs) -> List[int]:
    if all_revs:
        return list(range(len(doc.revisions)))
    if rev is None:
        return [doc.last]
    doc._check_rev(rev)
    return [rev]


def cmd_info(ctx, args):
    data = ctx.read(args.file)
    doc = build_revision_chain(data)
    return base_report("info", args.file, data, doc)


def cmd_recover(ctx, args):
    data = ctx.read(args.file)
    doc = build_revision_chain(data)
    warnings: List[str] = []
    if args.method == "truncate":
        out = recover_by_truncation(doc, args.rev)
    else:
        out = recover_by_offset_rewrite(doc, args.rev, warnings)
    target = args.output or default_recovery_name(args.file, args.rev, args.method)
    ctx.write(target, out)
    report = base_report("recover", args.file, data, doc)
    report["recovered"] = {
        "revision": args.rev,
        "method": args.method,
        "output_path": str(target),
        "output_size": len(out),
        "warnings": warnings,
    }
    return report


def default_recovery_name(path, rev: int, method: str) -> Path:
    p = Path(path)
    return p.with_name(f"{p.stem}.rev{rev:03d}.{method}.pdf")


def cmd_text(ctx, args):
    data = ctx.read(args.file)
    doc = build_revision_chain(data)
    report = base_report("text", args.file, data, doc)
    report["text"] = [
        {
            "revision": r,
            "pages": [
                {"page_index": p.page_index, "text": p.joined, "error": p.error, "warnings": p.warnings}
                for p in extract_text(doc, r)
            ],
        }
        for r in _revisions_arg(doc, args.rev, args.all)
    ]
    return report


def cmd_images(ctx, args):
    data = ctx.read(args.file)
    doc = build_revision_chain(data)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    listed = []
    for r in _revisions_arg(doc, args.rev, args.all):
        errors: list = []
        for img in extract_images(doc, r, errors):
            num = img.object_id.number if img.object_id else "inline"
            stem = f"rev{r:03d}.page{img.page_index:03d}.obj{num}"
            path = outdir / f"{stem}.{img.extension}"
            ctx.write(path, img.payload)
            entry = {
                "revision": r,
                "page_index": img.page_index,
                "object_id": _oid(img.object_id),
                "format": img.format,
                "width": img.width,
                "height": img.height,
                "bits_per_component": img.bits_per_component,
                "color_space": img.color_space,
                "soft_mask_of": _oid(img.soft_mask_of),
                "size": len(img.payload),
                "path": str(path),
            }
            if img.format == "RawPixmap":
                geometry = outdir / f"{stem}.json"
                ctx.write(geometry, json.dumps(entry, indent=2).encode())
            listed.append(entry)
        for page_index, oid, msg in errors:
            listed.append({"revision": r, "page_index": page_index, "object_id": _oid(oid), "error": msg})
    report = base_report("images", args.file, data, doc)
    report["images"] = listed
    return report


def cmd_diff(ctx, args):
    data = ctx.read(args.file)
    doc = build_revision_chain(data)
    d = diff_revisions(doc, args.from_rev, args.to_rev)
    report = base_report("diff", args.file, data, doc)
    report["diff"] = {
        "from_rev": d.from_rev,
        "to_rev": d.to_rev,
        "page_count_before": d.page_count_before,
        "page_count_after": d.page_count_after,
        "pages_changed": d.pages_changed,
        "text_before": {str(k): v for k, v in d.text_before.items()},
        "text_after": {str(k): v for k, v in d.text_after.items()},
        "objects_added": [_oid(o) for o in d.objects_added],
        "objects_superseded": [_oid(o) for o in d.objects_superseded],
        "objects_freed": [_oid(o) for o in d.objects_freed],
        "errors": d.errors,
    }
    return report


def cmd_shadows(ctx, args):
    data = ctx.read(args.file)
    doc = build_revision_chain(data)
    report = base_report("shadows", args.file, data, doc)
    report["shadows"] = [
        {
            "object_number": s.object_number,
            "superseded_revision": s.superseded_revision,
            "superseding_revision": s.superseding_revision,
            "old_span": _span(s.old_span),
            "new_span": _span(s.new_span),
            "kind": s.kind,
        }
        for s in shadow_objects(doc)
    ]
    return report


def cmd_scan(ctx, args):
    data = ctx.read(args.file)
    doc = None
    parse_error = None
    try:
        doc = build_revision_chain(data, carve=True)
    except PdfError as exc:
        parse_error = f"{type(exc).__name__}: {exc}"
    report = base_report("scan", args.file, data, doc)
    if parse_error:
        report["anomalies"].append(f"structure scan only ({parse_error})")
    cov = coverage_map(doc if doc is not None else data)
    totals = {}
    for s in cov.spans:
        totals[s.cls] = totals.get(s.cls, 0) + s.span.length
    report["coverage"] = {"unaccounted_bytes": cov.unaccounted_bytes, "bytes_by_class": totals}
    report["candidates"] = [
        {"locator": str(c.locator), "reason": c.reason, "entropy": round(c.entropy, 4)}
        for c in detect_hidden(doc if doc is not None else data).candidates
    ]
    return report


def cmd_hide(ctx, args):
    data = ctx.read(args.file)
    payload = ctx.read(args.payload)
    if args.technique == "1":
        out, loc = hide_superseded(data, payload)
    else:
        out, loc = hide_in_slack(data, payload, at=args.at)
    ctx.write(args.output, out)
    ctx.log(str(loc))
    report = base_report("hide", args.file, data, build_revision_chain(data))
    report["hidden"] = {
        "technique": loc.technique,
        "locator": str(loc),
        "payload_size": len(payload),
        "output_path": str(args.output),
        "output_size": len(out),
    }
    return report


def cmd_extract_hidden(ctx, args):
    data = ctx.read(args.file)
    try:
        loc = HiddenPayloadLocator.parse(args.at)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    payload = extract_payload(data, loc)
    ctx.write(args.output, payload)
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": "extract-hidden",
        "input_path": str(args.file),
        "file_size": len(data),
        "locator": str(loc),
        "payload_size": len(payload),
        "output_path": str(args.output),
    }


def _page_spec(obj, base: Path) -> PageSpec:
    if not isinstance(obj, dict):
        raise UsageError("each page spec must be an object")
    texts = []
    for item in obj.get("texts", []):
        if isinstance(item, str):
            texts.append((item, "latin"))
        else:
            texts.append((item[0], item[1] if len(item) > 1 else "latin"))
    images = []
    for im in obj.get("images", []):
        if "path" in im:
            payload = (base / im["path"]).read_bytes()
        else:
            payload = bytes.fromhex(im.get("payload_hex", ""))
        images.append(
            ImageSpec(im.get("format", "jpeg"), payload, int(im["width"]), int(im["height"]),
                      int(im.get("bits_per_component", 8)), im.get("color_space", "DeviceRGB"))
        )
    return PageSpec(texts, images, int(obj.get("content_streams", 1)))


def cmd_fixture(ctx, args):
    spec_path = Path(args.spec)
    try:
        spec = json.loads(ctx.read(spec_path))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{spec_path}: {exc}") from None
    base = spec_path.parent
    opts = spec.get("options", {})
    options = WriterOptions(
        content_filters=tuple(opts.get("content_filters", ["FlateDecode"] if opts.get("compress", True) else [])),
        xref_stream=bool(opts.get("xref_stream", False)),
        page_groups=opts.get("page_groups"),
    )
    if "info" in opts:
        options.info = dict(opts["info"])
    data, manifest = write_pdf([_page_spec(p, base) for p in spec.get("pages", [])], options)
    for save in spec.get("saves", []):
        script = EditScript(
            page_edits={int(k): _page_spec(v, base) for k, v in save.get("page_edits", {}).items()},
            pages_appended=[_page_spec(p, base) for p in save.get("pages_appended", [])],
            info_updates=dict(save.get("info_updates", {})),
        )
        data, manifest = incremental_save(data, script, options, manifest)
    out = Path(args.output)
    ctx.write(out, data)
    sidecar = out.with_name(out.name + ".manifest.json")
    ctx.write(sidecar, manifest.to_json().encode())
    doc = build_revision_chain(data)
    report = base_report("fixture", out, data, doc)
    report["manifest_path"] = str(sidecar)
    return report


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pdfresidue", description="Forensics for incrementally updated PDF files.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--quiet", action="store_true", help="no progress messages on stderr")
    p.add_argument("--force", action="store_true", help="overwrite existing output files")
    p.add_argument("--max-file-size", type=int, default=DEFAULT_MAX_FILE_SIZE, metavar="BYTES")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("info", help="revisions, sizes and metadata")
    s.add_argument("file")
    s.set_defaults(func=cmd_info)

    s = sub.add_parser(
        "recover",
        help="rebuild an earlier revision",
        description="'rewrite' needs a classic final xref table; for cross-reference "
        "streams use 'truncate'.",
    )
    s.add_argument("file")
    s.add_argument("--rev", type=int, required=True)
    s.add_argument("--method", choices=["truncate", "rewrite"], default="truncate")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("text", help="per-page text of one or all revisions")
    s.add_argument("file")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--rev", type=int)
    g.add_argument("--all", action="store_true")
    s.set_defaults(func=cmd_text)

    s = sub.add_parser("images", help="write embedded images to a directory")
    s.add_argument("file")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--rev", type=int)
    g.add_argument("--all", action="store_true")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_images)

    s = sub.add_parser("diff", help="compare two revisions")
    s.add_argument("file")
    s.add_argument("--from", dest="from_rev", type=int, required=True)
    s.add_argument("--to", dest="to_rev", type=int, required=True)
    s.set_defaults(func=cmd_diff)

    s = sub.add_parser("shadows", help="list superseded objects")
    s.add_argument("file")
    s.set_defaults(func=cmd_shadows)

    s = sub.add_parser("scan", help="coverage map and hidden-data candidates")
    s.add_argument("file")
    s.set_defaults(func=cmd_scan)

    s = sub.add_parser("hide", help="plant a payload")
    s.add_argument("file")
    s.add_argument("--payload", required=True)
    s.add_argument("--technique", choices=["1", "2"], required=True)
    s.add_argument("--at", type=int, help="insertion offset (technique 2)")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_hide)

    s = sub.add_parser("extract-hidden", help="read a payload back by locator")
    s.add_argument("file")
    s.add_argument("--at", required=True, metavar="LOCATOR")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_extract_hidden)

    s = sub.add_parser("fixture", help="write a test PDF from a JSON spec")
    s.add_argument("spec")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_fixture)
    return p


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (EncryptedDocument, EntryNotRewritable, UnsupportedXrefStreamField,
                        UnsupportedImageFormat, FileTooLarge)):
        return EXIT_UNSUPPORTED
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_PARSE


def _emit(stream, obj):
    text = json.dumps(obj, indent=2, ensure_ascii=False) + "\n"
    buffer = getattr(stream, "buffer", None)
    if buffer is not None:
        stream.flush()
        buffer.write(text.encode("utf-8"))
        buffer.flush()
    else:
        stream.write(text)
        stream.flush()


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        report = args.func(_Context(args), args)
    except Exception as exc:  # every failure becomes an error report
        code = exit_code_for(exc)
        _emit(sys.stderr, {
            "schema_version": SCHEMA_VERSION,
            "error": type(exc).__name__,
            "message": str(exc),
            "exit_code": code,
        })
        return code
    _emit(sys.stdout, report)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
