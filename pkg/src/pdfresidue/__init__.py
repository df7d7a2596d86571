"""Forensic analysis of incrementally updated PDF files.

Recover earlier revisions, extract superseded text and images, map every
byte of a file, and plant or detect payloads hidden in unused areas.
"""

__version__ = "0.1.0"

from .cos import ByteSpan, Name, ObjectId, PdfString, Reference, Stream, lex_value, parse_indirect_object, scan_all_objects
from .errors import PdfError
from .extract import extract_images, extract_text, parse_to_unicode, tokenize_content
from .filters import FilterSpec, apply_filter, decode_stream
from .fixture import EditScript, ImageSpec, PageSpec, WriterOptions, full_save, incremental_save, write_pdf
from .pagetree import content_program, page_count, pages
from .recover import recover_by_offset_rewrite, recover_by_truncation
from .residual import coverage_map, diff_revisions, shadow_objects
from .revisions import Document, build_revision_chain, extract_info, parse_startxref, parse_xref_at, resolve
from .stego import HiddenPayloadLocator, detect_hidden, extract_payload, hide_in_slack, hide_superseded

__all__ = [
    "ByteSpan", "Name", "ObjectId", "PdfString", "Reference", "Stream",
    "lex_value", "parse_indirect_object", "scan_all_objects",
    "PdfError",
    "extract_images", "extract_text", "parse_to_unicode", "tokenize_content",
    "FilterSpec", "apply_filter", "decode_stream",
    "EditScript", "ImageSpec", "PageSpec", "WriterOptions", "full_save", "incremental_save", "write_pdf",
    "content_program", "page_count", "pages",
    "recover_by_offset_rewrite", "recover_by_truncation",
    "coverage_map", "diff_revisions", "shadow_objects",
    "Document", "build_revision_chain", "extract_info", "parse_startxref", "parse_xref_at", "resolve",
    "HiddenPayloadLocator", "detect_hidden", "extract_payload", "hide_in_slack", "hide_superseded",
]
