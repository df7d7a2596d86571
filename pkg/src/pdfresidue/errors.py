"""Exception hierarchy.

Every failure the library reports on hostile or damaged input is a
:class:`PdfError`; anything else escaping the parser is a bug.
"""


class PdfError(Exception):
    """Base class for all structured errors raised by this package."""


# object syntax
class MalformedToken(PdfError):
    pass


class IdMismatch(PdfError):
    pass


class StreamLengthUnresolvable(PdfError):
    pass


# xref / revision chain
class NoStartxref(PdfError):
    pass


class NotAnXref(PdfError):
    pass


class TruncatedTable(PdfError):
    pass


class UnsupportedXrefStreamField(PdfError):
    pass


class PrevCycle(PdfError):
    pass


class EncryptedDocument(PdfError):
    pass


class FreeObject(PdfError):
    pass


class UnknownObject(PdfError):
    pass


class OffsetMismatch(PdfError):
    def __init__(self, offset, expected, found):
        super().__init__(
            f"object at offset {offset}: expected {expected}, found {found}"
        )
        self.offset = offset
        self.expected = expected
        self.found = found


# filters
class CorruptStream(PdfError):
    pass


class UnknownFilter(PdfError):
    pass


# page tree / content
class BrokenPageTree(PdfError):
    pass


class PageContentError(PdfError):
    def __init__(self, page_index, cause):
        super().__init__(f"page {page_index}: {cause}")
        self.page_index = page_index
        self.__cause__ = cause


class MalformedContent(PdfError):
    pass


class MalformedCMap(PdfError):
    pass


# recovery
class NotAppendOnly(PdfError):
    pass


class EntryNotRewritable(PdfError):
    pass


# stego
class NoSafeInsertionPoint(PdfError):
    pass


class LocatorOutOfRange(PdfError):
    pass


# fixture writer
class UnsupportedImageFormat(PdfError):
    pass


class BadEditScript(PdfError):
    pass


class RevisionOutOfRange(PdfError, IndexError):
    pass


class InvalidRevisionRange(PdfError, ValueError):
    pass
