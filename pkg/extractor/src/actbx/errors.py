class ActbxError(Exception):
    """Base class for extractor errors."""


class FormatError(ActbxError):
    """Input file does not match its declared format."""


class ExtractionError(ActbxError):
    """No usable images, bad layer, or weight-loading failure."""
