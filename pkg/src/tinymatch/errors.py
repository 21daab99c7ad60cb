"""Exception types raised across the library."""


class TinymatchError(Exception):
    """Base class for all library errors."""


class InvalidBoxError(TinymatchError, ValueError):
    """A box has non-positive extent or non-finite coordinates."""


class InvalidParameterError(TinymatchError, ValueError):
    """A metric or assigner parameter is out of its valid range."""


class InvalidConfigError(TinymatchError, ValueError):
    """An anchor or assigner configuration violates its invariants."""


class InvalidInputError(TinymatchError, ValueError):
    """Structurally inconsistent inputs (e.g. mismatched lengths)."""


class AnnotationError(TinymatchError, ValueError):
    """An annotation file failed to parse or violates the COCO schema."""
