"""Exception types shared across the package.

Everything raised deliberately by this package derives from
:class:`GaborDefectError`, so the CLI can catch one type and turn it
into a single-line diagnostic with a nonzero exit code.
"""


class GaborDefectError(Exception):
    """Base class for all errors raised by gabordefect."""


class ImageError(GaborDefectError):
    """Problems reading, decoding, or validating an image file."""


class UnreadableImageError(ImageError):
    """The file is missing, unreadable, or not a decodable raster."""


class UnsupportedImageError(ImageError):
    """The raster is readable but not 8-bit grayscale/RGB."""


class EmptyImageError(ImageError):
    """The raster decodes to zero pixels."""


class ConfigError(GaborDefectError):
    """Invalid run configuration (bad key, bad value, violated constraint)."""


class ShapeError(GaborDefectError):
    """A tensor did not match the shape contract at some network stage."""


class CheckpointError(GaborDefectError):
    """Checkpoint file is corrupt, wrong version, or inconsistent with its config."""


class DatasetError(GaborDefectError):
    """Dataset directory layout is missing required pieces."""


class TrainingError(GaborDefectError):
    """Training aborted (non-finite loss or parameter, empty dataset, ...)."""
