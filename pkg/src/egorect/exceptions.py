"""Exception types shared across the package.

Errors are grouped loosely by what went wrong: geometric degeneracies,
empty or mismatched inputs, and file-level problems.  The CLI maps these
groups onto its exit codes.
"""


class EgorectError(Exception):
    """Base class for all package-specific errors."""


class AntipodalInput(EgorectError):
    """Two directions are antipodal; the minimal rotation between them is undefined."""


class EmptySample(EgorectError):
    """A normal sample or sample list required to be non-empty was empty."""


class SchemeMismatch(EgorectError):
    """Two sphere histograms use different binning schemes and cannot be compared."""


class EmptyInput(EgorectError):
    """An input collection required to be non-empty was empty."""


class KindMismatch(EgorectError):
    """Two geometry rasters of different kinds (depth vs normals) were combined."""


class NoValidPixels(EgorectError):
    """No mutually valid pixel exists, so a per-pixel reduction is undefined."""


class NonPositiveValue(EgorectError):
    """A valid depth value was <= 0 where a logarithm or ratio is required."""


class DegenerateInput(EgorectError):
    """Input admits no well-defined answer (e.g. all-zero depth for scale fitting)."""


class AllModesInvalid(EgorectError):
    """Every rectification mode produced a fully invalid prediction."""


class FileMissing(EgorectError):
    """A file referenced by a sample record or manifest does not exist."""


class FormatError(EgorectError):
    """A file exists but its contents do not match the expected format."""


class IntrinsicsMismatch(EgorectError):
    """Stored intrinsics disagree with the raster dimensions they describe."""


class IoError(EgorectError):
    """Reading or writing a sample failed at the filesystem level."""
