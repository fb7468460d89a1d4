class BeamDTError(Exception):
    """Base class for all errors raised by the beamdt toolkit."""


class DomainError(BeamDTError, ValueError):
    """An argument lies outside the mathematical domain of an operation (e.g. ``|k| >= k0``)."""


class SupportError(BeamDTError, ValueError):
    """An object or detector violates the support assumptions ``supp(f) ⊆ B_rs`` and ``r_M > r_s``."""


class GridMismatchError(BeamDTError, ValueError):
    """Two arrays or lattices that must agree do not."""


class SingularityError(BeamDTError, ValueError):
    """An evaluation point coincides with a source point of a singular kernel."""


class EmptySpectrumError(BeamDTError, ValueError):
    """Every singular value of the truncated decomposition was filtered out."""


class FileFormatError(BeamDTError, ValueError):
    """A binary or CSV file does not follow its declared layout."""
