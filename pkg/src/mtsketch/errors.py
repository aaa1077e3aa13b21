"""Exception types shared across the package."""


class MTSketchError(Exception):
    """Base class for all package errors."""


class ParseError(MTSketchError, ValueError):
    pass


class ValidationError(MTSketchError, ValueError):
    pass


class StructureError(MTSketchError, ValueError):
    """A tree, coupling or permutation does not have the required shape."""


class ShapeError(MTSketchError, ValueError):
    pass


class DegenerateInputError(MTSketchError, ValueError):
    pass


class CoverageError(MTSketchError, ValueError):
    """A blowup matching leaves some node of the network unmatched."""


class MissingArtifactError(MTSketchError, FileNotFoundError):
    """A pipeline stage ran before the stage that produces its inputs."""
