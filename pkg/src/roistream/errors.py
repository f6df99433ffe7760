"""Exception types shared across the pipeline."""


class RoiStreamError(Exception):
    """Base class for all pipeline errors."""


# imaging
class EncodeFailure(RoiStreamError):
    pass


class DecodeFailure(RoiStreamError):
    pass


# edges / lines
class NoEdges(RoiStreamError):
    pass


class NoDominantLine(RoiStreamError):
    pass


class ParallelLines(RoiStreamError):
    pass


class DegenerateQuad(RoiStreamError):
    pass


# geometry
class SingularSystem(RoiStreamError):
    pass


class EmptyRegion(RoiStreamError):
    pass


# detectors
class TagCountMismatch(RoiStreamError):
    pass


class NoBlob(RoiStreamError):
    pass


# session
class StaleFrame(RoiStreamError):
    pass


class ModeMismatch(RoiStreamError):
    pass


class NoCandidate(RoiStreamError):
    pass


class InvalidQuadEdit(RoiStreamError):
    pass


# stabilize
class FlatImage(RoiStreamError):
    pass


# transport
class StaleSeq(RoiStreamError):
    pass


class MalformedPacket(RoiStreamError):
    pass


class UnknownSession(RoiStreamError):
    pass


# synth
class SpecOutOfBounds(RoiStreamError):
    pass
