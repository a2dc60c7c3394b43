"""Exception hierarchy shared by every pipeline stage.

Each class doubles as a stable machine-readable error code: the HTTP layer
serializes ``type(exc).__name__`` straight into its error payloads, so class
names here are part of the public contract and must not be renamed casually.
"""


class PlatefindError(Exception):
    """Base class for all errors raised by this package."""

    @property
    def code(self) -> str:
        return type(self).__name__


class EmptyPlate(PlatefindError):
    """Plate text normalized to zero characters."""


class UnknownCategory(PlatefindError):
    """Vehicle-category label outside the four known buckets."""


class EmptyImage(PlatefindError):
    """Input raster has zero pixels."""


class BackendFailure(PlatefindError):
    """A pluggable backend raised; carries the backend identity."""

    def __init__(self, backend_name: str, cause: BaseException):
        super().__init__(f"backend {backend_name!r} failed: {cause}")
        self.backend_name = backend_name
        self.__cause__ = cause


class MalformedAnnotation(PlatefindError):
    """Annotation document violates the supported VIA subset."""


class UnknownImage(PlatefindError):
    """Prediction references an image absent from the ground-truth universe."""


class InvalidMap(PlatefindError):
    """Detection map contains non-finite or out-of-range values."""


class DegenerateQuad(PlatefindError):
    """Quadrilateral cannot anchor a homography (collinear corners)."""


class NoCharactersFound(PlatefindError):
    """Character segmentation produced zero surviving components."""


class ModelFailure(PlatefindError):
    """Character classifier violated its contract or raised internally."""


class InsufficientData(PlatefindError):
    """Training dataset is missing or underfills a character class."""


class CorruptStore(PlatefindError):
    """Record store holds undecodable bytes before the committed tail."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class DuplicateRecordId(PlatefindError):
    """Batch would introduce a record id already present in the store."""

    def __init__(self, record_ids):
        ids = sorted(set(record_ids))
        super().__init__(f"duplicate record ids: {', '.join(ids)}")
        self.record_ids = ids


class UndecodableImage(PlatefindError):
    """Input bytes are not a decodable JPEG or PNG."""


class InvalidConfusionTable(PlatefindError):
    """Confusion-cost table violates symmetry, range, or triangle rules."""
