"""Exception types shared across the package."""


class EcgFusionError(Exception):
    """Base class for all errors raised by ecgfusion."""


# dsp
class EmptySignal(EcgFusionError, ValueError):
    pass


class BandTooWide(EcgFusionError, ValueError):
    pass


class LengthMismatch(EcgFusionError, ValueError):
    pass


# nn
class ShapeMismatch(EcgFusionError, ValueError):
    pass


class InvalidLevel(EcgFusionError, ValueError):
    pass


# file formats
class FormatError(EcgFusionError):
    """A model or dataset file could not be decoded."""


class BadMagic(FormatError):
    pass


class VersionUnsupported(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class RaggedCsvRow(FormatError):
    def __init__(self, line: int, message: str = ""):
        self.line = line
        super().__init__(message or f"ragged CSV row at line {line}")


class BadLabel(FormatError):
    def __init__(self, line: int, message: str = ""):
        self.line = line
        super().__init__(message or f"bad label at line {line}")


# optim
class LabelOutOfRange(EcgFusionError, ValueError):
    pass


class NonFiniteGradient(EcgFusionError, FloatingPointError):
    pass


class EmptyDataset(EcgFusionError, ValueError):
    pass


class DivergenceDetected(EcgFusionError, FloatingPointError):
    pass


# data
class InvalidDuration(EcgFusionError, ValueError):
    pass


class NotPowerOfTwoLength(EcgFusionError, ValueError):
    pass


# fusion
class SegmentCountMismatch(EcgFusionError, ValueError):
    pass


class NotOnSimplex(EcgFusionError, ValueError):
    pass
