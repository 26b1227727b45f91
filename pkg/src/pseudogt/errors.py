"""Exception hierarchy shared by every stage of the pipeline."""


class PseudoGTError(Exception):
    """Base class. ``code`` is the machine-readable name used in CLI error records."""

    @property
    def code(self):
        return type(self).__name__


class ShapeMismatch(PseudoGTError, ValueError):
    pass


# tensor codec
class BadMagic(PseudoGTError, ValueError):
    pass


class TruncatedPayload(PseudoGTError, ValueError):
    pass


class UnknownDtype(PseudoGTError, ValueError):
    pass


class UnsupportedDtype(PseudoGTError, TypeError):
    pass


# depth adaptation
class DegenerateRange(PseudoGTError, ValueError):
    pass


class EmptyInput(PseudoGTError, ValueError):
    pass


class EmptyBatch(PseudoGTError, ValueError):
    pass


class NonFinite(PseudoGTError, ValueError):
    pass


class NonFiniteGradient(PseudoGTError, ArithmeticError):
    pass


class DivergenceDetected(PseudoGTError, ArithmeticError):
    pass


# fusion
class EmptySegment(PseudoGTError, ValueError):
    pass


class InvalidProfile(PseudoGTError, ValueError):
    pass


# losses
class BadDistribution(PseudoGTError, ValueError):
    pass


class AllPixelsUnknown(PseudoGTError, ValueError):
    pass


# evaluation
class EmptyMatrix(PseudoGTError, ValueError):
    pass


class PerClassRequiresGt(PseudoGTError, ValueError):
    pass


class MissingCoverRatio(PseudoGTError, ValueError):
    pass


class EmptyMask(PseudoGTError, ValueError):
    pass


# fixtures / cli
class BadSpec(PseudoGTError, ValueError):
    pass


class ConfigError(PseudoGTError, ValueError):
    pass
