"""Exception types shared across the package."""


class KwraceError(Exception):
    """Base class; the CLI maps subclasses onto exit codes."""

    exit_code = 3


class InputError(KwraceError):
    exit_code = 1


class DimensionMismatch(InputError):
    pass


class CertificationError(KwraceError):
    """A numerical certificate could not be established."""

    exit_code = 2


class PrecisionTooLow(CertificationError):
    pass


class InconsistentLattice(CertificationError):
    pass


class NotRealOnTorus(InputError):
    pass


class CosetOutOfRange(InputError):
    pass


class NotDegenerate(InputError):
    pass


class TieMassWarning(CertificationError):
    """Too many sampled points fell inside the numerical tie band."""


class UnsupportedRelationShape(CertificationError):
    pass


class RHViolation(InputError):
    pass


class MissingZetaNumerator(InputError):
    pass


class UnsupportedField(InputError):
    pass


class AmbiguousPattern(InputError):
    pass


class HypothesisUnverified(CertificationError):
    pass


class NotDirectSum(CertificationError):
    pass
