"""Exception hierarchy.

Every error raised by the package derives from :class:`DualFlowError`, so the
CLI can map any of them to exit code 3 and report the class name.
"""


class DualFlowError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(DualFlowError, ValueError):
    pass


class DomainViolation(DualFlowError, ValueError):
    """Argument lies outside dom(dJ*) beyond the allowed tolerance."""


class Unsupported(DualFlowError, NotImplementedError):
    pass


class NonPositiveStep(DualFlowError, ValueError):
    pass


class CertificateFailure(DualFlowError, RuntimeError):
    pass


class RankDeficient(DualFlowError, RuntimeError):
    pass


class MissingCertificate(DualFlowError, ValueError):
    pass


class ZeroNoise(DualFlowError, ValueError):
    """An oracle quantity proportional to 1/delta was requested with delta = 0."""


class MissingSnapshot(DualFlowError, KeyError):
    pass


class InnerSolverStall(DualFlowError, RuntimeError):
    pass


class SolverStall(DualFlowError, RuntimeError):
    pass
