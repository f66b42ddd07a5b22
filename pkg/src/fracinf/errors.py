"""Exception hierarchy shared by every module.

Each error carries an ``exit_code`` so the command line can map failures
onto its status contract without a lookup table.
"""


class FracInfError(Exception):
    exit_code = 3


class ConfigError(FracInfError):
    exit_code = 2


class NumericalError(FracInfError):
    exit_code = 3


class CertificationError(FracInfError):
    exit_code = 4


# operator evaluation
class GrowthViolation(NumericalError):
    pass


class MissingRegularity(NumericalError):
    pass


class DivergentIntegral(NumericalError):
    pass


class AmbiguousGradient(NumericalError):
    pass


# games and solvers
class PolicyError(NumericalError):
    pass


class KernelMassError(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class PostCheckFailure(NumericalError):
    def __init__(self, message, witnesses=None):
        super().__init__(message)
        self.witnesses = list(witnesses or [])


class AssumptionViolation(ConfigError):
    pass


class ParameterViolation(ConfigError):
    pass


class InsufficientResolution(NumericalError):
    pass


class HypothesisUnverified(NumericalError):
    pass


class UnboundedSearch(NumericalError):
    pass


# counterexample
class GeometryInfeasible(ConfigError):
    pass


class AuditFailure(CertificationError):
    pass


class RegularityFailure(CertificationError):
    pass


class CertificationFailure(CertificationError):
    def __init__(self, message, witnesses=None):
        super().__init__(message)
        self.witnesses = list(witnesses or [])


class NoPositiveEpsilon(CertificationError):
    pass
