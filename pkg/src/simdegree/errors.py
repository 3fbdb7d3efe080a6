"""Exception hierarchy. Each family maps to one CLI exit status."""


class SimDegreeError(Exception):
    exit_code = 1


class ParameterError(SimDegreeError, ValueError):
    """A parameter lies outside its admissible domain."""

    exit_code = 2


class DomainError(ParameterError):
    """An argument lies outside the domain of a function or branch."""


class UndefinedAverageError(ParameterError):
    """Weighted average requested over an all-zero profile."""


class AtThresholdError(DomainError):
    """The limit is not single-valued at r = r_cr."""


class CurvatureError(DomainError):
    """Laplace summation needs a strict interior maximum (f'' < 0)."""


class RegimeError(SimDegreeError):
    """The (k, q, d) triple has no two-root structure, so no transition."""

    exit_code = 3

    def __init__(self, message, r_prime_at_s02=None):
        super().__init__(message)
        self.r_prime_at_s02 = r_prime_at_s02


class NumericalRegimeError(SimDegreeError, ArithmeticError):
    """A sign condition needed for bracketing did not hold."""

    exit_code = 3


class VerificationError(SimDegreeError):
    exit_code = 4


class BudgetError(SimDegreeError):
    """Enumeration would exceed the configured budget."""

    exit_code = 5

    def __init__(self, message, required=None, budget=None):
        super().__init__(message)
        self.required = required
        self.budget = budget
