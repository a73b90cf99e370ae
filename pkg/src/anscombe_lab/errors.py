"""Exception types shared across the package.

Every error carries a module-qualified ``code`` so the command line front end
can report failures without inspecting exception classes.
"""


class AnscombeLabError(Exception):
    code = "anscombe_lab.Error"


class DomainMismatch(AnscombeLabError, ValueError):
    code = "metric_space.DomainMismatch"


class EmptySetWarning(UserWarning):
    """Distance to an empty test set was requested; +inf was returned."""

    code = "metric_space.EmptySet"


class UnsupportedSetForLaw(AnscombeLabError, TypeError):
    code = "distributions.UnsupportedSetForLaw"


class NotEnumerable(AnscombeLabError):
    code = "processes.NotEnumerable"


class IndexOutOfHorizon(AnscombeLabError, IndexError):
    code = "processes.IndexOutOfHorizon"


class HorizonExceeded(AnscombeLabError, IndexError):
    code = "oracle.HorizonExceeded"


class SupportTooLarge(AnscombeLabError):
    code = "oracle.SupportTooLarge"


class TheoremViolation(AnscombeLabError, AssertionError):
    """Premises of the random-index inclusion held but its conclusion failed.

    This can only be raised by an implementation error.
    """

    code = "oracle.TheoremViolation"


class ConfigParseError(AnscombeLabError):
    code = "cli.ParseError"


class ValidationError(AnscombeLabError, ValueError):
    """Collects every violation found while validating a configuration."""

    code = "cli.ValidationError"

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
