class CACError(Exception):
    """Base class for errors raised by adaptive_cac."""


class ValidationError(CACError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations) or "invalid input")


class InfeasibleStateError(CACError):
    pass


class GuardTooLargeError(CACError):
    pass


class DegenerateChainError(CACError):
    pass


class ScenarioError(CACError):
    pass
