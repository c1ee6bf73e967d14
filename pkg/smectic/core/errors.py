"""Solver exceptions.

Every error carries a machine-parseable ``reason`` (``<area>:<detail>``) and the
process exit code the CLI should use when it escapes a command.
"""
from typing import Optional


class SmecticError(Exception):
    """Base error with a reason string and an exit code."""

    exit_code: int = 1

    def __init__(self, reason: str, detail: Optional[str] = None):
        self.reason = reason
        self.detail = detail or reason
        super().__init__(self.detail)


class ParameterError(SmecticError, ValueError):
    """A physical or scheme constant is out of range."""

    exit_code = 2

    def __init__(self, field: str, detail: Optional[str] = None):
        self.field = field
        super().__init__(f"param:{field}", detail or f"invalid parameter {field}")


class FieldError(SmecticError, ValueError):
    """A grid or field does not satisfy its structural contract."""

    exit_code = 2

    def __init__(self, detail: str):
        super().__init__("field:invalid", detail)


class ConfigurationError(SmecticError, ValueError):
    """A run, study or check configuration is inconsistent."""

    exit_code = 2

    def __init__(self, field: str, detail: Optional[str] = None):
        self.field = field
        super().__init__(f"config:{field}", detail or f"invalid configuration field {field}")


class DivergenceError(SmecticError, RuntimeError):
    """The discrete solution stopped being finite."""

    exit_code = 3

    def __init__(self, step: int, detail: str):
        self.step = step
        super().__init__(f"divergence:step={step}", f"step {step}: {detail}")


class ReferenceBlowUpError(SmecticError, RuntimeError):
    """The explicit reference integrator went unstable."""

    exit_code = 3

    def __init__(self, tau_micro: float, detail: str):
        self.tau_micro = tau_micro
        super().__init__("reference:unstable", detail)
