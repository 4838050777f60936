"""Small shared validity-report type."""

from dataclasses import dataclass


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    code: str | None = None
    detail: str = ""

    def __bool__(self):
        return self.ok


def valid() -> ValidationResult:
    return ValidationResult(True)


def invalid(code: str, detail: str = "") -> ValidationResult:
    return ValidationResult(False, code, detail)
