"""Exception hierarchy and the exit-code registry used by the CLI."""

from dataclasses import dataclass
from typing import Optional


class ReinforcedError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ReinforcedError):
    """Invalid configuration; ``field`` names the offending setting."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class IncompatibleConfigError(ConfigError):
    """The experiment mode cannot run with the supplied profile."""


class DomainError(ReinforcedError, ValueError):
    """Argument outside the domain of a special function."""


class InvalidPathError(ReinforcedError, ValueError):
    """Path is not a nearest-neighbour path on the half-line started at 0."""


class EnumerationLimitError(ReinforcedError):
    """Exact enumeration requested beyond the supported path length."""


class NoRegimeError(ReinforcedError):
    """The (alpha, beta) pair lies outside every asymptotic case row."""


class ResistanceOverflowError(ReinforcedError, OverflowError):
    """T(x) left the floating range; ``x`` is the first offending site."""

    def __init__(self, x: int):
        self.x = x
        super().__init__(f"expected hitting time overflows the floating range at x={x}")


class OracleFailure(ReinforcedError):
    """An exact or statistical property check failed."""


@dataclass
class ExInfo:
    name: str
    exit_code: int
    description: Optional[str]


EXCEPTIONS = [
    ExInfo("ConfigError", 2, None),
    ExInfo(
        "IncompatibleConfigError",
        2,
        "The experiment mode does not accept this weight profile.",
    ),
    ExInfo("DomainError", 2, None),
    ExInfo("InvalidPathError", 2, "Paths start at 0 and move by +-1 without going negative."),
    ExInfo("NoRegimeError", 2, "No asymptotic predictor is known for this (alpha, beta)."),
    ExInfo(
        "EnumerationLimitError",
        2,
        "Exact enumeration is capped; use `simulate` for longer walks.",
    ),
    ExInfo("ResistanceOverflowError", 1, None),
    ExInfo("OracleFailure", 3, "The outputs and manifest were written; inspect them for the failing rows."),
]


class ExitCodes:
    exception_info = {exi.name: exi for exi in EXCEPTIONS}

    def get_ex_info(self, ex: BaseException) -> ExInfo:
        """Return the ExInfo for an exception instance, walking its MRO."""
        for cls in type(ex).__mro__:
            info = self.exception_info.get(cls.__name__)
            if info is not None:
                return info
        return ExInfo(type(ex).__name__, 1, None)

    def exit_code_for(self, ex: BaseException) -> int:
        return self.get_ex_info(ex).exit_code
