"""Exception types and the CLI exit-code taxonomy."""


class DemonSimError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(DemonSimError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ConfigError(DemonSimError):
    """Invalid experiment configuration; collects every violation found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ScheduleError(DemonSimError, ValueError):
    """A subtraction schedule violates a step-compatibility rule."""


class TruncationError(DemonSimError):
    """Probability mass lost past the truncation level exceeds its tolerance."""


class NoExcitationPossible(DemonSimError):
    """The distribution has no support the coupling can act on."""


class NoLocalMaximum(DemonSimError):
    """The success probability never rises and falls inside the scan window."""


class ZeroProbabilityOutcome(DemonSimError):
    """Conditioning on a measurement outcome of (numerically) zero probability."""


class ProtocolError(DemonSimError):
    """A step of a schedule failed; carries the 1-based round index."""

    def __init__(self, round_index, cause):
        self.round_index = round_index
        self.cause = cause
        super().__init__(f"round {round_index}: {cause}")


# CLI exit codes
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the documented CLI exit code."""
    if isinstance(exc, ProtocolError):
        exc = exc.cause
    if isinstance(exc, (TruncationError, NoLocalMaximum, ZeroProbabilityOutcome)):
        return EXIT_NUMERICAL
    if isinstance(exc, (DomainError, ConfigError, ScheduleError, NoExcitationPossible)):
        return EXIT_VALIDATION
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_VALIDATION
