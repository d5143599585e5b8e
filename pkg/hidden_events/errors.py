# MIT License

# Copyright (c) 2024 hidden-events developers

# Errors
# ..................................................................................................................
# ..................................................................................................................

from typing import List, Optional


class HiddenEventsError(Exception):
    """Base class of the errors raised by hidden_events."""

    exit_code = 1


class ConfigError(HiddenEventsError, ValueError):
    """Invalid or incomplete run configuration."""

    exit_code = 2


class DataError(HiddenEventsError, ValueError):
    """Malformed or unusable input data."""

    exit_code = 3


class EmptyTriangleError(DataError):
    """No event is observed at the evaluation date, so nothing can be fitted."""


class FitError(HiddenEventsError, RuntimeError):
    """The exposure model could not be calibrated."""

    exit_code = 4


class NonIdentifiableError(FitError):
    def __init__(self, message: str, columns: Optional[List[str]] = None):
        super().__init__(message)
        self.columns = list(columns or [])


class ConvergenceError(FitError):
    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result
