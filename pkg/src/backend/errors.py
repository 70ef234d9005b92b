"""Exception types shared by the backend modules and mapped to exit codes by main.py."""

from typing import Optional


class PUSelectError(Exception):
    """Base error carrying a machine-readable code and a process exit code."""

    exit_code = 1

    def __init__(self, message: str, code: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.code = code or self.__class__.__name__

    def __str__(self):
        return f"[{self.code}] {self.message}"


class ConfigError(PUSelectError):
    exit_code = 2


class DataError(PUSelectError):
    exit_code = 3


class ObjectiveError(PUSelectError):
    exit_code = 1


class ClusteringError(PUSelectError):
    exit_code = 1
