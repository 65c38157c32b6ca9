"""Exception types shared across the package."""


class TreeoptError(Exception):
    """Base class for all package errors."""


class LoadError(TreeoptError):
    """A model document failed validation. Carries a stable error code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class DomainError(TreeoptError):
    """A raw input vector lies outside a variable's domain."""


class EncodingError(TreeoptError):
    """A binary encoding violates the ladder / one-hot structure."""


class ConfigError(TreeoptError):
    """Invalid run, instance, or collapse configuration."""


class SolveError(TreeoptError):
    """Internal solver failure (cut loop, singular basis, unbounded LP)."""
