"""Exceptions shared across the package."""


class InputError(ValueError):
    """Raised when caller-supplied data violates a documented precondition.

    The CLI maps this to exit code 1; anything else escaping a subcommand
    is treated as an internal error (exit code 2).
    """
