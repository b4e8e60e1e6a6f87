"""Exception types shared across the package."""


class InvalidInput(ValueError):
    """Malformed or out-of-contract input (CLI exit code 2)."""


class InfeasibleInstance(RuntimeError):
    """Structurally valid input on which the requested construction
    cannot run, e.g. a tree without enough splitting (CLI exit code 3)."""


class SizeCapExceeded(RuntimeError):
    """An exhaustive routine was asked to run beyond its hard size cap."""
