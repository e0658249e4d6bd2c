"""Exception types shared across the package."""


class MarkovMimicError(Exception):
    """Base class for all package errors."""


class GridMismatchError(MarkovMimicError):
    """Two sampled functions (or a kernel and a function) live on different grids."""


class StageError(MarkovMimicError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


class InfeasibleError(MarkovMimicError):
    """The requested boundary ratios admit no unital positive map."""


class CapExceededError(MarkovMimicError):
    """A configured size cap (index count, denominator, search space) was exceeded."""
