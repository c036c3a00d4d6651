"""Exception types shared across the package."""


class DegenerateInputError(ValueError):
    """Raised when a text normalizes to nothing usable (e.g. empty after tokenization)."""


class TrainingError(RuntimeError):
    """Raised when a training run diverges (non-finite loss) or violates its loss contract."""
