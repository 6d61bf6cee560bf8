"""Exception types shared across the package."""


class ConstraintViolation(Exception):
    """A mathematical precondition or guarantee failed.

    Raised when e.g. a step-size/level pair cannot represent the data it is
    asked to quantize, a path-length guarantee is not met, or a closed-form
    bound is evaluated outside its hypotheses.
    """


class VariationBoundError(ConstraintViolation):
    """Ordering heuristic produced a path longer than the guaranteed limit."""

    def __init__(self, achieved: float, limit: float):
        self.achieved = achieved
        self.limit = limit
        super().__init__(
            f"frame variation {achieved:.6g} exceeds the guaranteed limit {limit:.6g}"
        )


class FileFormatError(Exception):
    """A binary payload does not match the expected on-disk format."""
