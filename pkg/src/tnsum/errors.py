"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Operand dimensions are incompatible."""


class ModeError(ValueError):
    """A mode index is outside ``[0, order)``."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap before converging."""


class DegenerateSampleError(ValueError):
    """A sample (or core) has zero norm and cannot be normalized."""


class DatasetError(ValueError):
    """A dataset, manifest or split is malformed."""
