"""Exception types shared across the package."""
import numpy as np


class NotPositiveDefinite(np.linalg.LinAlgError):
    """A Cholesky pivot fell below the positive-definiteness tolerance."""


class RankDeficient(np.linalg.LinAlgError):
    """A Householder step met a zero column."""


class SingularR(np.linalg.LinAlgError):
    """An upper-triangular factor has a (numerically) zero diagonal entry."""


class SingularSystem(np.linalg.LinAlgError):
    """A linear solve failed or produced an unacceptable residual."""


class DimensionMismatch(ValueError):
    pass


class InvalidParameter(ValueError):
    pass


class InvalidMode(ValueError):
    pass


class GridMismatch(ValueError):
    pass


class MeshError(ValueError):
    pass
