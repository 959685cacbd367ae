"""Exception types raised across the package."""

import numpy as np


class NotDecomposableError(ValueError):
    """Raised when an operation needs a chordal graph and gets something else."""


class RankDeficientError(np.linalg.LinAlgError):
    """The selected spline design ``U_gamma`` does not have full column rank.

    The offending inclusion vector is kept on ``.gamma`` so callers (the
    sampler in particular) can report which proposal failed.
    """

    def __init__(self, gamma, message=None):
        self.gamma = np.asarray(gamma, dtype=bool).copy()
        if message is None:
            idx = np.flatnonzero(self.gamma).tolist()
            message = f"U_gamma^T U_gamma is not positive definite for predictors {idx}"
        super().__init__(message)


class ChainError(RuntimeError):
    """A chain stopped on a numerical failure.

    ``.trace`` holds the records written before the failure and
    ``.iteration`` the iteration at which it happened.
    """

    def __init__(self, message, trace=None, iteration=None):
        super().__init__(message)
        self.trace = trace
        self.iteration = iteration

    def __reduce__(self):
        return (type(self), (str(self), self.trace, self.iteration))
