"""Truncated-power (linear) spline design matrices.

For predictors ``X`` (n x p) and knots ``w_1 < ... < w_k`` the design is laid
out basis-by-basis::

    U = [X, (X - w_1)_+, ..., (X - w_k)_+]        # n x p(k+1)

so predictor ``i`` owns columns ``i, p + i, ..., k p + i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SplineBasis", "DesignMatrix", "even_knots", "build_basis", "select_columns", "basis_functions"]


def even_knots(k, lo=-1.0, hi=1.0):
    """``k`` interior knots splitting ``(lo, hi)`` into ``k + 1`` equal intervals."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if not hi > lo:
        raise ValueError("need hi > lo")
    return lo + (hi - lo) * np.arange(1, k + 1) / (k + 1)


def _check_knots(knots):
    w = np.atleast_1d(np.asarray(knots, dtype=float))
    if w.ndim != 1:
        raise ValueError("knots must be a vector")
    if not np.all(np.isfinite(w)):
        raise ValueError("knots must be finite")
    if np.any(np.diff(w) <= 0):
        raise ValueError("knots must be strictly increasing")
    return w


@dataclass(frozen=True)
class SplineBasis:
    knots: np.ndarray
    n_predictors: int

    def __post_init__(self):
        object.__setattr__(self, "knots", _check_knots(self.knots))

    @property
    def k(self):
        return self.knots.size

    @property
    def group_size(self):
        return self.knots.size + 1


def basis_functions(x, knots):
    """Basis for one predictor evaluated at ``x``: columns ``x, (x - w_s)_+``."""
    x = np.asarray(x, dtype=float)
    w = _check_knots(knots)
    return np.column_stack([x] + [np.maximum(x - ws, 0.0) for ws in w])


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    values: np.ndarray
    basis: SplineBasis
    _groups: tuple = field(init=False, repr=False)

    def __post_init__(self):
        p, m = self.basis.n_predictors, self.basis.group_size
        if self.values.shape[1] != p * m:
            raise ValueError("design width does not match basis")
        self.values.setflags(write=False)
        groups = tuple(np.arange(m) * p + i for i in range(p))
        object.__setattr__(self, "_groups", groups)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.basis.n_predictors

    @property
    def k(self):
        return self.basis.k

    @property
    def column_groups(self):
        """Map predictor index -> its ``k + 1`` column indices in ``values``."""
        return {i: g for i, g in enumerate(self._groups)}

    def column_mask(self, gamma):
        gamma = np.asarray(gamma, dtype=bool)
        if gamma.shape != (self.p,):
            raise ValueError(f"gamma must have length {self.p}")
        return np.tile(gamma, self.basis.group_size)

    def columns(self, gamma):
        """Indices of the columns selected by ``gamma`` in design order."""
        return np.flatnonzero(self.column_mask(gamma))


def build_basis(X, knots) -> DesignMatrix:
    """Truncated-power design for every column of ``X``.

    Centering ``X`` is left to the caller.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("X must be a matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite entries")
    basis = SplineBasis(knots, X.shape[1])
    blocks = [X] + [np.maximum(X - w, 0.0) for w in basis.knots]
    return DesignMatrix(np.ascontiguousarray(np.hstack(blocks)), basis)


def select_columns(U: DesignMatrix, gamma) -> np.ndarray:
    """``U_gamma``: all basis columns of the selected predictors.

    Columns keep their order in ``U`` so that ``gamma`` all ones returns
    ``U`` itself; an all-zero ``gamma`` gives an ``n x 0`` matrix.
    """
    return U.values[:, U.column_mask(gamma)]
