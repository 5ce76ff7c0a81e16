"""Dense shadow tracking for verifying fast-filter runs.

Test-mode machinery: a ``DenseShadow`` replays the covariance recursion
densely from the residual sequence a fast filter produced, recomputing the
upper-triangular square root from scratch each step.  Because that square
root is unique, it must coincide with the one the fast filter tracks
implicitly, which makes the displacement identity directly checkable.
Nothing here is needed on the production path.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .displacement import EvdGenerator, dense_displacement
from .model import StateSpaceModel
from .srdf import TriangularAdvance, ut_cholesky
from .validation import as_complex_matrix, as_complex_vector


class DenseShadow:
    """Dense mirror of a fast-filter run, driven by its residuals."""

    def __init__(self, model: StateSpaceModel, P0, delta: float, z1=None):
        self.A = model.A
        self.b = model.b
        self.delta = float(delta)
        self.Phat = as_complex_matrix(P0, (model.n, model.n), name="P0").copy()
        self.R = ut_cholesky(self.Phat)
        if z1 is None:
            self.zhat = np.zeros(model.n, dtype=complex)
        else:
            self.zhat = as_complex_vector(z1, model.n, name="z1").copy()

    def step(self, eps: complex) -> None:
        """Fold in the regressor used at this step, then advance it with ``eps``."""
        Phat = self.delta * self.Phat + np.outer(self.zhat, self.zhat.conj())
        self.Phat = 0.5 * (Phat + Phat.conj().T)
        self.R = ut_cholesky(self.Phat)
        self.zhat = self.A @ self.zhat + self.b * eps

    def transformed_displacement(self) -> np.ndarray:
        disp = dense_displacement(self.Phat, self.A, self.delta)
        tmp = scipy.linalg.solve_triangular(self.R, disp, lower=False)
        Yd = scipy.linalg.solve_triangular(self.R, tmp.conj().T, lower=False).conj().T
        return 0.5 * (Yd + Yd.conj().T)

    def displacement_residual(self, gen: EvdGenerator) -> float:
        """Frobenius gap between the filter's generator and the dense identity."""
        return float(np.linalg.norm(self.transformed_displacement() - gen.reconstruct(), "fro"))

    def advance_residual(self, advance: TriangularAdvance) -> float:
        """Frobenius gap between the factored advance and dense ``R^-1 A R``."""
        dense = scipy.linalg.solve_triangular(self.R, self.A @ self.R, lower=False)
        return float(np.linalg.norm(advance.to_dense() - dense, "fro"))
