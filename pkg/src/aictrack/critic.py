"""Linear-in-basis critic over the tracking error."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, CriticDiverged


class QuadraticBasis:
    """All degree-2 monomials e_i e_j with i <= j; for n=2 that is [e1^2, e1 e2, e2^2]."""

    def __init__(self, n_x):
        self.n_x = int(n_x)
        self.m = self.n_x * (self.n_x + 1) // 2

    def psi(self, e):
        return kernels.quadratic_features(np.asarray(e, dtype=float))

    def psi_jacobian(self, e):
        return kernels.quadratic_features_jacobian(np.asarray(e, dtype=float))

    def coefficients_of(self, Q):
        """Weights for which ``W . psi(e) == e^T Q e``."""
        Q = np.asarray(Q, dtype=float)
        return np.array([Q[i, j] if i == j else Q[i, j] + Q[j, i]
                         for i in range(self.n_x) for j in range(i, self.n_x)])


@dataclass(frozen=True)
class CostWeights:
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        for key, M in (("Q", Q), ("R", R)):
            if M.shape[0] != M.shape[1] or not np.allclose(M, M.T):
                raise ConfigError("must be a symmetric square matrix", key)
            if np.any(np.diag(M) <= 0):
                raise ConfigError("diagonal entries must be positive", key)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)


def running_cost(cw, e, u, dt):
    e = np.asarray(e, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return float((e @ cw.Q @ e + u @ cw.R @ u) * dt)


class CriticNet:
    def __init__(self, W, basis, eta_c):
        self.W = np.array(W, dtype=float).reshape(-1)
        if self.W.shape[0] != basis.m:
            raise ConfigError(f"{self.W.shape[0]} weights for a basis of size {basis.m}", "critic")
        self.basis = basis
        self.eta_c = float(eta_c)

    def value(self, e):
        return float(self.W @ self.basis.psi(e))

    def td_error(self, cost, e_now, e_next_with_u, e_next_zero_u, gamma_bar_c):
        """Bellman residual with the future value mixed over the actuator branches."""
        if not 0.0 <= gamma_bar_c <= 1.0:
            raise ConfigError(f"gamma_bar_c={gamma_bar_c} outside [0, 1]", "gamma_bar_c")
        future = gamma_bar_c * self.value(e_next_with_u) + (1.0 - gamma_bar_c) * self.value(e_next_zero_u)
        return cost + future - self.value(e_now)

    def update(self, td, e_now, dt):
        W = self.W + dt * self.eta_c * td * self.basis.psi(e_now)
        if not np.all(np.isfinite(W)):
            raise CriticDiverged("critic weights became non-finite")
        self.W = W
        return self

    def value_gradient(self, e):
        return self.W @ self.basis.psi_jacobian(e)

    def copy(self):
        return CriticNet(self.W, self.basis, self.eta_c)
