"""Policy network mapping the estimated tracking error to a command."""
import numpy as np

from . import kernels
from .errors import ActorDiverged, ConfigError


def bracket_term(critic_grad, id_control_jac, R, u_c, dt):
    """d/du of ``dt u^T R u + V(e_next(u))``, the actor's one-step objective."""
    critic_grad = np.asarray(critic_grad, dtype=float).reshape(-1)
    J = np.atleast_2d(np.asarray(id_control_jac, dtype=float))
    u_c = np.atleast_1d(np.asarray(u_c, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if J.shape != (critic_grad.shape[0], u_c.shape[0]) or R.shape != (u_c.shape[0],) * 2:
        raise ConfigError(
            f"shapes critic_grad {critic_grad.shape}, jacobian {J.shape}, R {R.shape}, u {u_c.shape} disagree",
            "actor.bracket",
        )
    # e_next depends on u through x_hat = x + dt (A_c x + F(x, u)), hence the dt
    return dt * (critic_grad @ J) + dt * (R + R.T) @ u_c


class ActorNet:
    """``u = W sigma(V e)`` with an optional symmetric clamp on each command entry."""

    def __init__(self, W, V, eta1, eta2, clamp=None):
        self.W = np.array(W, dtype=float)
        self.V = np.array(V, dtype=float)
        self.n_u, self.hidden = self.W.shape
        if self.V.shape[0] != self.hidden:
            raise ConfigError(f"V has shape {self.V.shape}, W has shape {self.W.shape}", "actor")
        self.n_x = self.V.shape[1]
        self.eta1, self.eta2 = float(eta1), float(eta2)
        self.clamp = None if not clamp else float(clamp)
        self.last_grad_mean = 0.0

    @classmethod
    def initialize(cls, n_x, n_u, hidden, eta1, eta2, rng=None, scale=0.1, clamp=None):
        rng = np.random.default_rng(0) if rng is None else rng
        W = rng.uniform(-scale, scale, (n_u, hidden))
        V = rng.uniform(-scale, scale, (hidden, n_x))
        return cls(W, V, eta1, eta2, clamp)

    def act(self, e_hat):
        u = kernels.two_layer_forward(self.W, self.V, np.asarray(e_hat, dtype=float))[0]
        if self.clamp is not None:
            u = np.clip(u, -self.clamp, self.clamp)
        return u

    def gradients(self, bracket, e_hat):
        return kernels.actor_gradients(self.W, self.V, np.asarray(bracket, dtype=float),
                                       np.asarray(e_hat, dtype=float))

    def update(self, bracket, e_hat, dt):
        # the clamp is treated as identity here, so saturated commands still learn
        gW, gV = self.gradients(bracket, e_hat)
        W = self.W - dt * self.eta1 * gW
        V = self.V - dt * self.eta2 * gV
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(V))):
            raise ActorDiverged("actor weights became non-finite")
        self.W, self.V = W, V
        self.last_grad_mean = float((np.abs(gW).sum() + np.abs(gV).sum()) / (gW.size + gV.size))
        return self

    def copy(self):
        return ActorNet(self.W, self.V, self.eta1, self.eta2, self.clamp)
