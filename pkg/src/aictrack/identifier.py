"""Online neural identifier of the residual dynamics f_c(x) + g(x) u."""
import numpy as np

from . import kernels
from .errors import ConfigError, IdentifierDiverged

bipolar_sigmoid = kernels.bipolar_sigmoid


class IdentifierNet:
    """Two-layer perceptron ``F(x, u) = W sigma(V [x; u])``.

    ``a_c`` is the diagonal of the Hurwitz part split out of the drift; the
    net only has to learn what is left. Updates act in place.
    """

    def __init__(self, W, V, a_c, eta1, eta2, rho=0.0):
        self.W = np.array(W, dtype=float)
        self.V = np.array(V, dtype=float)
        self.a_c = np.array(a_c, dtype=float)
        self.n_x, self.hidden = self.W.shape
        if self.V.shape[0] != self.hidden or self.V.shape[1] <= self.n_x:
            raise ConfigError(f"V has shape {self.V.shape}, W has shape {self.W.shape}", "identifier")
        if self.a_c.shape != (self.n_x,) or np.any(self.a_c >= 0):
            raise ConfigError("A_c diagonal must have n_x strictly negative entries", "identifier.a_c")
        if rho < 0:
            raise ConfigError("rho must be non-negative", "identifier.rho")
        self.n_u = self.V.shape[1] - self.n_x
        self.eta1, self.eta2, self.rho = float(eta1), float(eta2), float(rho)

    @classmethod
    def initialize(cls, n_x, n_u, hidden, a_c, eta1, eta2, rho=0.0, rng=None, scale=0.1):
        rng = np.random.default_rng(0) if rng is None else rng
        W = rng.uniform(-scale, scale, (n_x, hidden))
        V = rng.uniform(-scale, scale, (hidden, n_x + n_u))
        return cls(W, V, a_c, eta1, eta2, rho)

    def _x_bar(self, x_s, u_c):
        return np.concatenate((np.asarray(x_s, dtype=float), np.asarray(u_c, dtype=float)))

    def forward(self, x_s, u_c):
        return kernels.two_layer_forward(self.W, self.V, self._x_bar(x_s, u_c))[0]

    def predict_state(self, x_s, u_c, dt):
        x_s = np.asarray(x_s, dtype=float)
        return x_s + dt * (self.a_c * x_s + self.forward(x_s, u_c))

    def predict_tracking_error(self, x_s, u_c, x_d_next, dt):
        return self.predict_state(x_s, u_c, dt) - np.asarray(x_d_next, dtype=float)

    def mixture_prediction(self, x_s, u_c, gamma_bar_c, dt):
        """Expected next state over the actuator pass/drop branches."""
        if not 0.0 <= gamma_bar_c <= 1.0:
            raise ConfigError(f"gamma_bar_c={gamma_bar_c} outside [0, 1]", "gamma_bar_c")
        with_u = self.predict_state(x_s, u_c, dt)
        without = self.predict_state(x_s, np.zeros(self.n_u), dt)
        return gamma_bar_c * with_u + (1.0 - gamma_bar_c) * without

    def update(self, x_tilde, x_bar, dt):
        W, V = kernels.identifier_step(
            self.W, self.V, np.asarray(x_tilde, dtype=float), np.asarray(x_bar, dtype=float),
            self.a_c, self.eta1, self.eta2, self.rho, float(dt),
        )
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(V))):
            raise IdentifierDiverged("identifier weights became non-finite")
        self.W, self.V = W, V
        return self

    def input_jacobian(self, x_s, u_c):
        """dF/d[x; u], shape n_x by (n_x + n_u)."""
        return kernels.two_layer_jacobian(self.W, self.V, self._x_bar(x_s, u_c))

    def control_jacobian(self, x_s, u_c):
        return self.input_jacobian(x_s, u_c)[:, self.n_x:]

    def copy(self):
        return IdentifierNet(self.W, self.V, self.a_c, self.eta1, self.eta2, self.rho)
