"""Affine plants x' = f(x) + g(x) u, the benchmark systems, and forward Euler."""
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .errors import ConfigError, DynamicsBlowup

STATE_ENVELOPE = 1e6


@dataclass(frozen=True)
class PlantModel:
    name: str
    n_x: int
    n_u: int
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    # diagonal of the Hurwitz split A_c (strictly negative entries)
    a_c: np.ndarray = field(default=None)

    def __post_init__(self):
        a_c = -np.ones(self.n_x) if self.a_c is None else np.asarray(self.a_c, dtype=float)
        if a_c.shape != (self.n_x,):
            raise ConfigError(f"expected {self.n_x} diagonal entries, got shape {a_c.shape}", "plant.a_c")
        if np.any(a_c >= 0) or not np.all(np.isfinite(a_c)):
            raise ConfigError("A_c diagonal must be strictly negative (Hurwitz)", "plant.a_c")
        object.__setattr__(self, "a_c", a_c)

    @property
    def A_c(self):
        return np.diag(self.a_c)

    def f_c(self, x):
        """Residual drift f(x) - A_c x that the identifier has to learn."""
        x = np.asarray(x, dtype=float)
        return eval_f(self, x) - self.a_c * x


@dataclass(frozen=True)
class ReferenceTrajectory:
    x_d: Callable[[float], np.ndarray]
    x_d_dot: Callable[[float], np.ndarray]

    def __call__(self, t):
        return self.x_d(t)


@dataclass
class SimState:
    t: float
    x: np.ndarray


@dataclass(frozen=True)
class VsmParams:
    """Virtual synchronous machine constants (per unit unless noted).

    None of these come with the published case study; they are stand-ins.
    ``p_imbalance`` is the power step applied at t=0 and is chosen larger
    than ``p_max`` so the open loop loses synchronism.
    """

    omega_nom: float = 2 * np.pi * 50.0  # rad/s
    damping: float = 0.5
    inertia: float = 0.1  # s
    p_max: float = 1.0
    p_imbalance: float = 4.0

    def __post_init__(self):
        if self.inertia <= 0:
            raise ConfigError("inertia must be positive", "vsm.inertia")
        if self.omega_nom <= 0:
            raise ConfigError("omega_nom must be positive", "vsm.omega_nom")


def _checked(name, values):
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise DynamicsBlowup(f"{name}{list(map(int, idx))} is {values[tuple(idx)]}")
    return values


def eval_f(plant, x):
    x = np.asarray(x, dtype=float)
    return _checked("f", np.asarray(plant.f(x), dtype=float))


def eval_g(plant, x):
    x = np.asarray(x, dtype=float)
    return _checked("g", np.asarray(plant.g(x), dtype=float).reshape(plant.n_x, plant.n_u))


def state_derivative(plant, x, u):
    return eval_f(plant, x) + eval_g(plant, x) @ np.asarray(u, dtype=float)


def step_euler(plant, s, u, dt, envelope=STATE_ENVELOPE):
    if dt <= 0:
        raise ConfigError("dt must be positive", "dt")
    u = np.asarray(u, dtype=float)
    if u.shape != (plant.n_u,):
        raise ConfigError(f"input has shape {u.shape}, plant expects ({plant.n_u},)", "u")
    with np.errstate(over="ignore", invalid="ignore"):
        x_next = s.x + dt * state_derivative(plant, s.x, u)
    _checked("x", x_next)
    norm = np.linalg.norm(x_next)
    if norm > envelope:
        raise DynamicsBlowup(f"|x| = {norm:.3g} left the state envelope {envelope:.3g}")
    return SimState(s.t + dt, x_next)


def reference_at(traj, t):
    return traj.x_d(t), traj.x_d_dot(t)


def _sine_reference(x1_amplitude=1.0):
    a = x1_amplitude

    def x_d(t):
        return np.array([a * np.sin(t), np.cos(t) + np.sin(t)])

    def x_d_dot(t):
        return np.array([a * np.cos(t), -np.sin(t) + np.cos(t)])

    return ReferenceTrajectory(x_d, x_d_dot)


def _constant_reference(value):
    value = np.asarray(value, dtype=float)
    return ReferenceTrajectory(lambda t: value.copy(), lambda t: np.zeros_like(value))


# MIMO input gain 1 + x1 vanishes at x1 = -1; the unit-amplitude sine would
# demand unbounded control there, so the MIMO reference halves x1.
MIMO_X1_AMPLITUDE = 0.5

BENCHMARKS = ("simo", "mimo", "vsm")


def make_benchmark(name, params=None, a_c=None):
    """Return ``(plant, reference)`` for one of the benchmark systems."""
    if name == "simo":
        plant = PlantModel("simo", 2, 1, kernels.simo_f, kernels.simo_g, a_c)
        return plant, _sine_reference()
    if name == "mimo":
        plant = PlantModel("mimo", 2, 2, kernels.mimo_f, kernels.mimo_g, a_c)
        return plant, _sine_reference(MIMO_X1_AMPLITUDE)
    if name == "vsm":
        p = params if params is not None else VsmParams()
        h, d, pm, pi = float(p.inertia), float(p.damping), float(p.p_max), float(p.p_imbalance)
        plant = PlantModel(
            "vsm", 2, 1,
            lambda x: kernels.vsm_f(x, h, d, pm, pi),
            lambda x: kernels.vsm_g(x, h),
            a_c,
        )
        # frequency regulation: zero load angle, zero speed deviation
        return plant, _constant_reference([0.0, 0.0])
    raise ConfigError(f"unknown benchmark {name!r}; expected one of {', '.join(BENCHMARKS)}", "benchmark")


def vsm_frequency_hz(x, params=None):
    """Electrical frequency in Hz from a VSM state (or an array of states)."""
    p = params if params is not None else VsmParams()
    x = np.asarray(x, dtype=float)
    return (p.omega_nom + x[..., 1]) / (2 * np.pi)


def g_norm_envelope(plant, lows, highs, points=10_000):
    """Max spectral norm of g over a regular grid covering the box [lows, highs]."""
    lows = np.asarray(lows, dtype=float)
    highs = np.asarray(highs, dtype=float)
    per_axis = max(2, int(round(points ** (1.0 / plant.n_x))))
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(lows, highs)]
    worst = 0.0
    for x in np.array(np.meshgrid(*axes)).reshape(plant.n_x, -1).T:
        worst = max(worst, np.linalg.norm(eval_g(plant, x), 2))
    return worst
