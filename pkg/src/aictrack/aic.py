"""Closed-loop actor/identifier/critic controller and the episode loop."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .actor import ActorNet, bracket_term
from .channels import DropoutChannel, substream
from .critic import CostWeights, CriticNet, QuadraticBasis, running_cost
from .dynamics import MIMO_X1_AMPLITUDE, STATE_ENVELOPE, SimState, eval_g, make_benchmark, step_euler
from .errors import (ActorDiverged, CriticDiverged, DivergenceError, DynamicsBlowup,
                     IdentifierDiverged)
from .identifier import IdentifierNet

STAGES = ("resolve", "act", "predict", "critic", "identifier", "actor")


class AicController:
    """Holds the three networks plus the cached prediction used when a measurement is lost.

    ``gamma_bar_c`` is the controller's belief about the actuator pass
    probability; the realised gates are never visible here.
    """

    def __init__(self, identifier, critic, actor, cost, gamma_bar_c, trace=False):
        self.identifier = identifier
        self.critic = critic
        self.actor = actor
        self.cost = cost
        self.gamma_bar_c = float(gamma_bar_c)
        self.last_prediction = None
        self.last_x_bar = None
        self.trace = [] if trace else None

    @classmethod
    def from_config(cls, cfg, plant, trace=False):
        n_x, n_u = plant.n_x, plant.n_u
        identifier = IdentifierNet.initialize(
            n_x, n_u, cfg.h_i, plant.a_c, cfg.eta_i1, cfg.eta_i2, cfg.rho,
            rng=substream(cfg.seed, "identifier"), scale=cfg.init_identifier,
        )
        actor = ActorNet.initialize(
            n_x, n_u, cfg.h_a, cfg.eta_a1, cfg.eta_a2,
            rng=substream(cfg.seed, "actor"), scale=cfg.init_actor, clamp=cfg.clamp,
        )
        cost = CostWeights(np.diag(cfg.q), np.diag(cfg.r))
        basis = QuadraticBasis(n_x)
        w0 = basis.coefficients_of(cost.Q) if cfg.critic_init == "cost" else np.zeros(basis.m)
        critic = CriticNet(w0, basis, cfg.eta_c)
        return cls(identifier, critic, actor, cost, cfg.belief_c, trace=trace)

    def _mark(self, stage):
        if self.trace is not None:
            self.trace.append(stage)


def control_step(ctrl, measurement, x_d_now, x_d_next, dt):
    """Advance the controller by one sample.

    ``measurement`` is the received state, or ``None`` when the sensor packet
    was lost. Returns ``(u_c, fragment)`` where ``fragment`` holds the
    per-step quantities the log records.
    """
    idn, critic, actor, g = ctrl.identifier, ctrl.critic, ctrl.actor, ctrl.gamma_bar_c
    x_d_now = np.asarray(x_d_now, dtype=float)

    # 1. measurement, else the last one-step prediction (x_d before any exists)
    if measurement is not None:
        x_used = np.asarray(measurement, dtype=float)
    elif ctrl.last_prediction is not None:
        x_used = ctrl.last_prediction
    else:
        x_used = x_d_now.copy()
    ctrl._mark("resolve")

    # 2. command from the estimated tracking error
    e_hat = x_used - x_d_now
    u_c = actor.act(e_hat)
    ctrl._mark("act")

    # 3. predicted next error for the pass and drop branches
    zero_u = np.zeros_like(u_c)
    pred_u = idn.predict_state(x_used, u_c, dt)
    pred_0 = idn.predict_state(x_used, zero_u, dt)
    e_next_u = pred_u - x_d_next
    e_next_0 = pred_0 - x_d_next
    ctrl._mark("predict")

    # 4. critic
    value = critic.value(e_hat)
    td = critic.td_error(running_cost(ctrl.cost, e_hat, u_c, dt), e_hat, e_next_u, e_next_0, g)
    critic.update(td, e_hat, dt)
    ctrl._mark("critic")

    # 5. identifier: compare with what it predicted last step, then cache
    x_tilde_norm = np.nan
    if measurement is not None and ctrl.last_prediction is not None:
        x_tilde = x_used - ctrl.last_prediction
        x_tilde_norm = float(np.linalg.norm(x_tilde))
        idn.update(x_tilde, ctrl.last_x_bar, dt)
    ctrl.last_prediction = g * pred_u + (1.0 - g) * pred_0
    x_bar = np.concatenate((x_used, u_c))
    ctrl.last_x_bar = x_bar
    ctrl._mark("identifier")

    # 6. actor, through the refreshed identifier and critic
    J_u = idn.control_jacobian(x_used, u_c)
    bracket = bracket_term(critic.value_gradient(e_next_u), J_u, ctrl.cost.R, u_c, dt)
    actor.update(bracket, e_hat, dt)
    ctrl._mark("actor")

    return u_c, {
        "x_used": x_used, "e_hat": e_hat, "td": td, "value": value,
        "x_tilde_norm": x_tilde_norm, "control_jacobian": J_u,
    }


@dataclass
class StepRecord:
    t: float
    x_true: np.ndarray
    x_d: np.ndarray
    gamma_s: int
    gamma_c: int
    x_used: np.ndarray
    e_hat: np.ndarray
    u_c: np.ndarray
    u_applied: np.ndarray
    td: float
    value: float
    x_tilde_norm: float
    w_i_norm: float
    v_i_norm: float
    w_c_norm: float
    w_a_norm: float
    v_a_norm: float
    actor_grad_mean: float


class TrajectoryLog:
    """Column store of per-step records plus run metadata.

    Arrays are preallocated for ``capacity`` steps; ``len(log)`` is the
    number actually filled. ``alignment`` is the cosine between the
    identifier's control Jacobian and the true input gain (worst input
    column), kept for diagnostics but not part of the CSV schema.
    """

    VECTOR = ("x_true", "x_d", "x_used", "e_hat")
    CONTROL = ("u_c", "u_applied")
    SCALAR = ("t", "td", "value", "x_tilde_norm", "w_i_norm", "v_i_norm", "w_c_norm",
              "w_a_norm", "v_a_norm", "actor_grad_mean", "alignment")

    def __init__(self, capacity, n_x, n_u, dt, meta=None):
        self.n_x, self.n_u, self.dt = n_x, n_u, dt
        self.meta = dict(meta or {})
        self.n = 0
        for name in self.VECTOR:
            setattr(self, name, np.zeros((capacity, n_x)))
        for name in self.CONTROL:
            setattr(self, name, np.zeros((capacity, n_u)))
        for name in self.SCALAR:
            setattr(self, name, np.zeros(capacity))
        self.gamma_s = np.zeros(capacity, dtype=np.int8)
        self.gamma_c = np.zeros(capacity, dtype=np.int8)
        self.controller = None

    def __len__(self):
        return self.n

    def append(self, rec, alignment=np.nan):
        k = self.n
        for name in self.VECTOR + self.CONTROL:
            getattr(self, name)[k] = getattr(rec, name)
        for name in self.SCALAR[:-1]:
            getattr(self, name)[k] = getattr(rec, name)
        self.alignment[k] = alignment
        self.gamma_s[k] = rec.gamma_s
        self.gamma_c[k] = rec.gamma_c
        self.n = k + 1

    def truncate(self):
        """Drop unused preallocated rows."""
        for name in self.VECTOR + self.CONTROL + self.SCALAR + ("gamma_s", "gamma_c"):
            setattr(self, name, getattr(self, name)[: self.n])
        return self

    def record(self, k):
        return StepRecord(
            **{name: getattr(self, name)[k].copy() for name in self.VECTOR + self.CONTROL},
            **{name: float(getattr(self, name)[k]) for name in self.SCALAR[:-1]},
            gamma_s=int(self.gamma_s[k]), gamma_c=int(self.gamma_c[k]),
        )

    def __iter__(self):
        return (self.record(k) for k in range(self.n))

    @property
    def error(self):
        """True tracking error x - x_d."""
        return self.x_true - self.x_d


def _fro(M):
    return float(np.sqrt(np.sum(M * M)))


ENGINES = ("fused", "stepwise")


def run_episode(benchmark, cfg, trace=False, engine="fused"):
    """Simulate one closed-loop run and return its ``TrajectoryLog``.

    ``engine="fused"`` runs the whole loop inside one compiled kernel;
    ``"stepwise"`` drives ``control_step`` and the plant from Python and is
    the only engine that records the stage trace. Both consume the same
    random streams and agree to rounding.

    On divergence the raised ``DivergenceError`` carries the step index and
    the partial log (``err.log``).
    """
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}")
    cfg = cfg.replace(benchmark=benchmark) if benchmark != cfg.benchmark else cfg
    cfg.validate(allow_empty_horizon=True)
    plant, ref = make_benchmark(cfg.benchmark, cfg.vsm_params() if cfg.benchmark == "vsm" else None,
                                a_c=cfg.a_c)
    dt, n_steps = cfg.dt, cfg.steps
    ctrl = AicController.from_config(cfg, plant, trace=trace)
    sensor = DropoutChannel.from_seed(cfg.gamma_bar_s, cfg.seed, "sensor")
    actuator = DropoutChannel.from_seed(cfg.gamma_bar_c, cfg.seed, "actuator")
    log = TrajectoryLog(n_steps, plant.n_x, plant.n_u, dt,
                        meta={"seed": cfg.seed, "config_hash": cfg.digest(), "benchmark": cfg.benchmark,
                              "preset": cfg.preset})
    log.controller = ctrl
    x0 = ref.x_d(0.0) + np.asarray(cfg.offset, dtype=float)
    if engine == "fused" and not trace:
        _run_fused(cfg, plant, ctrl, sensor, actuator, log, x0)
    else:
        _run_stepwise(cfg, plant, ref, ctrl, sensor, actuator, log, x0)
    return log.truncate()


_FUSED_ERRORS = {
    kernels.BLOWUP: (DynamicsBlowup, "state left the finite range or the state envelope"),
    kernels.IDENTIFIER_NAN: (IdentifierDiverged, "identifier weights became non-finite"),
    kernels.CRITIC_NAN: (CriticDiverged, "critic weights became non-finite"),
    kernels.ACTOR_NAN: (ActorDiverged, "actor weights became non-finite"),
}


def _run_fused(cfg, plant, ctrl, sensor, actuator, log, x0):
    n = cfg.steps
    gates_s = sensor.sample_many(n)
    gates_c = actuator.sample_many(n)
    if cfg.benchmark == "vsm":
        p = cfg.vsm_params()
        plant_kind, plant_p = kernels.PLANT_VSM, np.array([p.inertia, p.damping, p.p_max, p.p_imbalance])
        ref_kind, ref_p = kernels.REF_CONST, np.zeros(2)
    else:
        plant_kind = kernels.PLANT_SIMO if cfg.benchmark == "simo" else kernels.PLANT_MIMO
        plant_p = np.zeros(4)
        ref_kind = kernels.REF_SINE
        ref_p = np.array([1.0 if cfg.benchmark == "simo" else MIMO_X1_AMPLITUDE, 0.0])
    idn, critic, actor = ctrl.identifier, ctrl.critic, ctrl.actor
    rates = np.array([idn.eta1, idn.eta2, idn.rho, critic.eta_c, actor.eta1, actor.eta2])
    scalars = np.zeros((n, 10))
    filled, status = kernels.run_fused(
        plant_kind, plant_p, ref_kind, ref_p, x0, plant.a_c, float(cfg.dt), n, gates_s, gates_c,
        float(ctrl.gamma_bar_c), idn.W, idn.V, critic.W, actor.W, actor.V, rates, ctrl.cost.Q, ctrl.cost.R,
        float(actor.clamp or 0.0), bool(cfg.uncontrolled), STATE_ENVELOPE,
        log.t, log.x_true, log.x_d, log.x_used, log.e_hat, log.u_c, log.u_applied, scalars,
    )
    log.gamma_s[:] = gates_s
    log.gamma_c[:] = gates_c
    for j, name in enumerate(("td", "value", "x_tilde_norm", "w_i_norm", "v_i_norm", "w_c_norm",
                              "w_a_norm", "v_a_norm", "actor_grad_mean", "alignment")):
        getattr(log, name)[:] = scalars[:, j]
    log.n = int(filled)
    if status != kernels.OK:
        cls, msg = _FUSED_ERRORS[int(status)]
        err = cls(msg, step=int(filled) - 1 if status == kernels.BLOWUP else int(filled))
        err.log = log.truncate()
        raise err


def _run_stepwise(cfg, plant, ref, ctrl, sensor, actuator, log, x0):
    dt = cfg.dt
    state = SimState(0.0, x0)
    zero_u = np.zeros(plant.n_u)
    x_d_next = ref.x_d(0.0)
    for k in range(cfg.steps):
        t = k * dt
        x_d_now = x_d_next
        x_d_next = ref.x_d((k + 1) * dt)
        try:
            gamma_s = sensor.sample()
            gamma_c = actuator.sample()
            if cfg.uncontrolled:
                u_c = zero_u
                frag = {"x_used": state.x if gamma_s else np.full(plant.n_x, np.nan),
                        "e_hat": np.full(plant.n_x, np.nan), "td": np.nan, "value": np.nan,
                        "x_tilde_norm": np.nan, "control_jacobian": None}
            else:
                u_c, frag = control_step(ctrl, state.x.copy() if gamma_s else None, x_d_now, x_d_next, dt)
            u_applied = u_c * float(gamma_c)
            alignment = np.nan
            if frag["control_jacobian"] is not None:
                alignment = _alignment(frag["control_jacobian"], eval_g(plant, state.x))
            log.append(StepRecord(
                t=t, x_true=state.x, x_d=x_d_now, gamma_s=gamma_s, gamma_c=gamma_c,
                x_used=frag["x_used"], e_hat=frag["e_hat"], u_c=u_c, u_applied=u_applied,
                td=frag["td"], value=frag["value"], x_tilde_norm=frag["x_tilde_norm"],
                w_i_norm=_fro(ctrl.identifier.W), v_i_norm=_fro(ctrl.identifier.V),
                w_c_norm=_fro(ctrl.critic.W), w_a_norm=_fro(ctrl.actor.W), v_a_norm=_fro(ctrl.actor.V),
                actor_grad_mean=0.0 if cfg.uncontrolled else ctrl.actor.last_grad_mean,
            ), alignment)
            state = step_euler(plant, state, u_applied, dt)
        except DivergenceError as err:
            err.step = k
            err.log = log.truncate()
            raise


def _alignment(J_u, G):
    worst = 1.0
    for b in range(G.shape[1]):
        a, g = J_u[:, b], G[:, b]
        denom = np.linalg.norm(a) * np.linalg.norm(g)
        worst = min(worst, float(a @ g / denom) if denom > 0 else 0.0)
    return worst
