"""Experiment orchestration: CSV output, sweeps, gradient checks, value surfaces, VSM study."""
import contextlib
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .actor import ActorNet, bracket_term
from .aic import run_episode
from .config import PRESETS, ScenarioSet
from .critic import CriticNet, QuadraticBasis
from .dynamics import vsm_frequency_hz
from .errors import DivergenceError
from .identifier import IdentifierNet
from .metrics import aggregate, evaluate_log

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_GRADCHECK = 0, 1, 2, 3
FLOAT_FMT = "%.9g"


# --- CSV --------------------------------------------------------------------

def csv_columns(n_x=2, n_u=1):
    xs = lambda p: [f"{p}{i + 1}" for i in range(n_x)]
    us = lambda p: [f"{p}{i + 1}" for i in range(n_u)]
    return (["t"] + xs("x") + xs("xd") + ["gamma_s", "gamma_c"] + xs("x_used") + xs("e")
            + us("u") + us("u_applied")
            + ["td", "value", "x_tilde_norm", "w_i_norm", "v_i_norm", "w_c_norm", "w_a_norm", "v_a_norm",
               "actor_grad_mean"])


def log_matrix(log):
    return np.column_stack([
        log.t, log.x_true, log.x_d, log.gamma_s, log.gamma_c, log.x_used, log.e_hat,
        log.u_c, log.u_applied, log.td, log.value, log.x_tilde_norm, log.w_i_norm, log.v_i_norm,
        log.w_c_norm, log.w_a_norm, log.v_a_norm, log.actor_grad_mean,
    ]) if len(log) else np.zeros((0, len(csv_columns(log.n_x, log.n_u))))


@contextlib.contextmanager
def _open_out(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def write_csv(log, out):
    """Header plus one row per logged step; ``out`` is a path, ``"-"`` or a text stream."""
    header = ",".join(csv_columns(log.n_x, log.n_u))
    if hasattr(out, "write"):
        np.savetxt(out, log_matrix(log), fmt=FLOAT_FMT, delimiter=",", header=header, comments="")
        return
    with _open_out(out) as fh:
        np.savetxt(fh, log_matrix(log), fmt=FLOAT_FMT, delimiter=",", header=header, comments="")


# --- run --------------------------------------------------------------------

def run_command(cfg, out="-", err=None):
    """Run one episode and write its CSV. Returns the process exit code."""
    err = sys.stderr if err is None else err
    try:
        log = run_episode(cfg.benchmark, cfg)
    except DivergenceError as exc:
        write_csv(exc.log, out)
        print(f"diverged: {type(exc).__name__} at {exc}", file=err)
        return EXIT_DIVERGED
    write_csv(log, out)
    return EXIT_OK


# --- sweep ------------------------------------------------------------------

@dataclass
class RunOutcome:
    scenario: tuple
    seed: int
    reports: dict = None  # window name -> MetricReport
    diverged: str = None


def _one_run(cfg):
    try:
        log = run_episode(cfg.benchmark, cfg)
    except DivergenceError as exc:
        return RunOutcome((cfg.gamma_bar_s, cfg.gamma_bar_c), cfg.seed, diverged=f"{type(exc).__name__}: {exc}")
    return RunOutcome((cfg.gamma_bar_s, cfg.gamma_bar_c), cfg.seed, reports=evaluate_log(log, cfg.settle_band))


def sweep(cfg, scenarios=None, repeats=5, workers=1):
    """Run ``repeats`` seeds (``cfg.seed`` upward) for each scenario.

    Results come back ordered by scenario, then seed, whatever order the
    workers finish in.
    """
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    scenarios = ScenarioSet() if scenarios is None else scenarios
    jobs = [cfg.replace(gamma_bar_s=s, gamma_bar_c=c, seed=cfg.seed + i)
            for s, c in scenarios for i in range(repeats)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(_one_run, jobs))
    return [_one_run(j) for j in jobs]


def _fmt(v, digits=4):
    return "-" if v is None else f"{v:.{digits}f}"


def sweep_table(cfg, outcomes, scenarios):
    """Markdown table: {OTE, PCTE} x {MAX, MEAN, STD} x {NRMSE, PCC}, settle time, divergences."""
    head = ["Window", "Stat", "Metric"] + [f"gs={s:g} gc={c:g}" for s, c in scenarios]
    by_scn = {p: [o for o in outcomes if o.scenario == p] for p in scenarios}
    stats = {}
    for p, runs in by_scn.items():
        ok = [o for o in runs if o.reports]
        stats[p] = {w: aggregate([o.reports[w] for o in ok]) if ok else None for w in ("OTE", "PCTE")}
    rows = []
    for w in ("OTE", "PCTE"):
        for stat in ("max", "mean", "std"):
            for metric in ("nrmse", "pcc"):
                cells = []
                for p in scenarios:
                    agg = stats[p][w]
                    cells.append("DIVERGED" if agg is None else _fmt(agg[metric][stat]))
                rows.append([w, stat.upper(), metric.upper()] + cells)
    for stat in ("max", "mean", "std"):
        cells = []
        for p in scenarios:
            agg = stats[p]["PCTE"]
            if agg is None:
                cells.append("DIVERGED")
            else:
                st = agg["settle_time"]
                cells.append("none" if st is None else f"{st[stat]:.3f} s")
        rows.append(["", stat.upper(), "SETTLE"] + cells)
    rows.append(["", "", "DIVERGED RUNS"] + [str(sum(1 for o in by_scn[p] if o.diverged)) for p in scenarios])
    lines = [f"# {cfg.benchmark} sweep, preset {cfg.preset}, base seed {cfg.seed}, "
             f"{len(outcomes) // max(1, len(scenarios))} repeats", "",
             "| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    lines += [
        "",
        f"Settle time: first instant after which max|e| stays within {cfg.settle_band:g} of the mean "
        "reference range. PCTE starts there (or at mid-horizon if the run never settles). "
        "STD is the population standard deviation.",
    ]
    failed = [o for o in outcomes if o.diverged]
    if failed:
        lines += ["", "Diverged runs:"] + [f"- scenario {o.scenario}, seed {o.seed}: {o.diverged}" for o in failed]
    return "\n".join(lines) + "\n"


def sweep_command(cfg, scenarios=None, repeats=5, out="-", workers=1):
    scenarios = ScenarioSet() if scenarios is None else scenarios
    outcomes = sweep(cfg, scenarios, repeats, workers)
    with _open_out(out) as fh:
        fh.write(sweep_table(cfg, outcomes, list(scenarios)))
    return EXIT_DIVERGED if all(o.diverged for o in outcomes) else EXIT_OK


# --- gradient checks --------------------------------------------------------

GRADCHECK_THRESHOLDS = {"identifier_jacobian": 1e-5, "critic_gradient": 1e-6, "actor_objective": 1e-4}
CORRUPTIONS = ("jacobian-slice",)


def _rel_err(analytic, numeric):
    analytic, numeric = np.asarray(analytic, dtype=float), np.asarray(numeric, dtype=float)
    scale = max(np.linalg.norm(numeric), np.linalg.norm(analytic), 1e-300)
    return float(np.linalg.norm(analytic - numeric) / scale)


def _central_diff(fun, x, h, order=2):
    """Central differences, 3-point (``order=2``) or 5-point (``order=4``) stencil."""
    x = np.asarray(x, dtype=float)
    f = lambda z: np.atleast_1d(fun(z))
    cols = []
    for j in range(x.size):
        step = np.zeros_like(x)
        step.flat[j] = h
        if order == 2:
            cols.append((f(x + step) - f(x - step)) / (2 * h))
        else:
            cols.append((8 * (f(x + step) - f(x - step)) - (f(x + 2 * step) - f(x - 2 * step))) / (12 * h))
    return np.stack(cols, axis=-1).reshape(np.atleast_1d(fun(x)).shape + x.shape)


def actor_objective(identifier, critic, R, x_s, x_d_next, u, dt):
    """One-step objective the actor minimises: ``dt u^T R u + V(e_next(u))``."""
    e_next = identifier.predict_tracking_error(x_s, u, x_d_next, dt)
    return dt * float(u @ R @ u) + critic.value(e_next)


def _random_point(rng):
    n_x = 2
    n_u = int(rng.integers(1, 3))
    h_i, h_a = int(rng.integers(2, 17)), int(rng.integers(2, 17))
    idn = IdentifierNet.initialize(n_x, n_u, h_i, -rng.uniform(0.5, 2.0, n_x), 1.0, 1.0, rng=rng,
                                   scale=rng.uniform(0.1, 1.5))
    basis = QuadraticBasis(n_x)
    critic = CriticNet(rng.normal(size=basis.m), basis, 0.5)
    actor = ActorNet.initialize(n_x, n_u, h_a, 1.0, 1.0, rng=rng, scale=rng.uniform(0.1, 1.5))
    R = np.diag(rng.uniform(1e-3, 1.0, n_u))
    return {
        "idn": idn, "critic": critic, "actor": actor, "R": R, "dt": float(rng.uniform(1e-3, 5e-2)),
        "x": rng.normal(size=n_x), "u": rng.normal(size=n_u), "e": rng.normal(size=n_x),
        "x_d_next": rng.normal(size=n_x),
    }


def gradcheck(seed=0, points=100, corrupt=None):
    """Worst relative error of each finite-difference oracle over ``points`` random draws."""
    if corrupt is not None and corrupt not in CORRUPTIONS:
        raise ValueError(f"unknown corruption {corrupt!r}")
    rng = np.random.default_rng(seed)
    worst = dict.fromkeys(GRADCHECK_THRESHOLDS, 0.0)
    for _ in range(points):
        p = _random_point(rng)
        idn, critic, actor, R, dt = p["idn"], p["critic"], p["actor"], p["R"], p["dt"]
        x, u, e, x_d_next = p["x"], p["u"], p["e"], p["x_d_next"]
        n_x = x.size

        J = idn.input_jacobian(x, u)
        J_fd = _central_diff(lambda xb: idn.forward(xb[:n_x], xb[n_x:]), np.concatenate((x, u)), 1e-6)
        worst["identifier_jacobian"] = max(worst["identifier_jacobian"], _rel_err(J, J_fd))

        g = critic.value_gradient(e)
        g_fd = _central_diff(critic.value, e, 1e-6)
        worst["critic_gradient"] = max(worst["critic_gradient"], _rel_err(g, g_fd))

        # actor: d/du of the composed objective, then d/dW_a and d/dV_a through the policy.
        # The objective is O(1) while some weight gradients are O(1e-6), so a
        # 3-point stencil at 1e-6 drowns in rounding; use 5 points at 1e-4.
        u_a = actor.act(e)
        J_u = idn.control_jacobian(x, u_a)
        if corrupt == "jacobian-slice":
            full = idn.input_jacobian(x, u_a)
            J_u = full[:, n_x - 1:n_x - 1 + u_a.size]
        e_next = idn.predict_tracking_error(x, u_a, x_d_next, dt)
        bracket = bracket_term(critic.value_gradient(e_next), J_u, R, u_a, dt)
        obj = lambda uu: actor_objective(idn, critic, R, x, x_d_next, uu, dt)
        err_u = _rel_err(bracket, _central_diff(obj, u_a, 1e-4, order=4))

        gW, gV = actor.gradients(bracket, e)

        def obj_w(Wflat):
            return obj(kernels.two_layer_forward(Wflat.reshape(actor.W.shape), actor.V, e)[0])

        def obj_v(Vflat):
            return obj(kernels.two_layer_forward(actor.W, Vflat.reshape(actor.V.shape), e)[0])

        err_w = _rel_err(gW.ravel(), _central_diff(obj_w, actor.W.ravel(), 1e-4, order=4))
        err_v = _rel_err(gV.ravel(), _central_diff(obj_v, actor.V.ravel(), 1e-4, order=4))
        worst["actor_objective"] = max(worst["actor_objective"], err_u, err_w, err_v)
    return worst


def gradcheck_command(seed=0, points=100, corrupt=None, out=None):
    out = sys.stdout if out is None else out
    worst = gradcheck(seed, points, corrupt)
    failed = False
    for name, value in worst.items():
        limit = GRADCHECK_THRESHOLDS[name]
        ok = value < limit
        failed |= not ok
        print(f"{name:22s} worst rel err {value:.3e}  limit {limit:.0e}  {'PASS' if ok else 'FAIL'}", file=out)
    return EXIT_GRADCHECK if failed else EXIT_OK


# --- value surface ----------------------------------------------------------

def surface_grid(critic, lo=-1.0, hi=1.0, n=101):
    axis = np.linspace(lo, hi, n)
    E1, E2 = np.meshgrid(axis, axis, indexing="ij")
    pts = np.column_stack([E1.ravel(), E2.ravel()])
    values = np.array([critic.value(p) for p in pts])
    return pts, values


def surface_command(critic, lo=-1.0, hi=1.0, n=101, out="-"):
    pts, values = surface_grid(critic, lo, hi, n)
    with _open_out(out) as fh:
        np.savetxt(fh, np.column_stack([pts, values]), fmt=FLOAT_FMT, delimiter=",",
                   header="e1,e2,value", comments="")
    return EXIT_OK


# --- VSM case study ---------------------------------------------------------

@dataclass
class VsmSummary:
    label: str
    max_dev_hz: float
    late_max_dev_hz: float
    left_1hz_band: bool
    diverged: bool

    def line(self):
        tail = " (diverged)" if self.diverged else ""
        return (f"{self.label:12s} max |f-f0| {self.max_dev_hz:8.4f} Hz   final-half max {self.late_max_dev_hz:8.4f} Hz"
                f"   left +-1 Hz band: {'yes' if self.left_1hz_band else 'no'}{tail}")


def vsm_summary(label, log, cfg, diverged=False):
    params = cfg.vsm_params()
    dev = np.abs(vsm_frequency_hz(log.x_true, params) - params.omega_nom / (2 * np.pi))
    half = len(dev) // 2
    late = float(dev[half:].max()) if len(dev) else float("nan")
    return VsmSummary(label, float(dev.max()) if len(dev) else float("nan"), late,
                      bool(np.any(dev > 1.0)) or diverged, diverged)


def vsm_study(cfg, with_baseline=True):
    """Controlled run (and optionally the uncontrolled baseline) with frequency summaries."""
    results = {}
    for label, c in (("controlled", cfg), ("uncontrolled", cfg.replace(uncontrolled=True))):
        if label == "uncontrolled" and not with_baseline:
            continue
        try:
            log = run_episode("vsm", c)
            results[label] = (log, vsm_summary(label, log, c))
        except DivergenceError as exc:
            results[label] = (exc.log, vsm_summary(label, exc.log, c, diverged=True))
    return results


def vsm_command(cfg=None, with_baseline=True, out=None, baseline_out=None, report=None):
    report = sys.stdout if report is None else report
    cfg = PRESETS["vsm"] if cfg is None else cfg
    results = vsm_study(cfg, with_baseline)
    for label, (log, summary) in results.items():
        print(summary.line(), file=report)
        target = out if label == "controlled" else baseline_out
        if target is not None:
            write_csv(log, target)
    return EXIT_DIVERGED if results["controlled"][1].diverged else EXIT_OK
