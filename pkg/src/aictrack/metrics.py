"""Tracking metrics: NRMSE, PCC, settle time, windows and repeat aggregation."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import MetricUndefined


def _as_2d(a):
    a = np.asarray(a, dtype=float)
    return a.reshape(-1, 1) if a.ndim == 1 else a


def nrmse(actual, desired):
    """RMS error over all states and samples, divided by the mean per-state range of ``desired``."""
    y, y_hat = _as_2d(actual), _as_2d(desired)
    if y.shape != y_hat.shape:
        raise MetricUndefined(f"shape mismatch {y.shape} vs {y_hat.shape}")
    if y.shape[0] < 2:
        raise MetricUndefined("need at least two samples")
    ranges = y_hat.max(axis=0) - y_hat.min(axis=0)
    if np.any(ranges == 0):
        raise MetricUndefined("a desired state has zero range")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)) / np.mean(ranges))


def pcc(actual, desired):
    """Pearson correlation; for several states, the mean of the per-state values."""
    y, y_hat = _as_2d(actual), _as_2d(desired)
    if y.shape != y_hat.shape:
        raise MetricUndefined(f"shape mismatch {y.shape} vs {y_hat.shape}")
    if y.shape[0] < 2:
        raise MetricUndefined("need at least two samples")
    dy = y - y.mean(axis=0)
    dh = y_hat - y_hat.mean(axis=0)
    den = np.sqrt((dy ** 2).sum(axis=0) * (dh ** 2).sum(axis=0))
    if np.any(den == 0):
        raise MetricUndefined("constant series")
    r = (dy * dh).sum(axis=0) / den
    return float(np.clip(np.mean(r), -1.0, 1.0))


def settle_time(log, band_fraction=0.05, t=None):
    """Earliest time after which ``max|e|`` stays within the band for good.

    The band is ``band_fraction`` times the mean per-state range of the
    reference. ``log`` is a ``TrajectoryLog`` or an ``(actual, desired)``
    pair (then ``t`` gives the sample times). Returns ``None`` if the error
    is outside the band at the last sample.
    """
    if not 0 < band_fraction < 1:
        raise ValueError("band_fraction must lie in (0, 1)")
    if isinstance(log, tuple):
        actual, desired = (_as_2d(a) for a in log)
        times = np.asarray(t, dtype=float)
    else:
        actual, desired, times = log.x_true, log.x_d, log.t
    if len(times) == 0:
        return None
    ranges = desired.max(axis=0) - desired.min(axis=0)
    band = band_fraction * np.mean(ranges)
    err = np.abs(actual - desired).max(axis=1)
    outside = np.nonzero(~(err <= band))[0]
    if len(outside) == 0:
        return float(times[0])
    last = outside[-1]
    if last == len(times) - 1:
        return None
    return float(times[last + 1])


@dataclass(frozen=True)
class Window:
    name: str
    start: float
    end: float

    def mask(self, t):
        return (t >= self.start - 1e-12) & (t <= self.end + 1e-12)


def split_windows(log, settle):
    """``(OTE, PCTE)``: the whole horizon, and from ``settle`` (or the second half) to the end."""
    t = log.t if hasattr(log, "t") else np.asarray(log, dtype=float)
    start, end = (float(t[0]), float(t[-1])) if len(t) else (0.0, 0.0)
    if settle is None:
        pcte_start = start + 0.5 * (end - start)
    else:
        pcte_start = max(start, float(settle))
    return Window("OTE", start, end), Window("PCTE", pcte_start, end)


@dataclass
class MetricReport:
    nrmse: float
    pcc: float
    settle_time: Optional[float]
    window: str
    aggregate: dict = field(default_factory=dict)


def window_report(log, window, settle):
    m = window.mask(log.t)
    return MetricReport(nrmse(log.x_true[m], log.x_d[m]), pcc(log.x_true[m], log.x_d[m]), settle, window.name)


def evaluate_log(log, band_fraction=0.05):
    """``{"OTE": MetricReport, "PCTE": MetricReport}`` for one run."""
    settle = settle_time(log, band_fraction)
    return {w.name: window_report(log, w, settle) for w in split_windows(log, settle)}


def aggregate(runs):
    """Max, mean and population std of each numeric metric across repeats."""
    runs = list(runs)
    if not runs:
        raise ValueError("need at least one run")
    out = {}
    for key in ("nrmse", "pcc", "settle_time"):
        vals = np.array([getattr(r, key) for r in runs if getattr(r, key) is not None], dtype=float)
        if len(vals) == 0:
            out[key] = None
            continue
        out[key] = {"max": float(vals.max()), "mean": float(vals.mean()), "std": float(vals.std(ddof=0))}
    return out
