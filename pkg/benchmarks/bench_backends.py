"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own interpreter, because the choice is fixed at
import time by ``AIC_DISABLE_NUMBA``. Kernel timings are per call (best of
several ``timeit`` repeats); episode timings are wall clock for one run.

    python3 benchmarks/bench_backends.py [--horizon 2] [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time, timeit
import numpy as np
from aictrack import PRESETS, kernels, run_episode
from aictrack._accel import BACKEND

horizon, repeat = float(sys.argv[1]), int(sys.argv[2])
rng = np.random.default_rng(0)
W, V = rng.normal(size=(2, 8)), rng.normal(size=(8, 3))
Wa, Va = rng.normal(size=(1, 8)), rng.normal(size=(8, 2))
xb, x_tilde, e = rng.normal(size=3), rng.normal(size=2), rng.normal(size=2)
a_c, bracket = -np.ones(2), rng.normal(size=1)

cases = {
    "two_layer_forward": lambda: kernels.two_layer_forward(W, V, xb),
    "two_layer_jacobian": lambda: kernels.two_layer_jacobian(W, V, xb),
    "identifier_step": lambda: kernels.identifier_step(W, V, x_tilde, xb, a_c, 1.0, 1.0, 0.0, 1e-3),
    "actor_gradients": lambda: kernels.actor_gradients(Wa, Va, bracket, e),
}
out = {"backend": BACKEND, "kernels": {}, "episodes": {}}
for name, fn in cases.items():
    fn()
    n = 2000
    out["kernels"][name] = min(timeit.repeat(fn, number=n, repeat=repeat)) / n

for preset, bench in (("simo-tuned", "simo"), ("mimo-tuned", "mimo"), ("vsm", "vsm")):
    cfg = PRESETS[preset]
    run_episode(bench, cfg.replace(horizon=cfg.dt * 10))
    h = min(horizon, cfg.horizon)
    t0 = time.perf_counter()
    run_episode(bench, cfg.replace(horizon=h))
    out["episodes"][f"{bench} {h:g} s"] = time.perf_counter() - t0
print(json.dumps(out))
"""


def measure(disable, horizon, repeat):
    env = os.environ.copy()
    env.pop("AIC_DISABLE_NUMBA", None)
    if disable:
        env["AIC_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(horizon), str(repeat)],
                         capture_output=True, text=True, env=env, check=True)
    return json.loads(res.stdout)


def _fmt_time(s):
    if s < 1e-3:
        return f"{s * 1e6:9.2f} us"
    if s < 1:
        return f"{s * 1e3:9.2f} ms"
    return f"{s:9.2f} s "


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=float, default=2.0, help="episode length in seconds (capped per preset)")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    fast = measure(False, args.horizon, args.repeat)
    slow = measure(True, args.horizon, args.repeat)
    print(f"{'case':28s} {fast['backend']:>12s} {slow['backend']:>12s} {'speed-up':>9s}")
    for group in ("kernels", "episodes"):
        for name, t_fast in fast[group].items():
            t_slow = slow[group][name]
            print(f"{name:28s} {_fmt_time(t_fast):>12s} {_fmt_time(t_slow):>12s} {t_slow / t_fast:8.1f}x")


if __name__ == "__main__":
    main()
