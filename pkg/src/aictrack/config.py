"""Run configuration: presets, INI round-trip and validation."""
import configparser
import dataclasses
import hashlib
import io
import os
from dataclasses import dataclass, field, fields
from typing import Optional

from .dynamics import BENCHMARKS, VsmParams
from .errors import ConfigError

SECTION = "run"

# (gamma_bar_s, gamma_bar_c) pairs evaluated in the reference results table
STANDARD_SCENARIOS = ((1.0, 1.0), (1.0, 0.8), (0.8, 1.0), (0.9, 0.9), (0.8, 0.7))


@dataclass(frozen=True)
class ScenarioSet:
    pairs: tuple = STANDARD_SCENARIOS

    def __post_init__(self):
        pairs = tuple((float(s), float(c)) for s, c in self.pairs)
        for s, c in pairs:
            if not (0 <= s <= 1 and 0 <= c <= 1):
                raise ConfigError(f"scenario ({s}, {c}) has a probability outside [0, 1]", "scenarios")
        object.__setattr__(self, "pairs", pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)

    @classmethod
    def parse(cls, text):
        """``"1,1;0.8,0.7"`` or ``"standard"``."""
        if text.strip().lower() == "standard":
            return cls()
        try:
            pairs = [tuple(float(v) for v in chunk.split(",")) for chunk in text.split(";") if chunk.strip()]
        except ValueError as exc:
            raise ConfigError(str(exc), "scenarios") from None
        if not pairs or any(len(p) != 2 for p in pairs):
            raise ConfigError("expected 'gs,gc;gs,gc;...'", "scenarios")
        return cls(tuple(pairs))


@dataclass(frozen=True)
class RunConfig:
    benchmark: str
    preset: str = "custom"
    dt: float = 1e-3
    horizon: float = 20.0
    gamma_bar_s: float = 1.0
    gamma_bar_c: float = 1.0
    # controller's belief about gamma_bar_c; None means it equals the truth
    gamma_belief_c: Optional[float] = None
    h_i: int = 8
    h_a: int = 8
    eta_i1: float = 1e-3
    eta_i2: float = 1e-3
    eta_c: float = 1e-3
    eta_a1: float = 1e2
    eta_a2: float = 1e2
    rho: float = 0.0
    q: tuple = (0.5, 1.0)
    r: tuple = (5e-4,)
    a_c: tuple = (-1.0, -1.0)
    seed: int = 0
    offset: tuple = (0.5, -0.5)
    settle_band: float = 0.05
    init_identifier: float = 0.1
    init_actor: float = 0.1
    critic_init: str = "cost"
    clamp: float = 0.0
    allow_unstable: bool = False
    uncontrolled: bool = False
    vsm_omega_nom: float = VsmParams.omega_nom
    vsm_damping: float = VsmParams.damping
    vsm_inertia: float = VsmParams.inertia
    vsm_p_max: float = VsmParams.p_max
    vsm_p_imbalance: float = VsmParams.p_imbalance

    @property
    def n_u(self):
        return 2 if self.benchmark == "mimo" else 1

    @property
    def belief_c(self):
        return self.gamma_bar_c if self.gamma_belief_c is None else self.gamma_belief_c

    @property
    def steps(self):
        return int(round(self.horizon / self.dt))

    def vsm_params(self):
        return VsmParams(self.vsm_omega_nom, self.vsm_damping, self.vsm_inertia,
                         self.vsm_p_max, self.vsm_p_imbalance)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def validate(self, allow_empty_horizon=False):
        if self.benchmark not in BENCHMARKS:
            raise ConfigError(f"unknown benchmark {self.benchmark!r}", "benchmark")
        for key in ("gamma_bar_s", "gamma_bar_c", "gamma_belief_c"):
            v = getattr(self, key)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ConfigError(f"{v} outside [0, 1]", key)
        if not self.dt > 0:
            raise ConfigError("must be positive", "dt")
        if not (self.horizon > 0 or (allow_empty_horizon and self.horizon == 0)):
            raise ConfigError("must be positive", "horizon")
        for key in ("h_i", "h_a"):
            if getattr(self, key) < 1:
                raise ConfigError("hidden width must be at least 1", key)
        for key in ("eta_i1", "eta_i2", "eta_a1", "eta_a2"):
            if not getattr(self, key) > 0:
                raise ConfigError("learning rate must be positive", key)
        if not self.allow_unstable and not 0.0 < self.eta_c < 2.0:
            raise ConfigError(f"{self.eta_c} outside the stable range (0, 2); pass --allow-unstable to override",
                              "eta_c")
        if not self.eta_c > 0:
            raise ConfigError("learning rate must be positive", "eta_c")
        n_x = 2
        expect = {"q": n_x, "r": self.n_u, "a_c": n_x, "offset": n_x}
        for key, n in expect.items():
            if len(getattr(self, key)) != n:
                raise ConfigError(f"expected {n} values, got {len(getattr(self, key))}", key)
        if any(v <= 0 for v in self.q) or any(v <= 0 for v in self.r):
            raise ConfigError("cost weights must be positive", "q" if any(v <= 0 for v in self.q) else "r")
        if any(v >= 0 for v in self.a_c):
            raise ConfigError("A_c diagonal must be strictly negative", "a_c")
        if self.rho < 0:
            raise ConfigError("must be non-negative", "rho")
        if not 0 < self.settle_band < 1:
            raise ConfigError("must lie in (0, 1)", "settle_band")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("must be a 64-bit unsigned integer", "seed")
        if self.clamp < 0 or self.init_actor < 0 or self.init_identifier < 0:
            raise ConfigError("clamp and init scales must be non-negative",
                              "clamp" if self.clamp < 0 else "init_actor")
        if self.critic_init not in ("cost", "zero"):
            raise ConfigError("expected 'cost' or 'zero'", "critic_init")
        if self.benchmark == "vsm":
            try:
                self.vsm_params()
            except ConfigError as exc:
                raise ConfigError(str(exc), None) from None
        return self

    def to_ini(self):
        cp = configparser.ConfigParser()
        cp[SECTION] = {f.name: _format(getattr(self, f.name)) for f in fields(self)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def digest(self):
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:12]


_FIELDS = {f.name: f for f in fields(RunConfig)}
_TUPLE_KEYS = {"q", "r", "a_c", "offset"}


def _format(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(key, raw):
    """Turn a string (or already-typed value) into the field's type."""
    if key not in _FIELDS:
        raise ConfigError("unknown key", key)
    if not isinstance(raw, str):
        if key in _TUPLE_KEYS:
            return tuple(float(x) for x in raw)
        return raw
    text = raw.strip()
    try:
        if key in _TUPLE_KEYS:
            return tuple(float(x) for x in text.split(",") if x.strip())
        if key == "gamma_belief_c":
            return None if text.lower() in ("", "none") else float(text)
        if key in ("allow_unstable", "uncontrolled"):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if key in ("h_i", "h_a", "seed"):
            return int(text)
        if key in ("benchmark", "preset", "critic_init"):
            return text
        return float(text)
    except ValueError as exc:
        raise ConfigError(str(exc), key) from None


def _preset(benchmark, name, **values):
    return RunConfig(benchmark=benchmark, preset=name, **values)


PRESETS = {
    "simo-faithful": _preset(
        "simo", "simo-faithful", dt=1e-3, horizon=20.0, gamma_bar_s=0.8, gamma_bar_c=0.7,
        h_i=8, h_a=8, eta_i1=1e-3, eta_i2=1e-3, eta_c=1e-9, eta_a1=1e2, eta_a2=1e2,
        q=(0.5, 1.0), r=(5e-4,),
    ),
    "simo-tuned": _preset(
        "simo", "simo-tuned", dt=1e-3, horizon=20.0, gamma_bar_s=0.8, gamma_bar_c=0.7,
        h_i=8, h_a=8, eta_i1=3e3, eta_i2=1e3, eta_c=1e-3, eta_a1=1e6, eta_a2=1e6,
        q=(0.5, 1.0), r=(5e-4,), init_actor=1.0,
    ),
    "mimo-faithful": _preset(
        "mimo", "mimo-faithful", dt=1e-3, horizon=30.0, gamma_bar_s=0.8, gamma_bar_c=0.7,
        h_i=2, h_a=64, eta_i1=1e-3, eta_i2=1e-3, eta_c=1e-3, eta_a1=10.0, eta_a2=10.0,
        q=(0.5, 1.0), r=(5e-3, 5e-3),
    ),
    "mimo-tuned": _preset(
        "mimo", "mimo-tuned", dt=1e-3, horizon=30.0, gamma_bar_s=0.8, gamma_bar_c=0.7,
        h_i=16, h_a=64, eta_i1=3e3, eta_i2=1e3, eta_c=1e-3, eta_a1=3e6, eta_a2=3e6,
        q=(0.5, 1.0), r=(5e-3, 5e-3), init_identifier=1.0, init_actor=0.3, clamp=10.0,
    ),
    "vsm": _preset(
        "vsm", "vsm", dt=1e-4, horizon=4.0, gamma_bar_s=0.8, gamma_bar_c=0.7,
        h_i=16, h_a=8, eta_i1=3e5, eta_i2=1e5, eta_c=1e-3, eta_a1=3e7, eta_a2=3e7,
        q=(1.0, 1.0), r=(1e-4,), offset=(0.0, 0.0), init_identifier=1.0, init_actor=0.1,
    ),
}

DEFAULT_PRESET = {"simo": "simo-tuned", "mimo": "mimo-tuned", "vsm": "vsm"}


def _read_ini(source):
    cp = configparser.ConfigParser()
    try:
        if hasattr(source, "read"):
            cp.read_file(source)
        elif "\n" in str(source) or "[" in str(source):
            cp.read_string(str(source))
        else:
            if not os.path.exists(source):
                raise ConfigError(f"no such file {source!r}", "config")
            with open(source) as fh:
                cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], "config") from None
    out = {}
    for section in cp.sections():
        if section != SECTION:
            raise ConfigError(f"unknown section [{section}]", "config")
        for key, raw in cp[section].items():
            out[key] = _coerce(key, raw)
    return out


def parse_config(source=None, overrides=None, env=None):
    """Build a validated ``RunConfig``.

    Precedence: ``overrides`` (command-line flags) > ``source`` (INI file
    path, INI text or file object) > preset defaults. The preset is chosen by
    the ``preset`` key, or else by the benchmark's tuned default. ``seed``
    falls back to ``$AIC_SEED`` and then 0.
    """
    env = os.environ if env is None else env
    from_file = _read_ini(source) if source is not None else {}
    flags = {k: _coerce(k, v) for k, v in (overrides or {}).items() if v is not None}
    merged = {**from_file, **flags}

    preset_name = merged.get("preset")
    if preset_name and preset_name != "custom":
        if preset_name not in PRESETS:
            raise ConfigError(f"unknown preset {preset_name!r}; choose from {', '.join(PRESETS)}", "preset")
        base = PRESETS[preset_name]
        if "benchmark" in merged and merged["benchmark"] != base.benchmark:
            raise ConfigError(f"preset {preset_name} is for {base.benchmark}, not {merged['benchmark']}",
                              "benchmark")
    elif "benchmark" in merged:
        if merged["benchmark"] not in BENCHMARKS:
            raise ConfigError(f"unknown benchmark {merged['benchmark']!r}", "benchmark")
        base = PRESETS[DEFAULT_PRESET[merged["benchmark"]]]
        if preset_name == "custom":
            base = base.replace(preset="custom")
    else:
        raise ConfigError("benchmark required", "benchmark")

    if "seed" not in merged and env.get("AIC_SEED") is not None:
        merged["seed"] = _coerce("seed", env["AIC_SEED"])
    merged.pop("preset", None)
    cfg = base.replace(**merged)
    if cfg != base and cfg.preset != "custom" and _tuning_changed(base, cfg):
        # presets name a specific tuning; any change to it makes the run custom
        cfg = cfg.replace(preset="custom")
    return cfg.validate()


# keys that describe the experiment rather than the controller tuning
_RUN_KEYS = {"seed", "gamma_bar_s", "gamma_bar_c", "horizon", "allow_unstable", "uncontrolled"}


def _tuning_changed(base, cfg):
    return any(getattr(base, k) != getattr(cfg, k) for k in _FIELDS if k not in _RUN_KEYS | {"preset"})
