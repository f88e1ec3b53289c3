import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aictrack.config import STANDARD_SCENARIOS, PRESETS, RunConfig, ScenarioSet, parse_config
from aictrack.errors import ConfigError


def test_faithful_simo_preset_matches_table():
    c = PRESETS["simo-faithful"]
    assert (c.dt, c.horizon, c.h_i, c.h_a) == (1e-3, 20.0, 8, 8)
    assert (c.eta_i1, c.eta_i2, c.eta_c, c.eta_a1, c.eta_a2) == (1e-3, 1e-3, 1e-9, 1e2, 1e2)
    assert c.q == (0.5, 1.0) and c.r == (5e-4,)
    assert (c.gamma_bar_s, c.gamma_bar_c) == (0.8, 0.7)


def test_faithful_mimo_preset_matches_table():
    c = PRESETS["mimo-faithful"]
    assert (c.h_i, c.h_a, c.horizon) == (2, 64, 30.0)
    assert (c.eta_i1, c.eta_c, c.eta_a1) == (1e-3, 1e-3, 10.0)
    assert c.r == (5e-3, 5e-3)


def test_all_presets_validate():
    for cfg in PRESETS.values():
        cfg.validate()


def test_empty_input_requires_benchmark():
    with pytest.raises(ConfigError, match="^benchmark: benchmark required$"):
        parse_config()


def test_eta_c_stability_gate():
    with pytest.raises(ConfigError, match="eta_c"):
        parse_config(overrides={"benchmark": "simo", "eta_c": 2.5})
    cfg = parse_config(overrides={"benchmark": "simo", "eta_c": 2.5, "allow_unstable": True})
    assert cfg.eta_c == 2.5
    with pytest.raises(ConfigError):
        parse_config(overrides={"benchmark": "simo", "eta_c": -1.0, "allow_unstable": True})


def test_precedence_flags_over_file_over_preset():
    ini = "[run]\npreset = simo-tuned\ndt = 0.002\nseed = 4\n"
    cfg = parse_config(ini, {"seed": 9})
    assert cfg.seed == 9 and cfg.dt == 0.002
    assert cfg.h_i == PRESETS["simo-tuned"].h_i
    assert cfg.preset == "custom"


def test_scenario_and_seed_keep_preset_name():
    cfg = parse_config(overrides={"preset": "simo-tuned", "seed": 3, "gamma_bar_s": 1.0})
    assert cfg.preset == "simo-tuned"


def test_seed_falls_back_to_environment():
    assert parse_config(overrides={"benchmark": "simo"}, env={"AIC_SEED": "17"}).seed == 17
    assert parse_config(overrides={"benchmark": "simo", "seed": 2}, env={"AIC_SEED": "17"}).seed == 2
    assert parse_config(overrides={"benchmark": "simo"}, env={}).seed == 0


@pytest.mark.parametrize("bad", [
    {"benchmark": "cartpole"},
    {"benchmark": "simo", "gamma_bar_s": 1.5},
    {"benchmark": "simo", "dt": 0.0},
    {"benchmark": "simo", "horizon": 0.0},
    {"benchmark": "simo", "r": "1,2"},
    {"benchmark": "simo", "a_c": "1,-1"},
    {"benchmark": "simo", "h_i": "two"},
    {"preset": "nope"},
    {"preset": "vsm", "benchmark": "simo"},
])
def test_invalid_configs_name_the_key(bad):
    with pytest.raises(ConfigError) as info:
        parse_config(overrides=bad)
    assert info.value.key is not None


def test_unknown_ini_key_rejected():
    with pytest.raises(ConfigError, match="colour"):
        parse_config("[run]\nbenchmark = simo\ncolour = red\n")


@settings(max_examples=40, deadline=None)
@given(
    preset=st.sampled_from(sorted(PRESETS)),
    dt=st.floats(1e-5, 1e-2),
    seed=st.integers(0, 2**64 - 1),
    gs=st.floats(0, 1),
    eta=st.floats(1e-6, 1e8),
)
def test_ini_round_trip(preset, dt, seed, gs, eta):
    cfg = parse_config(overrides={"preset": preset, "dt": dt, "seed": seed, "gamma_bar_s": gs, "eta_a1": eta})
    assert parse_config(cfg.to_ini()) == cfg
    assert parse_config(cfg.to_ini()).digest() == cfg.digest()


def test_scenario_set_is_exact():
    assert tuple(ScenarioSet()) == ((1.0, 1.0), (1.0, 0.8), (0.8, 1.0), (0.9, 0.9), (0.8, 0.7))
    assert ScenarioSet.parse("standard").pairs == STANDARD_SCENARIOS
    assert ScenarioSet.parse("1,1;0.8,0.7").pairs == ((1.0, 1.0), (0.8, 0.7))
    for text in ("1,1,1", "x", "", "1.2,1"):
        with pytest.raises(ConfigError):
            ScenarioSet.parse(text)


def test_derived_properties():
    cfg = RunConfig("mimo", r=(1.0, 1.0), gamma_bar_c=0.7)
    assert cfg.n_u == 2 and cfg.belief_c == 0.7 and cfg.steps == 20000
    assert cfg.replace(gamma_belief_c=1.0).belief_c == 1.0
