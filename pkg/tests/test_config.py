import pytest

from swarmnav.config import (
    ConfigError,
    RunConfig,
    apply_overrides,
    desk_run_config,
    dump_config,
    load_config,
    parse_config_text,
)


def test_defaults_validate():
    cfg = RunConfig().validate()
    assert cfg.arch.hidden_size == 63
    assert cfg.arch.layer_sizes == (64, 64)
    assert cfg.ppo.gamma == 0.99
    assert cfg.scenario.p_geo == pytest.approx(1 / 3)
    assert cfg.sim.eps_arr == cfg.reward.eps_arr


def test_parse_text_overrides():
    cfg = parse_config_text(
        """
        # comment line
        seed = 11
        arch.hidden_size = 32
        arch.layer_sizes = 16, 16
        scenario.arena = 80, 40
        reward.r_cav = -150
        ppo.gamma = 0.95   # trailing comment
        arch.encoder = occupancy
        """
    )
    assert cfg.seed == 11
    assert cfg.arch.hidden_size == 32
    assert cfg.arch.layer_sizes == (16, 16)
    assert cfg.scenario.arena == (80.0, 40.0)
    assert cfg.reward.r_cav == -150.0
    assert cfg.ppo.gamma == 0.95
    assert cfg.arch.encoder == "occupancy"


def test_unknown_key_names_the_key():
    with pytest.raises(ConfigError, match="ppo.gama"):
        parse_config_text("ppo.gama = 0.9")
    with pytest.raises(ConfigError, match="mystery"):
        parse_config_text("mystery = 4")


def test_bad_value_names_the_field_path():
    with pytest.raises(ConfigError, match="ppo.minibatch_size"):
        parse_config_text("ppo.minibatch_size = lots")


def test_semantic_validation_names_field():
    cfg = parse_config_text("ppo.gamma = 1.5")
    with pytest.raises(ConfigError, match="ppo.gamma"):
        cfg.validate()


def test_arrival_radius_mirrors_reward_zone():
    cfg = parse_config_text("reward.eps_arr = 3.5")
    assert cfg.sim.eps_arr == 3.5
    cfg.validate()


def test_mismatched_arrival_radius_rejected():
    cfg = parse_config_text("reward.eps_arr = 3.5\nsim.eps_arr = 2.0")
    with pytest.raises(ConfigError, match="eps_arr"):
        cfg.validate()


def test_dump_round_trip():
    cfg = parse_config_text("seed = 9\narch.hidden_size = 48\nppo.lr = 0.001")
    text = dump_config(cfg)
    rebuilt = parse_config_text(text)
    assert rebuilt == cfg


def test_malformed_line_reports_location():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("seed = 1\nnot a key value line\n")


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.cfg")


def test_apply_overrides_on_existing_config():
    base = desk_run_config(seed=1)
    updated = apply_overrides(base, {"ppo.iterations": "7", "seed": "5"})
    assert updated.ppo.iterations == 7
    assert updated.seed == 5
    # untouched sections survive
    assert updated.scenario.max_agents == base.scenario.max_agents
