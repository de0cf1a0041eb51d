import json

import numpy as np
import pytest

from swarmnav.checkpoints import load_network
from swarmnav.cli import main
from swarmnav.policy import forward_obs_batch
from swarmnav.scenarios import ScenarioConfig, generate_scenario, make_rng, save_scenario

from conftest import random_observation

TINY_CFG = """
seed = 4
arch.hidden_size = 6
arch.layer_sizes = 8, 8
scenario.max_agents = 2
scenario.arena = 40, 40
scenario.min_separation = 8
scenario.min_route_length = 8
sim.max_steps = 50
ppo.iterations = 2
ppo.rollout_episodes = 3
ppo.epochs_per_iter = 2
ppo.minibatch_size = 64
ppo.checkpoint_every = 2
"""


@pytest.fixture
def tiny_run(tmp_path):
    cfg_path = tmp_path / "tiny.cfg"
    cfg_path.write_text(TINY_CFG)
    run_dir = tmp_path / "run"
    code = main(["train", "--config", str(cfg_path), "--out-dir", str(run_dir),
                 "--quiet"])
    assert code == 0
    return run_dir


def test_flops_values(capsys):
    assert main(["flops", "--agents", "21"]) == 0
    assert capsys.readouterr().out.strip() == "715200"
    assert main(["flops", "--agents", "1"]) == 0
    assert capsys.readouterr().out.strip() == "17160"


def test_train_run_directory_layout(tiny_run):
    assert (tiny_run / "config.cfg").exists()
    assert (tiny_run / "metrics.csv").exists()
    ckpt = tiny_run / "checkpoints" / "ckpt_000002"
    assert (ckpt / "policy.net").exists()
    assert (ckpt / "value.net").exists()
    assert (ckpt / "optimizer.npz").exists()
    assert (ckpt / "trainer.json").exists()
    lines = (tiny_run / "metrics.csv").read_text().strip().splitlines()
    assert len(lines) == 3


def test_train_deterministic_metrics(tmp_path):
    cfg_path = tmp_path / "tiny.cfg"
    cfg_path.write_text(TINY_CFG)
    for name in ("a", "b"):
        assert main(["train", "--config", str(cfg_path), "--out-dir",
                     str(tmp_path / name), "--quiet"]) == 0
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == \
        (tmp_path / "b" / "metrics.csv").read_bytes()


def test_config_snapshot_reproduces_run(tmp_path, tiny_run):
    # the resolved snapshot alone must reproduce the metrics bit for bit
    code = main(["train", "--config", str(tiny_run / "config.cfg"),
                 "--out-dir", str(tmp_path / "replay"), "--quiet"])
    assert code == 0
    assert (tmp_path / "replay" / "metrics.csv").read_bytes() == \
        (tiny_run / "metrics.csv").read_bytes()


def test_unknown_config_key_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("ppo.gama = 0.5\n")
    assert main(["train", "--config", str(bad), "--quiet"]) == 2
    assert "ppo.gama" in capsys.readouterr().err


def test_bad_value_exits_2(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "none.cfg")]) == 2
    err = capsys.readouterr().err
    assert "not found" in err


def test_invalid_override_exits_2(tmp_path, capsys):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(TINY_CFG)
    assert main(["train", "--config", str(cfg), "--set", "ppo.gamma=2.0",
                 "--quiet"]) == 2
    assert "ppo.gamma" in capsys.readouterr().err


def test_missing_checkpoint_exits_3(capsys):
    assert main(["eval", "--checkpoint", "/nope/policy.net"]) == 3
    assert "not found" in capsys.readouterr().err


def test_resume_continues(tmp_path, tiny_run, capsys):
    cfg_path = tmp_path / "longer.cfg"
    cfg_path.write_text(TINY_CFG.replace("ppo.iterations = 2", "ppo.iterations = 4"))
    code = main(["train", "--config", str(cfg_path), "--out-dir", str(tiny_run),
                 "--resume", str(tiny_run / "checkpoints" / "ckpt_000002"),
                 "--quiet"])
    assert code == 0
    lines = (tiny_run / "metrics.csv").read_text().strip().splitlines()
    assert [row.split(",")[0] for row in lines[1:]] == ["1", "2", "3", "4"]


def test_eval_command_writes_tracks_and_metrics(tmp_path, tiny_run):
    ckpt = tiny_run / "checkpoints" / "ckpt_000002" / "policy.net"
    out = tmp_path / "eval_out"
    scen_cfg = ScenarioConfig(max_agents=2, arena=(40.0, 40.0))
    scenario = generate_scenario(make_rng(3), scen_cfg)
    scen_path = tmp_path / "scene.json"
    save_scenario(scen_path, scenario)
    code = main(["eval", "--checkpoint", str(ckpt), "--scenario", str(scen_path),
                 "--max-steps", "50", "--out", str(out)])
    assert code == 0
    assert (out / "tracks.csv").exists()
    summary = json.loads((out / "metrics.json").read_text())
    assert set(summary) >= {"arrival_rate", "collision_events", "mean_abs_dv"}


def test_heatmap_command(tmp_path, tiny_run):
    ckpt = tiny_run / "checkpoints" / "ckpt_000002" / "policy.net"
    out = tmp_path / "map"
    code = main(["heatmap", "--checkpoint", str(ckpt), "--preset", "head-on",
                 "--bounds", "-4", "4", "-4", "4", "--resolution", "2",
                 "--out", str(out)])
    assert code == 0
    grid = np.loadtxt(out.with_suffix(".csv"), delimiter=",")
    assert grid.shape == (4, 4)


def test_export_round_trip(tmp_path, tiny_run, rng, capsys):
    ckpt = tiny_run / "checkpoints" / "ckpt_000002" / "policy.net"
    out = tmp_path / "policy_f32.net"
    assert main(["export", "--checkpoint", str(ckpt), "--out", str(out)]) == 0
    full = load_network(ckpt)
    slim = load_network(out)
    assert slim.arch.hidden_size == full.arch.hidden_size
    assert slim.arch.layer_sizes == full.arch.layer_sizes
    obs = [random_observation(rng, k) for k in (0, 1, 2)]
    a = forward_obs_batch(full, obs).out
    b = forward_obs_batch(slim, obs).out
    assert np.allclose(a, b, rtol=1e-5, atol=1e-6)


def test_output_root_env_var(tmp_path, monkeypatch):
    from swarmnav.config import default_output_root

    monkeypatch.setenv("SWARMNAV_RUNS", str(tmp_path / "elsewhere"))
    assert default_output_root() == tmp_path / "elsewhere"
    monkeypatch.delenv("SWARMNAV_RUNS")
    assert str(default_output_root()) == "runs"


def test_flops_from_checkpoint(tiny_run, capsys):
    ckpt = tiny_run / "checkpoints" / "ckpt_000002" / "policy.net"
    assert main(["flops", "--agents", "3", "--checkpoint", str(ckpt)]) == 0
    printed = int(capsys.readouterr().out.strip())
    # hidden 6, input 3, layers (8, 8), action 2
    per = 8 * 36 + 8 * 6 * 3 + 26 * 6
    fixed = 2 * 7 * 8 + 4 * 8 + (2 * 64 + 32) + (2 * 8 * 2 + 8)
    assert printed == 2 * per + fixed
