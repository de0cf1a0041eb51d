"""Training loop: rollout collection, discounted returns, clipped updates.

Every agent in a homogeneous episode contributes its own trajectory to the
buffer; discounting never crosses agent boundaries. Returns are plain
discounted reward sums; the critic only supplies the baseline (advantage =
return - value) and the bootstrap for trajectories cut off by the step
limit. Policy and value networks are separate and get separate Adam states.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Callable

import numpy as np

from .checkpoints import load_network, save_network
from .geometry import body_to_world
from .networks import (
    NumericsError,
    clip_gradient_norm,
    init_policy_params,
    init_value_params,
    params_to_vector,
    vector_to_params,
)
from .optim import AdamState, adam_update
from .policy import (
    GaussianPolicy,
    ValueFunction,
    backward_obs_batch,
    forward_obs_batch,
    gaussian_entropy,
    gaussian_log_prob,
)
from .rewards import (
    RewardConfig,
    StepReward,
    acceleration_reward,
    arrival_reward,
    collision_reward,
    time_reward,
)
from .scenarios import ScenarioConfig, generate_scenario, make_rng
from .simulation import SimParams, WorldState, episode_done, observe, step

if TYPE_CHECKING:
    from .config import RunConfig


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    clip_eps: float = 0.2
    epochs_per_iter: int = 10
    minibatch_size: int = 256
    rollout_episodes: int = 32
    iterations: int = 150
    lr: float = 3e-4
    value_lr: float = 1e-3
    value_loss_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.5
    init_forward_speed: float = 1.0  # output-bias cruise speed at init, m/s
    init_steer_gain: float = 2.0     # destination-bearing passthrough at init
    checkpoint_every: int = 50
    workers: int = 1

    def validate(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("ppo.gamma must lie strictly in (0, 1)")
        if self.clip_eps <= 0.0:
            raise ValueError("ppo.clip_eps must be positive")
        for name in ("epochs_per_iter", "minibatch_size", "rollout_episodes",
                     "iterations", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"ppo.{name} must be >= 1")


@dataclass
class Transition:
    observation: object        # EgoObservation
    action: np.ndarray         # body frame, as sampled (before speed ceiling)
    log_prob: float
    reward: float
    value: float
    done: bool                 # True when this step ended in arrival
    agent_id: int
    episode_id: int


@dataclass
class EpisodeStats:
    episode_id: int
    n_agents: int
    arrivals: int
    collision_pairs: int       # distinct pairs that touched the hard zone
    delta_zone_steps: int      # (step, pair) counts inside the tolerance zone
    steps: int
    agent_returns: list[float]
    sum_abs_dv: float
    dv_count: int


@dataclass
class RolloutBuffer:
    transitions: list[Transition] = field(default_factory=list)
    bootstrap_values: dict[tuple[int, int], float] = field(default_factory=dict)
    episode_stats: list[EpisodeStats] = field(default_factory=list)
    returns: np.ndarray | None = None
    advantages: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.transitions)

    def trajectory_indices(self) -> dict[tuple[int, int], list[int]]:
        """Transition indices grouped per (episode, agent), in time order."""
        groups: dict[tuple[int, int], list[int]] = {}
        for idx, tr in enumerate(self.transitions):
            groups.setdefault((tr.episode_id, tr.agent_id), []).append(idx)
        return groups

    def merge(self, other: "RolloutBuffer") -> None:
        self.transitions.extend(other.transitions)
        self.bootstrap_values.update(other.bootstrap_values)
        self.episode_stats.extend(other.episode_stats)


def _pair_distances(world: WorldState) -> dict[tuple[int, int], float]:
    active = world.active_indices()
    dists = {}
    for a_pos, i in enumerate(active):
        pi = world.agents[i].position
        for j in active[a_pos + 1:]:
            pj = world.agents[j].position
            dists[(i, j)] = math.hypot(pi[0] - pj[0], pi[1] - pj[1])
    return dists


def run_episode(policy: GaussianPolicy, value_fn: ValueFunction, world: WorldState,
                sim: SimParams, reward_cfg: RewardConfig, rng, episode_id: int,
                buffer: RolloutBuffer, deterministic: bool = False) -> None:
    """Roll one episode to completion, appending transitions to the buffer."""
    n = len(world.agents)
    start_dists = [a.dist_to_destination() for a in world.agents]
    per_step_time = [time_reward(d, reward_cfg, sim.dt, sim.v_max) for d in start_dists]
    agent_returns = [0.0] * n
    collided_pairs: set[tuple[int, int]] = set()
    delta_zone_steps = 0
    sum_abs_dv = 0.0
    dv_count = 0

    while True:
        done, reason = episode_done(world, sim.max_steps)
        if done:
            break
        active = world.active_indices()
        obs = [observe(world, i) for i in active]
        if deterministic:
            means = policy.means(obs)
            actions, log_probs = means, gaussian_log_prob(means, means, policy.params.log_std)
        else:
            actions, log_probs, _ = policy.act(obs, rng)
        values = value_fn.values(obs)

        world_actions = [np.zeros(2)] * n
        for pos, i in enumerate(active):
            world_actions[i] = body_to_world(actions[pos], world.agents[i].heading)
        prev_world = world
        world = step(world, world_actions, sim)

        pair_d = _pair_distances(world)
        for (i, j), d in pair_d.items():
            if d <= reward_cfg.eps_cav:
                collided_pairs.add((i, j))
            elif d <= reward_cfg.delta_cav:
                delta_zone_steps += 1

        for pos, i in enumerate(active):
            agent = world.agents[i]
            r_arr = arrival_reward(agent.dist_to_destination(), reward_cfg) if agent.arrived else 0.0
            r_cav = 0.0 if agent.arrived else collision_reward(i, world, reward_cfg)
            realized_v = world_actions[i]
            speed = math.hypot(realized_v[0], realized_v[1])
            if speed > sim.v_max:
                realized_v = realized_v * (sim.v_max / speed)
            r_acc = acceleration_reward(prev_world.agents[i].velocity, realized_v, sim.dt)
            reward = StepReward.combine(reward_cfg, r_arr, r_cav, per_step_time[i], r_acc)
            sum_abs_dv += -r_acc
            dv_count += 1
            agent_returns[i] += reward.total
            buffer.transitions.append(
                Transition(
                    observation=obs[pos],
                    action=np.asarray(actions[pos], dtype=float),
                    log_prob=float(log_probs[pos]),
                    reward=reward.total,
                    value=float(values[pos]),
                    done=agent.arrived,
                    agent_id=i,
                    episode_id=episode_id,
                )
            )

    if reason is not None and reason.value == "timeout":
        for i in world.active_indices():
            buffer.bootstrap_values[(episode_id, i)] = value_fn.value(observe(world, i))

    buffer.episode_stats.append(
        EpisodeStats(
            episode_id=episode_id,
            n_agents=n,
            arrivals=sum(a.arrived for a in world.agents),
            collision_pairs=len(collided_pairs),
            delta_zone_steps=delta_zone_steps,
            steps=world.step_count,
            agent_returns=agent_returns,
            sum_abs_dv=sum_abs_dv,
            dv_count=dv_count,
        )
    )


def collect_rollouts(policy: GaussianPolicy, value_fn: ValueFunction,
                     scenarios, sim: SimParams, reward_cfg: RewardConfig,
                     rng, n_episodes: int, episode_id_start: int = 0,
                     deterministic: bool = False) -> RolloutBuffer:
    """Run full episodes and record every agent's trajectory.

    `scenarios` is either a ScenarioConfig or a callable rng -> WorldState.
    """
    if isinstance(scenarios, ScenarioConfig):
        cfg = scenarios
        source: Callable = lambda r: generate_scenario(r, cfg)
    else:
        source = scenarios
    buffer = RolloutBuffer()
    for k in range(n_episodes):
        world = source(rng)
        run_episode(policy, value_fn, world, sim, reward_cfg, rng,
                    episode_id_start + k, buffer, deterministic=deterministic)
    return buffer


def _worker_collect(payload) -> RolloutBuffer:
    (policy_params, value_params, value_scale, scen_cfg, sim, reward_cfg,
     seed_entropy, n_episodes, episode_id_start) = payload
    rng = np.random.Generator(np.random.PCG64(seed_entropy))
    return collect_rollouts(GaussianPolicy(policy_params),
                            ValueFunction(value_params, *value_scale),
                            scen_cfg, sim, reward_cfg, rng, n_episodes,
                            episode_id_start)


def collect_parallel(policy, value_fn, scen_cfg, sim, reward_cfg, seed_seq,
                     n_episodes: int, episode_id_start: int, workers: int) -> RolloutBuffer:
    """Fan rollout collection across processes; each worker owns its world
    and generator. Reproducible for a fixed worker count only."""
    shares = [n_episodes // workers] * workers
    for k in range(n_episodes % workers):
        shares[k] += 1
    seeds = seed_seq.spawn(workers)
    payloads = []
    offset = episode_id_start
    for w in range(workers):
        if shares[w] == 0:
            continue
        payloads.append((policy.params, value_fn.params,
                         (value_fn.scale_mean, value_fn.scale_std), scen_cfg,
                         sim, reward_cfg, seeds[w], shares[w], offset))
        offset += shares[w]
    merged = RolloutBuffer()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_worker_collect, payloads):
            merged.merge(part)
    return merged


def compute_returns_and_advantages(buffer: RolloutBuffer, gamma: float,
                                   normalize: bool = True) -> RolloutBuffer:
    """Discounted returns per trajectory; advantage = return - value.

    Trajectories that ended by arrival terminate with zero tail; trajectories
    cut off by the step limit bootstrap with the critic's estimate of the
    final observation. Advantages are normalized over the whole buffer.
    """
    if not buffer.transitions:
        raise ValueError("empty rollout buffer")
    returns = np.empty(len(buffer.transitions))
    for key, idxs in buffer.trajectory_indices().items():
        tail = buffer.bootstrap_values.get(key, 0.0)
        g = tail
        for t in reversed(idxs):
            g = buffer.transitions[t].reward + gamma * g
            returns[t] = g
    values = np.array([tr.value for tr in buffer.transitions])
    advantages = returns - values
    if normalize and len(buffer.transitions) > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    buffer.returns = returns
    buffer.advantages = advantages
    return buffer


def ppo_loss(obs_list, actions, old_log_probs, advantages, params, clip_eps: float,
             entropy_coef: float = 0.0, input_cache: dict | None = None):
    """Clipped-surrogate loss and exact parameter gradients for one minibatch.

    Returns (stats, grads); stats carries the policy loss, entropy and the
    fraction of samples whose ratio left the clip band.
    """
    actions = np.atleast_2d(np.asarray(actions, dtype=float))
    old_log_probs = np.asarray(old_log_probs, dtype=float)
    advantages = np.asarray(advantages, dtype=float)
    batch = len(obs_list)

    tape = forward_obs_batch(params, obs_list, input_cache)
    means = tape.out
    log_probs = gaussian_log_prob(actions, means, params.log_std)
    with np.errstate(over="ignore"):  # overflow surfaces as the error below
        ratio = np.exp(log_probs - old_log_probs)
    if not np.all(np.isfinite(ratio)):
        raise NumericsError(
            "non-finite probability ratio; the rollout buffer is stale or the "
            "policy diverged"
        )
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    surrogate = np.minimum(unclipped, clipped)
    policy_term = -float(surrogate.mean())
    entropy = gaussian_entropy(params.log_std)

    # gradient flows only through samples where the unclipped branch is active
    take_unclipped = unclipped <= clipped
    d_logp = np.where(take_unclipped, -ratio * advantages, 0.0) / batch
    var = np.exp(2.0 * params.log_std)
    residual = actions - means  # d logp / d mean = residual / var
    d_means = d_logp[:, None] * residual / var
    d_log_std = (d_logp[:, None] * (residual ** 2 / var - 1.0)).sum(axis=0)
    d_log_std -= entropy_coef  # d(-coef * mean entropy)/d log_std

    grads = backward_obs_batch(params, tape, d_means)
    grads.log_std = grads.log_std + d_log_std
    stats = {
        "policy_loss": policy_term,
        "entropy": entropy,
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > clip_eps)),
    }
    return stats, grads


def value_loss(obs_list, targets, params, coef: float = 1.0,
               input_cache: dict | None = None):
    """Mean-squared-error regression of the critic onto empirical returns."""
    targets = np.asarray(targets, dtype=float)
    tape = forward_obs_batch(params, obs_list, input_cache)
    predictions = tape.out[:, 0]
    errors = predictions - targets
    loss = float(np.mean(errors ** 2))
    d_out = (2.0 * coef / len(obs_list)) * errors[:, None]
    grads = backward_obs_batch(params, tape, d_out)
    return loss, grads


@dataclass
class TrainResult:
    iterations_run: int
    episodes_seen: int
    aborted: bool
    abort_reason: str | None
    run_dir: Path
    metrics_path: Path
    last_checkpoint: Path | None
    policy: GaussianPolicy
    value: ValueFunction


METRICS_COLUMNS = [
    "iteration", "episodes_seen", "mean_reward", "arrival_rate",
    "collision_events", "mean_abs_dv", "policy_loss", "value_loss",
    "clip_fraction",
]


def save_training_checkpoint(ckpt_dir: Path, policy_params, value_params,
                             policy_opt: AdamState, value_opt: AdamState,
                             iteration: int, episodes_seen: int, rng,
                             value_scale: tuple[float, float] = (0.0, 1.0)) -> Path:
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    meta = {"iteration": iteration, "episodes_seen": episodes_seen}
    save_network(ckpt_dir / "policy.net", policy_params, metadata=meta)
    save_network(ckpt_dir / "value.net", value_params, metadata=meta)
    np.savez(
        ckpt_dir / "optimizer.npz",
        policy_m=policy_opt.m, policy_v=policy_opt.v,
        policy_step=policy_opt.step,
        value_m=value_opt.m, value_v=value_opt.v, value_step=value_opt.step,
    )
    state = {
        "iteration": iteration,
        "episodes_seen": episodes_seen,
        "rng_state": rng.bit_generator.state,
        "value_scale_mean": value_scale[0],
        "value_scale_std": value_scale[1],
    }
    (ckpt_dir / "trainer.json").write_text(json.dumps(state, indent=2))
    return ckpt_dir


def load_training_checkpoint(ckpt_dir: Path):
    ckpt_dir = Path(ckpt_dir)
    policy_params = load_network(ckpt_dir / "policy.net")
    value_params = load_network(ckpt_dir / "value.net")
    blob = np.load(ckpt_dir / "optimizer.npz")
    policy_opt = AdamState(blob["policy_m"], blob["policy_v"], int(blob["policy_step"]))
    value_opt = AdamState(blob["value_m"], blob["value_v"], int(blob["value_step"]))
    state = json.loads((ckpt_dir / "trainer.json").read_text())
    return policy_params, value_params, policy_opt, value_opt, state


def train(run: "RunConfig", run_dir, resume=None, log=None) -> TrainResult:
    """Full training: collect, compute advantages, update for several epochs,
    log one metrics row per iteration, checkpoint periodically.

    A non-finite loss, gradient or ratio aborts the run; the most recent
    checkpoint on disk stays untouched.
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    from .config import dump_config  # deferred: config composes this module

    (run_dir / "config.cfg").write_text(dump_config(run))
    ckpt_root = run_dir / "checkpoints"
    metrics_path = run_dir / "metrics.csv"
    cfg = run.ppo
    say = log if log is not None else (lambda msg: None)

    rng = make_rng(run.seed)
    if resume is not None:
        policy_params, value_params, policy_opt, value_opt, state = \
            load_training_checkpoint(resume)
        if policy_params.arch != run.arch:
            from .checkpoints import CheckpointError

            raise CheckpointError(
                f"checkpoint architecture {policy_params.arch} does not match "
                f"the configured architecture {run.arch}")
        start_iteration = state["iteration"]
        episodes_seen = state["episodes_seen"]
        rng.bit_generator.state = state["rng_state"]
        value_scale = (state.get("value_scale_mean", 0.0),
                       state.get("value_scale_std", 1.0))
        mode = "a" if metrics_path.exists() else "w"
    else:
        policy_params = init_policy_params(run.arch, rng, cfg.init_forward_speed,
                                           cfg.init_steer_gain)
        value_params = init_value_params(run.arch, rng)
        policy_opt = AdamState.zeros(params_to_vector(policy_params).size)
        value_opt = AdamState.zeros(params_to_vector(value_params).size)
        start_iteration = 0
        episodes_seen = 0
        value_scale = (0.0, 1.0)
        mode = "w"

    policy = GaussianPolicy(policy_params)
    value_fn = ValueFunction(value_params, *value_scale)
    last_checkpoint: Path | None = Path(resume) if resume is not None else None
    aborted = False
    abort_reason = None
    iteration = start_iteration

    metrics_file = open(metrics_path, mode, newline="")
    writer = csv.writer(metrics_file)
    if mode == "w":
        writer.writerow(METRICS_COLUMNS)

    try:
        for iteration in range(start_iteration + 1, cfg.iterations + 1):
            t0 = time.perf_counter()
            if cfg.workers > 1:
                seed_seq = np.random.SeedSequence(entropy=(run.seed, iteration))
                buffer = collect_parallel(policy, value_fn, run.scenario, run.sim,
                                          run.reward, seed_seq, cfg.rollout_episodes,
                                          episodes_seen, cfg.workers)
            else:
                buffer = collect_rollouts(policy, value_fn, run.scenario, run.sim,
                                          run.reward, rng, cfg.rollout_episodes,
                                          episodes_seen)
            episodes_seen += cfg.rollout_episodes
            compute_returns_and_advantages(buffer, cfg.gamma)
            value_fn.update_scale(buffer.returns)
            value_targets = value_fn.normalize_targets(buffer.returns)

            obs_all = [tr.observation for tr in buffer.transitions]
            actions = np.stack([tr.action for tr in buffer.transitions])
            old_log_probs = np.array([tr.log_prob for tr in buffer.transitions])
            input_cache: dict = {}

            pol_vec = params_to_vector(policy.params)
            val_vec = params_to_vector(value_fn.params)
            loss_sums = np.zeros(3)  # policy, value, clip fraction
            n_batches = 0
            for _ in range(cfg.epochs_per_iter):
                order = rng.permutation(len(buffer))
                for lo in range(0, len(order), cfg.minibatch_size):
                    sel = order[lo:lo + cfg.minibatch_size]
                    stats, grads = ppo_loss(
                        [obs_all[k] for k in sel], actions[sel],
                        old_log_probs[sel], buffer.advantages[sel],
                        policy.params, cfg.clip_eps, cfg.entropy_coef,
                        input_cache)
                    gvec, _ = clip_gradient_norm(params_to_vector(grads),
                                                 cfg.max_grad_norm)
                    pol_vec, policy_opt = adam_update(pol_vec, gvec, policy_opt,
                                                      lr=cfg.lr)
                    policy.params = vector_to_params(pol_vec, policy.params)

                    vloss, vgrads = value_loss([obs_all[k] for k in sel],
                                               value_targets[sel],
                                               value_fn.params,
                                               coef=cfg.value_loss_coef,
                                               input_cache=input_cache)
                    gvec, _ = clip_gradient_norm(params_to_vector(vgrads),
                                                 cfg.max_grad_norm)
                    val_vec, value_opt = adam_update(val_vec, gvec, value_opt,
                                                     lr=cfg.value_lr)
                    value_fn.params = vector_to_params(val_vec, value_fn.params)

                    loss_sums += (stats["policy_loss"], vloss, stats["clip_fraction"])
                    n_batches += 1

            if not (np.all(np.isfinite(pol_vec)) and np.all(np.isfinite(val_vec))):
                raise NumericsError("parameters left the finite range")

            agent_returns = [r for st in buffer.episode_stats for r in st.agent_returns]
            n_agents_total = sum(st.n_agents for st in buffer.episode_stats)
            arrivals = sum(st.arrivals for st in buffer.episode_stats)
            dv_count = max(1, sum(st.dv_count for st in buffer.episode_stats))
            row = [
                iteration,
                episodes_seen,
                float(np.mean(agent_returns)),
                arrivals / max(1, n_agents_total),
                sum(st.collision_pairs for st in buffer.episode_stats),
                sum(st.sum_abs_dv for st in buffer.episode_stats) / dv_count,
                loss_sums[0] / n_batches,
                loss_sums[1] / n_batches,
                loss_sums[2] / n_batches,
            ]
            writer.writerow(row)
            metrics_file.flush()
            values_seen = np.array([tr.value for tr in buffer.transitions])
            explained = 1.0 - float(
                np.var(buffer.returns - values_seen) / max(np.var(buffer.returns), 1e-9))
            say(f"iter {iteration:4d} episodes {episodes_seen:6d} "
                f"reward {row[2]:9.2f} arrival {row[3]:.2f} "
                f"collisions {row[4]:3d} ev {explained:5.2f} "
                f"lstd {np.round(policy.params.log_std, 2)} "
                f"[{time.perf_counter() - t0:.1f}s]")

            if iteration % cfg.checkpoint_every == 0 or iteration == cfg.iterations:
                last_checkpoint = save_training_checkpoint(
                    ckpt_root / f"ckpt_{iteration:06d}", policy.params,
                    value_fn.params, policy_opt, value_opt, iteration,
                    episodes_seen, rng,
                    value_scale=(value_fn.scale_mean, value_fn.scale_std))
    except NumericsError as err:
        aborted = True
        abort_reason = str(err)
        (run_dir / "ABORTED").write_text(abort_reason + "\n")
        say(f"aborted: {abort_reason}")
    finally:
        metrics_file.close()

    return TrainResult(
        iterations_run=iteration,
        episodes_seen=episodes_seen,
        aborted=aborted,
        abort_reason=abort_reason,
        run_dir=run_dir,
        metrics_path=metrics_path,
        last_checkpoint=last_checkpoint,
        policy=policy,
        value=value_fn,
    )
