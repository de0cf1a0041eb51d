"""Multi-agent 2D path planning with a recurrent neighbor encoder and PPO."""

from .config import RunConfig, desk_run_config, load_config
from .networks import Architecture, PolicyParams, ValueParams, count_flops
from .policy import GaussianPolicy, ValueFunction
from .ppo import PpoConfig, train
from .rewards import RewardConfig
from .scenarios import ScenarioConfig, generate_scenario, make_rng
from .simulation import SimParams, WorldState, episode_done, observe, step

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "GaussianPolicy",
    "PolicyParams",
    "PpoConfig",
    "RewardConfig",
    "RunConfig",
    "ScenarioConfig",
    "SimParams",
    "ValueFunction",
    "ValueParams",
    "WorldState",
    "count_flops",
    "desk_run_config",
    "episode_done",
    "generate_scenario",
    "load_config",
    "make_rng",
    "observe",
    "step",
    "train",
    "__version__",
]
