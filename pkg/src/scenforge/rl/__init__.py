"""PPO training on the built-in simulator: networks, losses, environments,
and the two-phase training loops."""

from .envs import AgentEnv, K_NEAREST, RewardConfig, build_observation, observation_dim, terminal_reward
from .nets import Adam, HIDDEN, clone_params, init_mlp, mlp_backward, mlp_forward, params_equal
from .ppo import (
    Batch,
    N_ACTIONS,
    PolicyParams,
    PpoConfig,
    categorical_entropy,
    crossed_reset,
    gae,
    gae_masked,
    init_params,
    load_checkpoint,
    log_softmax,
    loss_and_grads,
    policy_logits,
    ppo_surrogate,
    reset_weights,
    sample_action,
    save_checkpoint,
    state_value,
    update,
)
from .training import (
    STATS_COLUMNS,
    episode_rng,
    episode_seed,
    evaluate_policy,
    make_policy_fn,
    run_ppo,
    save_stats,
    train_adversarial,
    train_ego,
)

__all__ = [
    "Adam",
    "AgentEnv",
    "Batch",
    "HIDDEN",
    "K_NEAREST",
    "N_ACTIONS",
    "PolicyParams",
    "PpoConfig",
    "RewardConfig",
    "STATS_COLUMNS",
    "build_observation",
    "categorical_entropy",
    "clone_params",
    "crossed_reset",
    "episode_rng",
    "episode_seed",
    "evaluate_policy",
    "gae",
    "gae_masked",
    "init_mlp",
    "init_params",
    "load_checkpoint",
    "log_softmax",
    "loss_and_grads",
    "make_policy_fn",
    "mlp_backward",
    "mlp_forward",
    "observation_dim",
    "params_equal",
    "policy_logits",
    "ppo_surrogate",
    "reset_weights",
    "run_ppo",
    "sample_action",
    "save_checkpoint",
    "save_stats",
    "state_value",
    "terminal_reward",
    "train_adversarial",
    "train_ego",
    "update",
]
