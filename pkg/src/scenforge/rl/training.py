"""Two-phase PPO training over compiled scenario programs.

Phase I trains one shared adversarial policy across all programs with the
periodic full-network reset; Phase II trains the ego with adversarial
weights frozen. Episode randomness is keyed by (master seed, env index,
episode index), so per-episode traces are reproducible regardless of how
rollouts are scheduled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..sim import PolicyFn, ScenarioProgram, Simulation, run_episode
from .envs import AgentEnv, K_NEAREST, RewardConfig, build_observation
from .nets import Adam
from .ppo import (
    Batch,
    PolicyParams,
    PpoConfig,
    crossed_reset,
    gae_masked,
    init_params,
    log_softmax,
    policy_logits,
    reset_weights,
    sample_action,
    state_value,
    update,
)

STATS_COLUMNS = ("step", "mean_reward", "collision_rate", "entropy")


def episode_rng(master_seed: int, env_index: int, episode_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((master_seed, env_index, episode_index)))


def episode_seed(master_seed: int, env_index: int, episode_index: int) -> int:
    return int(np.random.SeedSequence((master_seed, env_index, episode_index)).generate_state(1)[0])


def _learner_slot(program: ScenarioProgram, phase: str) -> str:
    role = "adversarial" if phase == "I" else "ego"
    slots = [s for s in program.policy_slots() if program.vehicle(s).role == role]
    if len(slots) != 1:
        raise ConfigError(
            f"program {program.name!r} needs exactly one {role} policy slot for phase {phase}, found {len(slots)}"
        )
    return slots[0]


class _Runner:
    """One environment plus its episode bookkeeping."""

    def __init__(self, env: AgentEnv, env_index: int, master_seed: int) -> None:
        self.env = env
        self.index = env_index
        self.master = master_seed
        self.episode_index = 0
        self.rng = episode_rng(master_seed, env_index, 0)
        self.obs = env.reset()
        self.ep_return = 0.0

    def _next_episode(self) -> None:
        self.episode_index += 1
        self.rng = episode_rng(self.master, self.index, self.episode_index)
        self.obs = self.env.reset()
        self.ep_return = 0.0


@dataclass
class SegmentStats:
    episode_returns: list[float] = field(default_factory=list)
    collisions: int = 0
    episodes: int = 0


def _collect(runner: _Runner, params: PolicyParams, length: int, segment: SegmentStats, gamma: float, lam: float):
    env = runner.env
    obs_buf = np.empty((length, env.obs_dim))
    act_buf = np.empty(length, dtype=int)
    logp_buf = np.empty(length)
    rew_buf = np.empty(length)
    done_buf = np.empty(length, dtype=bool)
    val_buf = np.empty(length + 1)
    for t in range(length):
        logits = policy_logits(params, runner.obs)
        action = sample_action(runner.rng, logits)
        obs_buf[t] = runner.obs
        act_buf[t] = action
        logp_buf[t] = log_softmax(logits)[action]
        val_buf[t] = state_value(params, runner.obs)
        obs, reward, done, info = env.step(action)
        rew_buf[t] = reward
        done_buf[t] = done
        runner.ep_return += reward
        if done:
            segment.episodes += 1
            segment.episode_returns.append(runner.ep_return)
            if info["termination"] == "collision":
                segment.collisions += 1
            runner._next_episode()
        else:
            runner.obs = obs
    val_buf[length] = state_value(params, runner.obs)
    advantages, returns = gae_masked(rew_buf, val_buf, done_buf, gamma, lam)
    return obs_buf, act_buf, logp_buf, advantages, returns


def run_ppo(
    programs: list[ScenarioProgram],
    phase: str,
    total_steps: int,
    *,
    cfg: PpoConfig | None = None,
    reward: RewardConfig | None = None,
    seed: int = 0,
    frozen: dict[str, PolicyParams] | None = None,
    reset_enabled: bool | None = None,
) -> tuple[PolicyParams, list[dict]]:
    """Shared-policy PPO over all programs. Returns final params and one
    stats row per update segment."""
    if not programs:
        raise ConfigError("run_ppo needs at least one program")
    cfg = cfg if cfg is not None else PpoConfig()
    reward = reward or RewardConfig()
    if reset_enabled is None:
        reset_enabled = phase == "I"

    envs = [AgentEnv(p, _learner_slot(p, phase), phase, reward, frozen) for p in programs]
    dims = {env.obs_dim for env in envs}
    if len(dims) != 1:
        raise ConfigError(f"programs produce inconsistent observation sizes: {sorted(dims)}")
    obs_dim = dims.pop()

    init_rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    update_rng = np.random.default_rng(np.random.SeedSequence((seed, 2)))
    reset_rng = np.random.default_rng(np.random.SeedSequence((seed, 3)))
    params = init_params(init_rng, obs_dim, hidden=cfg.hidden)
    policy_opt = Adam(params.policy, cfg.learning_rate)
    value_opt = Adam(params.value, cfg.learning_rate)

    runners = [_Runner(env, i, seed) for i, env in enumerate(envs)]
    stats_rows: list[dict] = []
    steps_done = 0
    base_per_env = max(1, cfg.rollout_length // len(envs))
    while steps_done < total_steps:
        remaining = total_steps - steps_done
        per_env = max(1, min(base_per_env, math.ceil(remaining / len(envs))))
        segment = SegmentStats()
        pieces = [_collect(runner, params, per_env, segment, cfg.gamma, cfg.lam) for runner in runners]
        collected = per_env * len(runners)
        prev_steps = steps_done
        steps_done += collected

        if reset_enabled and crossed_reset(prev_steps, steps_done, cfg.reset_interval):
            # data collected by the pre-reset policy is stale; drop it
            params = reset_weights(params, reset_rng)
            policy_opt = Adam(params.policy, cfg.learning_rate)
            value_opt = Adam(params.value, cfg.learning_rate)
            entropy = float("nan")
        else:
            batch = Batch(
                obs=np.concatenate([p[0] for p in pieces]),
                actions=np.concatenate([p[1] for p in pieces]),
                log_probs=np.concatenate([p[2] for p in pieces]),
                advantages=np.concatenate([p[3] for p in pieces]),
                returns=np.concatenate([p[4] for p in pieces]),
            )
            entropy = update(params, policy_opt, value_opt, batch, cfg, update_rng).get("entropy", float("nan"))

        stats_rows.append(
            {
                "step": steps_done,
                "mean_reward": float(np.mean(segment.episode_returns)) if segment.episode_returns else 0.0,
                "collision_rate": segment.collisions / segment.episodes if segment.episodes else 0.0,
                "entropy": entropy,
            }
        )
    return params, stats_rows


def train_adversarial(
    programs: list[ScenarioProgram],
    total_steps: int,
    *,
    cfg: PpoConfig | None = None,
    reward: RewardConfig | None = None,
    seed: int = 0,
) -> tuple[PolicyParams, list[dict]]:
    """Phase I: adversarial slots learn, egos stay scripted; resets on."""
    return run_ppo(programs, "I", total_steps, cfg=cfg, reward=reward, seed=seed, reset_enabled=True)


def train_ego(
    programs: list[ScenarioProgram],
    total_steps: int,
    *,
    frozen_adversarial: PolicyParams | None = None,
    cfg: PpoConfig | None = None,
    reward: RewardConfig | None = None,
    seed: int = 0,
) -> tuple[PolicyParams, list[dict]]:
    """Phase II: ego slots learn against scripted or frozen adversaries."""
    frozen: dict[str, PolicyParams] = {}
    if frozen_adversarial is not None:
        for program in programs:
            for slot in program.policy_slots():
                if program.vehicle(slot).role == "adversarial":
                    frozen[slot] = frozen_adversarial
    return run_ppo(
        programs, "II", total_steps, cfg=cfg, reward=reward, seed=seed, frozen=frozen, reset_enabled=False
    )


def make_policy_fn(params: PolicyParams, mode: str = "sample", k: int = K_NEAREST) -> PolicyFn:
    """Adapt trained params to the simulator policy interface."""
    if mode not in ("sample", "greedy"):
        raise ConfigError(f"policy mode must be sample or greedy, got {mode!r}")

    def policy(sim: Simulation, vehicle_id: str, rng: np.random.Generator) -> int:
        obs = build_observation(sim, vehicle_id, k)
        logits = policy_logits(params, obs)
        if mode == "greedy":
            return int(np.argmax(logits))
        return sample_action(rng, logits)

    return policy


def evaluate_policy(
    programs: list[ScenarioProgram],
    params: PolicyParams | None,
    phase: str,
    episodes_per_program: int,
    master_seed: int,
    mode: str = "sample",
) -> dict:
    """Collision-rate evaluation. params=None leaves every policy slot on
    the built-in IDLE fallback."""
    collisions = 0
    total = 0
    logs = []
    for p_idx, program in enumerate(programs):
        slot = _learner_slot(program, phase)
        policies = {slot: make_policy_fn(params, mode)} if params is not None else {}
        for e_idx in range(episodes_per_program):
            seed_value = episode_seed(master_seed, p_idx, e_idx)
            log = run_episode(program, policies, seed=seed_value)
            total += 1
            if log.termination == "collision":
                collisions += 1
            logs.append(log)
    return {
        "collision_rate": collisions / total if total else 0.0,
        "episodes": total,
        "collisions": collisions,
        "logs": logs,
    }


def save_stats(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=STATS_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({key: row.get(key, "") for key in STATS_COLUMNS})
