"""Core PPO machinery: categorical policy math, generalized advantage
estimation, the clipped surrogate objective, and minibatch updates with
analytic gradients through both networks.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError, TrainingError
from .nets import Adam, clone_params, init_mlp, mlp_backward, mlp_forward

N_ACTIONS = 6


@dataclass
class PpoConfig:
    learning_rate: float = 3e-4
    rollout_length: int = 2048
    minibatch: int = 256
    clip: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    epochs: int = 4
    reset_interval: int = 5000
    hidden: int = 256

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must be in [0, 1], got {self.lam}")
        if self.clip <= 0.0:
            raise ValueError(f"clip must be positive, got {self.clip}")


@dataclass
class PolicyParams:
    policy: dict[str, np.ndarray]
    value: dict[str, np.ndarray]
    obs_dim: int
    n_actions: int = N_ACTIONS
    hidden: int = 256

    def clone(self) -> "PolicyParams":
        return PolicyParams(
            policy=clone_params(self.policy),
            value=clone_params(self.value),
            obs_dim=self.obs_dim,
            n_actions=self.n_actions,
            hidden=self.hidden,
        )


def init_params(rng: np.random.Generator, obs_dim: int, n_actions: int = N_ACTIONS, hidden: int = 256) -> PolicyParams:
    return PolicyParams(
        policy=init_mlp(rng, obs_dim, n_actions, hidden, out_scale=0.01),
        value=init_mlp(rng, obs_dim, 1, hidden),
        obs_dim=obs_dim,
        n_actions=n_actions,
        hidden=hidden,
    )


def reset_weights(params: PolicyParams, rng: np.random.Generator) -> PolicyParams:
    """Full reinitialization of both networks (the periodic reset technique)."""
    return init_params(rng, params.obs_dim, params.n_actions, params.hidden)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def categorical_entropy(logits: np.ndarray) -> np.ndarray:
    logp = log_softmax(logits)
    return -(np.exp(logp) * logp).sum(axis=-1)


def sample_action(rng: np.random.Generator, logits: np.ndarray) -> int:
    probs = np.exp(log_softmax(logits))
    r = rng.random()
    return int(min(np.searchsorted(np.cumsum(probs), r), len(probs) - 1))


def policy_logits(params: PolicyParams, obs: np.ndarray) -> np.ndarray:
    out, _ = mlp_forward(params.policy, np.atleast_2d(obs))
    return out[0] if obs.ndim == 1 else out


def state_value(params: PolicyParams, obs: np.ndarray) -> float:
    out, _ = mlp_forward(params.value, np.atleast_2d(obs))
    return float(out[0, 0])


def gae(rewards, values, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation.

    values must include the bootstrap entry, i.e. len(values) ==
    len(rewards) + 1. Returns (advantages, returns) with returns =
    advantages + values[:-1].
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape[0] != rewards.shape[0] + 1:
        raise ValueError(
            f"values must have len(rewards)+1 entries, got {values.shape[0]} for {rewards.shape[0]} rewards"
        )
    n = rewards.shape[0]
    advantages = np.zeros(n)
    carry = 0.0
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * values[t + 1] - values[t]
        carry = delta + gamma * lam * carry
        advantages[t] = carry
    return advantages, advantages + values[:-1]


def gae_masked(rewards, values, dones, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """GAE across episode boundaries: dones[t] truncates the recursion so no
    credit flows from a later episode into an earlier one."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    if values.shape[0] != rewards.shape[0] + 1 or dones.shape[0] != rewards.shape[0]:
        raise ValueError("gae_masked needs len(values) == len(rewards)+1 == len(dones)+1")
    n = rewards.shape[0]
    advantages = np.zeros(n)
    carry = 0.0
    for t in range(n - 1, -1, -1):
        live = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * values[t + 1] * live - values[t]
        carry = delta + gamma * lam * carry * live
        advantages[t] = carry
    return advantages, advantages + values[:-1]


def ppo_surrogate(ratio: float, advantage: float, clip: float = 0.2) -> float:
    """Clipped-surrogate contribution of a single sample."""
    clipped = min(max(ratio, 1.0 - clip), 1.0 + clip)
    return min(ratio * advantage, clipped * advantage)


@dataclass
class Batch:
    obs: np.ndarray  # (B, D)
    actions: np.ndarray  # (B,) int
    log_probs: np.ndarray  # (B,) behavior log-probs
    advantages: np.ndarray  # (B,)
    returns: np.ndarray  # (B,)

    def __len__(self) -> int:
        return self.obs.shape[0]

    def select(self, idx: np.ndarray) -> "Batch":
        return Batch(self.obs[idx], self.actions[idx], self.log_probs[idx], self.advantages[idx], self.returns[idx])


def loss_and_grads(
    params: PolicyParams, batch: Batch, cfg: PpoConfig
) -> tuple[dict[str, float], dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Total PPO loss and analytic gradients for both networks.

    loss = -surrogate + value_coef * value_MSE - entropy_coef * entropy,
    all terms batch means.
    """
    n = len(batch)
    logits, pol_cache = mlp_forward(params.policy, batch.obs)
    logp_all = log_softmax(logits)
    probs = np.exp(logp_all)
    rows = np.arange(n)
    logp_act = logp_all[rows, batch.actions]
    ratio = np.exp(logp_act - batch.log_probs)
    adv = batch.advantages

    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv
    surrogate = np.minimum(unclipped, clipped)
    policy_loss = -float(surrogate.mean())

    entropy = -(probs * logp_all).sum(axis=1)
    mean_entropy = float(entropy.mean())

    values, val_cache = mlp_forward(params.value, batch.obs)
    values = values[:, 0]
    value_err = values - batch.returns
    value_loss = float((value_err**2).mean())

    total = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * mean_entropy
    if not np.isfinite(total):
        raise TrainingError(
            f"non-finite loss: policy={policy_loss} value={value_loss} entropy={mean_entropy}"
        )

    # d(-surrogate)/dlogp_act: the ratio path is live when the raw term is the
    # minimum; when the clipped term wins the clip is binding and the
    # derivative through the ratio is zero.
    coeff = np.where(unclipped <= clipped, ratio * adv, 0.0)
    one_hot = np.zeros_like(logits)
    one_hot[rows, batch.actions] = 1.0
    dlogits = (-coeff / n)[:, None] * (one_hot - probs)
    # entropy term: dH/dlogits_j = -p_j (logp_j + H)
    dlogits += (cfg.entropy_coef / n) * probs * (logp_all + entropy[:, None])
    policy_grads = mlp_backward(params.policy, pol_cache, dlogits)

    dvalues = (cfg.value_coef * 2.0 / n) * value_err
    value_grads = mlp_backward(params.value, val_cache, dvalues[:, None])

    stats = {
        "loss": total,
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": mean_entropy,
        "approx_kl": float((batch.log_probs - logp_act).mean()),
        "clip_fraction": float((unclipped > clipped).mean()),
    }
    return stats, policy_grads, value_grads


def update(
    params: PolicyParams,
    policy_opt: Adam,
    value_opt: Adam,
    batch: Batch,
    cfg: PpoConfig,
    rng: np.random.Generator,
) -> dict[str, float]:
    """Epochs x minibatch sweeps of gradient steps. Advantages are
    normalized once over the full batch."""
    adv = batch.advantages
    std = adv.std()
    normalized = Batch(
        obs=batch.obs,
        actions=batch.actions,
        log_probs=batch.log_probs,
        advantages=(adv - adv.mean()) / (std + 1e-8),
        returns=batch.returns,
    )
    n = len(normalized)
    last_stats: dict[str, float] = {}
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            idx = order[start : start + cfg.minibatch]
            if idx.size == 0:
                continue
            stats, pol_grads, val_grads = loss_and_grads(params, normalized.select(idx), cfg)
            policy_opt.step(params.policy, pol_grads)
            value_opt.step(params.value, val_grads)
            last_stats = stats
    return last_stats


def crossed_reset(prev_steps: int, new_steps: int, interval: int) -> bool:
    """True when the global step counter crosses a multiple of interval
    (4999 -> no, 5000 -> yes)."""
    if interval <= 0:
        return False
    return prev_steps // interval < new_steps // interval


# --- checkpoints ---------------------------------------------------------------

CHECKPOINT_VERSION = 1


def _net_to_json(net: dict[str, np.ndarray]) -> dict:
    return {key: {"shape": list(arr.shape), "data": arr.ravel().tolist()} for key, arr in net.items()}


def _net_from_json(data: dict) -> dict[str, np.ndarray]:
    net = {}
    for key, entry in data.items():
        arr = np.asarray(entry["data"], dtype=float).reshape(entry["shape"])
        net[key] = arr
    return net


def save_checkpoint(params: PolicyParams, path: str | Path, meta: dict | None = None) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "obs_dim": params.obs_dim,
        "n_actions": params.n_actions,
        "hidden": params.hidden,
        "policy": _net_to_json(params.policy),
        "value": _net_to_json(params.value),
        "meta": meta or {},
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_checkpoint(path: str | Path) -> PolicyParams:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if payload.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {payload.get('version')!r}")
    try:
        return PolicyParams(
            policy=_net_from_json(payload["policy"]),
            value=_net_from_json(payload["value"]),
            obs_dim=int(payload["obs_dim"]),
            n_actions=int(payload["n_actions"]),
            hidden=int(payload["hidden"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed checkpoint {path}: {exc}") from exc


def config_to_dict(cfg: PpoConfig) -> dict:
    return asdict(cfg)
