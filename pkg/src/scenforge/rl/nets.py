"""Minimal dense networks on numpy: 2-hidden-layer ReLU MLPs with explicit
reverse-mode gradients, plus the adaptive-moment optimizer.

Parameters are plain dicts of float64 arrays keyed w1/b1/w2/b2/w3/b3, so
they serialize directly and can be compared bit-for-bit in freeze tests.
"""

from __future__ import annotations

import numpy as np

HIDDEN = 256

_LAYER_KEYS = ("w1", "b1", "w2", "b2", "w3", "b3")


def init_mlp(
    rng: np.random.Generator,
    in_dim: int,
    out_dim: int,
    hidden: int = HIDDEN,
    out_scale: float = 1.0,
) -> dict[str, np.ndarray]:
    """He-scaled Gaussian weights, zero biases. out_scale shrinks the final
    layer (small initial logits keep the starting policy near uniform)."""

    def layer(fan_in: int, fan_out: int, scale: float) -> np.ndarray:
        return rng.normal(0.0, scale * np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))

    return {
        "w1": layer(in_dim, hidden, 1.0),
        "b1": np.zeros(hidden),
        "w2": layer(hidden, hidden, 1.0),
        "b2": np.zeros(hidden),
        "w3": layer(hidden, out_dim, out_scale),
        "b3": np.zeros(out_dim),
    }


def mlp_forward(params: dict[str, np.ndarray], x: np.ndarray) -> tuple[np.ndarray, tuple]:
    z1 = x @ params["w1"] + params["b1"]
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ params["w2"] + params["b2"]
    a2 = np.maximum(z2, 0.0)
    out = a2 @ params["w3"] + params["b3"]
    return out, (x, z1, a1, z2, a2)


def mlp_backward(params: dict[str, np.ndarray], cache: tuple, dout: np.ndarray) -> dict[str, np.ndarray]:
    x, z1, a1, z2, a2 = cache
    grads: dict[str, np.ndarray] = {}
    grads["w3"] = a2.T @ dout
    grads["b3"] = dout.sum(axis=0)
    da2 = dout @ params["w3"].T
    dz2 = da2 * (z2 > 0)
    grads["w2"] = a1.T @ dz2
    grads["b2"] = dz2.sum(axis=0)
    da1 = dz2 @ params["w2"].T
    dz1 = da1 * (z1 > 0)
    grads["w1"] = x.T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    return grads


def clone_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in params.items()}


def params_equal(a: dict[str, np.ndarray], b: dict[str, np.ndarray]) -> bool:
    return set(a) == set(b) and all(np.array_equal(a[k], b[k]) for k in a)


class Adam:
    """Adaptive-moment gradient descent over a dict of arrays."""

    def __init__(self, params: dict[str, np.ndarray], lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def reset(self, params: dict[str, np.ndarray]) -> None:
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for key, grad in grads.items():
            m = self.m[key]
            v = self.v[key]
            m += (1.0 - self.beta1) * (grad - m)
            v += (1.0 - self.beta2) * (grad * grad - v)
            params[key] -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
