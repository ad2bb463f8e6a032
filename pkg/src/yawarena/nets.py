"""Minimal dense networks with exact analytic gradients.

Everything runs in float64 so that repeated runs with the same seed are
bitwise identical. Hidden layers use tanh, the output layer is linear.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)

CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    """Input or parameter shapes do not match the network definition."""


@dataclass
class Mlp:
    """Dense feed-forward network parameters.

    weights[l] has shape (layer_sizes[l+1], layer_sizes[l]); biases[l] has
    length layer_sizes[l+1].
    """

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ShapeError("need at least input and output layer sizes")
        if any(s <= 0 for s in self.layer_sizes):
            raise ShapeError("layer sizes must be positive")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_sizes[l + 1], self.layer_sizes[l])
            if w.shape != want:
                raise ShapeError(f"layer {l}: weight shape {w.shape}, expected {want}")
            if b.shape != (self.layer_sizes[l + 1],):
                raise ShapeError(f"layer {l}: bias shape {b.shape}")

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    def parameter_arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "Mlp":
        return Mlp(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


@dataclass
class GaussianHead:
    """State-independent log standard deviation of a diagonal Gaussian policy."""

    log_std: np.ndarray

    def __post_init__(self):
        self.log_std = np.asarray(self.log_std, dtype=np.float64)
        if self.log_std.ndim != 1:
            raise ShapeError("log_std must be a vector")

    @property
    def action_dim(self) -> int:
        return self.log_std.shape[0]

    def copy(self) -> "GaussianHead":
        return GaussianHead(self.log_std.copy())


@dataclass
class GradientSet:
    """Gradients shaped like an Mlp plus the gradient w.r.t. the input."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input: np.ndarray


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_mlp(layer_sizes, rng: np.random.Generator, output_gain: float = 1.0) -> Mlp:
    """Orthogonal init, gain 1 on hidden layers, zero biases.

    output_gain shrinks the last layer; 0.01 keeps a fresh actor's mean
    action near zero so it starts out baseline-like.
    """
    sizes = tuple(int(s) for s in layer_sizes)
    weights, biases = [], []
    for l in range(len(sizes) - 1):
        gain = output_gain if l == len(sizes) - 2 else 1.0
        weights.append(_orthogonal(rng, sizes[l + 1], sizes[l], gain))
        biases.append(np.zeros(sizes[l + 1]))
    return Mlp(sizes, weights, biases)


def forward_batch(mlp: Mlp, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Batched forward pass. Returns (output, activation cache for backward)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != mlp.layer_sizes[0]:
        raise ShapeError(f"input shape {x.shape}, expected (batch, {mlp.layer_sizes[0]})")
    acts = [x]
    h = x
    for l in range(mlp.n_layers):
        z = h @ mlp.weights[l].T + mlp.biases[l]
        h = z if l == mlp.n_layers - 1 else np.tanh(z)
        acts.append(h)
    return h, acts


def forward(mlp: Mlp, x: np.ndarray) -> np.ndarray:
    """Single-sample forward pass."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (mlp.layer_sizes[0],):
        raise ShapeError(f"input shape {x.shape}, expected ({mlp.layer_sizes[0]},)")
    y, _ = forward_batch(mlp, x[None, :])
    return y[0]


def backward_batch(mlp: Mlp, acts: list[np.ndarray], output_grad: np.ndarray) -> GradientSet:
    """Exact gradients of sum(output * output_grad) over the batch."""
    g = np.asarray(output_grad, dtype=np.float64)
    if g.shape != acts[-1].shape:
        raise ShapeError(f"output_grad shape {g.shape}, expected {acts[-1].shape}")
    d_w = [None] * mlp.n_layers
    d_b = [None] * mlp.n_layers
    for l in reversed(range(mlp.n_layers)):
        d_w[l] = g.T @ acts[l]
        d_b[l] = g.sum(axis=0)
        g = g @ mlp.weights[l]
        if l > 0:
            g = g * (1.0 - acts[l] ** 2)
    return GradientSet(d_w, d_b, g)


def backward(mlp: Mlp, x: np.ndarray, output_grad: np.ndarray) -> GradientSet:
    """Single-sample backward pass (recomputes the forward cache)."""
    x = np.asarray(x, dtype=np.float64)
    output_grad = np.asarray(output_grad, dtype=np.float64)
    if output_grad.shape != (mlp.layer_sizes[-1],):
        raise ShapeError(f"output_grad shape {output_grad.shape}")
    _, acts = forward_batch(mlp, x[None, :])
    gs = backward_batch(mlp, acts, output_grad[None, :])
    gs.input = gs.input[0]
    return gs


def gaussian_log_prob(action: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Diagonal-Gaussian log density; sums over the trailing action axis."""
    std = np.exp(log_std)
    z = (action - mean) / std
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * LOG_2PI * log_std.shape[-1]


def sample_action(mean: np.ndarray, head: GaussianHead, rng: np.random.Generator):
    """Draw action ~ N(mean, diag(exp(log_std))^2); returns (action, log_prob)."""
    mean = np.asarray(mean, dtype=np.float64)
    if mean.shape != (head.action_dim,):
        raise ShapeError(f"mean shape {mean.shape}, expected ({head.action_dim},)")
    action = mean + np.exp(head.log_std) * rng.standard_normal(head.action_dim)
    return action, float(gaussian_log_prob(action, mean, head.log_std))


class Adam:
    """Adam over a fixed list of parameter arrays, updated in place."""

    def __init__(self, params: list[np.ndarray], lr: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def clip_grad_norm(grads: list[np.ndarray], max_norm: float) -> float:
    """Scales grads in place so their global L2 norm is at most max_norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


def mlp_to_dict(mlp: Mlp) -> dict:
    return {
        "layer_sizes": list(mlp.layer_sizes),
        "weights": [w.tolist() for w in mlp.weights],
        "biases": [b.tolist() for b in mlp.biases],
    }


def mlp_from_dict(d: dict) -> Mlp:
    return Mlp(
        tuple(d["layer_sizes"]),
        [np.array(w, dtype=np.float64) for w in d["weights"]],
        [np.array(b, dtype=np.float64) for b in d["biases"]],
    )
