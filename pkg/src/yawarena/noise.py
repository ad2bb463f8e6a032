"""Sensor corruption: procedural Gaussian-plus-bias noise and the
adversarial bounded-increment error state.

A sensor frame is an (n_turbines, 4) array with signal columns
(wind speed, wind direction, yaw offset, power). Errors are additive in
physical units; the direction error also leaks into the yaw sensor with
a sign flip (yaw follows a right-hand rule, direction is left-handed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# signal column indices
SIG_SPEED = 0
SIG_DIRECTION = 1
SIG_YAW = 2
SIG_POWER = 3
N_SIGNALS = 4
SIGNAL_NAMES = ("speed", "direction", "yaw", "power")


@dataclass(frozen=True)
class NoiseBounds:
    """Per-signal maximum bias and white-noise sigma (speed m/s,
    direction deg, yaw deg, power W)."""

    max_bias: tuple[float, float, float, float] = (4.0, 10.0, 20.0, 0.5e6)
    sigma: tuple[float, float, float, float] = (0.5, 2.0, 0.0, 0.0)

    def __post_init__(self):
        if any(b < 0 for b in self.max_bias) or any(s < 0 for s in self.sigma):
            raise ValueError("noise bounds must be non-negative")

    @property
    def max_bias_arr(self) -> np.ndarray:
        return np.array(self.max_bias)

    @property
    def sigma_arr(self) -> np.ndarray:
        return np.array(self.sigma)

    @property
    def step_limit(self) -> np.ndarray:
        """Per-step adversary increment bound: one tenth of the max bias."""
        return self.max_bias_arr / 10.0


class ProceduralNoiseState:
    """Episode-constant bias per turbine and signal, plus fresh Gaussian
    draws per call: eps = beta + eta(t)."""

    def __init__(self, n_turbines: int, bounds: NoiseBounds, rng: np.random.Generator):
        self.bounds = bounds
        b = bounds.max_bias_arr
        self.bias = rng.uniform(-b, b, size=(n_turbines, len(b)))
        self.rng = rng

    def sample(self) -> np.ndarray:
        eta = self.rng.standard_normal(self.bias.shape) * self.bounds.sigma_arr
        return self.bias + eta


class SensorErrorState:
    """Accumulated adversarial error per turbine and signal; starts at zero,
    moves by at most max_bias/10 per agent step, clipped to +-max_bias."""

    def __init__(self, n_turbines: int, bounds: NoiseBounds):
        self.bounds = bounds
        self.values = np.zeros((n_turbines, N_SIGNALS))

    def reset(self) -> None:
        self.values[:] = 0.0


def scale_adversary_output(raw: np.ndarray, n_turbines: int, bounds: NoiseBounds) -> np.ndarray:
    """Map a network output in [-1, 1]^(n*4) to requested deltas in
    physical units, +-max_bias/10 per channel."""
    raw = np.asarray(raw, dtype=np.float64).reshape(n_turbines, N_SIGNALS)
    return np.clip(raw, -1.0, 1.0) * bounds.step_limit


def apply_delta(state: SensorErrorState, requested: np.ndarray, bounds: NoiseBounds) -> np.ndarray:
    """Apply one adversary step: clamp the request to the per-step limit,
    then clamp the accumulated error to the bias bound. Returns the applied
    delta."""
    limit = bounds.step_limit
    delta = np.clip(np.asarray(requested, dtype=np.float64), -limit, limit)
    new = np.clip(state.values + delta, -bounds.max_bias_arr, bounds.max_bias_arr)
    applied = new - state.values
    state.values = new
    return applied


def apply_errors(true_frame: np.ndarray, eps: np.ndarray | None) -> np.ndarray:
    """Corrupt a sensor frame with additive errors.

    The yaw sensor picks up the direction error with opposite sign:
    yaw_hat = yaw + eps_yaw - eps_direction.
    """
    frame = np.array(true_frame, dtype=np.float64)
    if eps is None:
        return frame
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != frame.shape:
        raise ValueError(f"error shape {eps.shape} does not match frame {frame.shape}")
    frame[:, SIG_SPEED] += eps[:, SIG_SPEED]
    frame[:, SIG_DIRECTION] += eps[:, SIG_DIRECTION]
    frame[:, SIG_YAW] += eps[:, SIG_YAW] - eps[:, SIG_DIRECTION]
    frame[:, SIG_POWER] += eps[:, SIG_POWER]
    return frame
