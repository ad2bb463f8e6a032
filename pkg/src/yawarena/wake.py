"""Simplified dynamic wake model: steady Gaussian deficit with yaw
deflection, transported downstream with an explicit advection delay.

No ambient turbulence, no meandering. Deficits are evaluated at the hub
point of the waked rotor and combined root-sum-square.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

AIR_DENSITY = 1.225  # kg/m^3


class ModelValidityError(ValueError):
    """Wake-model inputs outside the range the closed form is valid for."""


@dataclass(frozen=True)
class TurbineSpec:
    rotor_diameter: float = 80.0       # m
    hub_height: float = 70.0           # m
    rated_power: float = 2.0e6         # W
    cp: float = 0.45
    ct: float = 0.8                    # constant in the 6-7 m/s band
    yaw_loss_exponent: float = 2.0     # power ~ cos(yaw)^p
    wake_expansion: float = 0.04       # sigma growth rate k
    deflection_decay: float = 0.05     # Jimenez k_d

    def __post_init__(self):
        if self.rotor_diameter <= 0:
            raise ValueError("rotor_diameter must be > 0")
        if not 0.0 < self.ct < 1.0:
            raise ValueError("ct must be in (0, 1)")
        if not 0.0 <= self.cp < 16.0 / 27.0:
            raise ValueError("cp must be in [0, 16/27)")
        if self.yaw_loss_exponent <= 0:
            raise ValueError("yaw_loss_exponent must be > 0")

    def thrust_coefficient(self, wind_speed: float) -> float:
        # flat curve; hook point for a tabulated replacement
        return self.ct

    @property
    def rotor_area(self) -> float:
        return math.pi * (self.rotor_diameter / 2.0) ** 2


@dataclass(frozen=True)
class InflowCondition:
    """Free-stream condition; direction is meteorological (wind FROM,
    270 deg = from West)."""

    speed: float           # m/s
    direction: float       # deg

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("wind speed must be >= 0")


@dataclass
class FarmLayout:
    positions: np.ndarray             # (n, 2) meters, East-North frame
    spec: TurbineSpec = field(default_factory=TurbineSpec)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValueError("positions must be (n, 2)")
        n = self.positions.shape[0]
        for i in range(n):
            for j in range(i + 1, n):
                if np.allclose(self.positions[i], self.positions[j]):
                    raise ValueError("turbine positions must be pairwise distinct")

    @property
    def n_turbines(self) -> int:
        return self.positions.shape[0]

    def max_spacing(self) -> float:
        d = self.positions[:, None, :] - self.positions[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())


def two_turbine_layout(spec: TurbineSpec | None = None, spacing_diameters: float = 7.0) -> FarmLayout:
    """Default farm: two turbines on an East-West line, 7 D apart."""
    spec = spec or TurbineSpec()
    dx = spacing_diameters * spec.rotor_diameter
    return FarmLayout(np.array([[0.0, 0.0], [dx, 0.0]]), spec)


def flow_vectors(direction_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Unit vector the wind travels along, and its left-hand normal."""
    d = math.radians(direction_deg)
    u = np.array([-math.sin(d), -math.cos(d)])
    n = np.array([-u[1], u[0]])
    return u, n


def turbine_power(spec: TurbineSpec, effective_speed: float, yaw_offset_deg: float) -> float:
    """Rotor power with cosine yaw loss, capped at rated."""
    if effective_speed < 0:
        raise ValueError("effective_speed must be >= 0")
    p_ideal = 0.5 * AIR_DENSITY * spec.rotor_area * spec.cp * effective_speed ** 3
    p_ideal = min(p_ideal, spec.rated_power)
    return p_ideal * abs(math.cos(math.radians(yaw_offset_deg))) ** spec.yaw_loss_exponent


def wake_sigma(spec: TurbineSpec, downstream_x: float, ct: float) -> float:
    """Gaussian wake width (m) at downstream distance x."""
    if ct >= 1.0:
        raise ModelValidityError("ct >= 1 outside Gaussian wake validity")
    beta = 0.5 * (1.0 + math.sqrt(1.0 - ct)) / math.sqrt(1.0 - ct)
    sigma_over_d = spec.wake_expansion * downstream_x / spec.rotor_diameter + 0.2 * math.sqrt(beta)
    return sigma_over_d * spec.rotor_diameter


def deflection_offset(spec: TurbineSpec, downstream_x: float, source_yaw_deg: float, ct: float) -> float:
    """Lateral wake-centerline offset (m) from a yawed source.

    Jimenez-type: initial skew angle ct/2 * cos^2(yaw) * sin(yaw) decaying
    as (1 + 2 k_d x/D)^-2, integrated analytically downstream. Positive yaw
    gives positive offset along the flow's left-hand normal.
    """
    g = math.radians(source_yaw_deg)
    alpha0 = 0.5 * ct * math.cos(g) ** 2 * math.sin(g)
    kd = spec.deflection_decay
    d = spec.rotor_diameter
    return alpha0 * d / (2.0 * kd) * (1.0 - 1.0 / (1.0 + 2.0 * kd * downstream_x / d))


def wake_deficit(spec: TurbineSpec, downstream_x: float, crosswind_y: float,
                 ct: float, source_yaw_deg: float) -> float:
    """Fractional speed deficit at (x, y) behind a source turbine."""
    if downstream_x <= 0:
        raise ValueError("downstream_x must be > 0")
    sigma = wake_sigma(spec, downstream_x, ct)
    ct_eff = ct * abs(math.cos(math.radians(source_yaw_deg)))
    arg = 1.0 - ct_eff / (8.0 * (sigma / spec.rotor_diameter) ** 2)
    if arg < 0.0:
        raise ModelValidityError("wake too narrow for the Gaussian closed form")
    centerline = 1.0 - math.sqrt(arg)
    y_eff = crosswind_y - deflection_offset(spec, downstream_x, source_yaw_deg, ct)
    deficit = centerline * math.exp(-y_eff ** 2 / (2.0 * sigma ** 2))
    return min(max(deficit, 0.0), 1.0)


class WakeState:
    """Dynamic per-farm state: physical yaw offsets plus per-turbine ring
    buffers of emitted (yaw, ct) records used for advection-delayed lookups.
    """

    MAX_YAW = 45.0

    def __init__(self, layout: FarmLayout, physics_dt: float, min_speed: float = 4.0):
        if physics_dt <= 0:
            raise ValueError("physics_dt must be > 0")
        self.layout = layout
        self.physics_dt = physics_dt
        n = layout.n_turbines
        horizon = max(1, math.ceil(layout.max_spacing() / (min_speed * physics_dt))) + 4
        self.capacity = horizon
        self.yaw = np.zeros(n)
        self.clock = 0.0
        self._ptr = 0
        ct0 = layout.spec.thrust_coefficient(0.0)
        self._hist = np.zeros((n, horizon, 2))
        self._hist[:, :, 1] = ct0

    def source_record(self, turbine: int, lag_steps: int) -> tuple[float, float]:
        """(yaw, ct) emitted by a turbine lag_steps physics steps ago."""
        if lag_steps < 0 or lag_steps >= self.capacity:
            raise RuntimeError(f"lag {lag_steps} beyond ring-buffer horizon {self.capacity}")
        idx = (self._ptr - lag_steps) % self.capacity
        return float(self._hist[turbine, idx, 0]), float(self._hist[turbine, idx, 1])

    def _record(self):
        for i in range(self.layout.n_turbines):
            self._hist[i, self._ptr, 0] = self.yaw[i]
            self._hist[i, self._ptr, 1] = self.layout.spec.thrust_coefficient(0.0)


def effective_speeds(layout: FarmLayout, inflow: InflowCondition, get_source) -> np.ndarray:
    """Per-turbine effective rotor speed under root-sum-square superposed
    deficits. get_source(j, lag_steps) -> (yaw_deg, ct) supplies the wake
    record a source emitted lag_steps physics steps ago (a steady evaluator
    can ignore the lag)."""
    spec = layout.spec
    u_hat, n_hat = flow_vectors(inflow.direction)
    n = layout.n_turbines
    speeds = np.empty(n)
    for i in range(n):
        sq = 0.0
        for j in range(n):
            if j == i:
                continue
            rel = layout.positions[i] - layout.positions[j]
            x = float(rel @ u_hat)
            if x <= 1e-9:
                continue
            y = float(rel @ n_hat)
            if inflow.speed <= 0:
                continue
            yaw_j, ct_j = get_source(j, x / inflow.speed)  # lag in seconds
            d = wake_deficit(spec, x, y, ct_j, yaw_j)
            sq += d * d
        speeds[i] = max(inflow.speed * (1.0 - math.sqrt(sq)), 0.0)
    return speeds


def step_physics(state: WakeState, layout: FarmLayout, inflow: InflowCondition,
                 commanded_yaw: np.ndarray, dt: float) -> np.ndarray:
    """Advance one physics step; returns per-turbine effective speeds.

    Each upstream source's (yaw, ct) is read from its ring buffer at
    lag = downstream_distance / U_inf, rounded to the nearest stored step.
    """
    if abs(dt - state.physics_dt) > 1e-12:
        raise ValueError("dt must equal the physics_dt the state was built with")
    state.yaw = np.clip(np.asarray(commanded_yaw, dtype=np.float64),
                        -WakeState.MAX_YAW, WakeState.MAX_YAW)
    state._record()

    def get_source(j, lag_seconds):
        lag_steps = int(round(lag_seconds / state.physics_dt))
        return state.source_record(j, lag_steps)

    speeds = effective_speeds(layout, inflow, get_source)
    state.clock += dt
    state._ptr = (state._ptr + 1) % state.capacity
    return speeds


def flow_field_snapshot(state: WakeState, layout: FarmLayout, inflow: InflowCondition,
                        grid: np.ndarray) -> np.ndarray:
    """Hub-height speed at each (x, y) grid point; pure, no state mutation."""
    spec = layout.spec
    u_hat, n_hat = flow_vectors(inflow.direction)
    grid = np.asarray(grid, dtype=np.float64)
    out = np.empty(grid.shape[0])
    for k, p in enumerate(grid):
        sq = 0.0
        for j in range(layout.n_turbines):
            rel = p - layout.positions[j]
            x = float(rel @ u_hat)
            if x <= 1e-9:
                continue
            y = float(rel @ n_hat)
            lag_steps = 0
            if inflow.speed > 0:
                lag_steps = int(round(x / inflow.speed / state.physics_dt))
            lag_steps = min(lag_steps, state.capacity - 1)
            yaw_j, ct_j = state.source_record(j, lag_steps)
            try:
                d = wake_deficit(spec, x, y, ct_j, yaw_j)
            except ModelValidityError:
                # near-rotor points where the closed form breaks down:
                # saturate at the Gaussian-profile full deficit
                sigma = wake_sigma(spec, x, ct_j)
                d = math.exp(-y ** 2 / (2.0 * sigma ** 2))
            sq += d * d
        out[k] = max(inflow.speed * (1.0 - math.sqrt(sq)), 0.0)
    return out


def write_snapshot(path, grid: np.ndarray, speeds: np.ndarray) -> None:
    """Delimited (x, y, speed) grid file for external plotting."""
    with open(path, "w") as f:
        f.write("x,y,speed\n")
        for (x, y), s in zip(grid, speeds):
            f.write(f"{float(x)!r},{float(y)!r},{float(s)!r}\n")
