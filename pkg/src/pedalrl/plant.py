"""1-DOF rotational pedal plant and the sinusoidal reference trajectory.

The pedal is modeled as an inertia-damper driven by the sum of the machine
torque and the human torque, integrated with semi-implicit Euler and bounded
by hard mechanical stops (angular velocity is zeroed on contact, like a
physical end stop).
"""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PlantParams:
    """Physical parameters of the pedal plant."""

    inertia: float = 0.3  # kg m^2: pedal plus engaged lower limb
    damping: float = 1.0  # N m s/rad
    torque_limit: float = 30.0  # N m, applied to each torque input
    dt: float = 0.01  # s
    angle_min: float = -0.6  # rad
    angle_max: float = 0.6  # rad
    omega_max: float = 10.0  # rad/s

    def __post_init__(self):
        if self.inertia <= 0.0:
            raise ValueError("inertia must be positive")
        if self.damping < 0.0:
            raise ValueError("damping must be non-negative")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if not self.angle_min < self.angle_max:
            raise ValueError("angle_min must be below angle_max")
        if self.torque_limit <= 0.0 or self.omega_max <= 0.0:
            raise ValueError("torque_limit and omega_max must be positive")


@dataclass(frozen=True)
class PedalState:
    """Pedal angle, angular velocity and simulation time."""

    angle: float = 0.0  # rad
    angular_velocity: float = 0.0  # rad/s
    time: float = 0.0  # s


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Sinusoidal dorsiflexion/plantarflexion target for the pedal angle."""

    amplitude: float = 0.3  # rad
    period: float = 4.0  # s
    phase: float = 0.0  # rad
    offset: float = 0.0  # rad

    def __post_init__(self):
        if self.amplitude < 0.0:
            raise ValueError("amplitude must be non-negative")
        if self.period <= 0.0:
            raise ValueError("period must be positive")


def sample_reference(traj: ReferenceTrajectory, t: float) -> float:
    """Reference pedal angle at time ``t``."""
    if t < 0.0:
        raise ValueError("t must be non-negative")
    return traj.offset + traj.amplitude * math.sin(
        2.0 * math.pi * t / traj.period + traj.phase
    )


def step_plant(
    state: PedalState,
    tau_machine: float,
    tau_human: float,
    params: PlantParams,
) -> PedalState:
    """One semi-implicit Euler step of the pedal dynamics.

    Both torque inputs saturate at ``params.torque_limit``. The angle is
    clamped to the mechanical range and the angular velocity is zeroed when
    a stop is hit.
    """
    if not (math.isfinite(tau_machine) and math.isfinite(tau_human)):
        raise ValueError(
            "non-finite torque input: tau_machine=%r tau_human=%r"
            % (tau_machine, tau_human)
        )
    lim = params.torque_limit
    tau_m = min(max(tau_machine, -lim), lim)
    tau_h = min(max(tau_human, -lim), lim)

    omega = state.angular_velocity
    omega += params.dt * (tau_m + tau_h - params.damping * omega) / params.inertia
    omega = min(max(omega, -params.omega_max), params.omega_max)
    angle = state.angle + params.dt * omega
    if angle < params.angle_min:
        angle = params.angle_min
        omega = 0.0
    elif angle > params.angle_max:
        angle = params.angle_max
        omega = 0.0
    return PedalState(angle=angle, angular_velocity=omega, time=state.time + params.dt)
