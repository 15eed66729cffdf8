"""Discrete-time PD/PID sub-controllers and the eight fixed gain banks.

Each experiment setting pairs one reward weighting with two human PD gain
pairs and two machine PID gain triples. Agents act by switching between the
two entries of their bank; the step functions here are the shared
implementation for both banks.
"""

import math
from dataclasses import dataclass, replace

EPS_GAIN = 1e-12  # floor used when deriving the anti-windup limit from ki


@dataclass(frozen=True)
class PDGains:
    kp: float
    kd: float

    def __post_init__(self):
        if self.kp < 0.0 or self.kd < 0.0:
            raise ValueError("PD gains must be non-negative")


@dataclass(frozen=True)
class PIDGains:
    kp: float
    ki: float
    kd: float

    def __post_init__(self):
        if self.kp < 0.0 or self.ki < 0.0 or self.kd < 0.0:
            raise ValueError("PID gains must be non-negative")


@dataclass(frozen=True)
class ControllerState:
    """Mutable part of a PD/PID loop, owned by the caller."""

    integral: float = 0.0
    prev_error: float = 0.0
    initialized: bool = False


@dataclass(frozen=True)
class RewardWeightsSpec:
    """(mu, kappa, rho) weighting of the shared reward for one setting."""

    mu: float
    kappa: float
    rho: float


@dataclass(frozen=True)
class SettingConfig:
    """One row of the sub-controller bank table."""

    setting_id: int
    weights: RewardWeightsSpec
    human_pd: tuple  # (PDGains, PDGains): high-intensity pair first
    machine_pid: tuple  # (PIDGains, PIDGains)


def _setting(sid, weights, pd1, pd2, pid1, pid2):
    return SettingConfig(
        setting_id=sid,
        weights=RewardWeightsSpec(*weights),
        human_pd=(PDGains(*pd1), PDGains(*pd2)),
        machine_pid=(PIDGains(*pid1), PIDGains(*pid2)),
    )


SETTINGS = {
    1: _setting(1, (1, 1, 5), (30, 0.2), (15, 0.1), (24, 2.4, 24), (12, 1.2, 12)),
    2: _setting(2, (1, 1, 5), (30, 0.2), (15, 0.1), (12, 1.2, 12), (6, 0.6, 6)),
    3: _setting(3, (1, 1, 5), (5, 0.1), (2.5, 0.05), (24, 2.4, 24), (12, 1.2, 12)),
    4: _setting(4, (1, 1, 5), (5, 0.1), (2.5, 0.05), (12, 1.2, 12), (6, 0.6, 6)),
    5: _setting(5, (1, 8, 1), (30, 0.2), (15, 0.1), (24, 2.4, 24), (12, 1.2, 12)),
    6: _setting(6, (1, 8, 1), (30, 0.2), (15, 0.1), (12, 1.2, 12), (6, 0.6, 6)),
    7: _setting(7, (1, 8, 1), (5, 0.1), (2.5, 0.05), (12, 1.2, 12), (6, 0.6, 6)),
    8: _setting(8, (1, 8, 1), (5, 0.1), (2.5, 0.05), (24, 2.4, 24), (12, 1.2, 12)),
}


def load_setting(setting_id: int) -> SettingConfig:
    """Return the built-in bank/weight row for ``setting_id`` (1..8)."""
    try:
        return SETTINGS[setting_id]
    except KeyError:
        raise ValueError("unknown setting id %r (expected 1..8)" % (setting_id,))


def default_integral_limit(gains: PIDGains, torque_limit: float) -> float:
    """Anti-windup bound: the integral term alone cannot exceed actuator authority."""
    return torque_limit / max(gains.ki, EPS_GAIN)


def pid_step(
    gains: PIDGains,
    error: float,
    state: ControllerState,
    dt: float,
    integral_limit: float = math.inf,
):
    """One PID update; returns (torque, new state).

    Derivative acts on the error and is forced to zero on the first sample
    after a reset, avoiding a startup kick. The integral accumulates before
    clamping to ``integral_limit``.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if not math.isfinite(error):
        raise ValueError("non-finite controller error: %r" % (error,))
    if state.initialized:
        derivative = (error - state.prev_error) / dt
    else:
        derivative = 0.0
    integral = state.integral + error * dt
    integral = min(max(integral, -integral_limit), integral_limit)
    torque = gains.kp * error + gains.ki * integral + gains.kd * derivative
    return torque, ControllerState(
        integral=integral, prev_error=error, initialized=True
    )


def pd_step(
    gains: PDGains,
    error: float,
    state: ControllerState,
    dt: float,
):
    """One PD update; identical to :func:`pid_step` with ki = 0."""
    return pid_step(PIDGains(gains.kp, 0.0, gains.kd), error, state, dt)


def reset_controller(state: ControllerState = None) -> ControllerState:
    """Fresh controller state: zero integral, cleared derivative history."""
    return ControllerState()


def switch_controller(state: ControllerState) -> ControllerState:
    """State carried across a sub-controller switch.

    The previous error is kept so the derivative term sees no artificial
    jump from the switch itself; the integral is dropped because it was
    accumulated under the other gain set and would act as stale windup.
    """
    return replace(state, integral=0.0)
