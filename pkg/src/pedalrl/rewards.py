"""Sliding-window reward terms and their weighted combinations.

All terms are evaluated at decision cadence: the windows hold the last k
decision-step samples of pedal position, reference position and human digit
actions. Tracking error and motion roughness are penalties, action
variability under engagement is a bonus; the combined scalar is shared by
both agents each decision step.

The machine-specific variant sums the squared tracking error over one extra
sample (k+1 summands for window parameter k) and adds a weighted angular
velocity term. That index-range difference is deliberate and preserved. The
variability term keeps a matching quirk: the mean is taken over all k
actions while the deviations are summed over the first k-1 and normalized by
k-2.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class PositionWindow:
    """Last k decision-step positions, their references, and current omega."""

    actual: tuple
    reference: tuple
    omega_z: float = 0.0

    def __post_init__(self):
        if len(self.actual) != len(self.reference):
            raise ValueError(
                "window length mismatch: %d actual vs %d reference"
                % (len(self.actual), len(self.reference))
            )
        if len(self.actual) < 3:
            raise ValueError("position window needs k >= 3, got %d" % len(self.actual))


@dataclass(frozen=True)
class ActionWindow:
    """Last k human digit actions plus the engagement flag E.

    E is 1 exactly when the action changed on the most recent decision step
    (previous action != current action); build windows with
    :func:`make_action_window` to derive it.
    """

    actions: tuple
    effort_flag: int

    def __post_init__(self):
        if len(self.actions) < 3:
            raise ValueError("action window needs k >= 3, got %d" % len(self.actions))
        if self.effort_flag not in (0, 1):
            raise ValueError("effort flag must be 0 or 1, got %r" % self.effort_flag)


def make_action_window(actions) -> ActionWindow:
    """Window over ``actions`` with E derived from the last two entries."""
    actions = tuple(actions)
    if len(actions) < 3:
        raise ValueError("action window needs k >= 3, got %d" % len(actions))
    effort = 1 if actions[-1] != actions[-2] else 0
    return ActionWindow(actions=actions, effort_flag=effort)


@dataclass(frozen=True)
class RewardWeights:
    """Term weights: (mu, kappa, rho) human side, (sigma, beta) machine side.

    The human-side weights are magnitudes; the sign convention (tracking and
    roughness penalized, variability rewarded) is fixed inside
    :func:`human_reward`. sigma and beta carry their own signs. beta
    defaults to 0: the default experiments do not punish angular velocity
    and give both agents the shared scalar.
    """

    mu: float
    kappa: float
    rho: float
    sigma: float = -1.0
    beta: float = 0.0

    def __post_init__(self):
        if self.mu < 0.0 or self.kappa < 0.0 or self.rho < 0.0:
            raise ValueError("mu, kappa, rho must be non-negative")


def weights_for_setting(setting) -> RewardWeights:
    """RewardWeights for a SettingConfig row (machine terms at defaults)."""
    w = setting.weights
    return RewardWeights(mu=w.mu, kappa=w.kappa, rho=w.rho)


def tracking_term(w: PositionWindow) -> float:
    """Sum of squared position errors over the window (>= 0)."""
    total = 0.0
    for p, ref in zip(w.actual, w.reference):
        d = p - ref
        total += d * d
    return total


def comfort_term(w: PositionWindow) -> float:
    """Sum of absolute second differences of the actual positions (>= 0).

    Zero exactly on affine position sequences: steady motion is comfortable,
    acceleration is not.
    """
    p = w.actual
    total = 0.0
    for i in range(2, len(p)):
        total += abs(p[i] + p[i - 2] - 2.0 * p[i - 1])
    return total


def effort_term(a: ActionWindow) -> float:
    """Gated action-variability bonus (>= 0).

    Zero when E = 0. Otherwise the mean is taken over all k actions but the
    squared deviations are summed over the first k-1 only and divided by
    k-2; this lopsided normalization is intentional.
    """
    if a.effort_flag == 0:
        return 0.0
    acts = a.actions
    k = len(acts)
    mean = sum(acts) / k
    total = 0.0
    for i in range(k - 1):
        d = acts[i] - mean
        total += d * d
    return total / (k - 2)


def machine_reward(w: PositionWindow, sigma: float, beta: float) -> float:
    """sigma * (sum of squared errors over the whole window) + beta * omega_z.

    Callers give this window one more sample than the human-side windows
    (k+1 positions for window parameter k).
    """
    return sigma * tracking_term(w) + beta * w.omega_z


def human_reward(r_m: float, r_c: float, r_e: float, weights: RewardWeights) -> float:
    """-mu*r_m - kappa*r_c + rho*r_e: penalties negative, engagement positive."""
    return -weights.mu * r_m - weights.kappa * r_c + weights.rho * r_e


def shared_reward(w: PositionWindow, a: ActionWindow, weights: RewardWeights) -> float:
    """The combined scalar delivered identically to both agents."""
    return human_reward(
        tracking_term(w), comfort_term(w), effort_term(a), weights
    )
