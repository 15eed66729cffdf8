"""Closed-loop episode runner: agents on top, fused substep kernel below.

Agents act every ``decision_interval`` plant substeps. One decision step is:
observe (both agents), pick a digit and a machine sub-controller, run the
substep block through the hot kernel, then score the shared reward over
sliding windows of block-boundary samples. The trace records every plant
substep; rewards land on block-final rows.

RNG discipline: per decision step the stream is consumed in a fixed order
(human sample, machine sample, one noise vector), and non-sampling policies
(greedy, constant, remote) consume nothing. All draws happen here at Python
level, never inside the kernel, so results are identical across the numba
and pure-Python backends.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .controllers import SettingConfig, default_integral_limit
from .human import DIGITS, HumanParams
from .nets import actor_forward, sample_action
from .plant import PedalState, PlantParams, ReferenceTrajectory, sample_reference
from .rewards import (
    PositionWindow,
    RewardWeights,
    machine_reward,
    make_action_window,
    shared_reward,
)

OBS_DIM_HUMAN = 5  # position, error, smoothness, previous digit, machine torque
OBS_DIM_MACHINE = 6  # reference, position, error, omega, previous action, human torque


@dataclass(frozen=True)
class ObsScales:
    """Divisors that bring raw observation fields to O(1)."""

    angle: float
    torque: float
    omega: float
    digit: float = 2.0
    smooth: float = 1.0

    @staticmethod
    def from_config(plant: PlantParams, traj: ReferenceTrajectory) -> "ObsScales":
        angle = traj.amplitude if traj.amplitude > 0.0 else plant.angle_max
        return ObsScales(angle=angle, torque=plant.torque_limit, omega=plant.omega_max)


@dataclass(frozen=True)
class EnvParams:
    """Everything one episode needs, bundled."""

    plant: PlantParams
    reference: ReferenceTrajectory
    human: HumanParams
    setting: SettingConfig
    weights: RewardWeights
    window: int = 10  # k: decision steps per reward window
    decision_interval: int = 10  # plant substeps per decision
    n_decisions: int = 60
    scales: ObsScales = None
    use_machine_reward: bool = False  # give agent 1 its own omega-penalized variant

    def __post_init__(self):
        if self.window < 3:
            raise ValueError("reward window needs k >= 3")
        if self.decision_interval < 1 or self.n_decisions < 1:
            raise ValueError("decision_interval and n_decisions must be >= 1")

    def resolved_scales(self) -> ObsScales:
        if self.scales is not None:
            return self.scales
        return ObsScales.from_config(self.plant, self.reference)


@dataclass(frozen=True)
class Transition:
    """One decision step as seen by a single agent."""

    obs: np.ndarray
    action: int
    log_prob_old: float
    reward: float
    next_obs: np.ndarray
    terminal: bool

    def __post_init__(self):
        if self.log_prob_old > 0.0:
            raise ValueError("log probability cannot be positive")
        if not np.isfinite(self.reward):
            raise ValueError("non-finite reward")


@dataclass
class EpisodeTrace:
    """Plant-rate record of one episode (one row per substep)."""

    time: np.ndarray
    reference: np.ndarray
    position: np.ndarray
    omega: np.ndarray
    tau_machine: np.ndarray
    tau_human: np.ndarray
    digit: np.ndarray  # commanded digit in force at each substep
    machine_action: np.ndarray  # selected sub-controller index in force
    reward: np.ndarray  # shared reward on block-final rows, 0 elsewhere
    decision_interval: int
    window: int

    def __len__(self):
        return self.time.shape[0]


@dataclass
class EpisodeResult:
    trace: EpisodeTrace
    transitions_human: list
    transitions_machine: list
    total_reward: float


class SamplingPolicy:
    """Draws from the actor's distribution; one uniform per decision."""

    def __init__(self, params):
        self.params = params

    def act(self, obs, rng):
        dist = actor_forward(self.params, obs)
        return sample_action(dist, rng)


class GreedyPolicy:
    """Argmax action; consumes no randomness."""

    def __init__(self, params):
        self.params = params

    def act(self, obs, rng):
        dist = actor_forward(self.params, obs)
        idx = int(np.argmax(dist.probabilities))
        return idx, float(dist.log_probabilities[idx])


class ConstantPolicy:
    """Always the same action index; consumes no randomness."""

    def __init__(self, index):
        self.index = int(index)

    def act(self, obs, rng):
        return self.index, 0.0


def smoothness(positions) -> float:
    """Sum of absolute second differences; 0 when fewer than 3 samples."""
    total = 0.0
    for i in range(2, len(positions)):
        total += abs(positions[i] + positions[i - 2] - 2.0 * positions[i - 1])
    return total


def observe_human(angle, t, sm, prev_digit, tau_m, traj, scales) -> np.ndarray:
    e_t = sample_reference(traj, t) - angle
    return np.array(
        [
            angle / scales.angle,
            e_t / scales.angle,
            sm / scales.smooth,
            prev_digit / scales.digit,
            tau_m / scales.torque,
        ]
    )


def observe_machine(angle, t, omega, prev_action, tau_h, traj, scales) -> np.ndarray:
    r_p = sample_reference(traj, t)
    return np.array(
        [
            r_p / scales.angle,
            angle / scales.angle,
            (r_p - angle) / scales.angle,
            omega / scales.omega,
            float(prev_action),
            tau_h / scales.torque,
        ]
    )


def pack_plant(p: PlantParams) -> np.ndarray:
    out = np.empty(kernels.PP_SIZE)
    out[kernels.PP_INERTIA] = p.inertia
    out[kernels.PP_DAMPING] = p.damping
    out[kernels.PP_TORQUE_LIMIT] = p.torque_limit
    out[kernels.PP_DT] = p.dt
    out[kernels.PP_ANGLE_MIN] = p.angle_min
    out[kernels.PP_ANGLE_MAX] = p.angle_max
    out[kernels.PP_OMEGA_MAX] = p.omega_max
    return out


def pack_reference(r: ReferenceTrajectory) -> np.ndarray:
    out = np.empty(kernels.RP_SIZE)
    out[kernels.RP_AMPLITUDE] = r.amplitude
    out[kernels.RP_PERIOD] = r.period
    out[kernels.RP_PHASE] = r.phase
    out[kernels.RP_OFFSET] = r.offset
    return out


def run_episode(
    env: EnvParams,
    human_policy,
    machine_policy,
    rng,
    substep_fn=None,
    initial_state: PedalState = None,
) -> EpisodeResult:
    """Roll one full episode; returns the trace and both agents' transitions."""
    if substep_fn is None:
        substep_fn = kernels.run_substeps
    scales = env.resolved_scales()
    setting: SettingConfig = env.setting
    k = env.window
    interval = env.decision_interval
    n_total = env.n_decisions * interval

    sim = np.zeros(kernels.SIM_SIZE)
    if initial_state is not None:
        sim[kernels.SIM_ANGLE] = initial_state.angle
        sim[kernels.SIM_OMEGA] = initial_state.angular_velocity
        sim[kernels.SIM_T] = initial_state.time
    queue = np.zeros(env.human.reaction_delay, dtype=np.int64)
    plant_p = pack_plant(env.plant)
    ref_p = pack_reference(env.reference)

    t_arr = np.empty(n_total)
    ref_arr = np.empty(n_total)
    pos_arr = np.empty(n_total)
    om_arr = np.empty(n_total)
    tm_arr = np.empty(n_total)
    th_arr = np.empty(n_total)
    digit_arr = np.zeros(n_total, dtype=np.int64)
    maction_arr = np.zeros(n_total, dtype=np.int64)
    reward_arr = np.zeros(n_total)

    pd_hi, pd_lo = setting.human_pd
    pos_hist = []
    ref_hist = []
    act_hist = []

    prev_digit = 0
    prev_m_idx = 0
    last_tau_m = 0.0
    last_tau_h = 0.0
    transitions_h = []
    transitions_m = []

    obs_h = observe_human(
        sim[kernels.SIM_ANGLE], sim[kernels.SIM_T], 0.0, prev_digit, last_tau_m,
        env.reference, scales,
    )
    obs_m = observe_machine(
        sim[kernels.SIM_ANGLE], sim[kernels.SIM_T], sim[kernels.SIM_OMEGA],
        prev_m_idx, last_tau_h, env.reference, scales,
    )

    total_reward = 0.0
    for z in range(env.n_decisions):
        a_h, logp_h = human_policy.act(obs_h, rng)
        a_m, logp_m = machine_policy.act(obs_m, rng)
        digit = DIGITS[a_h]
        if a_m != prev_m_idx and z > 0:
            # stale windup belongs to the other gain set; derivative history carries
            sim[kernels.SIM_M_INTEGRAL] = 0.0
        gains = setting.machine_pid[a_m]
        int_limit = default_integral_limit(gains, env.plant.torque_limit)
        noise = rng.standard_normal(interval) * env.human.noise_std

        start = z * interval
        substep_fn(
            sim, queue, digit,
            gains.kp, gains.ki, gains.kd, int_limit,
            pd_hi.kp, pd_hi.kd, pd_lo.kp, pd_lo.kd,
            env.human.unit_torque, env.human.lag_time_constant, noise,
            plant_p, ref_p,
            t_arr, ref_arr, pos_arr, om_arr, tm_arr, th_arr,
            start, interval,
        )
        row = start + interval - 1
        digit_arr[start : start + interval] = digit
        maction_arr[start : start + interval] = a_m
        pos_hist.append(pos_arr[row])
        ref_hist.append(ref_arr[row])
        act_hist.append(digit)

        reward = 0.0
        reward_m = 0.0
        if len(pos_hist) >= k:
            w = PositionWindow(
                actual=tuple(pos_hist[-k:]),
                reference=tuple(ref_hist[-k:]),
                omega_z=om_arr[row],
            )
            aw = make_action_window(act_hist[-k:])
            reward = shared_reward(w, aw, env.weights)
            reward_m = reward
            if env.use_machine_reward and len(pos_hist) >= k + 1:
                wm = PositionWindow(
                    actual=tuple(pos_hist[-(k + 1) :]),
                    reference=tuple(ref_hist[-(k + 1) :]),
                    omega_z=om_arr[row],
                )
                reward_m = machine_reward(wm, env.weights.sigma, env.weights.beta)
        reward_arr[row] = reward
        total_reward += reward

        prev_digit = digit
        prev_m_idx = a_m
        last_tau_m = tm_arr[row]
        last_tau_h = th_arr[row]
        sm = smoothness(pos_hist[-k:])
        next_obs_h = observe_human(
            sim[kernels.SIM_ANGLE], sim[kernels.SIM_T], sm, prev_digit, last_tau_m,
            env.reference, scales,
        )
        next_obs_m = observe_machine(
            sim[kernels.SIM_ANGLE], sim[kernels.SIM_T], sim[kernels.SIM_OMEGA],
            prev_m_idx, last_tau_h, env.reference, scales,
        )
        terminal = z == env.n_decisions - 1
        transitions_h.append(
            Transition(obs_h, a_h, logp_h, reward, next_obs_h, terminal)
        )
        transitions_m.append(
            Transition(obs_m, a_m, logp_m, reward_m, next_obs_m, terminal)
        )
        obs_h = next_obs_h
        obs_m = next_obs_m

    trace = EpisodeTrace(
        time=t_arr, reference=ref_arr, position=pos_arr, omega=om_arr,
        tau_machine=tm_arr, tau_human=th_arr,
        digit=digit_arr, machine_action=maction_arr, reward=reward_arr,
        decision_interval=interval, window=k,
    )
    return EpisodeResult(
        trace=trace,
        transitions_human=transitions_h,
        transitions_machine=transitions_m,
        total_reward=total_reward,
    )
