"""Experiment orchestration: subject profiles, metrics, sweeps, CSV export.

Every run is pinned by (config, seed): training, evaluation episodes and
the exported CSVs are byte-reproducible. Evaluation keeps the stochastic
policies (actions sampled, not argmaxed) so the action-dispersion metric
reflects the learned distribution rather than its mode; the evaluation
seeds are fixed and shared across settings so rows stay comparable.
"""

import hashlib
import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .controllers import load_setting
from .episode import EnvParams, EpisodeTrace, SamplingPolicy, run_episode
from .human import HumanParams
from .plant import PlantParams, ReferenceTrajectory
from .ppo import PPOHyper, save_checkpoint, train
from .rewards import RewardWeights, weights_for_setting

# Synthetic subject profiles: a moderate baseline and a strong-biofeedback
# variant (doubled commanded torque per digit).
SUBJECTS = {
    "subject_1": HumanParams(),
    "subject_13": HumanParams(unit_torque=10.0),
}

# Desk-scale training schedule. The small learning rate matters: it keeps
# probability ratios off the clip boundary, so the per-setting reward-weight
# differences translate into proportionally different policy speeds instead
# of being equalized by the clip. 130 updates is past the point where the
# comfort-weighted settings have stopped wandering (their residual wander
# otherwise dominates tracking error), and each setting trains in ~30 s.
TRAIN_DEFAULTS = {
    "train.n_updates": 130,
    "eval.episodes": 10,
}


@dataclass(frozen=True)
class ExperimentConfig:
    setting_id: int
    subject: str
    seed: int
    plant: PlantParams
    reference: ReferenceTrajectory
    human: HumanParams
    hyper: PPOHyper
    window: int = 10
    decision_interval: int = 10
    n_decisions: int = 60
    n_updates: int = 130
    eval_episodes: int = 10
    output_dir: str = "runs"


def _pick(cfg: dict, prefix: str, cls, base=None):
    """Build dataclass ``cls`` from ``prefix.field`` keys, over ``base``."""
    fields = cls.__dataclass_fields__
    kwargs = {}
    for key, value in cfg.items():
        if not key.startswith(prefix + "."):
            continue
        name = key[len(prefix) + 1 :]
        if name not in fields:
            raise ValueError("unknown config key %r" % key)
        kwargs[name] = value
    if base is not None:
        return replace(base, **kwargs) if kwargs else base
    return cls(**kwargs)


def config_from_dict(cfg: dict) -> ExperimentConfig:
    """Resolve a flat key-value dict into a full ExperimentConfig.

    Precedence: dataclass defaults < subject profile < TRAIN_DEFAULTS <
    caller-supplied keys (file and CLI overrides already merged).
    """
    merged = dict(TRAIN_DEFAULTS)
    merged.update(cfg)

    subject = merged.pop("subject", "subject_1")
    if subject not in SUBJECTS:
        raise ValueError(
            "unknown subject %r (have: %s)" % (subject, ", ".join(sorted(SUBJECTS)))
        )
    known_top = {
        "setting": 2,
        "seed": None,
        "episode.window": 10,
        "episode.decision_interval": 10,
        "episode.n_decisions": 60,
        "train.n_updates": 40,
        "eval.episodes": 5,
        "output_dir": "runs",
    }
    top = {}
    for key, default in known_top.items():
        top[key] = merged.pop(key, default)
    if top["seed"] is None:
        raise ValueError("seed is mandatory (set seed = N or pass --seed)")

    plant = _pick(merged, "plant", PlantParams, PlantParams())
    reference = _pick(merged, "reference", ReferenceTrajectory, ReferenceTrajectory())
    human = _pick(merged, "human", HumanParams, SUBJECTS[subject])
    hyper = _pick(merged, "hyper", PPOHyper, PPOHyper())

    consumed = {
        k for k in merged
        if k.split(".", 1)[0] in ("plant", "reference", "human", "hyper")
    }
    leftovers = set(merged) - consumed
    if leftovers:
        raise ValueError("unknown config keys: %s" % ", ".join(sorted(leftovers)))

    return ExperimentConfig(
        setting_id=int(top["setting"]),
        subject=subject,
        seed=int(top["seed"]),
        plant=plant,
        reference=reference,
        human=human,
        hyper=hyper,
        window=int(top["episode.window"]),
        decision_interval=int(top["episode.decision_interval"]),
        n_decisions=int(top["episode.n_decisions"]),
        n_updates=int(top["train.n_updates"]),
        eval_episodes=int(top["eval.episodes"]),
        output_dir=str(top["output_dir"]),
    )


def make_env(cfg: ExperimentConfig, weights: RewardWeights = None) -> EnvParams:
    setting = load_setting(cfg.setting_id)
    return EnvParams(
        plant=cfg.plant,
        reference=cfg.reference,
        human=cfg.human,
        setting=setting,
        weights=weights if weights is not None else weights_for_setting(setting),
        window=cfg.window,
        decision_interval=cfg.decision_interval,
        n_decisions=cfg.n_decisions,
    )


@dataclass(frozen=True)
class MetricsReport:
    human_action_mse: float
    tracking_error_mse: float
    value: float  # cumulative shared reward of the episode

    def __post_init__(self):
        if self.human_action_mse < 0.0 or self.tracking_error_mse < 0.0:
            raise ValueError("MSE metrics cannot be negative")


def mse_metrics(trace: EpisodeTrace, unit_torque: float = 5.0) -> MetricsReport:
    """Tracking MSE over plant steps, action dispersion over decision steps.

    The action metric measures activity: the variance of the commanded
    torque (digit * unit_torque) about its episode mean. A constant digit
    scores 0 however large the torque.
    """
    err = trace.position - trace.reference
    tracking = float((err * err).mean())
    rows = np.arange(
        trace.decision_interval - 1, len(trace), trace.decision_interval
    )
    scaled = trace.digit[rows] * unit_torque
    action = float(((scaled - scaled.mean()) ** 2).mean())
    return MetricsReport(
        human_action_mse=action,
        tracking_error_mse=tracking,
        value=float(trace.reward.sum()),
    )


def eval_seeds(base_seed: int, n_episodes: int) -> list:
    """Per-episode evaluation seeds; depend only on the base seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(base_seed).spawn(n_episodes)]


def evaluate_agents(
    human_actor,
    machine_actor,
    env: EnvParams,
    n_episodes: int,
    base_seed: int,
    per_episode_seeds=None,
):
    """Run evaluation episodes; returns (mean MetricsReport, traces)."""
    seeds = per_episode_seeds if per_episode_seeds is not None else eval_seeds(base_seed, n_episodes)
    traces = []
    reports = []
    for s in seeds:
        rng = np.random.default_rng(s)
        res = run_episode(
            env, SamplingPolicy(human_actor), SamplingPolicy(machine_actor), rng
        )
        traces.append(res.trace)
        reports.append(mse_metrics(res.trace, env.human.unit_torque))
    mean = MetricsReport(
        human_action_mse=float(np.mean([r.human_action_mse for r in reports])),
        tracking_error_mse=float(np.mean([r.tracking_error_mse for r in reports])),
        value=float(np.mean([r.value for r in reports])),
    )
    return mean, traces


def evaluate_value(
    human_actor, machine_actor, env, n_episodes, base_seed, per_episode_seeds=None
) -> float:
    """Mean cumulative shared reward over the evaluation episodes."""
    mean, _ = evaluate_agents(
        human_actor, machine_actor, env, n_episodes, base_seed, per_episode_seeds
    )
    return mean.value


def train_setting(cfg: ExperimentConfig, weights: RewardWeights = None):
    """Train one setting and evaluate it; returns (TrainResult, MetricsReport, traces)."""
    env = make_env(cfg, weights)
    result = train(env, cfg.hyper, cfg.seed, cfg.n_updates)
    mean, traces = evaluate_agents(
        result.human.actor, result.machine.actor, env, cfg.eval_episodes, cfg.seed
    )
    return result, mean, traces


TRACE_COLUMNS = (
    "t", "reference", "position", "omega", "tau_machine", "tau_human",
    "digit", "machine_action", "reward",
)


def trace_to_csv(trace: EpisodeTrace) -> str:
    """Exact-precision CSV, one row per plant substep."""
    lines = [",".join(TRACE_COLUMNS)]
    for i in range(len(trace)):
        lines.append(
            ",".join(
                (
                    repr(float(trace.time[i])),
                    repr(float(trace.reference[i])),
                    repr(float(trace.position[i])),
                    repr(float(trace.omega[i])),
                    repr(float(trace.tau_machine[i])),
                    repr(float(trace.tau_human[i])),
                    str(int(trace.digit[i])),
                    str(int(trace.machine_action[i])),
                    repr(float(trace.reward[i])),
                )
            )
        )
    return "\n".join(lines) + "\n"


def trace_from_csv(text: str, decision_interval: int, window: int) -> EpisodeTrace:
    lines = text.strip().splitlines()
    if lines[0] != ",".join(TRACE_COLUMNS):
        raise ValueError("unexpected trace CSV header: %r" % lines[0])
    cols = [[] for _ in TRACE_COLUMNS]
    for ln in lines[1:]:
        for slot, val in zip(cols, ln.split(",")):
            slot.append(val)
    as_f = lambda c: np.array([float(v) for v in c])
    as_i = lambda c: np.array([int(v) for v in c], dtype=np.int64)
    return EpisodeTrace(
        time=as_f(cols[0]), reference=as_f(cols[1]), position=as_f(cols[2]),
        omega=as_f(cols[3]), tau_machine=as_f(cols[4]), tau_human=as_f(cols[5]),
        digit=as_i(cols[6]), machine_action=as_i(cols[7]), reward=as_f(cols[8]),
        decision_interval=decision_interval, window=window,
    )


def export_results(reports: dict, traces: dict, out_dir, run_info: dict) -> dict:
    """Write the value table, per-setting traces and a hashed manifest.

    ``reports`` maps setting id -> MetricsReport; ``traces`` maps setting
    id -> list of EpisodeTrace. Returns {filename: sha256} as written to
    the manifest.
    """
    os.makedirs(out_dir, exist_ok=True)
    files = {}

    table_lines = ["setting,value,human_action_mse,tracking_error_mse"]
    for sid in sorted(reports):
        r = reports[sid]
        table_lines.append(
            "%d,%s,%s,%s"
            % (sid, repr(r.value), repr(r.human_action_mse), repr(r.tracking_error_mse))
        )
    files["value_table.csv"] = "\n".join(table_lines) + "\n"

    for sid in sorted(traces):
        for i, trace in enumerate(traces[sid]):
            files["trace_setting%d_ep%d.csv" % (sid, i)] = trace_to_csv(trace)

    hashes = {}
    for name in sorted(files):
        data = files[name].encode()
        hashes[name] = hashlib.sha256(data).hexdigest()
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(data)

    manifest = {"run": run_info, "files": hashes}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return hashes


def sweep(settings, cfg: ExperimentConfig, out_dir=None) -> dict:
    """Train and evaluate each setting with identical seeds; export results.

    Returns {setting id: (MetricsReport, TrainResult)}. Checkpoints and
    CSVs land in ``out_dir`` when given.
    """
    rows = {}
    reports = {}
    traces = {}
    for sid in settings:
        run_cfg = replace(cfg, setting_id=sid)
        result, mean, ep_traces = train_setting(run_cfg)
        rows[sid] = (mean, result)
        reports[sid] = mean
        traces[sid] = ep_traces
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            save_checkpoint(
                os.path.join(out_dir, "setting%d.ckpt" % sid),
                result.human,
                result.machine,
                meta={"setting": sid, "seed": cfg.seed, "subject": cfg.subject},
            )
    if out_dir is not None:
        run_info = {
            "settings": list(settings),
            "seed": cfg.seed,
            "subject": cfg.subject,
            "window": cfg.window,
            "decision_interval": cfg.decision_interval,
            "n_decisions": cfg.n_decisions,
            "n_updates": cfg.n_updates,
            "eval_episodes": cfg.eval_episodes,
        }
        export_results(reports, traces, out_dir, run_info)
    return rows
