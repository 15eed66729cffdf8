"""Dual-agent co-adaptive training on a simulated ankle-pedal plant.

A small laboratory for human-machine co-adaptation experiments: a 1-DOF
pedal plant, banks of fixed-gain PD/PID sub-controllers, a synthetic
pedaling-effort model driven by a five-level visual cue, and two PPO
actor-critic agents (the "human" picks cues, the "machine" picks its
sub-controller) trained against a shared reward.
"""

__version__ = "0.1.0"
