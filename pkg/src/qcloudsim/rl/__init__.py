"""Learned allocation: single-step environment, actor-critic policy, PPO training."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .env import JobSampler, RlConfig, TrainingConfig, build_state, env_step
from .network import MLP, Adam, Policy, act_deterministic, sample_action
from .persist import PolicyFormatError, load_policy, save_policy
from .ppo import PPOBatch, TrainingDivergedError, ppo_loss_and_grad, train_ppo, write_training_log


class RlAllocator:
    """Adapter the scheduler calls in rlbase mode: deterministic policy output as weights."""

    def __init__(self, policy: Policy, cfg: RlConfig):
        self.policy = policy
        self.cfg = cfg
        self.epsilon = cfg.epsilon

    def raw_action(self, job, devices: Sequence) -> np.ndarray:
        state = build_state(job, devices, self.cfg)
        return act_deterministic(self.policy, state)[: len(devices)]


__all__ = [
    "Adam", "JobSampler", "MLP", "PPOBatch", "Policy", "PolicyFormatError", "RlAllocator",
    "RlConfig", "TrainingConfig", "TrainingDivergedError", "act_deterministic", "build_state",
    "env_step", "load_policy", "ppo_loss_and_grad", "sample_action", "save_policy",
    "train_ppo", "write_training_log",
]
