"""Clipped-surrogate PPO specialised to one-step episodes.

With a single decision per episode the return is the reward itself and the
advantage is ``reward - V(state)``; no discounting or GAE is involved.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from ..devices import QDevice
from ..metrics import MetricsConfig
from ..workload import QJob
from .env import RlConfig, build_state, env_step
from .network import LOG_2PI, Adam, Policy

log = logging.getLogger(__name__)

LOG_FIELDS = ["batch", "mean_reward", "entropy", "policy_loss", "value_loss"]


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class PPOBatch:
    states: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray


def ppo_loss_and_grad(policy: Policy, batch: PPOBatch, clip_ratio: float = 0.2,
                      entropy_coef: float = 0.01, value_coef: float = 0.5,
                      need_grad: bool = True):
    """Total loss, its gradient in ``policy.params()`` order, and loss components."""
    n = len(batch.states)
    mu, actor_acts = policy.actor.forward(batch.states)
    sigma = np.exp(policy.log_std)
    z = (batch.actions - mu) / sigma
    logp = np.sum(-0.5 * z * z - policy.log_std - 0.5 * LOG_2PI, axis=1)
    ratio = np.exp(logp - batch.old_log_probs)
    adv = batch.advantages
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio) * adv
    unclipped = surr1 <= surr2
    policy_loss = -np.mean(np.minimum(surr1, surr2))

    v, critic_acts = policy.critic.forward(batch.states)
    v = v[:, 0]
    value_loss = np.mean((v - batch.returns) ** 2)
    entropy = policy.entropy()
    loss = policy_loss + value_coef * value_loss - entropy_coef * entropy
    parts = {"policy_loss": float(policy_loss), "value_loss": float(value_loss),
             "entropy": entropy, "clip_fraction": float(np.mean(~unclipped))}
    if not need_grad:
        return float(loss), None, parts

    dlogp = np.where(unclipped, -ratio * adv / n, 0.0)
    dmu = dlogp[:, None] * z / sigma
    dlog_std = np.sum(dlogp[:, None] * (z * z - 1.0), axis=0) - entropy_coef
    dv = (value_coef * 2.0 / n) * (v - batch.returns)
    grads = (policy.actor.backward(actor_acts, dmu) + [dlog_std]
             + policy.critic.backward(critic_acts, dv[:, None]))
    return float(loss), grads, parts


EnvSampler = Callable[[np.random.Generator], tuple[QJob, list[QDevice]]]


def collect_batch(policy: Policy, sampler: EnvSampler, size: int, cfg: RlConfig,
                  metrics: MetricsConfig, rng: np.random.Generator):
    states, rewards = [], []
    episodes = []
    for _ in range(size):
        job, devices = sampler(rng)
        states.append(build_state(job, devices, cfg))
        episodes.append((job, devices))
    states = np.array(states)
    mu = policy.mean(states)
    actions = mu + np.exp(policy.log_std) * rng.standard_normal(mu.shape)
    logp = policy.log_prob(states, actions)
    for (job, devices), a in zip(episodes, actions):
        r, _ = env_step(job, devices, a, cfg, metrics)
        rewards.append(r)
    return states, actions, logp, np.array(rewards)


def train_ppo(env_sampler: EnvSampler, cfg: RlConfig,
              metrics: MetricsConfig = MetricsConfig(),
              policy: Policy | None = None):
    """Train a policy; returns ``(policy, log_rows)`` with one row per batch."""
    tr = cfg.training
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    if policy is None:
        policy = Policy.init(cfg.state_dim, cfg.num_device_slots, list(tr.hidden_sizes), rng)
    opt = Adam(policy.params(), lr=tr.learning_rate)
    rows = []
    done = 0
    batch_no = 0
    while done < tr.timesteps:
        size = min(tr.batch_size, tr.timesteps - done)
        entropy = policy.entropy()
        states, actions, logp, rewards = collect_batch(policy, env_sampler, size, cfg, metrics, rng)
        adv = rewards - policy.value(states)
        if size > 1:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        batch = PPOBatch(states, actions, logp, adv, rewards)
        first = None
        for _ in range(tr.epochs_per_batch):
            loss, grads, parts = ppo_loss_and_grad(
                policy, batch, tr.clip_ratio, tr.entropy_coef, tr.value_coef)
            if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingDivergedError(
                    f"non-finite PPO loss in batch {batch_no}; "
                    f"try a smaller learning_rate than {tr.learning_rate}"
                )
            if first is None:
                first = parts
            opt.step(grads)
        done += size
        rows.append({
            "batch": batch_no,
            "mean_reward": float(rewards.mean()),
            "entropy": entropy,
            "policy_loss": first["policy_loss"] if first else float("nan"),
            "value_loss": first["value_loss"] if first else float("nan"),
        })
        if batch_no % 50 == 0:
            log.debug("batch %d mean reward %.4f entropy %.3f", batch_no, rows[-1]["mean_reward"], entropy)
        batch_no += 1
    return policy, rows


def write_training_log(rows, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=LOG_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
