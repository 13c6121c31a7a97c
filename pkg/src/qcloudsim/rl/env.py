"""Single-step allocation environment: state encoding, reward, job sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict, fields
from typing import Any, Sequence

import numpy as np

from ..devices import QDevice
from ..metrics import MetricsConfig, plan_device_fidelities
from ..scheduler import AllocationError, partition_from_fractions
from ..workload import CASE_STUDY_DEPTH, CASE_STUDY_QUBITS, CASE_STUDY_SHOTS, QJob


@dataclass
class TrainingConfig:
    timesteps: int = 100_000
    learning_rate: float = 3e-4
    clip_ratio: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    batch_size: int = 64
    epochs_per_batch: int = 10
    hidden_sizes: list[int] = field(default_factory=lambda: [64, 64])


@dataclass
class RlConfig:
    q_max: int = 50
    capacity_norm: float = 150.0
    clops_norm: float = 1e6
    num_device_slots: int = 5
    epsilon: float = 1e-8
    reward_includes_penalty: bool = False
    training: TrainingConfig = field(default_factory=TrainingConfig)
    seed: int = 0

    @property
    def state_dim(self) -> int:
        return 1 + 3 * self.num_device_slots

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "RlConfig":
        doc = dict(doc)
        names = {f.name for f in fields(cls)}
        extra = set(doc) - names
        if extra:
            raise ValueError(f"unknown rl config fields {sorted(extra)}")
        tr = doc.pop("training", {}) or {}
        tnames = {f.name for f in fields(TrainingConfig)}
        if set(tr) - tnames:
            raise ValueError(f"unknown training fields {sorted(set(tr) - tnames)}")
        return cls(training=TrainingConfig(**tr), **doc)


def build_state(job: QJob, devices: Sequence[QDevice], cfg: RlConfig) -> np.ndarray:
    """``[q/q_max, (level/cap_norm, error score, clops/clops_norm) per slot]``, zero padded."""
    if len(devices) > cfg.num_device_slots:
        raise ValueError(
            f"{len(devices)} devices exceed the {cfg.num_device_slots} state slots"
        )
    state = np.zeros(cfg.state_dim)
    state[0] = job.num_qubits / cfg.q_max
    for i, dev in enumerate(devices):
        state[1 + 3 * i: 4 + 3 * i] = (
            dev.store.level / cfg.capacity_norm,
            dev.error_score,
            dev.clops / cfg.clops_norm,
        )
    return state


def env_step(job: QJob, devices: Sequence[QDevice], raw_action, cfg: RlConfig,
             metrics: MetricsConfig = MetricsConfig()) -> tuple[float, dict[str, Any]]:
    """Reward is the mean device fidelity over the devices the action actually uses."""
    padded = np.asarray(raw_action, dtype=float)[: len(devices)]
    try:
        plan = partition_from_fractions(job.num_qubits, devices, padded, cfg.epsilon)
    except AllocationError as exc:
        return 0.0, {"infeasible": True, "reason": str(exc), "done": True}
    fids = plan_device_fidelities(plan.devices, job, metrics)
    reward = math.fsum(fids) / plan.k
    if cfg.reward_includes_penalty:
        reward *= metrics.phi ** (plan.k - 1)
    return reward, {"infeasible": False, "plan": plan, "k": plan.k,
                    "device_fidelities": fids, "done": True}


@dataclass
class JobSampler:
    """Draws random training jobs; two-qubit counts follow the workload area rule."""

    devices: list[QDevice]
    qubit_range: tuple[int, int] | None = None
    depth_range: tuple[int, int] = CASE_STUDY_DEPTH
    shots_range: tuple[int, int] = CASE_STUDY_SHOTS

    def __post_init__(self):
        total = sum(d.capacity for d in self.devices)
        if self.qubit_range is None:
            lo, hi = CASE_STUDY_QUBITS
            lo, hi = min(lo, total), min(hi, total)
            self.qubit_range = (lo, hi)
        if not 1 <= self.qubit_range[0] <= self.qubit_range[1] <= total:
            raise ValueError(
                f"training qubit_range {self.qubit_range} must lie within [1, {total}]"
            )
        self._n = 0

    def __call__(self, rng: np.random.Generator) -> tuple[QJob, list[QDevice]]:
        q = int(rng.integers(self.qubit_range[0], self.qubit_range[1], endpoint=True))
        d = int(rng.integers(self.depth_range[0], self.depth_range[1], endpoint=True))
        s = int(rng.integers(self.shots_range[0], self.shots_range[1], endpoint=True))
        t2 = int(rng.integers(q * d // 4, q * d // 2, endpoint=True))
        self._n += 1
        return QJob(f"train{self._n}", q, d, s, t2), self.devices
