"""Device selection policies, qubit partitioning and the job execution workflow."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .devices import DeviceProfile, ErrorScoreWeights, QDevice, build_devices
from .metrics import (
    JobRecord, JobRecordsManager, MetricsConfig, comm_time, final_fidelity,
    plan_device_fidelities, sub_job_time,
)
from .sim import Environment
from .workload import QJob, arrival_process


class PolicyKind(str, enum.Enum):
    SPEED = "speed"
    FIDELITY = "fidelity"
    FAIR = "fair"
    RLBASE = "rlbase"


class AllocationError(ValueError):
    """No capacity-feasible plan exists for the job."""


class ConfigurationError(ValueError):
    pass


class RawActionSource(Protocol):
    epsilon: float

    def raw_action(self, job: QJob, devices: Sequence[QDevice]) -> np.ndarray: ...


@dataclass
class AllocationPlan:
    assignments: list[tuple[QDevice, int]] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.assignments)

    @property
    def devices(self) -> list[QDevice]:
        return [d for d, _ in self.assignments]

    @property
    def split(self) -> list[int]:
        return [a for _, a in self.assignments]

    def validate(self, q: int) -> None:
        if sum(self.split) != q:
            raise AllocationError(f"plan allocates {sum(self.split)} qubits, job needs {q}")
        seen = set()
        for dev, a in self.assignments:
            if not 1 <= a <= dev.capacity:
                raise AllocationError(f"{a} qubits on {dev.name} outside [1, {dev.capacity}]")
            if id(dev) in seen:
                raise AllocationError(f"device {dev.name} appears twice")
            seen.add(id(dev))


def _policy_key(policy: PolicyKind, dev: QDevice, position: int):
    # secondary key = position in the input list
    if policy is PolicyKind.SPEED:
        return (-dev.clops, position)
    if policy is PolicyKind.FIDELITY:
        return (dev.error_score, position)
    if policy is PolicyKind.FAIR:
        return (dev.utilization, position)
    raise ValueError(policy)


def _covering_prefix(ordered: Sequence[QDevice], q: int) -> list[QDevice]:
    out, total = [], 0
    for dev in ordered:
        out.append(dev)
        total += dev.capacity
        if total >= q:
            return out
    raise AllocationError(
        f"job needs {q} qubits but the devices offer only {total} in total"
    )


def select_devices(policy, devices: Sequence[QDevice], job: QJob,
                   rl_policy: RawActionSource | None = None) -> list[QDevice]:
    """Devices in policy priority order, cut to the shortest prefix covering the job."""
    policy = PolicyKind(policy)
    if policy is PolicyKind.RLBASE:
        return rl_plan(job, devices, rl_policy).devices
    keys = [_policy_key(policy, d, i) for i, d in enumerate(devices)]
    order = sorted(range(len(devices)), key=keys.__getitem__)
    return _covering_prefix([devices[i] for i in order], job.num_qubits)


def partition_qubits(q: int, ordered_devices: Sequence[QDevice]) -> AllocationPlan:
    """Greedy fill in priority order."""
    plan = AllocationPlan()
    remaining = q
    for dev in ordered_devices:
        if remaining == 0:
            break
        a = min(remaining, dev.capacity)
        plan.assignments.append((dev, a))
        remaining -= a
    if remaining:
        raise AllocationError(f"{remaining} of {q} qubits left unassigned: insufficient capacity")
    return plan


def fraction_allocation(q: int, caps: Sequence[int], raw, epsilon: float = 1e-8) -> list[int]:
    """Integer allocation proportional to non-negative weights, summing exactly to q.

    Negative weights count as zero. After rounding and capping at each
    capacity, single qubits are moved one at a time: added where the
    allocation falls furthest below its exact share, removed where it sits
    furthest above. Ties go to the lowest index.
    """
    caps = [int(c) for c in caps]
    w = np.maximum(np.asarray(raw, dtype=float), 0.0)
    if w.shape != (len(caps),):
        raise ValueError(f"expected {len(caps)} weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("allocation weights must be finite")
    if q > sum(caps):
        raise AllocationError(f"job needs {q} qubits, devices offer {sum(caps)}")
    exact = w / (w.sum() + epsilon) * q
    alloc = [min(int(math.floor(x + 0.5)), c) for x, c in zip(exact, caps)]
    total = sum(alloc)
    while total != q:
        best = None
        if total < q:
            for i, (a, c) in enumerate(zip(alloc, caps)):
                if a < c and (best is None or exact[i] - a > exact[best] - alloc[best]):
                    best = i
            alloc[best] += 1
            total += 1
        else:
            for i, a in enumerate(alloc):
                if a > 0 and (best is None or exact[i] - a < exact[best] - alloc[best]):
                    best = i
            alloc[best] -= 1
            total -= 1
    return alloc


def partition_from_fractions(q: int, devices: Sequence[QDevice], raw,
                             epsilon: float = 1e-8) -> AllocationPlan:
    alloc = fraction_allocation(q, [d.capacity for d in devices], raw, epsilon)
    return AllocationPlan([(d, a) for d, a in zip(devices, alloc) if a > 0])


def rl_plan(job: QJob, devices: Sequence[QDevice], rl_policy: RawActionSource | None) -> AllocationPlan:
    """Plan from the learned weights, devices ordered by descending share."""
    if rl_policy is None:
        raise ConfigurationError("rlbase mode requires a trained policy")
    raw = rl_policy.raw_action(job, devices)
    plan = partition_from_fractions(job.num_qubits, devices, raw, rl_policy.epsilon)
    pos = {id(d): i for i, d in enumerate(devices)}
    plan.assignments.sort(key=lambda da: (-da[1], pos[id(da[0])]))
    return plan


def plan_job(policy, devices: Sequence[QDevice], job: QJob,
             rl_policy: RawActionSource | None = None) -> AllocationPlan:
    policy = PolicyKind(policy)
    if policy is PolicyKind.RLBASE:
        plan = rl_plan(job, devices, rl_policy)
    else:
        plan = partition_qubits(job.num_qubits, select_devices(policy, devices, job))
    plan.validate(job.num_qubits)
    return plan


class Broker:
    """Plans, reserves, executes and records jobs on a shared set of devices."""

    def __init__(self, env: Environment, devices: list[QDevice], mode,
                 metrics: MetricsConfig = MetricsConfig(),
                 records: JobRecordsManager | None = None,
                 rl_policy: RawActionSource | None = None):
        self.env = env
        self.devices = devices
        self.mode = PolicyKind(mode)
        self.metrics = metrics
        self.records = records if records is not None else JobRecordsManager()
        self.rl_policy = rl_policy
        if self.mode is PolicyKind.RLBASE and rl_policy is None:
            raise ConfigurationError("rlbase mode requires a trained policy")
        self.plans: dict[str, AllocationPlan] = {}

    def submit(self, job: QJob):
        return self.env.process(self.execute_job(job))

    def execute_job(self, job: QJob):
        env = self.env
        arrival = env.now
        self.records.log_event(job.job_id, "arrival", arrival)
        plan = plan_job(self.mode, self.devices, job, self.rl_policy)
        self.plans[job.job_id] = plan

        # ascending device index for every job: no hold-and-wait cycles
        for dev, a in sorted(plan.assignments, key=lambda da: da[0].index):
            yield dev.store.acquire(a)
        start = env.now
        self.records.log_event(job.job_id, "start", start)

        subs = [env.process(self._sub_job(dev, job)) for dev in plan.devices]
        durations = yield env.all_of(subs)
        exec_time = max(durations)

        k = plan.k
        ct = comm_time(job.num_qubits, k, self.metrics.lambda_per_qubit)
        if k > 1:
            yield env.timeout(ct)

        fids = plan_device_fidelities(plan.devices, job, self.metrics)
        fidelity = final_fidelity(fids, k, self.metrics.phi)
        for dev, a in plan.assignments:
            dev.store.release(a)
            dev.jobs_served += 1
        finish = env.now
        self.records.log_event(job.job_id, "finish", finish)
        self.records.log_event(job.job_id, "fidelity", fidelity)
        record = JobRecord(
            job_id=job.job_id, arrival=arrival, start=start, finish=finish,
            devices_used=[(d.name, a) for d, a in plan.assignments], k=k,
            exec_time=exec_time, comm_time=ct, fidelity=fidelity,
        )
        self.records.add(record)
        return record

    def _sub_job(self, dev: QDevice, job: QJob):
        t = sub_job_time(self.metrics, job.num_shots, dev)
        yield self.env.timeout(t)
        dev.busy_time += t
        return t


@dataclass
class SimulationResult:
    records: list[JobRecord]
    devices: list[QDevice]
    t_end: float
    plans: dict[str, AllocationPlan]


def run_simulation(profiles: Sequence[DeviceProfile], jobs: Sequence[QJob], mode,
                   metrics: MetricsConfig = MetricsConfig(),
                   weights: ErrorScoreWeights = ErrorScoreWeights(),
                   rl_policy: RawActionSource | None = None) -> SimulationResult:
    """Run one full simulation; jobs that can never fit are rejected up front."""
    total = sum(p.capacity for p in profiles)
    for j in jobs:
        if j.num_qubits > total:
            raise AllocationError(
                f"job {j.job_id} needs {j.num_qubits} qubits, the cloud has {total}"
            )
    env = Environment()
    devices = build_devices(env, list(profiles), weights)
    broker = Broker(env, devices, mode, metrics, rl_policy=rl_policy)
    env.process(arrival_process(env, jobs, broker.submit))
    t_end = env.run()
    for dev in devices:
        if dev.store.level != dev.capacity or dev.store.queue_length:
            raise RuntimeError(f"device {dev.name} did not drain: level {dev.store.level}")
    if len(broker.records.records) != len(jobs):
        raise RuntimeError(
            f"{len(jobs) - len(broker.records.records)} jobs never completed"
        )
    return SimulationResult(broker.records.records, devices, t_end, broker.plans)
