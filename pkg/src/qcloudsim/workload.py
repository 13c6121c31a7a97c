"""Quantum jobs: synthetic generation, CSV/JSON traces, and timed arrival."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .sim import Environment

JOB_FIELDS = ["job_id", "num_qubits", "depth", "num_shots", "two_qubit_gates", "arrival_time"]

CASE_STUDY_QUBITS = (130, 250)
CASE_STUDY_DEPTH = (5, 20)
CASE_STUDY_SHOTS = (10_000, 100_000)


class WorkloadError(ValueError):
    pass


@dataclass(frozen=True)
class QJob:
    job_id: str
    num_qubits: int
    depth: int
    num_shots: int
    two_qubit_gates: int
    arrival_time: float = 0.0

    def __post_init__(self):
        if self.num_qubits < 1 or self.depth < 1 or self.num_shots < 1:
            raise WorkloadError(
                f"job {self.job_id}: num_qubits, depth and num_shots must be >= 1"
            )
        if self.two_qubit_gates < 0:
            raise WorkloadError(f"job {self.job_id}: two_qubit_gates must be >= 0")
        if self.arrival_time < 0:
            raise WorkloadError(f"job {self.job_id}: arrival_time must be >= 0")


@dataclass(frozen=True)
class WorkloadSpec:
    """Synthetic workload description.

    ``two_qubit_range`` of None means the per-job area rule
    ``[q*d//4, q*d//2]``. ``arrival_model`` is ``"all-at-zero"`` or
    ``("poisson", rate)``.
    """

    count: int = 1000
    qubit_range: tuple[int, int] = CASE_STUDY_QUBITS
    depth_range: tuple[int, int] = CASE_STUDY_DEPTH
    shots_range: tuple[int, int] = CASE_STUDY_SHOTS
    two_qubit_range: tuple[int, int] | None = None
    arrival_model: Any = "all-at-zero"
    seed: int = 0

    def __post_init__(self):
        if self.count < 0:
            raise WorkloadError("count must be >= 0")
        for name in ("qubit_range", "depth_range", "shots_range", "two_qubit_range"):
            r = getattr(self, name)
            if r is None:
                continue
            if len(r) != 2 or r[0] > r[1]:
                raise WorkloadError(f"{name} must be [low, high] with low <= high, got {r}")
        if self.depth_range[0] < 1 or self.shots_range[0] < 1 or self.qubit_range[0] < 1:
            raise WorkloadError("qubit, depth and shot ranges must start at >= 1")
        _arrival_rate(self.arrival_model)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "WorkloadSpec":
        known = {"count", "qubit_range", "depth_range", "shots_range",
                 "two_qubit_range", "arrival_model", "seed"}
        extra = set(doc) - known
        if extra:
            raise WorkloadError(f"unknown workload fields {sorted(extra)}")
        kw = dict(doc)
        for name in ("qubit_range", "depth_range", "shots_range", "two_qubit_range"):
            if kw.get(name) is not None:
                kw[name] = tuple(int(x) for x in kw[name])
        am = kw.get("arrival_model")
        if isinstance(am, dict):
            kw["arrival_model"] = ("poisson", float(am["rate"]))
        elif isinstance(am, list):
            kw["arrival_model"] = tuple(am)
        return cls(**kw)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        am = self.arrival_model
        if isinstance(am, tuple):
            d["arrival_model"] = {"kind": "poisson", "rate": am[1]}
        d["two_qubit_rule"] = "range" if self.two_qubit_range else "uniform[q*d//4, q*d//2]"
        return d


def _arrival_rate(model) -> float | None:
    if model == "all-at-zero":
        return None
    if isinstance(model, tuple) and len(model) == 2 and model[0] == "poisson" and model[1] > 0:
        return float(model[1])
    raise WorkloadError(f"arrival_model must be 'all-at-zero' or ('poisson', rate>0), got {model!r}")


def feasible_qubit_window(qubit_range: Sequence[int], caps: Sequence[int]) -> tuple[int, int]:
    """Intersect the user range with max(caps) < q < sum(caps)."""
    if not caps:
        raise WorkloadError("cloud has no devices")
    lo = max(int(qubit_range[0]), max(caps) + 1)
    hi = min(int(qubit_range[1]), sum(caps) - 1)
    if lo > hi:
        raise WorkloadError(
            f"qubit_range {list(qubit_range)} has no value strictly between the largest "
            f"device capacity ({max(caps)}) and the total cloud capacity ({sum(caps)}); "
            "jobs must need more than one device yet fit in the whole cloud"
        )
    return lo, hi


def generate_jobs(spec: WorkloadSpec, cloud_caps: Sequence[int]) -> list[QJob]:
    """Reproducible synthetic jobs; all randomness comes from a PCG64 stream seeded by ``spec.seed``."""
    qlo, qhi = feasible_qubit_window(spec.qubit_range, cloud_caps)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    rate = _arrival_rate(spec.arrival_model)
    width = len(str(max(spec.count - 1, 0)))
    jobs = []
    t = 0.0
    for n in range(spec.count):
        q = int(rng.integers(qlo, qhi, endpoint=True))
        d = int(rng.integers(spec.depth_range[0], spec.depth_range[1], endpoint=True))
        s = int(rng.integers(spec.shots_range[0], spec.shots_range[1], endpoint=True))
        if spec.two_qubit_range is None:
            t2 = int(rng.integers(q * d // 4, q * d // 2, endpoint=True))
        else:
            t2 = int(rng.integers(spec.two_qubit_range[0], spec.two_qubit_range[1], endpoint=True))
        if rate is not None:
            t += float(rng.exponential(1.0 / rate))
        jobs.append(QJob(f"job{n:0{width}d}", q, d, s, t2, t))
    return jobs


def _check_unique(jobs: Sequence[QJob], where: str) -> None:
    seen = set()
    for j in jobs:
        if j.job_id in seen:
            raise WorkloadError(f"{where}: duplicate job_id {j.job_id!r}")
        seen.add(j.job_id)


def load_jobs_csv(path: str | Path) -> list[QJob]:
    path = Path(path)
    jobs = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = set(JOB_FIELDS) - {"arrival_time"}
        if reader.fieldnames is None or required - set(reader.fieldnames):
            raise WorkloadError(
                f"{path}: header must contain {','.join(JOB_FIELDS)} (arrival_time optional)"
            )
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            try:
                arrival = (row.get("arrival_time") or "").strip()
                job = QJob(
                    job_id=row["job_id"].strip(),
                    num_qubits=int(row["num_qubits"]),
                    depth=int(row["depth"]),
                    num_shots=int(row["num_shots"]),
                    two_qubit_gates=int(row["two_qubit_gates"]),
                    arrival_time=float(arrival) if arrival else 0.0,
                )
            except (ValueError, TypeError, AttributeError) as exc:
                raise WorkloadError(f"{path}: row {lineno}: {exc}") from exc
            if not job.job_id:
                raise WorkloadError(f"{path}: row {lineno}: empty job_id")
            if job.job_id in seen:
                raise WorkloadError(f"{path}: row {lineno}: duplicate job_id {job.job_id!r}")
            seen.add(job.job_id)
            jobs.append(job)
    return jobs


def load_jobs_json(path: str | Path) -> list[QJob]:
    """JSON array of objects carrying the same fields as the CSV trace."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise WorkloadError(f"{path}: invalid JSON at byte {exc.pos}: {exc.msg}") from exc
    if not isinstance(doc, list):
        raise WorkloadError(f"{path}: expected a JSON array of jobs")
    jobs = []
    for n, item in enumerate(doc):
        try:
            jobs.append(QJob(
                job_id=str(item["job_id"]),
                num_qubits=int(item["num_qubits"]),
                depth=int(item["depth"]),
                num_shots=int(item["num_shots"]),
                two_qubit_gates=int(item["two_qubit_gates"]),
                arrival_time=float(item.get("arrival_time") or 0.0),
            ))
        except (KeyError, ValueError, TypeError) as exc:
            raise WorkloadError(f"{path}: entry {n}: {exc}") from exc
    _check_unique(jobs, str(path))
    return jobs


def load_jobs(path: str | Path) -> list[QJob]:
    return load_jobs_json(path) if str(path).lower().endswith(".json") else load_jobs_csv(path)


def write_jobs_csv(jobs: Sequence[QJob], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(JOB_FIELDS)
        for j in jobs:
            w.writerow([j.job_id, j.num_qubits, j.depth, j.num_shots,
                        j.two_qubit_gates, repr(float(j.arrival_time))])


def arrival_process(env: Environment, jobs: Sequence[QJob], submit: Callable[[QJob], Any]):
    """Generator that calls ``submit(job)`` at each job's arrival time.

    Sorting is stable so equal arrival times keep input order.
    """
    for job in sorted(jobs, key=lambda j: j.arrival_time):
        if job.arrival_time > env.now:
            yield env.timeout_until(job.arrival_time)
        submit(job)
