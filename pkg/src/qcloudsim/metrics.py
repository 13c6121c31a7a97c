"""Execution-time, fidelity and communication models plus job bookkeeping."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Sequence

RECORD_FIELDS = [
    "job_id", "arrival", "start", "finish", "k", "devices",
    "qubit_split", "exec_time", "comm_time", "fidelity",
]


class RecordsFormatError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsConfig:
    m_templates: int = 100
    k_updates: int = 10
    phi: float = 0.95
    lambda_per_qubit: float = 0.02
    two_qubit_exponent: str = "sqrt"

    def __post_init__(self):
        if self.m_templates < 1 or self.k_updates < 1:
            raise ValueError("m_templates and k_updates must be positive")
        if not 0.0 < self.phi <= 1.0:
            raise ValueError(f"phi must lie in (0, 1], got {self.phi}")
        if self.lambda_per_qubit < 0:
            raise ValueError("lambda_per_qubit must be non-negative")
        if self.two_qubit_exponent not in ("sqrt", "fourth_root"):
            raise ValueError("two_qubit_exponent must be 'sqrt' or 'fourth_root'")


def execution_time(cfg: MetricsConfig, shots: int, qv: int, clops: float) -> float:
    """Seconds to run ``shots`` shots on a device with quantum volume ``qv``."""
    if qv < 2:
        raise ValueError(f"quantum volume must be >= 2, got {qv}")
    if clops <= 0:
        raise ValueError("clops must be positive")
    if shots < 1:
        raise ValueError("shots must be >= 1")
    return cfg.m_templates * cfg.k_updates * shots * math.log2(qv) / clops


def sub_job_time(cfg: MetricsConfig, shots: int, device) -> float:
    p = device.profile
    return execution_time(cfg, shots, p.quantum_volume, p.clops)


def fidelity_1q(eps_1q: float, depth: int) -> float:
    return (1.0 - eps_1q) ** depth


def fidelity_2q(eps_2q: float, n_2q: int, exponent_mode: str = "sqrt") -> float:
    if exponent_mode == "sqrt":
        expo = math.sqrt(n_2q)
    elif exponent_mode == "fourth_root":
        expo = n_2q ** 0.25
    else:
        raise ValueError(f"unknown exponent mode {exponent_mode!r}")
    return (1.0 - eps_2q) ** expo


def fidelity_readout(eps_ro: float, q: int, k: int) -> float:
    return (1.0 - eps_ro) ** math.sqrt(q / k)


def split_two_qubit_gates(t2: int, k: int) -> list[int]:
    """Even split of t2 over k devices, remainder to the first one."""
    base, rem = divmod(t2, k)
    return [base + rem] + [base] * (k - 1)


def device_fidelity(device, depth: int, q: int, k: int, t2_share: int,
                    cfg: MetricsConfig = MetricsConfig()) -> float:
    cal = device.profile.calibration
    return (
        fidelity_1q(cal.single_qubit_error, depth)
        * fidelity_2q(cal.mean_two_qubit, t2_share, cfg.two_qubit_exponent)
        * fidelity_readout(cal.mean_readout, q, k)
    )


def plan_device_fidelities(devices: Sequence, job, cfg: MetricsConfig = MetricsConfig()) -> list[float]:
    k = len(devices)
    shares = split_two_qubit_gates(job.two_qubit_gates, k)
    return [
        device_fidelity(d, job.depth, job.num_qubits, k, t2, cfg)
        for d, t2 in zip(devices, shares)
    ]


def final_fidelity(device_fidelities: Sequence[float], k: int, phi: float) -> float:
    if not device_fidelities:
        raise ValueError("final_fidelity needs at least one device fidelity")
    if len(device_fidelities) != k:
        raise ValueError(f"got {len(device_fidelities)} fidelities for k={k}")
    return math.fsum(device_fidelities) / k * phi ** (k - 1)


def comm_time(q: int, k: int, lam: float) -> float:
    """Blocking classical-communication delay over the k-1 inter-device links."""
    if k <= 1:
        return 0.0
    return (k - 1) * lam * q


@dataclass
class JobRecord:
    job_id: str
    arrival: float
    start: float
    finish: float
    devices_used: list[tuple[str, int]]
    k: int
    exec_time: float
    comm_time: float
    fidelity: float

    def to_row(self) -> dict[str, str]:
        return {
            "job_id": self.job_id,
            "arrival": repr(float(self.arrival)),
            "start": repr(float(self.start)),
            "finish": repr(float(self.finish)),
            "k": str(self.k),
            "devices": ";".join(name for name, _ in self.devices_used),
            "qubit_split": ";".join(str(a) for _, a in self.devices_used),
            "exec_time": repr(float(self.exec_time)),
            "comm_time": repr(float(self.comm_time)),
            "fidelity": repr(float(self.fidelity)),
        }


@dataclass
class RunSummary:
    t_sim: float
    mean_fidelity: float
    std_fidelity: float
    total_comm: float
    num_jobs: int
    label: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(records: Sequence[JobRecord], label: str = "") -> RunSummary:
    if not records:
        raise ValueError("cannot summarize an empty record set")
    fids = [r.fidelity for r in records]
    n = len(fids)
    mean = math.fsum(fids) / n
    var = math.fsum((f - mean) ** 2 for f in fids) / n
    return RunSummary(
        t_sim=max(r.finish for r in records),
        mean_fidelity=mean,
        std_fidelity=math.sqrt(var),
        total_comm=math.fsum(r.comm_time for r in records),
        num_jobs=n,
        label=label,
    )


@dataclass
class JobRecordsManager:
    """Collects lifecycle events and completed records for one run."""

    events: dict[str, dict[str, float]] = field(default_factory=dict)
    records: list[JobRecord] = field(default_factory=list)

    def log_event(self, job_id: str, kind: str, t: float) -> None:
        self.events.setdefault(job_id, {})[kind] = t

    def add(self, record: JobRecord) -> None:
        self.records.append(record)

    def summary(self, label: str = "") -> RunSummary:
        return summarize(self.records, label)


def write_records_csv(records: Iterable[JobRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=RECORD_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow(r.to_row())


def read_records_csv(path: str | Path) -> list[JobRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(RECORD_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise RecordsFormatError(f"{path}: header missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                names = row["devices"].split(";")
                split = [int(a) for a in row["qubit_split"].split(";")]
                if len(names) != len(split):
                    raise ValueError("devices and qubit_split lengths differ")
                out.append(JobRecord(
                    job_id=row["job_id"],
                    arrival=float(row["arrival"]),
                    start=float(row["start"]),
                    finish=float(row["finish"]),
                    devices_used=list(zip(names, split)),
                    k=int(row["k"]),
                    exec_time=float(row["exec_time"]),
                    comm_time=float(row["comm_time"]),
                    fidelity=float(row["fidelity"]),
                ))
            except (ValueError, TypeError, AttributeError) as exc:
                raise RecordsFormatError(f"{path}: row {lineno}: {exc}") from exc
    return out


def fidelity_histogram(fidelities: Iterable[float], bin_width: float = 0.005) -> list[tuple[float, float, int]]:
    """Counts over fixed-width bins spanning [0, 1]."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    nbins = int(math.ceil(1.0 / bin_width - 1e-9))
    counts = [0] * nbins
    for f in fidelities:
        idx = min(int(math.floor(f / bin_width)), nbins - 1)
        counts[max(idx, 0)] += 1
    return [(i * bin_width, min((i + 1) * bin_width, 1.0), c) for i, c in enumerate(counts)]


def write_histogram_csv(rows, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_low", "bin_high", "count"])
        for lo, hi, c in rows:
            w.writerow([f"{lo:.6f}", f"{hi:.6f}", c])
