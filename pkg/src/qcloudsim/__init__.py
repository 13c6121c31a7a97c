"""Discrete-event simulator for multi-QPU job scheduling in a quantum cloud."""

from .devices import (CalibrationData, DeviceProfile, ErrorScoreWeights, QDevice,
                      available_qubits, error_score, load_device_profile)
from .metrics import JobRecord, MetricsConfig, RunSummary, summarize
from .scheduler import (AllocationPlan, Broker, PolicyKind, partition_from_fractions,
                        partition_qubits, run_simulation, select_devices)
from .sim import CapacityStore, Environment
from .workload import QJob, WorkloadSpec, generate_jobs, load_jobs_csv

__version__ = "0.1.0"

__all__ = [
    "AllocationPlan", "Broker", "CalibrationData", "CapacityStore", "DeviceProfile",
    "Environment", "ErrorScoreWeights", "JobRecord", "MetricsConfig", "PolicyKind", "QDevice",
    "QJob", "RunSummary", "WorkloadSpec", "available_qubits", "error_score", "generate_jobs",
    "load_device_profile", "load_jobs_csv", "partition_from_fractions", "partition_qubits",
    "run_simulation", "select_devices", "summarize",
]
