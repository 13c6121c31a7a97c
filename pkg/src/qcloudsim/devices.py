"""Quantum device profiles, calibration data and the weighted error score."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import networkx as nx

from .sim import CapacityStore, Environment


class ProfileError(ValueError):
    """A device profile or manifest document failed validation."""


@dataclass(frozen=True)
class ErrorScoreWeights:
    alpha: float = 0.5  # readout
    theta: float = 0.3  # single-qubit (RX)
    gamma: float = 0.2  # two-qubit

    def __post_init__(self):
        for name in ("alpha", "theta", "gamma"):
            if getattr(self, name) < 0:
                raise ProfileError(f"error weight {name} must be non-negative")


@dataclass(frozen=True)
class CalibrationData:
    readout_errors: tuple[float, ...]
    single_qubit_error: float
    two_qubit_errors: tuple[float, ...]

    @property
    def mean_readout(self) -> float:
        return math.fsum(self.readout_errors) / len(self.readout_errors)

    @property
    def mean_two_qubit(self) -> float:
        return math.fsum(self.two_qubit_errors) / len(self.two_qubit_errors)


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    capacity: int
    clops: float
    quantum_volume: int
    coupling_edges: tuple[tuple[int, int], ...]
    calibration: CalibrationData

    @property
    def coupling_graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.capacity))
        g.add_edges_from(self.coupling_edges)
        return g

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "capacity": self.capacity,
            "clops": self.clops,
            "quantum_volume": self.quantum_volume,
            "coupling_edges": [list(e) for e in self.coupling_edges],
            "calibration": {
                "readout_errors": list(self.calibration.readout_errors),
                "single_qubit_error": self.calibration.single_qubit_error,
                "two_qubit_errors": list(self.calibration.two_qubit_errors),
            },
        }


def error_score(cal: CalibrationData, w: ErrorScoreWeights = ErrorScoreWeights()) -> float:
    """Weighted device error: mean readout, the RX error, and mean two-qubit error."""
    if not cal.readout_errors:
        raise ProfileError("calibration.readout_errors is empty")
    if not cal.two_qubit_errors:
        raise ProfileError("calibration.two_qubit_errors is empty")
    return w.alpha * cal.mean_readout + w.theta * cal.single_qubit_error + w.gamma * cal.mean_two_qubit


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ProfileError(f"{where}: missing field '{key}'")
    return doc[key]


def _check_rate(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProfileError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ProfileError(f"{where}: error rate {value} outside [0, 1]")
    return value


def _check_int(value: Any, where: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ProfileError(f"{where}: expected an integer, got {value!r}")
    if value < minimum:
        raise ProfileError(f"{where}: must be >= {minimum}, got {value}")
    return value


def load_device_profile(document: dict[str, Any]) -> DeviceProfile:
    """Validate a profile document (already parsed JSON) and build a DeviceProfile."""
    if not isinstance(document, dict):
        raise ProfileError("profile document must be a JSON object")
    name = _require(document, "name", "profile")
    if not isinstance(name, str) or not name:
        raise ProfileError("name: must be a non-empty string")
    where = f"profile '{name}'"
    capacity = _check_int(_require(document, "capacity", where), f"{where}: capacity", 1)
    clops = _require(document, "clops", where)
    if isinstance(clops, bool) or not isinstance(clops, (int, float)) or clops <= 0:
        raise ProfileError(f"{where}: clops must be a positive number")
    qv = _check_int(_require(document, "quantum_volume", where), f"{where}: quantum_volume", 2)

    raw_edges = _require(document, "coupling_edges", where)
    edges = []
    for n, e in enumerate(raw_edges):
        if not (isinstance(e, (list, tuple)) and len(e) == 2):
            raise ProfileError(f"{where}: coupling_edges[{n}] must be a pair")
        u, v = (_check_int(x, f"{where}: coupling_edges[{n}]", 0) for x in e)
        if u >= capacity or v >= capacity:
            raise ProfileError(
                f"{where}: coupling_edges[{n}] references vertex outside 0..{capacity - 1}"
            )
        if u == v:
            raise ProfileError(f"{where}: coupling_edges[{n}] is a self-loop")
        edges.append((u, v))

    cal_doc = _require(document, "calibration", where)
    readout = [
        _check_rate(x, f"{where}: calibration.readout_errors[{i}]")
        for i, x in enumerate(_require(cal_doc, "readout_errors", f"{where}: calibration"))
    ]
    if len(readout) != capacity:
        raise ProfileError(
            f"{where}: calibration.readout_errors has {len(readout)} entries, capacity is {capacity}"
        )
    e1 = _check_rate(
        _require(cal_doc, "single_qubit_error", f"{where}: calibration"),
        f"{where}: calibration.single_qubit_error",
    )
    two_q = [
        _check_rate(x, f"{where}: calibration.two_qubit_errors[{i}]")
        for i, x in enumerate(_require(cal_doc, "two_qubit_errors", f"{where}: calibration"))
    ]
    if len(two_q) != len(edges):
        raise ProfileError(
            f"{where}: calibration.two_qubit_errors has {len(two_q)} entries, "
            f"coupling_edges has {len(edges)}"
        )

    profile = DeviceProfile(
        name=name,
        capacity=capacity,
        clops=float(clops),
        quantum_volume=qv,
        coupling_edges=tuple(edges),
        calibration=CalibrationData(tuple(readout), e1, tuple(two_q)),
    )
    if capacity > 1 and not nx.is_connected(profile.coupling_graph):
        raise ProfileError(f"{where}: coupling_edges: coupling graph is not connected")
    return profile


def load_device_profile_file(path: str | Path) -> DeviceProfile:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ProfileError(f"{path}: invalid JSON at byte {exc.pos}: {exc.msg}") from exc
    return load_device_profile(doc)


@dataclass(eq=False)
class QDevice:
    """Runtime wrapper: a profile plus its live qubit store and counters."""

    profile: DeviceProfile
    env: Environment
    weights: ErrorScoreWeights = field(default_factory=ErrorScoreWeights)
    index: int = 0

    def __post_init__(self):
        self.store = CapacityStore(self.env, self.profile.capacity)
        self.error_score = error_score(self.profile.calibration, self.weights)
        self.jobs_served = 0
        self.busy_time = 0.0

    @property
    def name(self) -> str:
        return self.profile.name

    @property
    def capacity(self) -> int:
        return self.profile.capacity

    @property
    def clops(self) -> float:
        return self.profile.clops

    @property
    def utilization(self) -> float:
        return 1.0 - self.store.level / self.capacity

    def __repr__(self) -> str:
        return f"QDevice({self.name!r}, level={self.store.level}/{self.capacity})"


def available_qubits(device: QDevice) -> int:
    return device.store.level


def build_devices(
    env: Environment, profiles: list[DeviceProfile], weights: ErrorScoreWeights = ErrorScoreWeights()
) -> list[QDevice]:
    return [QDevice(p, env, weights, index=i) for i, p in enumerate(profiles)]
