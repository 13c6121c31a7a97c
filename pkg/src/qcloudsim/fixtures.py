"""Synthetic device profiles.

No real calibration snapshot ships with this package. The case-study cloud
uses the published names, capacities, CLOPS and quantum volume, with
calibration numbers drawn from a seeded generator.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .devices import CalibrationData, DeviceProfile

# name, CLOPS, mean readout, RX error, mean two-qubit error
CASE_STUDY_DEVICES = [
    ("ibm_strasbourg", 220_000, 0.030, 0.00045, 0.0110),
    ("ibm_brussels", 220_000, 0.026, 0.00040, 0.0100),
    ("ibm_kyiv", 30_000, 0.018, 0.00030, 0.0085),
    ("ibm_quebec", 32_000, 0.012, 0.00022, 0.0070),
    ("ibm_kawasaki", 29_000, 0.014, 0.00025, 0.0075),
]


def lattice_edges(n: int, stride: int = 14, every: int = 4) -> list[tuple[int, int]]:
    """A path through all qubits plus periodic rungs; connected by construction."""
    edges = [(i, i + 1) for i in range(n - 1)]
    edges += [(i, i + stride) for i in range(0, n - stride, every)]
    return edges


def synthetic_profile(name: str, capacity: int = 127, clops: float = 220_000,
                      quantum_volume: int = 127, mean_readout: float = 0.02,
                      single_qubit_error: float = 3e-4, mean_two_qubit: float = 0.01,
                      seed: int = 0, spread: float = 0.5) -> DeviceProfile:
    rng = np.random.Generator(np.random.PCG64(seed))
    edges = lattice_edges(capacity) if capacity > 1 else []

    def draw(mean, size):
        vals = mean * rng.uniform(1.0 - spread, 1.0 + spread, size)
        # re-centre so the sample mean equals the requested mean
        if size and vals.mean() > 0:
            vals *= mean / vals.mean()
        return [float(v) for v in np.clip(vals, 0.0, 1.0)]

    return DeviceProfile(
        name=name,
        capacity=capacity,
        clops=float(clops),
        quantum_volume=quantum_volume,
        coupling_edges=tuple(edges),
        calibration=CalibrationData(
            tuple(draw(mean_readout, capacity)),
            float(single_qubit_error),
            tuple(draw(mean_two_qubit, len(edges))),
        ),
    )


def case_study_profiles(seed: int = 2025) -> list[DeviceProfile]:
    return [
        synthetic_profile(name, 127, clops, 127, ro, e1, e2, seed=seed + i)
        for i, (name, clops, ro, e1, e2) in enumerate(CASE_STUDY_DEVICES)
    ]


def single_best_device_profiles(seed: int = 7) -> list[DeviceProfile]:
    """One near-perfect device among four noisy ones, all 127 qubits."""
    specs = [
        ("noisy_a", 220_000, 0.060, 0.0010, 0.030),
        ("noisy_b", 220_000, 0.055, 0.0012, 0.028),
        ("clean", 30_000, 0.004, 0.0001, 0.002),
        ("noisy_c", 32_000, 0.065, 0.0011, 0.032),
        ("noisy_d", 29_000, 0.058, 0.0009, 0.029),
    ]
    return [
        synthetic_profile(name, 127, clops, 127, ro, e1, e2, seed=seed + i)
        for i, (name, clops, ro, e1, e2) in enumerate(specs)
    ]


def write_manifest(profiles: list[DeviceProfile], directory: str | Path,
                   metrics: dict | None = None, note: str = "synthetic calibration") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for p in profiles:
        fname = f"{p.name}.json"
        (directory / fname).write_text(json.dumps(p.to_dict(), indent=1), encoding="utf-8")
        paths.append(fname)
    manifest = {"note": note, "devices": paths, "metrics": metrics or {}}
    out = directory / "manifest.json"
    out.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return out
