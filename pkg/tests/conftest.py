from __future__ import annotations

from pathlib import Path

import pytest

from qcloudsim.devices import CalibrationData, DeviceProfile, build_devices
from qcloudsim.sim import Environment

DATA = Path(__file__).resolve().parents[1] / "src" / "qcloudsim" / "data"
CASE_STUDY_MANIFEST = DATA / "case_study" / "manifest.json"
SINGLE_BEST_MANIFEST = DATA / "single_best" / "manifest.json"

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def make_profile(name="dev", capacity=4, clops=1000.0, qv=4, readout=0.0, e1=0.0, e2=0.0):
    edges = tuple((i, i + 1) for i in range(capacity - 1)) or ()
    if capacity == 1:
        edges = ()
    return DeviceProfile(
        name=name, capacity=capacity, clops=clops, quantum_volume=qv,
        coupling_edges=edges,
        calibration=CalibrationData((readout,) * capacity, e1, (e2,) * max(len(edges), 1)),
    )


@pytest.fixture
def env():
    return Environment()


@pytest.fixture
def make_devices(env):
    def _make(*profiles):
        return build_devices(env, list(profiles))
    return _make


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
