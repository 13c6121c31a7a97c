"""Cloud manifests and run configurations (JSON documents)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .devices import DeviceProfile, ErrorScoreWeights, ProfileError, load_device_profile_file
from .metrics import MetricsConfig
from .scheduler import PolicyKind
from .workload import WorkloadError, WorkloadSpec


class ConfigError(ValueError):
    pass


def read_json(path: str | Path, what: str) -> Any:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{what}: file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what}: {path}: invalid JSON at byte {exc.pos}: {exc.msg}") from exc


@dataclass
class Cloud:
    profiles: list[DeviceProfile]
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    weights: ErrorScoreWeights = field(default_factory=ErrorScoreWeights)

    @property
    def capacities(self) -> list[int]:
        return [p.capacity for p in self.profiles]


def load_manifest(path: str | Path) -> Cloud:
    """``{"devices": [profile paths], "metrics": {...}, "error_weights": {...}}``; paths are relative to the manifest."""
    path = Path(path)
    doc = read_json(path, "cloud manifest")
    if not isinstance(doc, dict) or not isinstance(doc.get("devices"), list) or not doc["devices"]:
        raise ConfigError(f"cloud manifest {path}: 'devices' must be a non-empty list of profile paths")
    profiles = []
    for n, rel in enumerate(doc["devices"]):
        p = path.parent / rel
        if not p.exists():
            raise ConfigError(f"cloud manifest {path}: devices[{n}]: file not found: {p}")
        try:
            profiles.append(load_device_profile_file(p))
        except ProfileError as exc:
            raise ConfigError(f"cloud manifest {path}: devices[{n}]: {exc}") from exc
    names = [p.name for p in profiles]
    if len(set(names)) != len(names):
        raise ConfigError(f"cloud manifest {path}: duplicate device names {names}")
    try:
        metrics = MetricsConfig(**(doc.get("metrics") or {}))
        weights = ErrorScoreWeights(**(doc.get("error_weights") or {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cloud manifest {path}: {exc}") from exc
    return Cloud(profiles, metrics, weights)


@dataclass
class RunConfig:
    cloud_manifest: Path
    mode: PolicyKind
    trace: Path | None = None
    spec: WorkloadSpec | None = None
    rl_policy_path: Path | None = None
    output_dir: Path = Path("out")
    seed: int | None = None
    raw: dict = field(default_factory=dict)

    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_run_config(path: str | Path, need_mode: bool = True) -> RunConfig:
    path = Path(path)
    doc = read_json(path, "run config")
    if not isinstance(doc, dict):
        raise ConfigError(f"run config {path}: expected a JSON object")
    errors = []
    base = path.parent

    def rel(key):
        return (base / doc[key]) if doc.get(key) else None

    manifest = rel("cloud_manifest")
    if manifest is None:
        errors.append("cloud_manifest: required")
    elif not manifest.exists():
        errors.append(f"cloud_manifest: file not found: {manifest}")

    mode = None
    if "mode" in doc:
        try:
            mode = PolicyKind(doc["mode"])
        except ValueError:
            errors.append(f"mode: must be one of {[m.value for m in PolicyKind]}, got {doc['mode']!r}")
    elif need_mode:
        errors.append("mode: required")

    trace = spec = None
    wl = doc.get("workload")
    if not isinstance(wl, dict) or (("trace" in wl) == ("spec" in wl)):
        errors.append("workload: must be an object with exactly one of 'trace' or 'spec'")
    elif "trace" in wl:
        trace = base / wl["trace"]
        if not trace.exists():
            errors.append(f"workload.trace: file not found: {trace}")
    else:
        try:
            spec = WorkloadSpec.from_dict(wl["spec"])
        except (WorkloadError, TypeError, ValueError) as exc:
            errors.append(f"workload.spec: {exc}")

    policy = rel("rl_policy_path")
    if mode is PolicyKind.RLBASE and policy is None:
        errors.append("rl_policy_path: required when mode is rlbase")
    if policy is not None and not policy.exists():
        errors.append(f"rl_policy_path: file not found: {policy}")

    seed = doc.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        errors.append("seed: must be a non-negative integer")
    if errors:
        raise ConfigError(f"run config {path}:\n  " + "\n  ".join(errors))
    return RunConfig(
        cloud_manifest=manifest, mode=mode or PolicyKind.SPEED, trace=trace, spec=spec,
        rl_policy_path=policy, output_dir=base / doc.get("output_dir", "out"),
        seed=seed, raw=doc,
    )
