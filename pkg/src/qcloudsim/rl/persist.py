"""JSON policy files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .env import RlConfig
from .network import MLP, Policy

FORMAT_VERSION = 1


class PolicyFormatError(ValueError):
    pass


def _mlp_doc(mlp: MLP) -> dict:
    return {"layers": [
        {"rows": int(w.shape[0]), "cols": int(w.shape[1]),
         "weights": w.ravel(order="C").tolist(), "bias": b.tolist()}
        for w, b in zip(mlp.weights, mlp.biases)
    ]}


def _mlp_from_doc(doc: dict, what: str) -> MLP:
    ws, bs = [], []
    for n, layer in enumerate(doc["layers"]):
        rows, cols = int(layer["rows"]), int(layer["cols"])
        flat = np.asarray(layer["weights"], dtype=np.float64)
        bias = np.asarray(layer["bias"], dtype=np.float64)
        if flat.size != rows * cols or bias.shape != (cols,):
            raise PolicyFormatError(f"{what} layer {n}: weights/bias do not match {rows}x{cols}")
        if ws and ws[-1].shape[1] != rows:
            raise PolicyFormatError(f"{what} layer {n}: input size {rows} does not chain")
        ws.append(flat.reshape(rows, cols))
        bs.append(bias)
    if not ws:
        raise PolicyFormatError(f"{what}: no layers")
    return MLP(ws, bs)


def save_policy(policy: Policy, path: str | Path, cfg: RlConfig) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "config": cfg.to_dict(),
        "actor": _mlp_doc(policy.actor),
        "log_std": policy.log_std.tolist(),
        "critic": _mlp_doc(policy.critic),
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_policy(path: str | Path, expected: RlConfig | None = None) -> tuple[Policy, RlConfig]:
    """Load a policy file; with ``expected`` given, reject shape-incompatible files."""
    raw = Path(path).read_bytes()
    try:
        doc = json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise PolicyFormatError(f"{path}: parse error at byte {exc.pos}: {exc.msg}") from exc
    try:
        if doc.get("format_version") != FORMAT_VERSION:
            raise PolicyFormatError(f"{path}: unsupported format_version {doc.get('format_version')!r}")
        cfg = RlConfig.from_dict(doc["config"])
        actor = _mlp_from_doc(doc["actor"], "actor")
        critic = _mlp_from_doc(doc["critic"], "critic")
        log_std = np.asarray(doc["log_std"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, PolicyFormatError):
            raise
        raise PolicyFormatError(f"{path}: malformed policy document: {exc}") from exc

    policy = Policy(actor, log_std, critic)
    if actor.sizes[0] != cfg.state_dim or critic.sizes[0] != cfg.state_dim:
        raise PolicyFormatError(f"{path}: network input size does not match state dimension {cfg.state_dim}")
    if actor.sizes[-1] != cfg.num_device_slots or log_std.shape != (cfg.num_device_slots,):
        raise PolicyFormatError(f"{path}: action size does not match {cfg.num_device_slots} device slots")
    if critic.sizes[-1] != 1:
        raise PolicyFormatError(f"{path}: critic must output a scalar")
    if expected is not None and expected.num_device_slots != cfg.num_device_slots:
        raise PolicyFormatError(
            f"{path}: file was trained with {cfg.num_device_slots} device slots, "
            f"configuration expects {expected.num_device_slots}"
        )
    return policy, cfg
