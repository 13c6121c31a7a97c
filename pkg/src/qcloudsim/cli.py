"""Command-line front end: simulate, gen-jobs, train-rl, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import metrics as M
from .config import ConfigError, load_manifest, load_run_config, read_json
from .devices import ProfileError, build_devices
from .scheduler import AllocationError, ConfigurationError, PolicyKind, run_simulation
from .sim import Environment, SimulationError
from .workload import WorkloadError, WorkloadSpec, generate_jobs, load_jobs, write_jobs_csv

log = logging.getLogger("qcloudsim")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
CONFIG_ERRORS = (ConfigError, ProfileError, WorkloadError, AllocationError,
                 ConfigurationError, FileNotFoundError)


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def summary_line(mode: str, s: M.RunSummary) -> str:
    return f"{mode} {s.t_sim:.2f} {s.mean_fidelity:.5f} {s.std_fidelity:.5f} {s.total_comm:.2f}"


def _simulate_one(config_path: str, mode: str | None, seed: int | None,
                  output: str | None, per_mode_dir: bool) -> tuple[int, str]:
    from .rl import PolicyFormatError, RlAllocator, load_policy

    try:
        rc = load_run_config(config_path, need_mode=mode is None)
        mode_kind = PolicyKind(mode) if mode else rc.mode
        cloud = load_manifest(rc.cloud_manifest)
        run_seed = seed if seed is not None else rc.seed
        if rc.trace is not None:
            jobs = load_jobs(rc.trace)
            workload_meta = {"trace": str(rc.trace)}
        else:
            spec = rc.spec if run_seed is None else replace(rc.spec, seed=run_seed)
            jobs = generate_jobs(spec, cloud.capacities)
            workload_meta = {"spec": spec.to_dict()}
            run_seed = spec.seed
        if not jobs:
            raise WorkloadError("workload is empty")
        allocator = None
        if mode_kind is PolicyKind.RLBASE:
            if rc.rl_policy_path is None:
                raise ConfigError("rl_policy_path: required when mode is rlbase")
            policy, rl_cfg = load_policy(rc.rl_policy_path)
            if len(cloud.profiles) > rl_cfg.num_device_slots:
                raise ConfigError(
                    f"policy has {rl_cfg.num_device_slots} device slots, cloud has {len(cloud.profiles)} devices"
                )
            allocator = RlAllocator(policy, rl_cfg)
    except PolicyFormatError as exc:
        return EXIT_CONFIG, str(exc)
    except CONFIG_ERRORS as exc:
        return EXIT_CONFIG, str(exc)

    out = Path(output) if output else rc.output_dir
    if per_mode_dir:
        out = out / mode_kind.value
    try:
        result = run_simulation(cloud.profiles, jobs, mode_kind, cloud.metrics, cloud.weights, allocator)
    except AllocationError as exc:
        return EXIT_CONFIG, str(exc)
    except (SimulationError, RuntimeError) as exc:
        return EXIT_RUNTIME, f"simulation failed: {exc}"

    out.mkdir(parents=True, exist_ok=True)
    summary = M.summarize(result.records, label=mode_kind.value)
    M.write_records_csv(result.records, out / "records.csv")
    write_jobs_csv(jobs, out / "jobs.csv")
    M.write_histogram_csv(M.fidelity_histogram(r.fidelity for r in result.records),
                          out / "fidelity_hist.csv")
    doc = summary.to_dict()
    doc.update({
        "mode": mode_kind.value,
        "seed": run_seed,
        "config_hash": rc.digest(),
        "metrics": cloud.metrics.__dict__,
        "devices": [{"name": d.name, "error_score": d.error_score, "clops": d.clops,
                     "jobs_served": d.jobs_served, "busy_time": d.busy_time}
                    for d in result.devices],
        "workload": workload_meta,
    })
    (out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")
    return EXIT_OK, summary_line(mode_kind.value, summary)


def cmd_simulate(args) -> int:
    modes = [m.strip() for m in args.modes.split(",")] if args.modes else [None]
    for m in modes:
        if m is not None and m not in {k.value for k in PolicyKind}:
            return _fail(EXIT_CONFIG, f"--modes: unknown mode {m!r}")
    per_mode = args.modes is not None
    jobs = [(args.config, m, args.seed, args.output, per_mode) for m in modes]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_simulate_star, jobs))
    else:
        results = [_simulate_one(*j) for j in jobs]
    code = EXIT_OK
    for rc, text in results:
        if rc == EXIT_OK:
            print(text)
        else:
            print(f"error: {text}", file=sys.stderr)
            code = max(code, rc)
    return code


def _simulate_star(args):
    return _simulate_one(*args)


def cmd_gen_jobs(args) -> int:
    try:
        doc = read_json(args.spec, "workload spec")
        spec = WorkloadSpec.from_dict(doc)
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
        cloud = load_manifest(args.manifest)
        jobs = generate_jobs(spec, cloud.capacities)
    except (TypeError, *CONFIG_ERRORS) as exc:
        return _fail(EXIT_CONFIG, str(exc))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_jobs_csv(jobs, args.out)
    print(f"wrote {len(jobs)} jobs to {args.out}")
    return EXIT_OK


def cmd_train_rl(args) -> int:
    from .rl import JobSampler, RlConfig, TrainingDivergedError, save_policy, train_ppo, write_training_log

    try:
        doc = read_json(args.config, "training config")
        base = Path(args.config).parent
        if not doc.get("cloud_manifest"):
            raise ConfigError("cloud_manifest: required")
        cloud = load_manifest(base / doc["cloud_manifest"])
        cfg = RlConfig.from_dict(doc.get("rl", {}))
        if args.seed is not None:
            cfg.seed = args.seed
        if args.timesteps is not None:
            cfg.training.timesteps = args.timesteps
        if len(cloud.profiles) > cfg.num_device_slots:
            raise ConfigError(
                f"rl.num_device_slots={cfg.num_device_slots} is smaller than the {len(cloud.profiles)} devices"
            )
        jobs = doc.get("jobs", {})
        devices = build_devices(Environment(), cloud.profiles, cloud.weights)
        sampler = JobSampler(
            devices,
            qubit_range=tuple(jobs["qubit_range"]) if "qubit_range" in jobs else None,
            **{k: tuple(jobs[k]) for k in ("depth_range", "shots_range") if k in jobs},
        )
    except (TypeError, ValueError, *CONFIG_ERRORS) as exc:
        return _fail(EXIT_CONFIG, str(exc))

    out = Path(args.output) if args.output else base / doc.get("output_dir", "rl_out")
    try:
        policy, rows = train_ppo(sampler, cfg, cloud.metrics)
    except TrainingDivergedError as exc:
        return _fail(EXIT_RUNTIME, str(exc))
    out.mkdir(parents=True, exist_ok=True)
    save_policy(policy, out / doc.get("policy_file", "policy.json"), cfg)
    write_training_log(rows, out / "training_log.csv")
    final = rows[-max(1, len(rows) // 10):] if rows else []
    mean = sum(r["mean_reward"] for r in final) / len(final) if final else float("nan")
    print(f"final mean reward {mean:.5f} over {len(rows)} batches")
    return EXIT_OK


def _label_for(path: Path) -> str:
    summary = path.parent / "summary.json"
    if summary.exists():
        try:
            return json.loads(summary.read_text(encoding="utf-8"))["mode"]
        except (json.JSONDecodeError, KeyError):
            pass
    return path.parent.name or path.stem


TABLE_HEADER = ["mode", "T_sim (s)", "mu_F +- sigma_F", "T_comm (s)"]


def cmd_report(args) -> int:
    rows = []
    try:
        for p in args.records:
            p = Path(p)
            records = M.read_records_csv(p)
            if not records:
                raise M.RecordsFormatError(f"{p}: no records")
            rows.append((_label_for(p), M.summarize(records), records))
    except (M.RecordsFormatError, FileNotFoundError) as exc:
        return _fail(EXIT_CONFIG, str(exc))

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["mode,t_sim,mean_fidelity,std_fidelity,total_comm"]
    print(f"{TABLE_HEADER[0]:<10} {TABLE_HEADER[1]:>14} {TABLE_HEADER[2]:>22} {TABLE_HEADER[3]:>12}")
    for n, (label, s, records) in enumerate(rows):
        print(f"{label:<10} {s.t_sim:>14.2f} {s.mean_fidelity:>12.5f} +- {s.std_fidelity:.5f} {s.total_comm:>12.2f}")
        lines.append(f"{label},{s.t_sim!r},{s.mean_fidelity!r},{s.std_fidelity!r},{s.total_comm!r}")
        name = label if [r[0] for r in rows].count(label) == 1 else f"{label}_{n}"
        M.write_histogram_csv(M.fidelity_histogram((r.fidelity for r in records), args.bin_width),
                              out / f"{name}_fidelity_hist.csv")
    (out / "comparison.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_make_fixtures(args) -> int:
    from .fixtures import case_study_profiles, single_best_device_profiles, write_manifest

    profiles = case_study_profiles() if args.set == "case-study" else single_best_device_profiles()
    path = write_manifest(profiles, args.output)
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcloudsim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one simulation per mode")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--output")
    s.add_argument("--modes", help="comma list, e.g. speed,fidelity,fair,rlbase")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("gen-jobs", help="write a synthetic job trace")
    g.add_argument("--spec", required=True)
    g.add_argument("--manifest", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_gen_jobs)

    t = sub.add_parser("train-rl", help="train the allocation policy")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--output")
    t.add_argument("--timesteps", type=int)
    t.set_defaults(func=cmd_train_rl)

    r = sub.add_parser("report", help="compare records files")
    r.add_argument("records", nargs="+")
    r.add_argument("--output", default="report")
    r.add_argument("--bin-width", type=float, default=0.005)
    r.set_defaults(func=cmd_report)

    f = sub.add_parser("make-fixtures", help="write synthetic device profiles and a manifest")
    f.add_argument("--set", choices=["case-study", "single-best"], default="case-study")
    f.add_argument("--output", required=True)
    f.set_defaults(func=cmd_make_fixtures)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
