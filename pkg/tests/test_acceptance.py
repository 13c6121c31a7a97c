"""Acceptance gate: one test per criterion, each reporting PASS/FAIL in the terminal summary."""

import csv
import itertools
import json
import math
from decimal import Decimal, getcontext
from fractions import Fraction

import numpy as np
import pytest

import qcloudsim.devices as devices_mod
from qcloudsim.cli import main
from qcloudsim.config import load_manifest
from qcloudsim.devices import CalibrationData, ErrorScoreWeights, build_devices, error_score
from qcloudsim.metrics import (
    MetricsConfig, comm_time, device_fidelity, execution_time, fidelity_1q, fidelity_2q,
    fidelity_readout, final_fidelity, summarize, write_records_csv,
)
from qcloudsim.rl import (
    JobSampler, Policy, RlAllocator, RlConfig, TrainingConfig, act_deterministic, build_state,
    env_step, ppo_loss_and_grad, train_ppo,
)
from qcloudsim.rl.ppo import PPOBatch, collect_batch
from qcloudsim.scheduler import partition_from_fractions, plan_job, run_simulation
from qcloudsim.sim import CapacityStore, Environment
from qcloudsim.workload import QJob, WorkloadSpec, generate_jobs

from conftest import ACCEPTANCE_RESULTS, CASE_STUDY_MANIFEST, SINGLE_BEST_MANIFEST, make_profile


def record(n, ok, detail):
    ACCEPTANCE_RESULTS[n] = (bool(ok), detail)
    assert ok, f"criterion {n}: {detail}"


def rel_err(got, want):
    return abs(got - want) / abs(want) if want else abs(got)


@pytest.fixture(scope="module")
def cloud():
    return load_manifest(CASE_STUDY_MANIFEST)


@pytest.fixture(scope="module")
def jobs200(cloud):
    return generate_jobs(WorkloadSpec(count=200, seed=2025), cloud.capacities)


@pytest.fixture(scope="module")
def runs200(cloud, jobs200):
    return {m: run_simulation(cloud.profiles, jobs200, m, cloud.metrics, cloud.weights)
            for m in ("speed", "fidelity", "fair")}


def test_criterion_1_worked_example():
    t = execution_time(MetricsConfig(m_templates=100, k_updates=10), 40_000, 128, 220_000)
    oracle = 100 * 10 * 40_000 * 7 / 220_000
    ok = abs(t - 1272.7) <= 1.0 and t == pytest.approx(oracle, rel=1e-15)
    record(1, ok, f"execution_time = {t:.4f} s ({t / 60:.2f} min), target 1272.7 +- 1 s")


def test_criterion_2_formula_suite():
    getcontext().prec = 50
    f = Fraction
    checks = []

    cal = CalibrationData((0.02, 0.04), 0.001, (0.01, 0.02))
    checks.append(("error_score", error_score(cal, ErrorScoreWeights()),
                   f(1, 2) * f(3, 100) + f(3, 10) * f(1, 1000) + f(1, 5) * f(15, 1000)))
    d127 = Decimal(127).ln() / Decimal(2).ln()
    checks.append(("execution_time qv=127", execution_time(MetricsConfig(), 40_000, 127, 30_000),
                   Decimal(100 * 10 * 40_000) * d127 / Decimal(30_000)))
    t_fast = execution_time(MetricsConfig(), 5000, 127, 220_000)
    t_slow = execution_time(MetricsConfig(), 5000, 127, 30_000)
    checks.append(("sub-job ratio", t_slow / t_fast, f(22, 3)))
    f1 = f(999, 1000) ** 10
    f2 = f(99, 100) ** 10
    fro = f(98, 100) ** 5
    checks.append(("fidelity_1q", fidelity_1q(0.001, 10), f1))
    checks.append(("fidelity_2q sqrt", fidelity_2q(0.01, 100), f2))
    checks.append(("fidelity_2q fourth_root", fidelity_2q(0.01, 16, "fourth_root"), f(9801, 10000)))
    checks.append(("fidelity_readout", fidelity_readout(0.02, 100, 4), fro))
    dev = build_devices(Environment(), [make_profile("d", capacity=4, readout=0.02, e1=0.001, e2=0.01)])[0]
    checks.append(("device_fidelity", device_fidelity(dev, 10, 100, 4, 100), f1 * f2 * fro))
    checks.append(("final_fidelity", final_fidelity([0.8] * 3, 3, 0.95), f(722, 1000)))
    checks.append(("comm_time k=2", comm_time(150, 2, 0.02), f(3)))
    checks.append(("comm_time k=3", comm_time(190, 3, 0.02), f(76, 10)))

    failures = [(name, got, float(want)) for name, got, want in checks
                if rel_err(got, float(want)) > 1e-12]
    worst = max(rel_err(got, float(want)) for _, got, want in checks)
    record(2, not failures, f"{len(checks)} formula checks, worst relative error {worst:.1e}"
           + (f"; failing {failures}" if failures else ""))


def test_criterion_3_policy_ordering(runs200):
    s = {m: summarize(r.records, m) for m, r in runs200.items()}
    a = s["fidelity"].mean_fidelity > s["fair"].mean_fidelity and \
        s["fidelity"].mean_fidelity > s["speed"].mean_fidelity
    b = s["fidelity"].t_sim >= s["speed"].t_sim
    c = s["fidelity"].total_comm <= s["speed"].total_comm
    detail = "; ".join(f"{m}: T={x.t_sim:.0f} muF={x.mean_fidelity:.4f} comm={x.total_comm:.1f}"
                       for m, x in s.items())
    record(3, a and b and c, f"(a)={a} (b)={b} (c)={c} | {detail}")


def test_criterion_4_comm_identity(runs200, jobs200):
    q = {j.job_id: j.num_qubits for j in jobs200}
    lam = MetricsConfig().lambda_per_qubit
    bad = []
    for mode, res in runs200.items():
        reported = summarize(res.records).total_comm
        oracle = math.fsum((r.k - 1) * lam * q[r.job_id] for r in res.records)
        if abs(reported - oracle) > 4 * np.finfo(float).eps * max(oracle, 1.0):
            bad.append((mode, reported, oracle))
        split_ok = all(r.k == len(r.devices_used) and sum(a for _, a in r.devices_used) == q[r.job_id]
                       for r in res.records)
        if not split_ok:
            bad.append((mode, "plan/k mismatch"))
    record(4, not bad, "T_comm equals sum (k-1)*lambda*q in every mode" if not bad else str(bad))


def test_criterion_5_allocation_feasibility():
    rng = np.random.default_rng(5)
    policies = []
    for seed in range(4):
        cfg = RlConfig(seed=seed)
        pol = Policy.init(cfg.state_dim, 5, [64, 64], np.random.default_rng(seed))
        pol.actor.weights[-1] *= 100  # spread the action outputs so clamping and repair get exercised
        policies.append(RlAllocator(pol, cfg))
    modes = ["speed", "fidelity", "fair", "rlbase"]
    violations, n_triples, n_repairs = [], 0, 0
    for t in range(10_000):
        n = int(rng.integers(1, 6))
        env = Environment()
        profs = [make_profile(f"d{i}", capacity=int(rng.integers(1, 130)),
                              clops=float(rng.integers(1_000, 250_000)),
                              readout=float(rng.uniform(0, 0.1)), e1=float(rng.uniform(0, 0.01)),
                              e2=float(rng.uniform(0, 0.05))) for i in range(n)]
        devs = build_devices(env, profs)
        for d in devs:  # random background load for the fair policy
            held = int(rng.integers(0, d.capacity))
            if held:
                d.store.acquire(held)
        caps = [d.capacity for d in devs]
        q = int(rng.integers(1, sum(caps) + 1))
        job = QJob(f"j{t}", q, 5, 100, q)
        mode = modes[t % 4]
        plan = plan_job(mode, devs, job, policies[t % len(policies)])
        n_triples += 1
        if sum(plan.split) != q or any(a > d.capacity or a < 1 for d, a in plan.assignments) \
                or len({id(d) for d in plan.devices}) != plan.k:
            violations.append((t, mode, caps, q, plan.split))
        raw = rng.normal(size=n) * rng.choice([0.01, 1.0, 100.0])
        raw[int(rng.integers(n))] = abs(raw[0]) + 1e-3  # positive sum
        fp = partition_from_fractions(q, devs, raw)
        n_repairs += 1
        if sum(fp.split) != q or any(a > d.capacity for d, a in fp.assignments):
            violations.append((t, "fractions", caps, q, fp.split))
    record(5, not violations,
           f"{n_triples} policy triples + {n_repairs} fraction repairs, {len(violations)} violations"
           + (f"; first {violations[:3]}" if violations else ""))


class LoggingStore(CapacityStore):
    log = []

    def acquire(self, amount):
        ev = super().acquire(amount)
        LoggingStore.log.append(("req", id(self), id(ev), self.env.now))
        ev.callbacks.append(lambda e, s=id(self): LoggingStore.log.append(("grant", s, id(e), e.env.now)))
        return ev

    def _grant(self, amount, ev):
        super()._grant(amount, ev)
        if not 0 <= self.level <= self.capacity or self.level + self.outstanding != self.capacity:
            LoggingStore.log.append(("violation", id(self), self.level, self.outstanding))

    def release(self, amount):
        super().release(amount)
        if not 0 <= self.level <= self.capacity or self.level + self.outstanding != self.capacity:
            LoggingStore.log.append(("violation", id(self), self.level, self.outstanding))


def test_criterion_6_kernel_properties(cloud, jobs200, tmp_path, monkeypatch):
    # FIFO tie-break for same-time events
    env = Environment()
    fired = []
    for i in range(50):
        env.schedule(1.0, lambda i=i: fired.append(i))
    env.run()
    tie_ok = fired == list(range(50))

    monkeypatch.setattr(devices_mod, "CapacityStore", LoggingStore)
    LoggingStore.log = []
    res = run_simulation(cloud.profiles, jobs200, "speed", cloud.metrics, cloud.weights)
    log = LoggingStore.log
    conservation_ok = not any(e[0] == "violation" for e in log) and \
        all(d.store.level == d.capacity and d.store.outstanding == 0 for d in res.devices)
    fifo_ok = True
    for store in {e[1] for e in log}:
        reqs = [e[2] for e in log if e[0] == "req" and e[1] == store]
        grants = [e[2] for e in log if e[0] == "grant" and e[1] == store]
        fifo_ok &= reqs == grants
    # independent sweep: qubits in use never exceed capacity on any device
    events = []
    for r in res.records:
        for name, a in r.devices_used:
            events += [(r.start, 1, name, a), (r.finish, 0, name, -a)]
    in_use = dict.fromkeys((d.name for d in res.devices), 0)
    for _, _, name, delta in sorted(events):
        in_use[name] += delta
        conservation_ok &= 0 <= in_use[name] <= 127
    monkeypatch.undo()

    paths = []
    for n in range(2):
        r = run_simulation(cloud.profiles, jobs200, "speed", cloud.metrics, cloud.weights)
        p = tmp_path / f"records{n}.csv"
        write_records_csv(r.records, p)
        paths.append(p)
    det_ok = paths[0].read_bytes() == paths[1].read_bytes()
    record(6, tie_ok and fifo_ok and conservation_ok and det_ok,
           f"tie-break={tie_ok} store FIFO={fifo_ok} conservation={conservation_ok} "
           f"byte-identical records={det_ok}")


def _simplex_grid(n, steps):
    for combo in itertools.combinations_with_replacement(range(n), steps):
        w = np.zeros(n)
        for i in combo:
            w[i] += 1.0 / steps
        yield w


def test_criterion_7_rl_learning_progress():
    sb = load_manifest(SINGLE_BEST_MANIFEST)
    devs = build_devices(Environment(), sb.profiles, sb.weights)
    best = min(range(len(devs)), key=lambda i: devs[i].error_score)
    cfg = RlConfig(seed=0, training=TrainingConfig(timesteps=20_000))
    sampler = JobSampler(devs, qubit_range=(10, 127))
    policy, rows = train_ppo(sampler, cfg, sb.metrics)

    held_rng = np.random.Generator(np.random.PCG64(12345))
    grid = [w for w in _simplex_grid(len(devs), 10)]
    hits = oracle_agree = 0
    for _ in range(100):
        job, _ = sampler(held_rng)
        target = min(job.num_qubits, devs[best].capacity)
        # exhaustive search over the discretized simplex on the same job
        scored = [(env_step(job, devs, w, cfg, sb.metrics)[0], w) for w in grid]
        top = max(r for r, _ in scored)
        w_best = next(w for r, w in scored if r == top)
        o_plan = partition_from_fractions(job.num_qubits, devs, w_best)
        oracle_agree += dict((d.name, a) for d, a in o_plan.assignments).get(devs[best].name) == target
        raw = act_deterministic(policy, build_state(job, devs, cfg))
        plan = partition_from_fractions(job.num_qubits, devs, raw, cfg.epsilon)
        hits += dict((d.name, a) for d, a in plan.assignments).get(devs[best].name) == target

    rewards = [r["mean_reward"] for r in rows]
    n = max(1, len(rewards) // 10)
    first, last = float(np.mean(rewards[:n])), float(np.mean(rewards[-n:]))
    ok = hits >= 80 and oracle_agree == 100 and last >= first
    record(7, ok, f"{hits}/100 held-out jobs give the best device its feasible maximum "
                  f"(oracle agrees on {oracle_agree}/100); decile reward {first:.4f} -> {last:.4f}")


def test_criterion_8_gradient_check(cloud):
    devs = build_devices(Environment(), cloud.profiles, cloud.weights)
    cfg = RlConfig(seed=3)
    rng = np.random.default_rng(3)
    policy = Policy.init(cfg.state_dim, cfg.num_device_slots, [64, 64], rng)
    policy.log_std[:] = rng.normal(0, 0.3, size=5)
    states, actions, logp, rewards = collect_batch(policy, JobSampler(devs), 8, cfg, cloud.metrics, rng)
    adv = rng.normal(size=8)
    # shift stored log-probs so both clipped and unclipped branches appear, well away from the kinks
    shift = np.array([0.0, 0.05, -0.05, 0.6, -0.6, 0.0, 0.9, -0.9])
    batch = PPOBatch(states, actions, logp + shift, adv, rewards)

    _, grads, parts = ppo_loss_and_grad(policy, batch, 0.2, 0.01, 0.5)
    h = 1e-5
    worst = 0.0
    for param, g in zip(policy.params(), grads):
        fd = np.zeros_like(param)
        it = np.nditer(param, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = param[idx]
            param[idx] = orig + h
            lp = ppo_loss_and_grad(policy, batch, 0.2, 0.01, 0.5, need_grad=False)[0]
            param[idx] = orig - h
            lm = ppo_loss_and_grad(policy, batch, 0.2, 0.01, 0.5, need_grad=False)[0]
            param[idx] = orig
            fd[idx] = (lp - lm) / (2 * h)
        denom = max(np.linalg.norm(fd), np.linalg.norm(g), 1e-12)
        err = np.linalg.norm(fd - g) / denom
        worst = max(worst, err)
    record(8, worst <= 1e-4 and 0 < parts["clip_fraction"] < 1,
           f"{len(grads)} tensors, worst relative error {worst:.2e} (clip fraction {parts['clip_fraction']:.2f})")


def test_criterion_9_gen_jobs_window(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"count": 1000, "qubit_range": [130, 250], "seed": 2025}))
    out = tmp_path / "jobs.csv"
    rc_ok = main(["gen-jobs", "--spec", str(spec), "--manifest", str(CASE_STUDY_MANIFEST),
                  "--out", str(out)])
    rows = list(csv.DictReader(open(out))) if out.exists() else []
    inside = all(127 < int(r["num_qubits"]) < 635 for r in rows)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"count": 10, "qubit_range": [50, 100]}))
    rc_bad = main(["gen-jobs", "--spec", str(bad), "--manifest", str(CASE_STUDY_MANIFEST),
                   "--out", str(tmp_path / "bad.csv")])
    record(9, rc_ok == 0 and len(rows) == 1000 and inside and rc_bad == 2,
           f"exit {rc_ok}, {len(rows)} jobs, all in (127, 635): {inside}; infeasible range exit {rc_bad}")
