"""Acceptance criteria 1-10, each at its stated tolerance.

A one-line PASS/FAIL summary per criterion is printed at the end of the run.
"""
import time

import numpy as np
import pytest

from acceptance_log import record
from oracles import choi_projection_oracle, state_projection_oracle
from plstomo.bounds import (
    freedman_tail,
    process_params,
    sample_size_process,
    sample_size_state_global,
    sample_size_state_local,
    state_params,
)
from plstomo.designs import corrupt, make_design, verify_moment_identities, verify_two_design
from plstomo.harness.config import ExperimentConfig
from plstomo.harness.experiment import binomial_slack, run_experiment, scaling_sweep
from plstomo.harness.export import records_csv
from plstomo.matcore import random_density, random_hermitian
from plstomo.procpipe import random_kraus_channel
from plstomo.projection import choi_residuals, project_to_choi, project_to_states

DESIGNS = [("mub", 2), ("mub", 3), ("mub", 5), ("sic", 2), ("pauli", 1), ("pauli", 2)]
MASTER_SEED = 20240601


def _states(dim, count, seed):
    rng = np.random.default_rng(seed)
    # mix of full-rank, low-rank and pure states
    return [random_density(dim, rng, rank=[None, 1, max(1, dim // 2)][i % 3]) for i in range(count)]


def test_c1_exact_unbiasedness():
    start = time.perf_counter()
    worst = 0.0
    for i, (family, size) in enumerate(DESIGNS):
        design = make_design(family, size)
        for rho in _states(design.dim, 50, [1, i]):
            worst = max(worst, verify_moment_identities(design, rho).mean_deviation)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 10
    record(1, ok, f"max |E[rho_hat] - rho| = {worst:.2e} (tol 1e-10), {elapsed:.1f}s")
    assert worst <= 1e-10
    assert elapsed < 10


def test_c2_variance_identities():
    start = time.perf_counter()
    worst_global = worst_local = 0.0
    for i, (family, size) in enumerate(DESIGNS):
        design = make_design(family, size)
        for rho in _states(design.dim, 50, [2, i]):
            dev = verify_moment_identities(design, rho).second_moment_deviation
            if design.kind.value == "global":
                worst_global = max(worst_global, dev)
            else:
                worst_local = max(worst_local, dev)
    # entangled two-qubit states for the local identity
    design = make_design("pauli", 2)
    rng = np.random.default_rng(3)
    bell = np.zeros((4, 4), dtype=complex)
    bell[np.ix_([0, 3], [0, 3])] = 0.5
    entangled = [bell] + [random_density(4, rng, rank=1) for _ in range(20)]
    for rho in entangled:
        worst_local = max(worst_local, verify_moment_identities(design, rho).second_moment_deviation)
    elapsed = time.perf_counter() - start
    ok = max(worst_global, worst_local) <= 1e-10 and elapsed < 10
    record(2, ok, f"global dev {worst_global:.2e}, local dev {worst_local:.2e} (tol 1e-10), {elapsed:.1f}s")
    assert worst_global <= 1e-10 and worst_local <= 1e-10
    assert elapsed < 10


def test_c3_two_design_verification():
    start = time.perf_counter()
    reports = {f"{f}-{s}": verify_two_design(make_design(f, s), trials=100, tol=1e-9) for f, s in DESIGNS}
    mutated = verify_two_design(corrupt(make_design("mub", 3)), trials=100, tol=1e-9)
    elapsed = time.perf_counter() - start
    worst = max(r.max_deviation for r in reports.values())
    ok = all(r.passed for r in reports.values()) and not mutated.passed and elapsed < 5
    record(3, ok, f"shipped max dev {worst:.2e}; mutated dev {mutated.max_deviation:.2e} -> fail; {elapsed:.1f}s")
    assert all(r.passed for r in reports.values()), reports
    assert not mutated.passed
    assert elapsed < 5


def test_c4_projection_oracles():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    state_gap = state_res = 0.0
    for _ in range(100):
        l = random_hermitian(3, rng)
        rep = project_to_states(l)
        state_gap = max(state_gap, np.linalg.norm(rep.matrix - state_projection_oracle(l)))
        state_res = max(state_res, -min(np.linalg.eigvalsh(rep.matrix).min(), 0), abs(np.trace(rep.matrix) - 1))
    choi_gap = choi_res = 0.0
    for i in range(50):
        if i % 2:
            l = random_hermitian(4, rng)
        else:
            l = random_kraus_channel(2, rng).choi + 0.3 * random_hermitian(4, rng)
        out = project_to_choi(l, 2).matrix
        choi_gap = max(choi_gap, np.linalg.norm(out - choi_projection_oracle(l, 2)))
        lam_min, marginal = choi_residuals(out, 2)
        choi_res = max(choi_res, -min(lam_min, 0.0), marginal)
    elapsed = time.perf_counter() - start
    ok = state_gap <= 1e-6 and choi_gap <= 1e-6 and max(state_res, choi_res) <= 1e-8 and elapsed < 60
    record(
        4,
        ok,
        f"state gap {state_gap:.1e}, Choi gap {choi_gap:.1e} (tol 1e-6); residuals {max(state_res, choi_res):.1e}; {elapsed:.1f}s",
    )
    assert state_gap <= 1e-6 and choi_gap <= 1e-6
    assert max(state_res, choi_res) <= 1e-8
    assert elapsed < 60


def _state_cfg(strategy, workers=1, **params):
    return ExperimentConfig(
        mode="state", family="mub", size=2, strategy=strategy, source_params=params,
        rounds=None, r=1, eps=0.2, delta=0.05, trials=200, seed=MASTER_SEED, workers=workers,
    )


@pytest.fixture(scope="module")
def iid_run():
    start = time.perf_counter()
    res = run_experiment(_state_cfg("iid", state="random_pure"))
    return res, time.perf_counter() - start


def test_c5_iid_coverage(iid_run):
    res, elapsed = iid_run
    assert res.rounds == sample_size_state_global(2, 1, 0.2, 0.05)
    frac = np.mean([rec.trace_error > 0.2 for rec in res.records])
    worst = max(rec.trace_error for rec in res.records)
    ok = frac <= 0.05 and elapsed < 300
    record(5, ok, f"N={res.rounds}, T=200: failure fraction {frac:.3f} (<= 0.05), max trace err {worst:.3f}; {elapsed:.0f}s")
    assert frac <= 0.05
    assert res.summary["conversion_violations"] == 0
    assert elapsed < 300


def test_c6_non_iid_coverage():
    start = time.perf_counter()
    allowed = binomial_slack(0.05, 200)
    details, fracs = [], []
    for strategy, params in (("drift", {"omega": 2 * np.pi / 1000}), ("feedback", {"window": 10, "strength": 0.5})):
        res = run_experiment(_state_cfg(strategy, **params))
        fracs.append(res.failure_fraction)
        assert res.summary["conversion_violations"] == 0
        details.append(f"{strategy} {res.failure_fraction:.3f}")
    elapsed = time.perf_counter() - start
    ok = max(fracs) <= allowed and elapsed < 300
    record(6, ok, f"failure fractions {', '.join(details)} (<= {allowed:.3f}); {elapsed:.0f}s")
    assert max(fracs) <= allowed
    assert elapsed < 300


@pytest.fixture(scope="module")
def sweeps():
    start = time.perf_counter()
    n_list = [1000, 3000, 10000, 30000, 100000]
    out = {}
    for strategy, params in (("iid", {"state": "random_pure"}), ("drift", {"omega": 2 * np.pi / 1000})):
        cfg = ExperimentConfig(
            mode="state", family="mub", size=2, strategy=strategy, source_params=params,
            trials=25, seed=MASTER_SEED + 7,
        )
        out[strategy] = scaling_sweep(cfg, n_list)
    return out, time.perf_counter() - start


def test_c7_scaling_law(sweeps):
    results, elapsed = sweeps
    slopes = {k: v.slope for k, v in results.items()}
    ok = all(-0.6 <= s <= -0.4 for s in slopes.values()) and elapsed < 300
    record(7, ok, f"log-log slopes iid {slopes['iid']:.3f}, drift {slopes['drift']:.3f} (in [-0.6, -0.4]); {elapsed:.0f}s")
    assert all(-0.6 <= s <= -0.4 for s in slopes.values()), slopes
    assert elapsed < 300


def test_sweep_iid_and_drift_share_slope(sweeps):
    results, _ = sweeps
    assert abs(results["iid"].slope - results["drift"].slope) <= 0.1


def _process_cfg(workers=1):
    return ExperimentConfig(
        mode="process", family="mub", size=2, strategy="drift_depolarizing",
        source_params={"p_start": 0.1, "p_end": 0.5}, rounds=None, eps=0.5, delta=0.05,
        trials=50, seed=MASTER_SEED + 8, workers=workers,
    )


@pytest.fixture(scope="module")
def process_run():
    start = time.perf_counter()
    res = run_experiment(_process_cfg())
    return res, time.perf_counter() - start


def test_c8_process_coverage(process_run):
    res, elapsed = process_run
    assert res.rounds == sample_size_process(2, 0.5, 0.05)
    frac = np.mean([rec.diamond_bound > 0.5 for rec in res.records])
    residual = max(max(-min(rec.min_eigenvalue, 0.0), rec.marginal_residual) for rec in res.records)
    worst = max(rec.diamond_bound for rec in res.records)
    ok = frac <= 0.05 and residual <= 1e-8 and elapsed < 600
    record(8, ok, f"N={res.rounds}, T=50: failure fraction {frac:.3f}, max d^2||.|| {worst:.3f} (eps 0.5), residual {residual:.1e}; {elapsed:.0f}s")
    assert frac <= 0.05
    assert residual <= 1e-8
    assert elapsed < 600


def test_c9_bound_self_consistency():
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    worst_ratio = 0.0
    for _ in range(20):
        d = int(rng.choice([2, 3, 4, 5, 8, 16]))
        r = int(rng.integers(1, d + 1))
        eps = float(rng.uniform(0.01, 1.0))
        delta = float(rng.uniform(0.001, 0.3))
        n = sample_size_state_global(d, r, eps, delta)
        tau = eps / (4 * r)
        tail = freedman_tail(n * tau, 2 * d * n, d, d)
        worst_ratio = max(worst_ratio, tail / delta)
        assert tail <= delta
        nq = int(rng.integers(1, 4))
        n_loc = sample_size_state_local(nq, 1, eps, delta)
        assert state_params("local", nq, 1, eps, delta).tail(n_loc) <= delta
        for kind, size in (("global", 2), ("global", 4), ("local", nq)):
            n_proc = sample_size_process(size, eps, delta, kind)
            assert process_params(kind, size, eps, delta).tail(n_proc) <= delta
    elapsed = time.perf_counter() - start
    ok = worst_ratio <= 1 and elapsed < 1
    record(9, ok, f"max tail/delta {worst_ratio:.8f} over 20 tuples (state global/local, process global/local); {elapsed:.2f}s")
    assert elapsed < 1


def test_c10_determinism(iid_run, process_run):
    rerun_state = run_experiment(_state_cfg("iid", workers=2, state="random_pure"))
    rerun_process = run_experiment(_process_cfg(workers=2))
    same_state = records_csv(rerun_state.records) == records_csv(iid_run[0].records)
    same_process = records_csv(rerun_process.records) == records_csv(process_run[0].records)
    ok = same_state and same_process
    record(10, ok, f"criterion 5 and 8 reruns with 2 workers: CSV bytes identical = {same_state}, {same_process}")
    assert same_state and same_process
