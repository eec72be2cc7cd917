"""Monte Carlo driver: independent trials with derived seeds, per-trial records, summaries.

Seeding: trial ``i`` of master seed ``s`` gets
``SeedSequence([s, i]).generate_state(1, uint64)[0]``. That trial seed is
split with ``SeedSequence(trial_seed).spawn(2)`` into the measurement stream
(a Philox generator, never shown to the source) and the source's own seed.
Records depend only on (config, master seed, trial id), not on scheduling.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from ..bounds import (
    best_rank,
    norm_conversion,
    process_params,
    residual_mass,
    sample_size_process,
    sample_size_state_global,
    sample_size_state_local,
    state_params,
)
from ..designs import DesignKind, MeasurementDesign, make_design, verify_moment_identities, verify_two_design
from ..matcore import random_density, spectral_norm, trace_norm
from ..procpipe import make_channel_source, run_process_tomography
from ..sources import make_source
from ..statepipe import TomographyRun, run_state_tomography
from .config import ExperimentConfig


def trial_seed(master_seed: int, trial: int, *extra: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), *map(int, extra), int(trial)])
    return int(ss.generate_state(1, np.uint64)[0])


def trial_streams(seed: int) -> tuple[np.random.Generator, int]:
    meas, src = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.Philox(meas)), int(src.generate_state(1, np.uint64)[0])


@dataclass
class TrialRecord:
    trial: int
    seed: int
    rounds: int
    spectral_error: float
    trace_error: float
    pls_spectral_error: float
    conversion_bound: float
    sigma_r_avg: float
    sigma_r_pls: float
    best_rank: int
    threshold: float
    failure: bool
    premise_held: bool
    conversion_ok: bool
    min_eigenvalue: float
    marginal_residual: float
    projection_iterations: int
    diamond_bound: float | None = None
    wall_time: float = field(default=0.0, compare=False)


EXPORTED_FIELDS = tuple(f.name for f in fields(TrialRecord) if f.name != "wall_time")


def resolve_rounds(cfg: ExperimentConfig) -> int:
    if cfg.rounds is not None:
        return cfg.rounds
    design = make_design(cfg.family, cfg.size)
    local = design.kind is DesignKind.LOCAL
    if cfg.mode == "process":
        return sample_size_process(cfg.size, cfg.eps, cfg.delta, "local" if local else "global")
    if local:
        return sample_size_state_local(cfg.size, cfg.r, cfg.eps, cfg.delta)
    return sample_size_state_global(design.dim, cfg.r, cfg.eps, cfg.delta)


def _designs(cfg: ExperimentConfig) -> tuple[MeasurementDesign, MeasurementDesign]:
    inp = make_design(cfg.family, cfg.size)
    out_family = cfg.output_family or cfg.family
    out_size = cfg.output_size if cfg.output_size is not None else cfg.size
    return inp, make_design(out_family, out_size)


def simulate_trial(cfg: ExperimentConfig, trial: int, rounds: int, seed_path: Sequence[int] = ()) -> tuple[int, TomographyRun]:
    """The raw run behind one trial, with its derived seed."""
    seed = trial_seed(cfg.seed, trial, *seed_path)
    rng, source_seed = trial_streams(seed)
    design, out_design = _designs(cfg)
    params = dict(cfg.source_params)
    if cfg.mode == "process":
        params.setdefault("horizon", rounds)
        source = make_channel_source(
            cfg.strategy, design.dim, source_seed, num_outcomes=out_design.num_outcomes, **params
        )
        run = run_process_tomography(source, design, out_design, rounds, rng, choi_tol=cfg.choi_tol)
    else:
        source = make_source(cfg.strategy, design.dim, source_seed, design, **params)
        run = run_state_tomography(source, design, rounds, rng)
    return seed, run


def run_trial(cfg: ExperimentConfig, trial: int, rounds: int | None = None, seed_path: Sequence[int] = ()) -> TrialRecord:
    start = time.perf_counter()
    rounds = rounds or resolve_rounds(cfg)
    seed, run = simulate_trial(cfg, trial, rounds, seed_path)
    design = make_design(cfg.family, cfg.size)
    tau = cfg.tau if cfg.tau is not None else cfg.eps / (4 * cfg.r)

    rho_bar = run.rho_bar
    report = run.projection
    pls = report.matrix
    spectral = spectral_norm(run.linear.matrix - rho_bar)
    pls_spectral = spectral_norm(pls - rho_bar)
    trace_err = trace_norm(pls - rho_bar)
    r = cfg.r if cfg.mode == "state" else 1
    sig_avg = residual_mass(rho_bar, r)
    sig_pls = residual_mass(pls, r)
    conversion = norm_conversion(tau, r, rho_bar, pls)
    premise = spectral <= tau
    if cfg.mode == "process":
        d = design.dim
        diamond = d * d * pls_spectral
        threshold = cfg.eps
        failure = diamond > cfg.eps
        best = 0
    else:
        diamond = None
        threshold = cfg.eps + 2 * min(sig_avg, sig_pls)
        failure = trace_err > threshold
        best = best_rank(tau, rho_bar, pls)[0]
    return TrialRecord(
        trial=trial,
        seed=seed,
        rounds=rounds,
        spectral_error=spectral,
        trace_error=trace_err,
        pls_spectral_error=pls_spectral,
        conversion_bound=conversion,
        sigma_r_avg=sig_avg,
        sigma_r_pls=sig_pls,
        best_rank=best,
        threshold=threshold,
        failure=bool(failure),
        premise_held=bool(premise),
        conversion_ok=bool(not premise or trace_err <= conversion + 1e-12),
        min_eigenvalue=report.min_eigenvalue,
        marginal_residual=report.marginal_residual,
        projection_iterations=report.iterations,
        diamond_bound=diamond,
        wall_time=time.perf_counter() - start,
    )


def _run_trial_star(args):
    return run_trial(*args)


def run_trials(cfg: ExperimentConfig, trial_ids: Sequence[int], rounds: int, seed_path: Sequence[int] = ()) -> list[TrialRecord]:
    jobs = [(cfg, i, rounds, tuple(seed_path)) for i in trial_ids]
    if cfg.workers <= 1 or len(jobs) <= 1:
        records = [_run_trial_star(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_run_trial_star, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
    return sorted(records, key=lambda rec: rec.trial)


def binomial_slack(delta: float, trials: int) -> float:
    """Allowed failure fraction ``delta + 3 sqrt(delta (1 - delta) / T)``."""
    return delta + 3 * math.sqrt(delta * (1 - delta) / trials)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rounds: int
    records: list[TrialRecord]
    summary: dict

    @property
    def failure_fraction(self) -> float:
        return self.summary["failure_fraction"]

    @property
    def passed(self) -> bool:
        return self.summary["pass"]


def _quantiles(values: Sequence[float]) -> dict[str, float]:
    arr = np.asarray(values, dtype=float)
    return {"median": float(np.median(arr)), "q90": float(np.quantile(arr, 0.9)), "max": float(arr.max())}


def summarize(cfg: ExperimentConfig, rounds: int, records: Sequence[TrialRecord]) -> dict:
    t = len(records)
    failures = sum(rec.failure for rec in records)
    frac = failures / t
    allowed = binomial_slack(cfg.delta, t)
    summary: dict = {"config." + k: v for k, v in cfg.flat().items()}
    summary.update(
        {
            "rounds": rounds,
            "trials": t,
            "failures": failures,
            "failure_fraction": frac,
            "delta": cfg.delta,
            "allowed_fraction": allowed,
            "conversion_violations": sum(not rec.conversion_ok for rec in records),
            "premise_held": sum(rec.premise_held for rec in records),
            "max_min_eig_violation": max(max(0.0, -rec.min_eigenvalue) for rec in records),
            "max_marginal_residual": max(rec.marginal_residual for rec in records),
        }
    )
    for name in ("spectral_error", "trace_error", "pls_spectral_error"):
        for q, v in _quantiles([getattr(rec, name) for rec in records]).items():
            summary[f"{name}.{q}"] = v
    if cfg.mode == "process":
        for q, v in _quantiles([rec.diamond_bound for rec in records]).items():
            summary[f"diamond_bound.{q}"] = v
    summary["pass"] = frac <= allowed and summary["conversion_violations"] == 0
    return summary


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """``cfg.trials`` independent trials of the configured state or process protocol."""
    if cfg.mode not in ("state", "process"):
        raise ValueError(f"run_experiment handles state/process modes, not {cfg.mode!r}")
    rounds = resolve_rounds(cfg)
    records = run_trials(cfg, range(cfg.trials), rounds)
    return ExperimentResult(cfg, rounds, records, summarize(cfg, rounds, records))


@dataclass
class SweepResult:
    rounds: list[int]
    medians: list[float]
    slope: float
    intercept: float
    records: dict[int, list[TrialRecord]] = field(repr=False, default_factory=dict)

    def ratios(self) -> list[float]:
        return [b / a for a, b in zip(self.medians, self.medians[1:])]

    def rows(self) -> list[dict]:
        return [{"N": n, "median_spectral_error": m} for n, m in zip(self.rounds, self.medians)]


def scaling_sweep(cfg: ExperimentConfig, n_list: Sequence[int]) -> SweepResult:
    """Median ``||L_N - rho_bar||`` over ``cfg.trials`` trials per ``N`` and its log-log slope."""
    n_list = [int(n) for n in n_list]
    if n_list != sorted(n_list) or len(set(n_list)) != len(n_list):
        raise ValueError("N list must be strictly ascending")
    medians, recs = [], {}
    for n in n_list:
        records = run_trials(cfg, range(cfg.trials), n, seed_path=(n,))
        recs[n] = records
        medians.append(float(np.median([rec.spectral_error for rec in records])))
    slope, intercept = np.polyfit(np.log(n_list), np.log(medians), 1)
    return SweepResult(n_list, medians, float(slope), float(intercept), recs)


def record_as_dict(rec: TrialRecord) -> dict:
    d = asdict(rec)
    d.pop("wall_time")
    return d


SHIPPED_DESIGNS = (("mub", 2), ("mub", 3), ("mub", 5), ("sic", 2), ("pauli", 1), ("pauli", 2))


@dataclass
class DesignCheck:
    family: str
    size: int
    two_design: float
    mean_deviation: float
    second_moment_deviation: float
    passed: bool


def verify_designs(trials: int = 100, tol: float = 1e-9, moment_tol: float = 1e-10, seed: int = 0, states: int = 5) -> list[DesignCheck]:
    """2-design identity plus exact moment identities on random states, for every shipped design."""
    rows = []
    for family, size in SHIPPED_DESIGNS:
        design = make_design(family, size)
        report = verify_two_design(design, trials=trials, tol=tol, seed=seed)
        mean_dev = second_dev = 0.0
        for i in range(states):
            rho = random_density(design.dim, np.random.default_rng([seed, size, i]))
            m = verify_moment_identities(design, rho)
            mean_dev = max(mean_dev, m.mean_deviation)
            second_dev = max(second_dev, m.second_moment_deviation)
        ok = report.passed and max(mean_dev, second_dev) <= moment_tol
        rows.append(DesignCheck(family, size, report.max_deviation, mean_dev, second_dev, ok))
    return rows


def bound_report(cfg: ExperimentConfig) -> dict:
    """Sample size for the configured accuracy and the Freedman tail at that size."""
    design = make_design(cfg.family, cfg.size)
    kind = "local" if design.kind is DesignKind.LOCAL else "global"
    n = resolve_rounds(replace(cfg, rounds=None))
    if cfg.mode == "process":
        params = process_params(kind, cfg.size, cfg.eps, cfg.delta)
    else:
        params = state_params(kind, cfg.size, cfg.r, cfg.eps, cfg.delta, cfg.tau)
    return {
        "family": cfg.family,
        "size": cfg.size,
        "dim": design.dim,
        "kind": kind,
        "target": "process" if cfg.mode == "process" else "state",
        "r": cfg.r,
        "eps": cfg.eps,
        "delta": cfg.delta,
        "N": n,
        "tau": params.tau,
        "freedman_tail": params.tail(n),
        "freedman_tail_N_minus_1": params.tail(n - 1) if n > 1 else 1.0,
    }
