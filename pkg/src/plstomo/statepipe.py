"""Measurement loop for state tomography: Born sampling, histograms, linear estimator."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .designs import DesignKind, MeasurementDesign, Outcome, single_shot_estimate
from .matcore import InvalidStateError, as_density, spectral_norm, tensor, trace_norm
from .projection import ProjectionReport, project_to_choi, project_to_states
from .sources import AdaptiveSource, History, TrajectoryAverage

PROB_TOL = 1e-9


class BornSampler:
    """Draws outcomes of ``design`` on a state from pre-drawn uniforms.

    Global designs use one uniform per draw. Local designs use one uniform per
    qubit and sample qubit by qubit from conditional marginals, which is exact
    for entangled states without listing all ``m**n`` probabilities.
    """

    def __init__(self, design: MeasurementDesign):
        self.design = design
        self.kind = design.kind
        kets = design.kets
        self.m = kets.shape[0]
        if self.kind is DesignKind.GLOBAL:
            d = design.dim
            self._amp = np.einsum("ki,kj->kij", kets.conj(), kets).reshape(self.m, d * d)
            self._weight = design.povm_weight
        else:
            self.n = design.n_qubits
            self._amp = np.einsum("ki,kj->kij", kets.conj(), kets).reshape(self.m, 4)
            self._kets = kets
            self._weight = 2.0 / self.m

    def _draw(self, probs: np.ndarray, u: float) -> int:
        if probs.min() < -PROB_TOL:
            raise InvalidStateError(f"negative outcome probability {probs.min():.3e}")
        np.maximum(probs, 0.0, out=probs)
        c = np.cumsum(probs)
        total = c[-1]
        if abs(total - 1.0) > PROB_TOL:
            raise InvalidStateError(f"outcome probabilities sum to {total!r}")
        k = int(np.searchsorted(c, u * total, side="right"))
        return min(k, probs.size - 1)

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        """Exact probabilities (global designs only)."""
        return self._weight * (self._amp @ rho.reshape(-1)).real

    def sample(self, rho: np.ndarray, u) -> Outcome:
        if self.kind is DesignKind.GLOBAL:
            return self._draw(self._weight * (self._amp @ rho.reshape(-1)).real, u)
        out = []
        cur = rho
        rest = rho.shape[0]
        for j in range(self.n):
            rest //= 2
            t = cur.reshape(2, rest, 2, rest)
            reduced = np.einsum("aibi->ab", t)
            norm = reduced[0, 0].real + reduced[1, 1].real
            probs = self._weight * (self._amp @ reduced.reshape(-1)).real / norm
            k = self._draw(probs, u[j])
            out.append(k)
            if rest > 1:
                psi = self._kets[k]
                cur = np.einsum("a,aibj,b->ij", psi.conj(), t, psi)
        return tuple(out)

    def uniforms(self, rng: np.random.Generator, rounds: int) -> np.ndarray:
        if self.kind is DesignKind.GLOBAL:
            return rng.random(rounds)
        return rng.random((rounds, self.n))


def born_sample(design: MeasurementDesign, rho, rng: np.random.Generator) -> Outcome:
    """One outcome with probability ``(d/M) tr(P_k rho)``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (design.dim, design.dim):
        raise ValueError(f"state shape {rho.shape} does not match design dimension {design.dim}")
    sampler = BornSampler(design)
    return sampler.sample(rho, sampler.uniforms(rng, 1)[0])


@dataclass
class OutcomeHistogram:
    """Outcome counts. Local designs keep the per-round multi-indices as well."""

    design: MeasurementDesign = field(repr=False)
    counts: np.ndarray
    total: int
    sequence: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_outcomes(cls, design: MeasurementDesign, outcomes: Sequence[Outcome]) -> "OutcomeHistogram":
        if design.kind is DesignKind.GLOBAL:
            idx = np.asarray(outcomes, dtype=np.int64).reshape(-1)
            counts = np.bincount(idx, minlength=design.num_outcomes)
            return cls(design, counts, int(idx.size))
        seq = np.asarray(outcomes, dtype=np.int64).reshape(-1, design.n_qubits)
        weights = design.local_size ** np.arange(design.n_qubits - 1, -1, -1)
        flat = seq @ weights
        counts = np.bincount(flat, minlength=design.num_outcomes)
        return cls(design, counts, int(seq.shape[0]), seq)

    @property
    def marginals(self) -> np.ndarray:
        """Per-qubit outcome counts, shape ``(n, m)`` (local designs)."""
        if self.sequence is None:
            raise ValueError("marginal counts are only kept for local designs")
        m = self.design.local_size
        return np.stack([np.bincount(col, minlength=m) for col in self.sequence.T])

    def multi_counts(self) -> dict[Outcome, int]:
        nz = np.nonzero(self.counts)[0]
        return {self.design.decode(i): int(self.counts[i]) for i in nz}


@dataclass
class LinearEstimate:
    matrix: np.ndarray
    rounds: int


def linear_from_histogram(design: MeasurementDesign, hist: OutcomeHistogram) -> LinearEstimate:
    """``sum_k f_k rho_hat_k`` using the full (multi-index) histogram."""
    if hist.total < 1:
        raise ValueError("histogram is empty")
    freqs = hist.counts / hist.total
    if design.kind is DesignKind.GLOBAL:
        mat = np.einsum("k,kij->ij", freqs, design.estimators)
        return LinearEstimate(mat, hist.total)
    d = design.dim
    mat = np.zeros((d, d), dtype=complex)
    for i in np.nonzero(hist.counts)[0]:
        mat += freqs[i] * tensor(*(design.estimators[k] for k in design.decode(i)))
    return LinearEstimate(mat, hist.total)


def linear_from_outcomes(design: MeasurementDesign, outcomes: Sequence[Outcome]) -> LinearEstimate:
    """Per-round average of single-shot estimates (reference path)."""
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("no outcomes")
    total = sum(single_shot_estimate(design, k) for k in outcomes)
    return LinearEstimate(total / len(outcomes), len(outcomes))


@dataclass
class TomographyRun:
    """Result of one tomography run.

    ``choi_dim`` is set for process runs; the linear estimate then lives in
    dimension ``choi_dim**2`` and is projected onto Choi states.
    """

    histogram: OutcomeHistogram
    linear: LinearEstimate
    average: TrajectoryAverage
    history: History = field(repr=False)
    choi_dim: int | None = None
    choi_tol: float = 1e-9

    @property
    def rounds(self) -> int:
        return self.linear.rounds

    @property
    def rho_bar(self) -> np.ndarray:
        return self.average.mean

    @cached_property
    def projection(self) -> ProjectionReport:
        if self.choi_dim is None:
            return project_to_states(self.linear.matrix)
        return project_to_choi(self.linear.matrix, self.choi_dim, tol=self.choi_tol)

    @property
    def pls(self) -> np.ndarray:
        return self.projection.matrix

    @property
    def linear_spectral_error(self) -> float:
        return spectral_norm(self.linear.matrix - self.rho_bar)

    @property
    def pls_spectral_error(self) -> float:
        return spectral_norm(self.pls - self.rho_bar)

    @property
    def pls_trace_error(self) -> float:
        return trace_norm(self.pls - self.rho_bar)


def run_state_tomography(
    source: AdaptiveSource,
    design: MeasurementDesign,
    rounds: int,
    rng: np.random.Generator,
    validate: bool = False,
) -> TomographyRun:
    """Run ``rounds`` rounds of preparation and measurement.

    Each round asks the source for ``rho_t`` with the history so far, then
    samples the outcome from ``rng`` (a stream the source never sees).
    ``validate`` checks every emitted state, which is slow.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if source.dim != design.dim:
        raise ValueError(f"source dimension {source.dim} != design dimension {design.dim}")
    sampler = BornSampler(design)
    u = sampler.uniforms(rng, rounds)
    history = History()
    outcomes = history.outcomes
    inputs = history.inputs
    next_state = source.next_state
    sample = sampler.sample
    acc = np.zeros((design.dim, design.dim), dtype=complex)
    for t in range(rounds):
        rho = next_state(history)
        if validate:
            as_density(rho)
        acc += rho
        outcomes.append(sample(rho, u[t]))
        inputs.append(None)
    hist = OutcomeHistogram.from_outcomes(design, outcomes)
    return TomographyRun(
        histogram=hist,
        linear=linear_from_histogram(design, hist),
        average=TrajectoryAverage(acc, rounds),
        history=history,
    )
