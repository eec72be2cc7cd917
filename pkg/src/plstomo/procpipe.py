"""Process tomography through the Choi state of the time-averaged channel.

Choi convention: ``rho_E = (I (x) E)(|Phi+><Phi+|)`` with the reference system
first and the channel output second, so the valid-channel constraint is
``tr_2(rho_E) = 1/d``. Transposes are taken in the computational basis.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Sequence

import numpy as np

from .designs import DesignKind, MeasurementDesign, Outcome, born_probabilities, single_shot_estimate
from .matcore import hermitize, partial_trace, random_unitary, spectral_norm, tensor
from .sources import History, TrajectoryAverage
from .statepipe import BornSampler, LinearEstimate, OutcomeHistogram, TomographyRun


class Channel:
    """Completely positive trace-preserving map stored as Kraus operators."""

    def __init__(self, kraus: Sequence, check: bool = True, tol: float = 1e-10):
        k = np.asarray(kraus, dtype=complex)
        if k.ndim == 2:
            k = k[None]
        self.kraus = k
        self._kraus_dag = np.conj(np.transpose(k, (0, 2, 1)))
        self.dim = k.shape[1]
        if check:
            gap = np.max(np.abs(np.einsum("kji,kjl->il", k.conj(), k) - np.eye(self.dim)))
            if gap > tol:
                raise ValueError(f"Kraus operators are not trace preserving (gap {gap:.3e})")

    def __call__(self, sigma) -> np.ndarray:
        return hermitize((self.kraus @ sigma @ self._kraus_dag).sum(axis=0))

    @cached_property
    def choi(self) -> np.ndarray:
        d = self.dim
        # (1 (x) K)|Phi+> reshaped to d x d is K^T / sqrt(d).
        vecs = np.transpose(self.kraus, (0, 2, 1)).reshape(-1, d * d) / np.sqrt(d)
        return hermitize(vecs.T @ vecs.conj())


def choi_of_channel(ch: Channel) -> np.ndarray:
    return ch.choi


def apply_channel(ch: Channel, sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=complex)
    if sigma.shape != (ch.dim, ch.dim):
        raise ValueError(f"state shape {sigma.shape} does not match channel dimension {ch.dim}")
    return ch(sigma)


def apply_choi(choi, sigma) -> np.ndarray:
    """``d tr_1(rho_E (sigma^T (x) 1))``: the channel action read off its Choi matrix."""
    sigma = np.asarray(sigma)
    d = sigma.shape[0]
    return d * partial_trace(choi @ np.kron(sigma.T, np.eye(d)), [d, d], [0])


def identity_channel(d: int) -> Channel:
    return Channel([np.eye(d)])


@lru_cache(maxsize=None)
def weyl_operators(d: int) -> np.ndarray:
    """The ``d**2`` clock-and-shift unitaries ``X^a Z^b``; identity first."""
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    ops = [np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b) for a in range(d) for b in range(d)]
    ops = np.array(ops)
    ops.flags.writeable = False
    return ops


def depolarizing_channel(d: int, p: float) -> Channel:
    """``rho -> (1 - p) rho + p tr(rho) 1/d`` for ``0 <= p <= 1``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability {p} outside [0, 1]")
    w = weyl_operators(d)
    coeffs = np.full(d * d, np.sqrt(p) / d)
    coeffs[0] = np.sqrt(1 - p + p / d**2)
    return Channel(coeffs[:, None, None] * w, check=False)


def unitary_channel(u) -> Channel:
    return Channel([u])


def compose(outer: Channel, inner: Channel) -> Channel:
    """Kraus form of ``outer o inner``."""
    return Channel([a @ b for a in outer.kraus for b in inner.kraus])


def random_kraus_channel(d: int, rng: np.random.Generator, rank: int = 2) -> Channel:
    g = rng.standard_normal((rank * d, d)) + 1j * rng.standard_normal((rank * d, d))
    q, _ = np.linalg.qr(g)
    return Channel(q.reshape(rank, d, d))


def diamond_bound(delta_choi, d: int) -> float:
    """Upper bound ``d**2 * ||delta||`` on the diamond distance between two channels."""
    delta_choi = np.asarray(delta_choi)
    if delta_choi.shape != (d * d, d * d):
        raise ValueError(f"Choi difference has shape {delta_choi.shape}, expected {(d * d, d * d)}")
    return d * d * spectral_norm(delta_choi)


class ChannelSource(ABC):
    """Maps the history of rounds ``1..t-1`` (inputs and outcomes) to the channel ``E_t``."""

    dim: int

    @abstractmethod
    def next_channel(self, history: History) -> Channel:
        ...


class IidChannelSource(ChannelSource):
    def __init__(self, channel: Channel):
        self.channel = channel
        self.dim = channel.dim

    def next_channel(self, history):
        return self.channel


class DriftDepolarizingSource(ChannelSource):
    """Depolarizing channel whose probability follows ``schedule(t)``."""

    def __init__(self, dim: int, schedule: Callable[[int], float]):
        self.dim = dim
        self.schedule = schedule

    @classmethod
    def linear(cls, dim: int, p_start: float, p_end: float, horizon: int) -> "DriftDepolarizingSource":
        """``p_t = p_start + (p_end - p_start) t / horizon``, clipped to ``[0, 1]``."""
        def schedule(t: int) -> float:
            return min(1.0, max(0.0, p_start + (p_end - p_start) * t / horizon))

        return cls(dim, schedule)

    def next_channel(self, history):
        return depolarizing_channel(self.dim, float(self.schedule(len(history) + 1)))


class DriftUnitarySource(ChannelSource):
    """``E_t = D_p o U_t`` with ``U_t = exp(-i omega t G)``, ``G`` the real part of the shift operator."""

    def __init__(self, dim: int, omega: float, p: float = 0.0):
        self.dim = dim
        self.omega = float(omega)
        self.noise = depolarizing_channel(dim, p)
        shift = np.roll(np.eye(dim), 1, axis=0)
        lam, v = np.linalg.eigh((shift + shift.T) / 2)
        self._lam, self._v = lam, v

    def unitary(self, t: int) -> np.ndarray:
        phases = np.exp(-1j * self.omega * t * self._lam)
        return (self._v * phases) @ self._v.conj().T

    def next_channel(self, history):
        u = self.unitary(len(history) + 1)
        return Channel(np.einsum("kij,jl->kil", self.noise.kraus, u), check=False)


class FeedbackChannelSource(ChannelSource):
    """Depolarizing strength nudged by the recent output statistics.

    ``p_t = clip(p0 + gain * (f_max - 1/M))`` where ``f_max`` is the largest
    relative frequency among the last ``window`` output outcomes.
    """

    def __init__(self, dim: int, p0: float, window: int, gain: float = 1.0, num_outcomes: int = 6):
        self.dim = dim
        self.p0 = float(p0)
        self.window = int(window)
        self.gain = float(gain)
        self.num_outcomes = num_outcomes
        self._cache: dict[float, Channel] = {}

    def next_channel(self, history):
        recent = history.recent(self.window)
        p = self.p0
        if recent:
            f_max = Counter(recent).most_common(1)[0][1] / len(recent)
            p = min(1.0, max(0.0, self.p0 + self.gain * (f_max - 1 / self.num_outcomes)))
        ch = self._cache.get(p)
        if ch is None:
            ch = self._cache[p] = depolarizing_channel(self.dim, p)
        return ch


CHANNEL_SOURCE_NAMES = ("iid", "drift_depolarizing", "drift_unitary", "feedback")


def make_channel_source(name: str, d: int, seed: int, num_outcomes: int | None = None, **params) -> ChannelSource:
    """Build one built-in channel strategy for ``d`` in ``{2, 4}``.

    The i.i.d. channel is ``D_p0 o U`` with ``U`` Haar-random from ``seed``.
    Parameters: ``p0``, ``p_start``, ``p_end``, ``horizon``, ``omega``,
    ``window``, ``gain``.
    """
    if d not in (2, 4):
        raise ValueError(f"built-in channel sources support d in {{2, 4}}, got {d}")
    p0 = params.get("p0", 0.1)
    if name == "iid":
        u = random_unitary(d, np.random.default_rng(seed))
        return IidChannelSource(compose(depolarizing_channel(d, p0), unitary_channel(u)))
    if name == "drift_depolarizing":
        return DriftDepolarizingSource.linear(
            d, params.get("p_start", 0.1), params.get("p_end", 0.5), params.get("horizon", 1000)
        )
    if name == "drift_unitary":
        return DriftUnitarySource(d, params.get("omega", 2 * np.pi / 1000), p0)
    if name == "feedback":
        m = num_outcomes or (d * (d + 1) if d == 2 else 36)
        return FeedbackChannelSource(d, p0, int(params.get("window", 10)), params.get("gain", 1.0), m)
    raise ValueError(f"unknown channel strategy {name!r}; expected one of {CHANNEL_SOURCE_NAMES}")


def builtin_channel_sources(d: int, seed: int, num_outcomes: int | None = None, **params) -> dict[str, ChannelSource]:
    return {name: make_channel_source(name, d, seed, num_outcomes, **params) for name in CHANNEL_SOURCE_NAMES}


def input_estimators(design: MeasurementDesign) -> np.ndarray:
    """Per-ket estimator factors for the input side: the design estimators transposed."""
    return design.estimators.conj()


def choi_single_shot(input_design: MeasurementDesign, output_design: MeasurementDesign, z: Outcome, y: Outcome) -> np.ndarray:
    """``[(d+1) sigma_z^T - 1] (x) [(d+1) P_y - 1]`` or its local product form."""
    return np.kron(single_shot_estimate(input_design, z).conj(), single_shot_estimate(output_design, y))


def effective_probabilities(ch: Channel, input_design: MeasurementDesign, output_design: MeasurementDesign) -> np.ndarray:
    """Joint ``p(z, y) = (1/M_in) (d/M_out) tr(P_y E(sigma_z))`` as an ``M_in x M_out`` array."""
    rows = []
    for z in input_design.outcomes():
        rows.append(born_probabilities(output_design, ch(input_design.projector(z))))
    return np.array(rows) / input_design.num_outcomes


def exact_choi_mean(ch: Channel, input_design: MeasurementDesign, output_design: MeasurementDesign) -> np.ndarray:
    """Exact expectation of the Choi single-shot estimator under ``ch``."""
    probs = effective_probabilities(ch, input_design, output_design)
    d = ch.dim
    out = np.zeros((d * d, d * d), dtype=complex)
    for i, z in enumerate(input_design.outcomes()):
        for j, y in enumerate(output_design.outcomes()):
            out += probs[i, j] * choi_single_shot(input_design, output_design, z, y)
    return out


class _InputPreparer:
    def __init__(self, design: MeasurementDesign):
        self.design = design
        if design.kind is DesignKind.GLOBAL:
            self.states = design.projectors
        else:
            self.states = None

    def draw(self, rng_u: np.ndarray):
        d = self.design
        if d.kind is DesignKind.GLOBAL:
            z = min(int(rng_u[0] * d.local_size), d.local_size - 1)
            return z, self.states[z]
        z = tuple(min(int(u * d.local_size), d.local_size - 1) for u in rng_u)
        return z, tensor(*(d.projectors[k] for k in z))


def run_process_tomography(
    source: ChannelSource,
    input_design: MeasurementDesign,
    output_design: MeasurementDesign,
    rounds: int,
    rng: np.random.Generator,
    choi_tol: float = 1e-9,
) -> TomographyRun:
    """Run ``rounds`` rounds of input preparation, channel use and output measurement.

    Each round the channel is fixed from the history first; only then is the
    input index drawn uniformly from ``rng``, so the source cannot react to it.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    d = source.dim
    if input_design.dim != d or output_design.dim != d:
        raise ValueError("input/output designs must match the channel dimension")
    prep = _InputPreparer(input_design)
    sampler = BornSampler(output_design)
    n_in = 1 if input_design.kind is DesignKind.GLOBAL else input_design.n_qubits
    u_in = rng.random((rounds, n_in))
    u_out = sampler.uniforms(rng, rounds)
    history = History()
    acc = np.zeros((d * d, d * d), dtype=complex)
    next_channel = source.next_channel
    for t in range(rounds):
        ch = next_channel(history)
        acc += ch.choi
        z, sigma = prep.draw(u_in[t])
        y = sampler.sample(ch(sigma), u_out[t])
        history.append(y, z)
    hist = ProcessHistogram.from_history(input_design, output_design, history)
    return TomographyRun(
        histogram=hist,
        linear=choi_from_histogram(input_design, output_design, hist),
        average=TrajectoryAverage(acc, rounds),
        history=history,
        choi_dim=d,
        choi_tol=choi_tol,
    )


@dataclass
class ProcessHistogram(OutcomeHistogram):
    """Joint ``(Z, Y)`` counts; the flat index is ``enc(Z) * M_out + enc(Y)``."""

    input_design: MeasurementDesign | None = None

    @classmethod
    def from_history(cls, input_design, output_design, history: History) -> "ProcessHistogram":
        m_out = output_design.num_outcomes
        flat = np.fromiter(
            (input_design.encode(z) * m_out + output_design.encode(y) for z, y in zip(history.inputs, history.outcomes)),
            dtype=np.int64,
            count=len(history),
        )
        counts = np.bincount(flat, minlength=input_design.num_outcomes * m_out)
        return cls(output_design, counts, len(history), input_design=input_design)


def choi_from_histogram(input_design, output_design, hist: OutcomeHistogram) -> LinearEstimate:
    m_out = output_design.num_outcomes
    d = input_design.dim
    mat = np.zeros((d * d, d * d), dtype=complex)
    for i in np.nonzero(hist.counts)[0]:
        z, y = divmod(int(i), m_out)
        mat += hist.counts[i] * choi_single_shot(input_design, output_design, input_design.decode(z), output_design.decode(y))
    return LinearEstimate(mat / hist.total, hist.total)


def choi_from_rounds(input_design, output_design, history: History) -> LinearEstimate:
    """Per-round average of Choi single-shot estimates (reference path)."""
    mats = [choi_single_shot(input_design, output_design, z, y) for z, y in zip(history.inputs, history.outcomes)]
    return LinearEstimate(sum(mats) / len(mats), len(mats))
