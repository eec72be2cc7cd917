"""History-dependent state sources and trajectory bookkeeping.

A source is asked for the state of round ``t`` with the history of rounds
``1..t-1``. The current round's measurement setting and outcome do not exist
yet when the call is made, so no source can peek at them. Sources may cache
work internally, but their output is a function of (history, seed) only.
"""
from __future__ import annotations

import itertools
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np

from .designs import DesignKind, MeasurementDesign, make_design, single_shot_estimate
from .matcore import as_density, hermitize, ket_projector, random_density, random_hermitian, random_pure
from .projection import project_to_states


class Record(NamedTuple):
    round: int
    outcome: Any
    input: Any = None


@dataclass
class History:
    """Append-only record of past outcomes ``Y_t`` and (process mode) inputs ``Z_t``."""

    outcomes: list = field(default_factory=list)
    inputs: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.outcomes)

    @property
    def length(self) -> int:
        return len(self.outcomes)

    def append(self, outcome, input_index=None) -> None:
        self.outcomes.append(outcome)
        self.inputs.append(input_index)

    @property
    def records(self) -> list[Record]:
        return [Record(t + 1, y, z) for t, (y, z) in enumerate(zip(self.outcomes, self.inputs))]

    def recent(self, window: int) -> list:
        if window <= 0:
            return []
        return self.outcomes[-window:]


class AdaptiveSource(ABC):
    """Maps the history of rounds ``1..t-1`` to the state ``rho_t``."""

    dim: int

    @abstractmethod
    def next_state(self, history: History) -> np.ndarray:
        ...

    def state_at(self, history: History) -> np.ndarray:
        """Validated variant of :meth:`next_state` (the tomography loop skips the check)."""
        return as_density(self.next_state(history))


class IidSource(AdaptiveSource):
    def __init__(self, rho):
        self.rho = as_density(rho)
        self.dim = self.rho.shape[0]

    def next_state(self, history):
        return self.rho


class DriftSource(AdaptiveSource):
    """Pure state ``cos(theta_t)|a> + sin(theta_t)|b>`` with ``theta_t = theta0 + omega t``.

    ``a`` and ``b`` default to the first two computational basis vectors.
    """

    def __init__(self, dim: int, omega: float, theta0: float = 0.0, plane: Sequence | None = None):
        self.dim = dim
        self.omega = float(omega)
        self.theta0 = float(theta0)
        if plane is None:
            eye = np.eye(dim, dtype=complex)
            plane = (eye[0], eye[1])
        self.a = np.asarray(plane[0], dtype=complex)
        self.b = np.asarray(plane[1], dtype=complex)

    def ket(self, t: int) -> np.ndarray:
        theta = self.theta0 + self.omega * t
        return np.cos(theta) * self.a + np.sin(theta) * self.b

    def next_state(self, history):
        return ket_projector(self.ket(len(history) + 1))

    def analytic_average(self, n_rounds: int) -> np.ndarray:
        """Closed-form mean of the first ``n_rounds`` states (Dirichlet-kernel sums)."""
        n = n_rounds
        w = self.omega
        # sum_{t=1}^n exp(i (2 theta0 + 2 w t))
        if abs(np.sin(w)) < 1e-15:
            s = n * np.exp(2j * self.theta0)
        else:
            s = np.exp(1j * (2 * self.theta0 + (n + 1) * w)) * np.sin(n * w) / np.sin(w)
        cos2, sin2 = s.real / n, s.imag / n
        aa, bb = np.outer(self.a, self.a.conj()), np.outer(self.b, self.b.conj())
        ab = np.outer(self.a, self.b.conj())
        return 0.5 * (1 + cos2) * aa + 0.5 * (1 - cos2) * bb + 0.5 * sin2 * (ab + ab.conj().T)


class RandomWalkSource(AdaptiveSource):
    """``rho_{t+1} = proj(rho_t + step * G_t)`` with unit-Frobenius random Hermitian kicks.

    The kicks come from the source's own seed, so ``rho_t`` depends on ``t`` only.
    """

    def __init__(self, rho0, step: float, seed: int):
        self.rho0 = as_density(rho0)
        self.dim = self.rho0.shape[0]
        self.step = float(step)
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._states = [self.rho0]

    def next_state(self, history):
        t = len(history) + 1
        while len(self._states) < t:
            g = random_hermitian(self.dim, self._rng)
            g /= np.linalg.norm(g)
            self._states.append(project_to_states(self._states[-1] + self.step * g).matrix)
        return self._states[t - 1]


def _outcome_projector(design: MeasurementDesign, outcome) -> np.ndarray:
    return design.projector(outcome)


class FeedbackSource(AdaptiveSource):
    """Biased away from the most frequent outcome of the last ``window`` rounds.

    ``rho_t = (1 - strength) rho0 + strength (1 - P_k*) / (d - 1)`` where ``k*`` is
    the most frequent recent outcome (earliest first seen wins ties). With an
    empty window the source is i.i.d. in ``rho0``.
    """

    def __init__(self, rho0, design: MeasurementDesign, window: int, strength: float = 0.5):
        self.rho0 = as_density(rho0)
        self.dim = self.rho0.shape[0]
        if design.dim != self.dim:
            raise ValueError("feedback design dimension does not match the state")
        self.design = design
        self.window = int(window)
        self.strength = float(strength)
        self._cache: dict = {}

    def next_state(self, history):
        recent = history.recent(self.window)
        if not recent or self.strength == 0.0:
            return self.rho0
        k_star = Counter(recent).most_common(1)[0][0]
        cached = self._cache.get(k_star)
        if cached is None:
            p = _outcome_projector(self.design, k_star)
            away = (np.eye(self.dim) - p) / (self.dim - 1)
            cached = hermitize((1 - self.strength) * self.rho0 + self.strength * away)
            self._cache[k_star] = cached
        return cached


class AdversarialSource(AdaptiveSource):
    """Plays the menu state farthest (Frobenius) from the running linear estimate.

    The estimate is rebuilt from past outcomes only; before any data it is the
    maximally mixed state. Ties go to the earliest menu entry.
    """

    def __init__(self, menu: Sequence, design: MeasurementDesign):
        self.menu = [as_density(m) for m in menu]
        if not self.menu:
            raise ValueError("adversarial source needs a non-empty menu")
        self.dim = self.menu[0].shape[0]
        self.design = design
        self._seen = 0
        self._sum = np.zeros((self.dim, self.dim), dtype=complex)
        self._history = None

    def _estimate(self, history: History) -> np.ndarray:
        # Incremental only while the same history object keeps growing.
        n = len(history)
        if history is not self._history or n < self._seen:
            self._history, self._seen, self._sum = history, 0, np.zeros_like(self._sum)
        for y in history.outcomes[self._seen:n]:
            self._sum += single_shot_estimate(self.design, y)
        self._seen = n
        if n == 0:
            return np.eye(self.dim) / self.dim
        return self._sum / n

    def next_state(self, history):
        if len(self.menu) == 1:
            return self.menu[0]
        est = self._estimate(history)
        dists = [np.linalg.norm(m - est) for m in self.menu]
        return self.menu[int(np.argmax(dists))]


def default_design(dim: int) -> MeasurementDesign:
    if dim == 2 or all(dim % p for p in range(2, int(dim**0.5) + 1)):
        return make_design("mub", dim)
    n = dim.bit_length() - 1
    if 2**n == dim:
        return make_design("pauli", n)
    raise ValueError(f"no default design for dimension {dim}")


def initial_state(kind: str, dim: int, rng: np.random.Generator) -> np.ndarray:
    kind = kind.lower()
    if kind == "random_pure":
        return random_pure(dim, rng)
    if kind == "basis0":
        return ket_projector(np.eye(dim)[0])
    if kind == "maximally_mixed":
        return np.eye(dim, dtype=complex) / dim
    if kind == "random_mixed":
        return random_density(dim, rng)
    raise ValueError(f"unknown initial state {kind!r}")


SOURCE_NAMES = ("iid", "drift", "random_walk", "feedback", "adversarial")


def make_source(name: str, dim: int, seed: int, design: MeasurementDesign | None = None, **params) -> AdaptiveSource:
    """Build one built-in strategy by name.

    Recognised parameters: ``state`` (initial state kind, default
    ``random_pure``), ``omega``, ``theta0``, ``step``, ``window``, ``strength``
    and ``menu`` (list of density matrices; defaults to the design's pure
    states, at most ``6 n`` of them for local designs). The initial state and
    the random-walk kicks both derive from ``seed``.
    """
    design = design or default_design(dim)
    rng = np.random.default_rng(seed)
    rho0 = initial_state(params.get("state", "random_pure"), dim, rng)
    walk_seed = int(rng.integers(2**63))
    if name == "iid":
        return IidSource(rho0)
    if name == "drift":
        return DriftSource(dim, params.get("omega", 2 * np.pi / 1000), params.get("theta0", 0.0))
    if name == "random_walk":
        return RandomWalkSource(rho0, params.get("step", 0.01), walk_seed)
    if name == "feedback":
        return FeedbackSource(rho0, design, int(params.get("window", 10)), params.get("strength", 0.5))
    if name == "adversarial":
        if "menu" in params:
            menu = params["menu"]
        elif design.kind is DesignKind.GLOBAL:
            menu = list(design.projectors)
        else:
            menu = [design.projector(k) for k in itertools.islice(design.outcomes(), 6 * design.n_qubits)]
        return AdversarialSource(menu, design)
    raise ValueError(f"unknown source strategy {name!r}; expected one of {SOURCE_NAMES}")


def builtin_sources(dim: int, seed: int, design: MeasurementDesign | None = None, **params) -> dict[str, AdaptiveSource]:
    """All five built-in strategies (see :func:`make_source`), sharing one seed."""
    return {name: make_source(name, dim, seed, design, **params) for name in SOURCE_NAMES}


@dataclass(frozen=True)
class TrajectoryAverage:
    running_sum: np.ndarray
    count: int = 0

    @classmethod
    def empty(cls, dim: int) -> "TrajectoryAverage":
        return cls(np.zeros((dim, dim), dtype=complex), 0)

    @property
    def mean(self) -> np.ndarray:
        if self.count == 0:
            raise ValueError("average of zero states is undefined")
        return self.running_sum / self.count


def update_average(avg: TrajectoryAverage, rho_t) -> TrajectoryAverage:
    rho_t = np.asarray(rho_t)
    if rho_t.shape != avg.running_sum.shape:
        raise ValueError(f"state shape {rho_t.shape} does not match average {avg.running_sum.shape}")
    return TrajectoryAverage(avg.running_sum + rho_t, avg.count + 1)
