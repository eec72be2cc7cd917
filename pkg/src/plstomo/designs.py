"""Rank-1 projector ensembles, their single-shot estimators and 2-design checks.

Two kinds of ensemble are supported. A *global* design is a list of ``M``
kets in dimension ``d`` whose projectors form a complex projective 2-design;
the POVM is ``(d/M) P_k`` and an outcome is an integer ``k``. A *local*
design is an ``m``-element single-qubit 2-design applied to each of ``n``
qubits; an outcome is a tuple ``(k_1, ..., k_n)`` and the ``m**n`` global
projectors are never built.

Outcome indices are 0-based.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .matcore import as_density, embed_reduced, random_hermitian, spectral_norm, tensor

Outcome = Union[int, tuple]

MAX_ENUMERATION = 10**6


class DesignKind(str, Enum):
    GLOBAL = "global"
    LOCAL = "local"


@dataclass(frozen=True, eq=False)
class MeasurementDesign:
    kind: DesignKind
    dim: int
    kets: np.ndarray
    n_qubits: int = 1
    name: str = ""

    @property
    def local_size(self) -> int:
        """Number of kets in the stored ensemble (``M`` global, ``m`` local)."""
        return self.kets.shape[0]

    @property
    def num_outcomes(self) -> int:
        if self.kind is DesignKind.GLOBAL:
            return self.local_size
        return self.local_size**self.n_qubits

    @property
    def povm_weight(self) -> float:
        return self.dim / self.num_outcomes

    @cached_property
    def projectors(self) -> np.ndarray:
        """Stored projectors, shape ``(M, d, d)`` global or ``(m, 2, 2)`` local."""
        k = self.kets
        return np.einsum("ki,kj->kij", k, k.conj())

    @cached_property
    def estimators(self) -> np.ndarray:
        """Single-shot estimator for each stored projector (per qubit for local designs)."""
        p = self.projectors
        eye = np.eye(p.shape[1])
        if self.kind is DesignKind.GLOBAL:
            return (self.dim + 1) * p - eye
        return 3 * p - eye

    def validate_outcome(self, outcome: Outcome) -> Outcome:
        if self.kind is DesignKind.GLOBAL:
            k = int(outcome)
            if not 0 <= k < self.local_size:
                raise ValueError(f"outcome {outcome} out of range for {self.local_size} projectors")
            return k
        ks = tuple(int(k) for k in outcome)
        if len(ks) != self.n_qubits or any(not 0 <= k < self.local_size for k in ks):
            raise ValueError(f"outcome {outcome} invalid for {self.n_qubits} qubits x {self.local_size}")
        return ks

    def projector(self, outcome: Outcome) -> np.ndarray:
        outcome = self.validate_outcome(outcome)
        if self.kind is DesignKind.GLOBAL:
            return self.projectors[outcome]
        return tensor(*(self.projectors[k] for k in outcome))

    def outcomes(self):
        """Iterate over every outcome (global list materialised only on request)."""
        if self.kind is DesignKind.GLOBAL:
            return iter(range(self.local_size))
        return itertools.product(range(self.local_size), repeat=self.n_qubits)

    def encode(self, outcome: Outcome) -> int:
        """Flat outcome index; multi-indices are read base ``m``, first qubit most significant."""
        if self.kind is DesignKind.GLOBAL:
            return int(outcome)
        idx = 0
        for k in outcome:
            idx = idx * self.local_size + int(k)
        return idx

    def decode(self, index: int) -> Outcome:
        if self.kind is DesignKind.GLOBAL:
            return int(index)
        ks = []
        for _ in range(self.n_qubits):
            index, k = divmod(int(index), self.local_size)
            ks.append(k)
        return tuple(reversed(ks))

    def check(self, tol: float = 1e-10) -> None:
        """Raise if a projector is not rank-1 or the POVM is incomplete."""
        p = self.projectors
        if np.max(np.abs(p @ p - p)) > tol:
            raise ValueError("ensemble element is not a projector")
        if np.max(np.abs(np.trace(p, axis1=1, axis2=2) - 1)) > tol:
            raise ValueError("ensemble element does not have unit trace")
        local_dim = p.shape[1]
        weight = local_dim / self.local_size
        if np.max(np.abs(weight * p.sum(axis=0) - np.eye(local_dim))) > tol:
            raise ValueError("POVM is not complete")


def _normalize_rows(kets: np.ndarray) -> np.ndarray:
    kets = np.asarray(kets, dtype=complex)
    return kets / np.linalg.norm(kets, axis=1, keepdims=True)


def _is_prime(d: int) -> bool:
    return d >= 2 and all(d % p for p in range(2, int(d**0.5) + 1))


def mub_kets(d: int) -> np.ndarray:
    """Kets of ``d + 1`` mutually unbiased bases for prime ``d``.

    Basis 0 is the computational basis; basis ``a + 1`` holds the vectors
    ``sum_x w^(a x^2 + b x) |x> / sqrt(d)`` for ``b = 0..d-1``. For ``d = 2`` the
    quadratic phase uses a fourth root of unity, giving Z, X, Y eigenbases.
    """
    if not _is_prime(d):
        raise ValueError(f"MUB construction needs a prime dimension, got {d}")
    x = np.arange(d)
    kets = [np.eye(d, dtype=complex)]
    for a in range(d):
        basis = []
        for b in range(d):
            if d == 2:
                phase = np.exp(1j * np.pi * (a * x**2 / 2 + b * x))
            else:
                phase = np.exp(2j * np.pi * ((a * x**2 + b * x) % d) / d)
            basis.append(phase / np.sqrt(d))
        kets.append(np.array(basis))
    return np.concatenate(kets, axis=0)


def mub_design(d: int) -> MeasurementDesign:
    design = MeasurementDesign(DesignKind.GLOBAL, d, mub_kets(d), name=f"mub-{d}")
    design.check()
    return design


def sic_kets_d2() -> np.ndarray:
    """Tetrahedral qubit kets: Bloch vectors at the vertices of a regular tetrahedron."""
    theta = np.arccos(-1 / 3)
    angles = [(0.0, 0.0)] + [(theta, 2 * np.pi * j / 3) for j in range(3)]
    return np.array([[np.cos(t / 2), np.exp(1j * f) * np.sin(t / 2)] for t, f in angles])


def sic_design_d2() -> MeasurementDesign:
    design = MeasurementDesign(DesignKind.GLOBAL, 2, sic_kets_d2(), name="sic-2")
    design.check()
    return design


def pauli_local_design(n: int) -> MeasurementDesign:
    if not 1 <= n <= 4:
        raise ValueError(f"pauli_local_design supports 1 <= n <= 4 qubits, got {n}")
    design = MeasurementDesign(DesignKind.LOCAL, 2**n, mub_kets(2), n_qubits=n, name=f"pauli-{n}")
    design.check()
    return design


def design_from_kets(kets, kind: DesignKind = DesignKind.GLOBAL, n_qubits: int = 1, name: str = "custom"):
    """Wrap arbitrary kets without validation (used to build corrupted ensembles)."""
    kets = _normalize_rows(kets)
    dim = kets.shape[1] if kind is DesignKind.GLOBAL else 2**n_qubits
    return MeasurementDesign(DesignKind(kind), dim, kets, n_qubits=n_qubits, name=name)


def make_design(family: str, size: int) -> MeasurementDesign:
    """Look up a design by family name: ``mub`` (size = d), ``sic`` (d = 2), ``pauli`` (size = n)."""
    family = family.lower()
    if family == "mub":
        return mub_design(size)
    if family == "sic":
        if size != 2:
            raise ValueError("SIC design is only provided for d = 2")
        return sic_design_d2()
    if family == "pauli":
        return pauli_local_design(size)
    raise ValueError(f"unknown design family {family!r}")


def single_shot_estimate(design: MeasurementDesign, outcome: Outcome) -> np.ndarray:
    """``(d+1) P_k - 1`` for global designs, ``kron_j (3 P_kj - 1)`` for local ones."""
    outcome = design.validate_outcome(outcome)
    if design.kind is DesignKind.GLOBAL:
        return design.estimators[outcome].copy()
    return tensor(*(design.estimators[k] for k in outcome))


def born_probabilities(design: MeasurementDesign, rho) -> np.ndarray:
    """Exact outcome probabilities ``(d/M) tr(P_k rho)`` over all outcomes, flat-indexed."""
    rho = np.asarray(rho, dtype=complex)
    if design.num_outcomes > MAX_ENUMERATION:
        raise ValueError(f"{design.num_outcomes} outcomes is too many to enumerate")
    if design.kind is DesignKind.GLOBAL:
        kets = design.kets
    else:
        kets = tensor(*([design.kets] * design.n_qubits))
    amp = np.einsum("ki,ij,kj->k", kets.conj(), rho, kets).real
    return design.povm_weight * amp


def _reference_probabilities(design: MeasurementDesign, rho) -> np.ndarray:
    return np.array([
        design.povm_weight * np.trace(design.projector(k) @ rho).real for k in design.outcomes()
    ])


@dataclass
class TwoDesignReport:
    passed: bool
    max_deviation: float
    worst_seed: int
    trials: int
    tol: float

    def __str__(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} max_dev={self.max_deviation:.3e} worst_seed={self.worst_seed} trials={self.trials}"


def two_design_deviation(kets: np.ndarray, x: np.ndarray) -> float:
    """Max-entry gap between ``(1/M) sum tr(P_k X) P_k`` and ``(X + tr X 1)/(d(d+1))``."""
    m, d = kets.shape
    proj = np.einsum("ki,kj->kij", kets, kets.conj())
    weights = np.einsum("kij,ji->k", proj, x)
    lhs = np.einsum("k,kij->ij", weights, proj) / m
    rhs = (x + np.trace(x) * np.eye(d)) / (d * (d + 1))
    return float(np.max(np.abs(lhs - rhs)))


def verify_two_design(design: MeasurementDesign, trials: int = 100, tol: float = 1e-9, seed: int = 0) -> TwoDesignReport:
    """Check the second-moment identity on random Hermitian ``X``.

    Local designs are checked on the single-qubit ensemble. Each trial ``i``
    draws ``X`` from ``default_rng([seed, i])``; the worst trial's seed index
    is reported so a failure can be replayed.
    """
    kets = design.kets
    d = kets.shape[1]
    worst, worst_i = -1.0, -1
    for i in range(trials):
        x = random_hermitian(d, np.random.default_rng([seed, i]))
        dev = two_design_deviation(kets, x)
        if dev > worst:
            worst, worst_i = dev, i
    return TwoDesignReport(worst <= tol, worst, worst_i, trials, tol)


@dataclass
class MomentReport:
    mean_deviation: float
    second_moment_deviation: float
    mean: np.ndarray = field(repr=False)
    second_moment: np.ndarray = field(repr=False)
    target_second_moment: np.ndarray = field(repr=False)
    variance_norm: float = 0.0

    def passed(self, tol: float = 1e-10) -> bool:
        return max(self.mean_deviation, self.second_moment_deviation) <= tol


def second_moment_target(design: MeasurementDesign, rho) -> np.ndarray:
    """Closed form of ``E[rho_hat^2]`` for the design.

    Global: ``(d-1) rho + d 1``. Local: ``sum over subsets a of 2^|a| tr_a(rho) (x) 1_a``.
    """
    rho = np.asarray(rho, dtype=complex)
    d = design.dim
    if design.kind is DesignKind.GLOBAL:
        return (d - 1) * rho + d * np.eye(d)
    n = design.n_qubits
    dims = [2] * n
    out = np.zeros_like(rho)
    for size in range(n + 1):
        for alpha in itertools.combinations(range(n), size):
            out += 2**size * embed_reduced(rho, dims, alpha)
    return out


def exact_moments(design: MeasurementDesign, rho) -> tuple[np.ndarray, np.ndarray]:
    """``E[rho_hat]`` and ``E[rho_hat^2]`` by summing over every outcome."""
    rho = np.asarray(rho, dtype=complex)
    probs = _reference_probabilities(design, rho)
    d = design.dim
    mean = np.zeros((d, d), dtype=complex)
    second = np.zeros((d, d), dtype=complex)
    for p, k in zip(probs, design.outcomes()):
        est = single_shot_estimate(design, k)
        mean += p * est
        second += p * (est @ est)
    return mean, second


def verify_moment_identities(design: MeasurementDesign, rho) -> MomentReport:
    """Exact unbiasedness and second-moment check by full outcome enumeration."""
    if design.num_outcomes > MAX_ENUMERATION:
        raise ValueError(
            f"design has {design.num_outcomes} outcomes (> {MAX_ENUMERATION}); use fewer qubits"
        )
    rho = as_density(rho)
    if rho.shape[0] != design.dim:
        raise ValueError(f"state dimension {rho.shape[0]} != design dimension {design.dim}")
    mean, second = exact_moments(design, rho)
    target = second_moment_target(design, rho)
    return MomentReport(
        mean_deviation=float(np.max(np.abs(mean - rho))),
        second_moment_deviation=float(np.max(np.abs(second - target))),
        mean=mean,
        second_moment=second,
        target_second_moment=target,
        variance_norm=spectral_norm(second - rho @ rho),
    )


def estimator_range(design: MeasurementDesign) -> float:
    """Largest spectral norm of any single-shot estimate."""
    per = [spectral_norm(e) for e in design.estimators]
    if design.kind is DesignKind.GLOBAL:
        return max(per)
    return max(per) ** design.n_qubits


def corrupt(design: MeasurementDesign, index: int = 0, ket: Sequence[complex] | None = None) -> MeasurementDesign:
    """Copy of ``design`` with one stored ket replaced (default: tilt it towards the next basis vector)."""
    kets = design.kets.copy()
    d = kets.shape[1]
    if ket is None:
        ket = kets[index] + 0.3 * np.roll(np.eye(d)[0], 1)
    kets[index] = ket
    return design_from_kets(kets, design.kind, design.n_qubits, name=f"{design.name}-corrupted")
