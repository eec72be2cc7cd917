"""Dense Hermitian linear algebra used by every other module.

Matrices are plain complex ``numpy`` arrays. Multi-partite operators use
row-major index flattening with the first subsystem as the most significant
index, which is what ``np.kron`` produces.
"""
from __future__ import annotations

from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-10


class NotHermitianError(ValueError):
    pass


class InvalidStateError(ValueError):
    pass


class Spectrum(NamedTuple):
    """Eigenvalues sorted in descending order and the paired eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


class Norms(NamedTuple):
    spectral: float
    trace_norm: float
    frobenius: float


def hermiticity_violation(h: np.ndarray) -> float:
    h = np.asarray(h)
    return float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0


def as_hermitian(h, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate ``h`` as a square Hermitian matrix and return it as a complex array.

    The tolerance is scaled by the largest entry so that large estimators
    built from sums of unit-scale terms are not rejected for float dust.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h))))
    violation = hermiticity_violation(h)
    if violation > tol * scale:
        raise NotHermitianError(
            f"matrix is not Hermitian: max |H - H^dagger| = {violation:.3e} > {tol * scale:.1e}"
        )
    return h


def hermitize(h: np.ndarray) -> np.ndarray:
    return 0.5 * (h + h.conj().T)


def is_density_matrix(rho, psd_tol: float = PSD_TOL, trace_tol: float = TRACE_TOL) -> bool:
    try:
        rho = as_hermitian(rho, tol=max(HERMITIAN_TOL, psd_tol))
    except (ValueError, NotHermitianError):
        return False
    if abs(np.trace(rho).real - 1.0) > trace_tol:
        return False
    return bool(np.linalg.eigvalsh(rho)[0] >= -psd_tol)


def as_density(rho, psd_tol: float = PSD_TOL, trace_tol: float = TRACE_TOL) -> np.ndarray:
    """Validate ``rho`` as a density matrix (Hermitian, PSD, unit trace)."""
    rho = as_hermitian(rho, tol=max(HERMITIAN_TOL, psd_tol))
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise InvalidStateError(f"trace is {tr!r}, expected 1")
    lam_min = np.linalg.eigvalsh(rho)[0]
    if lam_min < -psd_tol:
        raise InvalidStateError(f"minimum eigenvalue {lam_min:.3e} is below -{psd_tol:.0e}")
    return rho


def eig_hermitian(h) -> Spectrum:
    """Eigendecomposition with eigenvalues sorted from largest to smallest."""
    h = as_hermitian(h)
    lam, v = np.linalg.eigh(h)
    return Spectrum(lam[::-1].copy(), v[:, ::-1].copy())


def tensor(*factors) -> np.ndarray:
    if not factors:
        raise ValueError("tensor() needs at least one factor")
    return reduce(np.kron, (np.asarray(f) for f in factors))


def _check_dims(m: np.ndarray, dims: Sequence[int]) -> None:
    if any(int(k) < 1 for k in dims):
        raise ValueError(f"subsystem dimensions must be positive, got {list(dims)}")
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != int(np.prod(dims)):
        raise ValueError(
            f"matrix of shape {m.shape} does not match subsystem dims {list(dims)}"
        )


def partial_trace(m, dims: Sequence[int], traced: Sequence[int]) -> np.ndarray:
    """Trace out the subsystems listed in ``traced`` (0-based indices into ``dims``).

    Tracing every subsystem returns a 1x1 matrix holding ``trace(m)``.
    """
    m = np.asarray(m)
    dims = [int(k) for k in dims]
    _check_dims(m, dims)
    n = len(dims)
    traced = sorted(set(int(i) for i in traced))
    if any(i < 0 or i >= n for i in traced):
        raise ValueError(f"traced indices {traced} out of range for {n} subsystems")

    t = m.reshape(dims + dims)
    # Trace highest index first so the remaining axis numbers stay valid.
    for k, i in enumerate(reversed(traced)):
        live = n - k
        t = np.trace(t, axis1=i, axis2=i + live)
    kept = [dims[i] for i in range(n) if i not in traced]
    size = int(np.prod(kept)) if kept else 1
    return t.reshape(size, size)


def embed_reduced(m, dims: Sequence[int], traced: Sequence[int]) -> np.ndarray:
    """``tr_traced(m)`` placed back in the full space with identities on ``traced``."""
    m = np.asarray(m)
    dims = [int(k) for k in dims]
    traced = sorted(set(int(i) for i in traced))
    kept = [i for i in range(len(dims)) if i not in traced]
    reduced = partial_trace(m, dims, traced)
    full = np.kron(reduced, np.eye(int(np.prod([dims[i] for i in traced])) if traced else 1))
    order = kept + traced
    n = len(dims)
    shaped = full.reshape([dims[i] for i in order] * 2)
    inverse = np.argsort(order)
    axes = list(inverse) + [n + j for j in inverse]
    return shaped.transpose(axes).reshape(m.shape)


def norms(h) -> Norms:
    lam = np.linalg.eigvalsh(as_hermitian(h))
    a = np.abs(lam)
    return Norms(float(a.max()), float(a.sum()), float(np.sqrt(np.sum(lam**2))))


def spectral_norm(h) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(h))))


def trace_norm(h) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(h))))


def frobenius_norm(h) -> float:
    return float(np.linalg.norm(h))


def ket_projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return hermitize(g)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Normalized Wishart state ``G G^dagger / tr``; full rank unless ``rank`` is given."""
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    w = g @ g.conj().T
    return hermitize(w / np.trace(w).real)


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    return random_density(d, rng, rank=1)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))
