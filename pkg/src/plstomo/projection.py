"""Frobenius projections onto density matrices and onto normalized Choi states."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import as_hermitian, eig_hermitian, hermitize, partial_trace


@dataclass
class ProjectionReport:
    matrix: np.ndarray
    min_eigenvalue: float
    marginal_residual: float = 0.0
    distance_moved: float = 0.0
    iterations: int = 0
    converged: bool = True

    @property
    def residual(self) -> float:
        """Largest feasibility violation: negative eigenvalue mass or marginal gap."""
        return max(-min(self.min_eigenvalue, 0.0), self.marginal_residual)


class ProjectionNotConverged(RuntimeError):
    def __init__(self, report: ProjectionReport):
        self.report = report
        super().__init__(
            f"Choi projection stopped after {report.iterations} iterations with "
            f"min eigenvalue {report.min_eigenvalue:.3e}, marginal residual {report.marginal_residual:.3e}"
        )


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto the probability simplex.

    Sort-based threshold: ``w_i = max(v_i - theta, 0)`` with ``theta`` picked so
    that the entries sum to one.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("project_simplex expects a non-empty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("project_simplex received non-finite entries")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    w = np.maximum(v - theta, 0.0)
    # Remove float dust from the sum without disturbing zeros.
    return w / w.sum()


def project_to_states(l) -> ProjectionReport:
    """Closest density matrix to a Hermitian ``l`` in Frobenius norm."""
    l = as_hermitian(l)
    spec = eig_hermitian(l)
    w = project_simplex(spec.eigenvalues)
    v = spec.eigenvectors
    out = hermitize((v * w) @ v.conj().T)
    return ProjectionReport(
        matrix=out,
        min_eigenvalue=float(w.min()),
        distance_moved=float(np.linalg.norm(out - l)),
    )


def _psd_part(x: np.ndarray) -> tuple[np.ndarray, float]:
    lam, v = np.linalg.eigh(x)
    clipped = np.maximum(lam, 0.0)
    return hermitize((v * clipped) @ v.conj().T), float(lam[0])


def _fix_marginal(x: np.ndarray, d: int) -> np.ndarray:
    gap = np.eye(d) / d - partial_trace(x, [d, d], [1])
    return x + np.kron(gap, np.eye(d) / d)


def choi_residuals(omega, d: int) -> tuple[float, float]:
    """Minimum eigenvalue and ``||tr_2(omega) - 1/d||_F`` for a candidate Choi state."""
    omega = np.asarray(omega)
    lam_min = float(np.linalg.eigvalsh(omega)[0])
    marginal = float(np.linalg.norm(partial_trace(omega, [d, d], [1]) - np.eye(d) / d))
    return lam_min, marginal


def project_to_choi(l, d: int, tol: float = 1e-9, max_iter: int = 10000, strict: bool = True) -> ProjectionReport:
    """Frobenius projection onto ``{omega >= 0, tr_2 omega = 1/d}`` by Dykstra's algorithm.

    The second tensor factor is the channel output. Iterates alternate between
    eigenvalue clipping and the affine marginal correction, carrying Dykstra's
    correction term for the PSD step (the affine step needs none). The
    returned matrix is the affine iterate, so its marginal is exact to float
    precision and its smallest eigenvalue is at least ``-tol`` on success.

    With ``strict`` (default) a run that hits ``max_iter`` raises
    :class:`ProjectionNotConverged` carrying the report.
    """
    l = as_hermitian(l)
    if l.shape[0] != d * d:
        raise ValueError(f"Choi input has dimension {l.shape[0]}, expected {d * d}")
    # Starting from the affine projection of l does not change the answer: the
    # feasible set lies inside the affine plane.
    x = _fix_marginal(l, d)
    p = np.zeros_like(x)
    lam_min = float(np.linalg.eigvalsh(x)[0])
    it = 0
    step = np.inf
    while lam_min < -tol or (it > 0 and step > tol):
        if it >= max_iter:
            break
        it += 1
        y, _ = _psd_part(x + p)
        p = x + p - y
        x_new = _fix_marginal(y, d)
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        lam_min = float(np.linalg.eigvalsh(x)[0])
    x = hermitize(x)
    lam_min, marginal = choi_residuals(x, d)
    report = ProjectionReport(
        matrix=x,
        min_eigenvalue=lam_min,
        marginal_residual=marginal,
        distance_moved=float(np.linalg.norm(x - l)),
        iterations=it,
        converged=lam_min >= -tol and marginal <= tol,
    )
    if strict and not report.converged:
        raise ProjectionNotConverged(report)
    return report
