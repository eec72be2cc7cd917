"""Sample sizes, the matrix Freedman tail and the trace-norm conversion bound.

Sample sizes are evaluated in 50-digit arithmetic and rounded up, so the
returned ``N`` is the smallest integer satisfying the inequality.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import mpmath
import numpy as np

_DPS = 50


class DegenerateBoundWarning(UserWarning):
    """The accuracy is so loose that the spectral threshold exceeds the range bound."""


def _check_eps_delta(eps: float, delta: float) -> None:
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def _ceil(x: mpmath.mpf) -> int:
    return int(mpmath.ceil(x))


def sample_size_state_global(d: int, r: int, eps: float, delta: float) -> int:
    """Smallest ``N >= 64 d r^2 (1 + eps/(24 r)) / eps^2 * log(2d/delta)``."""
    _check_eps_delta(eps, delta)
    if not 1 <= r <= d:
        raise ValueError(f"rank r must satisfy 1 <= r <= d, got r={r}, d={d}")
    if eps >= 4 * r * d:
        warnings.warn("eps >= 4 r d: spectral threshold reaches the range bound", DegenerateBoundWarning)
    with mpmath.workdps(_DPS):
        e, dl = mpmath.mpf(eps), mpmath.mpf(delta)
        n = 64 * d * r**2 * (1 + e / (24 * r)) / e**2 * mpmath.log(2 * d / dl)
        return _ceil(n)


def sample_size_state_local(n: int, r: int, eps: float, delta: float) -> int:
    """Smallest ``N >= 32 r^2 (3^n + 2^n eps/(12 r)) / eps^2 * log(2^(n+1)/delta)``."""
    _check_eps_delta(eps, delta)
    d = 2**n
    if not 1 <= r <= d:
        raise ValueError(f"rank r must satisfy 1 <= r <= 2^n, got r={r}, n={n}")
    if eps >= 4 * r * d:
        warnings.warn("eps >= 4 r d: spectral threshold reaches the range bound", DegenerateBoundWarning)
    with mpmath.workdps(_DPS):
        e, dl = mpmath.mpf(eps), mpmath.mpf(delta)
        lead = 32 * r**2 * (mpmath.mpf(3) ** n + mpmath.mpf(2) ** n * e / (12 * r)) / e**2
        return _ceil(lead * mpmath.log(mpmath.mpf(2) ** (n + 1) / dl))


def sample_size_process(size: int, eps: float, delta: float, kind: str = "global") -> int:
    """Rounds for diamond accuracy ``eps``.

    ``kind="global"``: ``size`` is ``d`` and
    ``N >= 32 d^6 (1 + eps/24) / eps^2 * log(2 d^2/delta)``.
    ``kind="local"``: ``size`` is the qubit count ``n`` and
    ``N >= 2^(4n+3) (3^(2n) + eps/6) / eps^2 * log(2^(2n+1)/delta)``.
    """
    _check_eps_delta(eps, delta)
    with mpmath.workdps(_DPS):
        e, dl = mpmath.mpf(eps), mpmath.mpf(delta)
        if kind == "global":
            d = mpmath.mpf(size)
            val = 32 * d**6 * (1 + e / 24) / e**2 * mpmath.log(2 * d**2 / dl)
        elif kind == "local":
            n = size
            two = mpmath.mpf(2)
            val = two ** (4 * n + 3) * (mpmath.mpf(3) ** (2 * n) + e / 6) / e**2 * mpmath.log(two ** (2 * n + 1) / dl)
        else:
            raise ValueError(f"kind must be 'global' or 'local', got {kind!r}")
        return _ceil(val)


def freedman_tail(tau: float, sigma2: float, R: float, d: int) -> float:
    """``min(1, 2d exp(-(tau^2/2) / (sigma2 + R tau/3)))`` for a sum of martingale increments.

    ``tau`` is the threshold on the summed martingale ``||M_N||`` (not on the
    average); ``sigma2`` bounds the predictable quadratic variation.
    """
    if tau < 0 or sigma2 < 0 or R < 0:
        raise ValueError("tau, sigma2 and R must be non-negative")
    with mpmath.workdps(_DPS):
        t = mpmath.mpf(tau)
        denom = mpmath.mpf(sigma2) + mpmath.mpf(R) * t / 3
        if denom == 0:
            return 0.0 if t > 0 else 1.0
        val = 2 * d * mpmath.exp(-(t**2 / 2) / denom)
        return float(min(mpmath.mpf(1), val))


@dataclass(frozen=True)
class BoundParams:
    """Freedman inputs for the deviation of the averaged linear estimator.

    ``dim`` is the dimension of the estimated matrix (``d`` for states,
    ``d^2`` for Choi states). ``R`` bounds each increment, ``variance`` bounds
    one round's conditional second moment (so ``sigma2 = N * variance``) and
    ``tau`` is the spectral threshold on ``L_N - rho_bar``.
    """

    dim: int
    R: float
    variance: float
    tau: float
    eps: float
    delta: float
    rank: int = 1

    def __post_init__(self):
        _check_eps_delta(self.eps, self.delta)
        if not (self.R > 0 and self.variance > 0 and self.tau > 0):
            raise ValueError("R, variance and tau must be positive")

    def sigma2(self, rounds: int) -> float:
        return rounds * self.variance

    def tail(self, rounds: int) -> float:
        """Freedman bound on ``P(||L_N - rho_bar|| >= tau)``."""
        return freedman_tail(rounds * self.tau, self.sigma2(rounds), self.R, self.dim)


def state_params(kind: str, size: int, r: int, eps: float, delta: float, tau: float | None = None) -> BoundParams:
    """Range/variance used for state tomography: ``R = d`` and ``2d`` (global) or ``3^n`` (local) per round."""
    if kind == "global":
        d = size
        var = 2 * d
    elif kind == "local":
        d = 2**size
        var = 3**size
    else:
        raise ValueError(f"kind must be 'global' or 'local', got {kind!r}")
    return BoundParams(d, float(d), float(var), tau if tau is not None else eps / (4 * r), eps, delta, r)


def process_params(kind: str, size: int, eps: float, delta: float) -> BoundParams:
    """Freedman inputs that reproduce the process sample-size formulas.

    The spectral threshold is ``eps / (2 d^2)`` so that the projected Choi
    error ``<= eps/d^2`` converts to diamond accuracy ``eps``. The local
    formula corresponds to ``R = d^2`` and per-round variance ``9^n``; the
    global one to per-round variance ``4 d^2`` and ``R = d^4``.
    """
    if kind == "global":
        d = size
        return BoundParams(d * d, float(d**4), float(4 * d * d), eps / (2 * d * d), eps, delta)
    if kind == "local":
        d = 2**size
        return BoundParams(d * d, float(d * d), float(9**size), eps / (2 * d * d), eps, delta)
    raise ValueError(f"kind must be 'global' or 'local', got {kind!r}")


def residual_mass(rho, r: int) -> float:
    """Sum of the ``d - r`` smallest eigenvalues of ``rho``."""
    lam = np.sort(np.linalg.eigvalsh(np.asarray(rho)))[::-1]
    if not 0 <= r <= lam.size:
        raise ValueError(f"rank r={r} outside [0, {lam.size}]")
    return float(max(lam[r:].sum(), 0.0)) if r < lam.size else 0.0


def norm_conversion(tau: float, r: int, rho_bar, rho_pls) -> float:
    """Trace-distance bound ``4 r tau + 2 min(Sigma_r(rho_bar), Sigma_r(rho_pls))``."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    return 4 * r * tau + 2 * min(residual_mass(rho_bar, r), residual_mass(rho_pls, r))


def best_rank(tau: float, rho_bar, rho_pls) -> tuple[int, float]:
    """Rank minimising :func:`norm_conversion`, with the bound it attains."""
    d = np.asarray(rho_bar).shape[0]
    bounds = [norm_conversion(tau, r, rho_bar, rho_pls) for r in range(1, d + 1)]
    i = int(np.argmin(bounds))
    return i + 1, bounds[i]


def linear_tail_global(eps: float, rounds: int, d: int) -> float:
    """``2d exp(-N eps^2 / (4 d (1 + eps/6)))``: global-design deviation bound at threshold ``eps``."""
    return float(min(1.0, 2 * d * math.exp(-rounds * eps**2 / (4 * d * (1 + eps / 6)))))
