"""Decoy-state linear programs for reference-state yields and error terms.

All three builders share one shape. The variables are averaged conditional
quantities ``y_n`` for photon numbers ``n = 0..n_cut``, each in ``[0, 1]``.
For every intensity ``mu`` there is one two-sided row::

    gain_lo(mu) / norm(mu) - Lambda_mu <= sum_n p(n|mu) y_n <= gain_hi(mu) / norm(mu)

where ``norm(mu)`` is ``p_mu`` times the setting/basis probabilities and
``Lambda_mu`` is the Poisson mass above ``n_cut``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammainc

from . import simplex
from .simplex import InfeasibleLPError

DEFAULT_N_CUT = 12


class DomainError(ValueError):
    pass


class InfeasibleConstructionError(ValueError):
    pass


@dataclass(frozen=True)
class PoissonSource:
    intensities: tuple[float, ...]
    intensity_probs: tuple[float, ...]
    n_cut: int = DEFAULT_N_CUT

    def __post_init__(self):
        object.__setattr__(self, "intensities", tuple(float(m) for m in self.intensities))
        object.__setattr__(self, "intensity_probs", tuple(float(p) for p in self.intensity_probs))
        if len(self.intensities) != len(self.intensity_probs) or not self.intensities:
            raise DomainError("need one probability per intensity")
        if any(mu < 0 for mu in self.intensities):
            raise DomainError("intensities must be non-negative")
        if any(b >= a for a, b in zip(self.intensities, self.intensities[1:])):
            raise DomainError("intensities must be strictly decreasing")
        if any(p < 0 for p in self.intensity_probs) or abs(sum(self.intensity_probs) - 1) > 1e-12:
            raise DomainError("intensity_probs must be a probability vector")
        if self.n_cut < 1:
            raise DomainError(f"n_cut must be >= 1, got {self.n_cut}")

    def scaled(self, intensities: Sequence[float]) -> "PoissonSource":
        return PoissonSource(tuple(intensities), self.intensity_probs, self.n_cut)


@dataclass(frozen=True)
class GainBounds:
    """Per-intensity bounds on an averaged reference gain, in probability units."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise DomainError("lower and upper differ in length")
        for lo, hi in zip(self.lower, self.upper):
            if not (0.0 <= lo <= hi <= 1.0):
                raise DomainError(f"gain bounds must satisfy 0 <= lo <= hi <= 1, got ({lo}, {hi})")


@dataclass
class LinearProgram:
    objective: np.ndarray
    sense: str
    constraints: list[tuple[np.ndarray, float, float]] = field(default_factory=list)
    var_bounds: list[tuple[float, float]] | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        if self.var_bounds is None:
            self.var_bounds = [(0.0, 1.0)] * self.objective.size
        if len(self.var_bounds) != self.objective.size:
            raise ValueError("var_bounds length does not match objective")
        for coeffs, lo, hi in self.constraints:
            if np.asarray(coeffs).size != self.objective.size:
                raise ValueError("constraint length does not match objective")


def poisson_pnmu(mu: float, n: int) -> float:
    """``e^-mu mu^n / n!``, evaluated in log space."""
    if mu < 0 or n < 0:
        raise DomainError(f"need mu >= 0 and n >= 0, got mu={mu}, n={n}")
    if mu == 0:
        return 1.0 if n == 0 else 0.0
    return math.exp(-mu + n * math.log(mu) - math.lgamma(n + 1))


def lambda_mu(mu: float, n_cut: int) -> float:
    """Poisson tail mass ``1 - sum_{n<=n_cut} p(n|mu)``."""
    if mu < 0 or n_cut < 0:
        raise DomainError(f"need mu >= 0 and n_cut >= 0, got mu={mu}, n_cut={n_cut}")
    if mu == 0:
        return 0.0
    # P(n > n_cut) is the regularised lower incomplete gamma P(n_cut + 1, mu);
    # this avoids the cancellation in 1 - sum for small mu.
    return min(max(float(gammainc(n_cut + 1, mu)), 0.0), 1.0)


def p_n(source: PoissonSource, n: int) -> float:
    """Photon-number distribution of the intensity mixture."""
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    return math.fsum(p * poisson_pnmu(mu, n) for mu, p in zip(source.intensities, source.intensity_probs))


def _rows(source: PoissonSource, gains: GainBounds, norms: Sequence[float]):
    if len(gains.lower) != len(source.intensities):
        raise InfeasibleConstructionError("gain bounds missing for some intensity")
    rows = []
    for mu, norm, g_lo, g_hi in zip(source.intensities, norms, gains.lower, gains.upper):
        coeffs = np.array([poisson_pnmu(mu, n) for n in range(source.n_cut + 1)])
        lo = min(max(g_lo / norm - lambda_mu(mu, source.n_cut), 0.0), 1.0)
        hi = min(max(g_hi / norm, 0.0), 1.0)
        if lo > hi:
            raise InfeasibleConstructionError(f"constraint at mu={mu} has lower {lo} > upper {hi}")
        rows.append((coeffs, lo, hi))
    return rows


def _target(source: PoissonSource, n: int = 1) -> np.ndarray:
    c = np.zeros(source.n_cut + 1)
    c[n] = 1.0
    return c


def build_yield_lp(source: PoissonSource, gains: GainBounds, basis_probs: tuple[float, float]) -> LinearProgram:
    """Minimise the averaged single-photon yield given Z-basis gain bounds."""
    pa, pb = basis_probs
    norms = [p_mu * pa * pb for p_mu in source.intensity_probs]
    return LinearProgram(_target(source), "min", _rows(source, gains, norms))


def build_error_lp(
    source: PoissonSource, error_gain_bounds: GainBounds, basis_probs: tuple[float, float]
) -> LinearProgram:
    """Maximise the averaged single-photon X-basis bit-error probability."""
    pa, pb = basis_probs
    norms = [p_mu * pa * pb for p_mu in source.intensity_probs]
    return LinearProgram(_target(source), "max", _rows(source, error_gain_bounds, norms))


def build_lt_yield_lp(
    source: PoissonSource,
    gain_bounds_ab: GainBounds,
    setting_probs: tuple[float, float],
    sense: str,
) -> LinearProgram:
    """Bound the single-photon yield of one (setting, X outcome) pair of the three-state protocol."""
    p_a, p_xb = setting_probs
    norms = [p_a * p_xb * p_mu for p_mu in source.intensity_probs]
    return LinearProgram(_target(source), sense, _rows(source, gain_bounds_ab, norms))


def solve_lp(lp: LinearProgram) -> tuple[float, np.ndarray]:
    """Solve ``lp`` with the embedded simplex; raises InfeasibleLPError."""
    m = len(lp.constraints)
    n = lp.objective.size
    A = np.array([np.asarray(c, dtype=float) for c, _, _ in lp.constraints]).reshape(m, n)
    lo = np.array([c[1] for c in lp.constraints], dtype=float)
    hi = np.array([c[2] for c in lp.constraints], dtype=float)
    vlo = np.array([b[0] for b in lp.var_bounds], dtype=float)
    vhi = np.array([b[1] for b in lp.var_bounds], dtype=float)
    return simplex.solve(lp.objective, A, lo, hi, vlo, vhi, maximize=lp.sense == "max")


__all__ = [
    "DEFAULT_N_CUT",
    "DomainError",
    "GainBounds",
    "InfeasibleConstructionError",
    "InfeasibleLPError",
    "LinearProgram",
    "PoissonSource",
    "build_error_lp",
    "build_lt_yield_lp",
    "build_yield_lp",
    "lambda_mu",
    "p_n",
    "poisson_pnmu",
    "solve_lp",
]
