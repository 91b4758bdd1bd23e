"""Per-distance search over the free source parameters.

Free parameters are the two upper intensities, the Z-basis probability
(shared by Alice and Bob) and the probability of the signal intensity; the
weakest intensity is fixed and the two decoys share the remaining
probability equally.

The search runs in the unit cube: a coarse grid (cold start only), then
coordinate-wise golden-section passes. Points with no extractable key are
scored by their (negative) unclamped key length so the search can still
climb towards the positive region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .config import ExperimentConfig
from .decoy_lp import InfeasibleConstructionError, InfeasibleLPError, PoissonSource
from .intensity_attack import rate_round_dependent, rate_worst_case_subintervals
from .keyrate_bb84 import KeyRateResult, bb84_rate
from .keyrate_lt import lt_rate

PIPELINES = ("bb84", "lt", "intensity")
MU_WEAK = 1e-4
MU_MAX = 1.2
P_Z_RANGE = (0.5, 0.99)
P_MU0_RANGE = (0.1, 0.95)
# Keeps mu1 strictly inside (mu_weak, mu0).
EDGE = 1e-3
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
# Score when no single-photon detections can be certified; below any key fraction.
NO_SINGLE_PHOTONS = -1e6


@dataclass(frozen=True)
class SearchSettings:
    grid_points: int = 8
    tol: float = 1e-3
    max_passes: int = 4
    mu_weak: float = MU_WEAK
    n_it: int = 16
    # Infinite-key, infinite-decoy limit (test hook; see evaluate_bb84).
    asymptotic: bool = False

    def __post_init__(self):
        if self.grid_points < 1:
            raise ValueError("grid_points must be >= 1")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.mu_weak <= 0 or 10 * self.mu_weak >= MU_MAX:
            raise ValueError("mu_weak must be positive and well below the largest intensity")


@dataclass(frozen=True)
class FreeParameters:
    mu0: float
    mu1: float
    p_z: float
    p_mu0: float


@dataclass
class OptimizationResult:
    cfg: ExperimentConfig
    result: KeyRateResult
    params: FreeParameters
    unit: tuple[float, ...]
    evaluations: int


def decode(u: Sequence[float], mu_weak: float = MU_WEAK) -> FreeParameters:
    """Map a point of the unit cube to feasible free parameters."""
    u0, u1, u2, u3 = (min(max(float(v), 0.0), 1.0) for v in u)
    lo0 = 10.0 * mu_weak
    mu0 = lo0 + u0 * (MU_MAX - lo0)
    frac = EDGE + u1 * (1.0 - 2.0 * EDGE)
    mu1 = mu_weak + frac * (mu0 - mu_weak)
    p_z = P_Z_RANGE[0] + u2 * (P_Z_RANGE[1] - P_Z_RANGE[0])
    p_mu0 = P_MU0_RANGE[0] + u3 * (P_MU0_RANGE[1] - P_MU0_RANGE[0])
    return FreeParameters(mu0, mu1, p_z, p_mu0)


def apply_parameters(template: ExperimentConfig, params: FreeParameters, mu_weak: float = MU_WEAK) -> ExperimentConfig:
    rest = (1.0 - params.p_mu0) / 2.0
    source = PoissonSource(
        (params.mu0, params.mu1, mu_weak), (params.p_mu0, rest, 1.0 - params.p_mu0 - rest), template.source.n_cut
    )
    return template.replace(source=source, p_z_a=params.p_z, p_z_b=params.p_z)


def pipeline_function(pipeline: str, n_it: int = 16, asymptotic: bool = False) -> Callable[[ExperimentConfig], KeyRateResult]:
    if pipeline not in PIPELINES:
        raise ValueError(f"unknown pipeline {pipeline!r}; expected one of {PIPELINES}")
    if pipeline == "intensity":
        if asymptotic:
            raise ValueError("the asymptotic limit is only available for the bb84 and lt pipelines")
        if n_it == 1:
            return rate_round_dependent
        return lambda cfg: rate_worst_case_subintervals(cfg, cfg.kappa, n_it)
    rate = bb84_rate if pipeline == "bb84" else lt_rate
    if asymptotic:
        return lambda cfg: rate(cfg, finite_size=False, exact_decoy=True)
    return rate


def score(result: KeyRateResult | None) -> float:
    """Key rate where a key exists; otherwise the non-positive key fraction per single-photon count.

    Normalising the deficit by the single-photon count (rather than by the
    number of rounds) keeps weak-intensity corners from looking attractive.
    """
    if result is None:
        return -math.inf
    if result.l > 0:
        return result.rate
    if result.m1_lower <= 0:
        return NO_SINGLE_PHOTONS
    return min(result.l_raw / result.m1_lower, 0.0)


class _Objective:
    def __init__(self, template: ExperimentConfig, pipeline: str, settings: SearchSettings):
        self.template = template
        self.fn = pipeline_function(pipeline, settings.n_it, settings.asymptotic)
        self.settings = settings
        self.cache: dict[tuple[float, ...], tuple[float, KeyRateResult | None]] = {}

    def __call__(self, u: Sequence[float]) -> float:
        key = tuple(round(float(v), 12) for v in u)
        if key not in self.cache:
            cfg = apply_parameters(self.template, decode(key, self.settings.mu_weak), self.settings.mu_weak)
            try:
                result = self.fn(cfg)
            except (InfeasibleLPError, InfeasibleConstructionError):
                result = None
            self.cache[key] = (score(result), result)
        return self.cache[key][0]


def grid_points(n: int) -> np.ndarray:
    """Cell midpoints of an ``n``-cell partition of [0, 1]."""
    return (np.arange(n) + 0.5) / n


def _golden(f: Callable[[float], float], tol: float) -> tuple[float, float]:
    a, b = 0.0, 1.0
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _coordinate_search(obj: _Objective, start: Sequence[float], settings: SearchSettings) -> tuple[list[float], float]:
    best = list(start)
    best_val = obj(best)
    for _ in range(settings.max_passes):
        before = best_val
        for i in range(len(best)):

            def along(t, i=i):
                trial = list(best)
                trial[i] = t
                return obj(trial)

            t, val = _golden(along, settings.tol)
            if val > best_val:
                best[i], best_val = t, val
        if not best_val > before:
            break
    return best, best_val


def optimize(
    template: ExperimentConfig,
    pipeline: str = "bb84",
    *,
    settings: SearchSettings | None = None,
    start: Sequence[float] | None = None,
) -> OptimizationResult:
    """Maximise the key rate of ``pipeline`` over the free parameters.

    Without ``start`` a full grid seeds the search; with it (a unit-cube
    point, typically the optimum at a neighbouring distance) the grid is
    skipped.
    """
    settings = settings or SearchSettings()
    obj = _Objective(template, pipeline, settings)
    if start is None:
        axis = grid_points(settings.grid_points)
        seed, seed_val = None, -math.inf
        for u in np.array(np.meshgrid(axis, axis, axis, axis, indexing="ij")).reshape(4, -1).T:
            val = obj(u)
            if val > seed_val:
                seed, seed_val = list(u), val
        if seed is None:
            seed = [0.5, 0.5, 0.5, 0.5]
    else:
        seed = [float(v) for v in start]
    best, _ = _coordinate_search(obj, seed, settings)
    params = decode(best, settings.mu_weak)
    cfg = apply_parameters(template, params, settings.mu_weak)
    _, result = obj.cache[tuple(round(float(v), 12) for v in best)]
    if result is None:
        result = KeyRateResult(0.0, 0.0, 0.0, 0.0, 0.5, l_raw=-math.inf)
    return OptimizationResult(cfg, result, params, tuple(best), len(obj.cache))


def optimize_sweep(
    template: ExperimentConfig,
    distances: Iterable[float],
    pipeline: str = "bb84",
    *,
    settings: SearchSettings | None = None,
) -> list[OptimizationResult]:
    """Optimise at each distance in order, warm-starting from the previous optimum."""
    out: list[OptimizationResult] = []
    state = WarmStart()
    for d in distances:
        cfg = template.replace(channel=template.channel.at_distance(float(d)))
        out.append(state.optimize(cfg, pipeline, settings))
    return out


class WarmStart:
    """Carries the optimum from one distance to the next.

    If a warm start finds no key where the previous distance had one, the
    point is retried once from a cold grid at half the resolution; after
    that retry also fails, later distances are only warm-started.
    """

    def __init__(self):
        self.start: tuple[float, ...] | None = None
        self.had_key = False

    def optimize(self, cfg: ExperimentConfig, pipeline: str, settings: SearchSettings | None) -> OptimizationResult:
        res = optimize(cfg, pipeline, settings=settings, start=self.start)
        if self.start is not None and self.had_key and res.result.l <= 0:
            base = settings or SearchSettings()
            coarse = replace(base, grid_points=max(2, base.grid_points // 2))
            cold = optimize(cfg, pipeline, settings=coarse)
            res = cold if score(cold.result) > score(res.result) else res
        self.start = res.unit
        self.had_key = res.result.l > 0
        return res
