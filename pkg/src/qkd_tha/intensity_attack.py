"""Key rates when the injected light also raises Alice's intensities.

Eve may scale each intensity by any factor in ``[1, kappa]``. The whole
interval can be covered by one overlap bound (``rate_round_dependent``), or
split into ``n_it`` sub-intervals, each analysed at its own lower end with
its own local factor; the key length is then the worst sub-interval.
"""
from __future__ import annotations

import math

from .channel_model import expected_statistics
from .config import ExperimentConfig
from .cs_bounds import DomainError, delta_intensity_tha
from .keyrate_bb84 import KeyRateResult, evaluate_bb84


def _check(cfg: ExperimentConfig, kappa: float, n_it: int = 1) -> None:
    if not kappa >= 1.0:
        raise DomainError(f"kappa must be >= 1, got {kappa}")
    if n_it < 1 or int(n_it) != n_it:
        raise DomainError(f"n_it must be a positive integer, got {n_it}")
    if cfg.i_max is None and cfg.delta is not None:
        raise DomainError("the intensity attack derives delta from i_max; set i_max instead of delta")


def subinterval_factor(kappa: float, n_it: int, k: int) -> float:
    """Local factor of sub-interval ``k``: ``(n_it + (k+1)(kappa-1)) / (n_it + k(kappa-1))``."""
    step = kappa - 1.0
    return (n_it + (k + 1) * step) / (n_it + k * step)


def subinterval_start(mu: float, kappa: float, n_it: int, k: int) -> float:
    """Lower end ``mu + k * mu (kappa - 1) / n_it`` of sub-interval ``k``."""
    return mu + k * (mu * (kappa - 1.0) / n_it)


def rate_round_dependent(cfg: ExperimentConfig, kappa: float | None = None) -> KeyRateResult:
    """One overlap bound covering every intensity in ``[mu, kappa * mu]``."""
    kappa = cfg.kappa if kappa is None else kappa
    _check(cfg, kappa)
    model = cfg.replace(kappa=kappa).tha_model
    return evaluate_bb84(cfg, delta=delta_intensity_tha(model))


def rate_worst_case_subintervals(
    cfg: ExperimentConfig,
    kappa: float | None = None,
    n_it: int = 16,
    *,
    resimulate: bool = False,
) -> KeyRateResult:
    """Smallest key length over ``n_it`` equal sub-intervals of ``[mu, kappa * mu]``.

    Each sub-interval runs the pipeline with every intensity moved to its
    lower end and the overlap bound of its local factor. Observed counts
    stay those of the nominal intensities unless ``resimulate`` is set, in
    which case they are recomputed at the shifted intensities.
    """
    kappa = cfg.kappa if kappa is None else kappa
    _check(cfg, kappa, n_it)
    model = cfg.replace(kappa=kappa).tha_model
    worst: KeyRateResult | None = None
    for k in range(n_it):
        mus = tuple(subinterval_start(mu, kappa, n_it, k) for mu in cfg.source.intensities)
        delta = delta_intensity_tha(model, mus, subinterval_factor(kappa, n_it, k))
        source = cfg.source.scaled(mus)
        obs = expected_statistics(cfg.channel, cfg.replace(source=source)) if resimulate else None
        result = evaluate_bb84(cfg, obs, source=source, delta=delta)
        if worst is None or result.l < worst.l:
            worst = result
    return worst


def telescoped_kappa(kappa: float, n_it: int) -> float:
    """Product of all local factors; equals ``kappa`` up to rounding."""
    return math.prod(subinterval_factor(kappa, n_it, k) for k in range(n_it))
