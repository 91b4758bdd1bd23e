"""Cauchy-Schwarz bounds tying actual and reference-state probabilities.

If two states have overlap at least ``delta``, any measurement outcome with
probability ``p`` on one state has probability ``p1`` on the other with::

    sqrt(p1 * p) + sqrt((1 - p1) * (1 - p)) >= delta

The feasible ``p1`` form an interval ``[G_lower(delta, p), G_upper(delta, p)]``.
This module also computes ``delta`` for the Trojan-horse models we support,
taking the vacuum as the reference state of the back-reflected mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

PROB_SLACK = 1e-12


class DomainError(ValueError):
    pass


def _prob(p: float, name: str = "p") -> float:
    if not (-PROB_SLACK <= p <= 1.0 + PROB_SLACK):
        raise DomainError(f"{name} must lie in [0, 1], got {p}")
    return min(max(p, 0.0), 1.0)


def _delta(delta: float) -> float:
    return _prob(delta, "delta")


@dataclass(frozen=True)
class ThaModel:
    """Trojan-horse adversary and the source it attacks.

    ``i_max`` bounds the intensity of the back-reflected light in photon
    number units; ``kappa`` bounds the factor by which the injected light
    may raise Alice's intensities.
    """

    i_max: float
    intensities: tuple[float, ...]
    intensity_probs: tuple[float, ...]
    kappa: float = 1.0

    def __post_init__(self):
        if self.i_max < 0:
            raise DomainError(f"i_max must be >= 0, got {self.i_max}")
        if self.kappa < 1:
            raise DomainError(f"kappa must be >= 1, got {self.kappa}")
        if len(self.intensities) != len(self.intensity_probs):
            raise DomainError("intensities and intensity_probs differ in length")
        if any(mu < 0 for mu in self.intensities):
            raise DomainError("intensities must be non-negative")
        if abs(sum(self.intensity_probs) - 1.0) > 1e-12:
            raise DomainError("intensity_probs must sum to 1")


def g_pm(delta: float, p: float, sign: int) -> float:
    """The two roots ``g^+`` (``sign=+1``) and ``g^-`` (``sign=-1``) of the CS equality."""
    d = _delta(delta)
    p = _prob(p)
    if sign not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign}")
    one_m = 1.0 - d * d
    return p + one_m * (1.0 - 2.0 * p) + sign * 2.0 * d * math.sqrt(one_m * p * (1.0 - p))


def G_upper(delta: float, p: float) -> float:
    d = _delta(delta)
    p = _prob(p)
    if p < d * d:
        return min(g_pm(d, p, +1), 1.0)
    return 1.0


def G_lower(delta: float, p: float) -> float:
    d = _delta(delta)
    p = _prob(p)
    if p > 1.0 - d * d:
        return max(g_pm(d, p, -1), 0.0)
    return 0.0


def delta_coherent_tha(model: ThaModel) -> float:
    """Worst-case overlap when Eve's back-reflection is a coherent state of intensity <= ``i_max``."""
    return math.exp(-model.i_max / 2.0)


def delta_intensity_tha(
    model: ThaModel,
    mu_low: Sequence[float] | None = None,
    kappa_local: float | None = None,
) -> float:
    """Overlap bound when the attack also scales each intensity by up to ``kappa``.

    ``mu_low`` and ``kappa_local`` replace the model's intensities and
    ``kappa`` when the bound is evaluated on a sub-interval
    ``[mu_k, kappa_k * mu_k]``.
    """
    mus = model.intensities if mu_low is None else tuple(mu_low)
    kappa = model.kappa if kappa_local is None else kappa_local
    if kappa < 1:
        raise DomainError(f"kappa must be >= 1, got {kappa}")
    if len(mus) != len(model.intensity_probs):
        raise DomainError("mu_low must have one entry per intensity")
    # (1 + k - 2 sqrt k) written as (sqrt k - 1)^2 to avoid cancellation.
    shift = (math.sqrt(kappa) - 1.0) ** 2
    probs = model.intensity_probs
    weighted = math.fsum(p * math.exp(-shift * mu / 2.0) for p, mu in zip(probs, mus))
    # Dividing by sum(probs) (== 1) makes kappa == 1 reproduce exp(-i_max/2) exactly.
    return math.exp(-model.i_max / 2.0) * (weighted / math.fsum(probs))
