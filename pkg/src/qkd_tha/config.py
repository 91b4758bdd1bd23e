"""Scenario and security-parameter containers shared by the pipelines."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .channel_model import ChannelParams
from .cs_bounds import ThaModel, delta_coherent_tha
from .decoy_lp import PoissonSource

BB84_APPLICATIONS = 14
LT_APPLICATIONS = 32


@dataclass(frozen=True)
class EpsilonBudget:
    """Failure probabilities of one key-rate evaluation.

    ``eps_kato`` is the failure probability of each of the
    ``n_applications`` concentration bounds; they share ``varepsilon``,
    the probability that the phase-error bound fails.
    """

    eps_s: float
    eps_c: float
    eps_2: float
    eps_pa: float
    varepsilon: float
    n_applications: int

    @property
    def eps_kato(self) -> float:
        return self.varepsilon / self.n_applications

    def composed_secrecy(self) -> float:
        return self.eps_2 + self.eps_pa + 2.0 * math.sqrt(self.varepsilon)

    @classmethod
    def from_secrecy(cls, eps_s: float = 1e-10, eps_c: float = 1e-10, n_applications: int = BB84_APPLICATIONS):
        """Even split: ``eps_2 = eps_pa = eps_s/3`` and ``varepsilon = (eps_s/6)^2``."""
        return cls(eps_s, eps_c, eps_s / 3.0, eps_s / 3.0, (eps_s / 6.0) ** 2, n_applications)

    def with_applications(self, n_applications: int) -> "EpsilonBudget":
        return replace(self, n_applications=n_applications)


def default_source() -> PoissonSource:
    return PoissonSource((0.5, 0.1, 1e-4), (0.5, 0.25, 0.25))


@dataclass(frozen=True)
class ExperimentConfig:
    """Physical, protocol and adversary parameters of one scenario.

    Either ``delta`` is given directly or it is derived from ``i_max``
    (coherent back-reflection, vacuum reference). ``kappa`` is only used by
    the intensity-modifying attack.
    """

    n_total: float = 1e10
    channel: ChannelParams = field(default_factory=ChannelParams)
    source: PoissonSource = field(default_factory=default_source)
    p_z_a: float = 0.9
    p_z_b: float = 0.9
    delta: float | None = None
    i_max: float | None = None
    kappa: float = 1.0
    f_e: float = 1.2
    budget: EpsilonBudget = field(default_factory=EpsilonBudget.from_secrecy)

    def __post_init__(self):
        for name in ("p_z_a", "p_z_b"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.n_total < 0:
            raise ValueError(f"n_total must be >= 0, got {self.n_total}")
        if self.delta is not None and not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if self.i_max is not None and self.i_max < 0:
            raise ValueError(f"i_max must be >= 0, got {self.i_max}")
        if self.kappa < 1.0:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")
        if self.f_e < 1.0:
            raise ValueError(f"f_e must be >= 1, got {self.f_e}")

    @property
    def tha_model(self) -> ThaModel:
        return ThaModel(self.i_max or 0.0, self.source.intensities, self.source.intensity_probs, self.kappa)

    @property
    def effective_delta(self) -> float:
        if self.delta is not None:
            return self.delta
        if self.i_max is not None:
            return delta_coherent_tha(self.tha_model)
        return 1.0

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)
