"""Honest polarization-encoded channel with loss, misalignment and dark counts.

Alice sends a coherent pulse with polarization angle ``phi_a``; the channel
rotates it by ``phi_mis`` and attenuates it by ``eta``; Bob splits it on a
PBS onto two threshold detectors with dark-count probability ``p_d``.
Double clicks are re-assigned to either outcome with probability 1/2.

An X-basis measurement is the Z-basis one applied to the pulse rotated by
-pi/4 in polarization (a quarter turn on the Bloch sphere), so the same
formulas serve both bases.

All outcome probabilities here are joint ``P(click with outcome b)``,
never conditioned on a click.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SETTING_ANGLES = {"0Z": 0.0, "1Z": math.pi / 2, "0X": math.pi / 4, "1X": 3 * math.pi / 4}
BASES = ("Z", "X")


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelParams:
    p_d: float = 7.2e-8
    eta_d: float = 0.65
    alpha_db: float = 0.2
    distance_km: float = 0.0
    phi_mis: float = math.radians(6.0)

    def __post_init__(self):
        if not 0.0 <= self.p_d < 1.0:
            raise DomainError(f"p_d must lie in [0, 1), got {self.p_d}")
        if not 0.0 < self.eta_d <= 1.0:
            raise DomainError(f"eta_d must lie in (0, 1], got {self.eta_d}")
        if self.alpha_db < 0 or self.distance_km < 0:
            raise DomainError("alpha_db and distance_km must be non-negative")

    @property
    def eta(self) -> float:
        """Overall transmittance: detector efficiency times fiber transmittance."""
        return self.eta_d * 10.0 ** (-self.alpha_db * self.distance_km / 10.0)

    def at_distance(self, distance_km: float) -> "ChannelParams":
        return ChannelParams(self.p_d, self.eta_d, self.alpha_db, distance_km, self.phi_mis)


@dataclass(frozen=True)
class ObservedStatistics:
    """Counts observed (or expected) over ``n_total`` rounds.

    Per-intensity tuples follow the source's intensity order. ``m_abmu``
    maps ``(a, b)`` with ``a`` in {0Z, 1Z, 0X} and ``b`` in {0X, 1X} to the
    per-intensity counts of the three-state protocol.
    """

    n_total: float
    m_z_mu: tuple[float, ...]
    e_x_mu: tuple[float, ...]
    m_z: float
    e_z_rate: float
    e_z_mu: tuple[float, ...] = ()
    m_abmu: dict[tuple[str, str], tuple[float, ...]] = field(default_factory=dict)


def _check_mu(mu: float) -> None:
    if not mu >= 0.0:
        raise DomainError(f"mu must be >= 0, got {mu}")


def gain(ch: ChannelParams, mu: float) -> float:
    """Click probability ``1 - (1 - p_d)^2 exp(-mu eta)``."""
    _check_mu(mu)
    return 1.0 - (1.0 - ch.p_d) ** 2 * math.exp(-mu * ch.eta)


def _angle(ch: ChannelParams, a: str, bob_basis: str) -> float:
    if a not in SETTING_ANGLES:
        raise DomainError(f"unknown setting {a!r}")
    if bob_basis not in BASES:
        raise DomainError(f"unknown basis {bob_basis!r}")
    phi = SETTING_ANGLES[a] + ch.phi_mis
    return phi - math.pi / 4 if bob_basis == "X" else phi


def _split(none_0: float, none_1: float, none_both: float, p_d: float) -> tuple[float, float]:
    # none_k: probability that no signal photon reaches detector k.
    q = 1.0 - p_d
    only_0 = q * (none_1 - q * none_both)
    only_1 = q * (none_0 - q * none_both)
    # For Poisson light none_both == none_0 * none_1 and this equals the usual
    # (1-n0)(1-n1) + p_d(n0+n1-2nb) + p_d^2 nb; the general form also covers
    # fixed photon numbers.
    double = 1.0 - q * none_0 - q * none_1 + q * q * none_both
    return only_0 + double / 2.0, only_1 + double / 2.0


def outcome_prob(ch: ChannelParams, a: str, mu: float, bob_basis: str, b: int) -> float:
    """Probability that Bob, measuring ``bob_basis``, records outcome ``b``."""
    _check_mu(mu)
    if b not in (0, 1):
        raise DomainError(f"outcome must be 0 or 1, got {b}")
    phi = _angle(ch, a, bob_basis)
    em = ch.eta * mu
    # Detector 0 receives cos^2 of the pulse, detector 1 sin^2.
    p0, p1 = _split(math.exp(-em * math.cos(phi) ** 2), math.exp(-em * math.sin(phi) ** 2), math.exp(-em), ch.p_d)
    return p0 if b == 0 else p1


def photon_outcome_prob(ch: ChannelParams, a: str, n: int, bob_basis: str, b: int) -> float:
    """Outcome probability conditioned on Alice emitting exactly ``n`` photons."""
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    if b not in (0, 1):
        raise DomainError(f"outcome must be 0 or 1, got {b}")
    phi = _angle(ch, a, bob_basis)
    eta = ch.eta
    c2 = math.cos(phi) ** 2
    p0, p1 = _split((1.0 - eta * c2) ** n, (1.0 - eta * (1.0 - c2)) ** n, (1.0 - eta) ** n, ch.p_d)
    return p0 if b == 0 else p1


def photon_yield(ch: ChannelParams, n: int) -> float:
    """Click probability given an ``n``-photon emission."""
    return 1.0 - (1.0 - ch.p_d) ** 2 * (1.0 - ch.eta) ** n


def photon_error(ch: ChannelParams, n: int, basis: str = "X") -> float:
    """Bit-error probability (joint with a click) given an ``n``-photon emission."""
    zero, one = ("0Z", "1Z") if basis == "Z" else ("0X", "1X")
    return (photon_outcome_prob(ch, zero, n, basis, 1) + photon_outcome_prob(ch, one, n, basis, 0)) / 2.0


def error_rate(ch: ChannelParams, mu: float, basis: str = "Z") -> float:
    """Bit-error probability ``e_{basis,mu}`` (joint with a click)."""
    if basis not in BASES:
        raise DomainError(f"unknown basis {basis!r}")
    zero, one = ("0Z", "1Z") if basis == "Z" else ("0X", "1X")
    return (outcome_prob(ch, zero, mu, basis, 1) + outcome_prob(ch, one, mu, basis, 0)) / 2.0


LT_SETTINGS = ("0Z", "1Z", "0X")
LT_OUTCOMES = ("0X", "1X")


def expected_statistics(ch: ChannelParams, cfg) -> ObservedStatistics:
    """Expected-value counts for ``cfg`` (an :class:`~qkd_tha.config.ExperimentConfig`)."""
    n_total = cfg.n_total
    mus = cfg.source.intensities
    pmus = cfg.source.intensity_probs
    pza, pzb = cfg.p_z_a, cfg.p_z_b
    pxa, pxb = 1.0 - pza, 1.0 - pzb
    m_z_mu = tuple(n_total * pza * pzb * pm * gain(ch, mu) for mu, pm in zip(mus, pmus))
    e_z_mu = tuple(n_total * pza * pzb * pm * error_rate(ch, mu, "Z") for mu, pm in zip(mus, pmus))
    e_x_mu = tuple(n_total * pxa * pxb * pm * error_rate(ch, mu, "X") for mu, pm in zip(mus, pmus))
    m_z = math.fsum(m_z_mu)
    e_z = math.fsum(e_z_mu) / m_z if m_z > 0 else 0.0
    lt_probs = lt_setting_probs(pza)
    m_abmu = {
        (a, b): tuple(
            n_total * pm * lt_probs[a] * pxb * outcome_prob(ch, a, mu, "X", int(b[0])) for mu, pm in zip(mus, pmus)
        )
        for a in LT_SETTINGS
        for b in LT_OUTCOMES
    }
    return ObservedStatistics(n_total, m_z_mu, e_x_mu, m_z, e_z, e_z_mu, m_abmu)


def lt_setting_probs(p_z_a: float) -> dict[str, float]:
    return {"0Z": p_z_a / 2.0, "1Z": p_z_a / 2.0, "0X": 1.0 - p_z_a}


def sample_statistics(ch: ChannelParams, cfg, rng: np.random.Generator) -> ObservedStatistics:
    """One Monte-Carlo realisation of the BB84 statistics (multinomial draw)."""
    mus = cfg.source.intensities
    pmus = cfg.source.intensity_probs
    pza, pzb = cfg.p_z_a, cfg.p_z_b
    settings = {"0Z": pza / 2, "1Z": pza / 2, "0X": (1 - pza) / 2, "1X": (1 - pza) / 2}
    bob = {"Z": pzb, "X": 1 - pzb}
    labels, probs = [], []
    for i, (mu, pm) in enumerate(zip(mus, pmus)):
        for a, pa in settings.items():
            for basis, pb in bob.items():
                for b in (0, 1):
                    labels.append((i, a, basis, b))
                    probs.append(pm * pa * pb * outcome_prob(ch, a, mu, basis, b))
    probs.append(max(0.0, 1.0 - math.fsum(probs)))
    counts = rng.multinomial(int(cfg.n_total), np.array(probs) / math.fsum(probs))
    k = len(mus)
    m_z_mu, e_z_mu, e_x_mu = [0.0] * k, [0.0] * k, [0.0] * k
    for (i, a, basis, b), c in zip(labels, counts[:-1]):
        if a[1] != basis:
            continue
        if basis == "Z":
            m_z_mu[i] += c
        if int(a[0]) != b:
            (e_z_mu if basis == "Z" else e_x_mu)[i] += c
    m_z = math.fsum(m_z_mu)
    return ObservedStatistics(
        float(cfg.n_total), tuple(m_z_mu), tuple(e_x_mu), m_z, math.fsum(e_z_mu) / m_z if m_z else 0.0, tuple(e_z_mu)
    )
