"""Finite-key secret-key rate of decoy-state BB84 under leaky sources.

Pipeline for one evaluation:

1. Z-basis counts per intensity -> bounds on the averaged actual gains
   (concentration), then on the reference gains (Cauchy-Schwarz).
2. Decoy LP -> lower bound on the averaged reference single-photon yield.
3. Back through Cauchy-Schwarz and a concentration bound to a lower bound
   on the number of detected single-photon Z rounds.
4. Same for X-basis error counts -> upper bound on single-photon phase errors.
5. Key length from the two bounds.

Exactly ``BB84_APPLICATIONS`` concentration bounds are applied; the count
is checked at runtime against the epsilon budget.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import concentration as kato
from .channel_model import ObservedStatistics, expected_statistics, photon_error, photon_yield
from .config import BB84_APPLICATIONS, ExperimentConfig
from .cs_bounds import G_lower, G_upper
from .decoy_lp import GainBounds, PoissonSource, build_error_lp, build_yield_lp, p_n, solve_lp


class EpsilonAccountingError(AssertionError):
    pass


@dataclass
class KeyRateResult:
    l: float
    rate: float
    m1_lower: float
    mph1_upper: float
    eph_upper: float
    lp_values: dict[str, float] = field(default_factory=dict)
    n_applications: int = 0
    # Key length before flooring and clamping at zero; guides the optimizer
    # through regions where no key can be extracted.
    l_raw: float = 0.0


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


class KatoLedger:
    """Applies concentration bounds at a fixed epsilon and counts them.

    With ``finite_size=False`` every bound returns its argument unchanged
    (the infinite-key limit) but is still counted.
    """

    def __init__(self, n_total: float, epsilon: float, finite_size: bool = True):
        self.n = float(n_total)
        self.epsilon = epsilon
        self.finite_size = finite_size
        self.count = 0

    def _query(self, prediction: float) -> kato.BoundQuery:
        return kato.BoundQuery(self.n, self.epsilon, min(max(prediction, 0.0), self.n))

    def _apply(self, fn, x: float, prediction: float) -> float:
        self.count += 1
        x = min(max(x, 0.0), self.n)
        if not self.finite_size or self.n == 0:
            return x
        return fn(self._query(prediction), x)

    def sum_lower(self, count, prediction):
        return self._apply(kato.sum_lower, count, prediction)

    def sum_upper(self, count, prediction):
        return self._apply(kato.sum_upper, count, prediction)

    def count_lower(self, s, prediction):
        return self._apply(kato.count_lower, s, prediction)

    def count_upper(self, s, prediction):
        return self._apply(kato.count_upper, s, prediction)


def reference_gain_bounds(
    ledger: KatoLedger, delta: float, counts, predictions
) -> GainBounds:
    """Per-intensity bounds on averaged reference gains from observed counts."""
    n = ledger.n
    lower, upper = [], []
    for count, pred in zip(counts, predictions):
        lo = ledger.sum_lower(count, pred) / n if n else 0.0
        hi = ledger.sum_upper(count, pred) / n if n else 0.0
        lower.append(G_lower(delta, lo))
        upper.append(G_upper(delta, hi))
    return GainBounds(tuple(lower), tuple(upper))


def _m1_lower(cfg, obs, ledger, delta, source, predictions, diag, exact_decoy=False):
    n = ledger.n
    gains = reference_gain_bounds(ledger, delta, obs.m_z_mu, predictions.m_z_mu)
    if exact_decoy:
        y1 = photon_yield(cfg.channel, 1)
    else:
        y1, _ = solve_lp(build_yield_lp(source, gains, (cfg.p_z_a, cfg.p_z_b)))
    diag["y1_lower"] = y1
    avg_y1_ref = p_n(source, 1) * cfg.p_z_a * cfg.p_z_b * y1
    pred = n * p_n(cfg.source, 1) * cfg.p_z_a * cfg.p_z_b * photon_yield(cfg.channel, 1)
    return ledger.count_lower(n * G_lower(delta, avg_y1_ref), pred)


def _mph1_upper(cfg, obs, ledger, delta, source, predictions, diag, exact_decoy=False):
    n = ledger.n
    pxa, pxb = 1.0 - cfg.p_z_a, 1.0 - cfg.p_z_b
    gains = reference_gain_bounds(ledger, delta, obs.e_x_mu, predictions.e_x_mu)
    if exact_decoy:
        gamma_bar = photon_error(cfg.channel, 1, "X")
    else:
        gamma_bar, _ = solve_lp(build_error_lp(source, gains, (pxa, pxb)))
    diag["gamma_x1_upper"] = gamma_bar
    # X-basis single-photon error probability, mapped to Z-basis phase errors
    # by the basis-probability ratio.
    avg_gamma_x1 = p_n(source, 1) * pxa * pxb * gamma_bar
    avg_phase = min(avg_gamma_x1 * (cfg.p_z_a * cfg.p_z_b) / (pxa * pxb), 1.0)
    pred = n * p_n(cfg.source, 1) * cfg.p_z_a * cfg.p_z_b * photon_error(cfg.channel, 1, "X")
    return ledger.count_upper(n * G_upper(delta, avg_phase), pred)


def _predictions(cfg: ExperimentConfig) -> ObservedStatistics:
    return expected_statistics(cfg.channel, cfg)


def estimate_m1_lower(
    cfg: ExperimentConfig,
    obs: ObservedStatistics,
    *,
    finite_size: bool = True,
    ledger: KatoLedger | None = None,
    source: PoissonSource | None = None,
) -> float:
    """Lower bound on detected single-photon Z-basis rounds."""
    ledger = ledger or KatoLedger(cfg.n_total, cfg.budget.eps_kato, finite_size)
    return _m1_lower(cfg, obs, ledger, cfg.effective_delta, source or cfg.source, _predictions(cfg), {})


def estimate_mph1_upper(
    cfg: ExperimentConfig,
    obs: ObservedStatistics,
    *,
    finite_size: bool = True,
    ledger: KatoLedger | None = None,
    source: PoissonSource | None = None,
) -> float:
    """Upper bound on single-photon phase errors in the Z-basis key rounds."""
    ledger = ledger or KatoLedger(cfg.n_total, cfg.budget.eps_kato, finite_size)
    return _mph1_upper(cfg, obs, ledger, cfg.effective_delta, source or cfg.source, _predictions(cfg), {})


def key_length(
    cfg: ExperimentConfig, m1_lower: float, mph1_upper: float, obs: ObservedStatistics
) -> KeyRateResult:
    """Secret key length from the single-photon bounds; clamped at zero and floored."""
    b = cfg.budget
    m1 = max(m1_lower, 0.0)
    eph = min(max(mph1_upper / m1, 0.0), 0.5) if m1 > 0.0 else 0.5
    leak_ec = obs.m_z * cfg.f_e * binary_entropy(min(max(obs.e_z_rate, 0.0), 1.0))
    l_raw = (
        m1 * (1.0 - binary_entropy(eph))
        - leak_ec
        - math.log2(1.0 / b.eps_c)
        - 2.0 * math.log2(1.0 / b.eps_2)
        - 1.0
        - math.log2(1.0 / (4.0 * b.eps_pa))
    )
    l = float(math.floor(l_raw)) if l_raw > 0 else 0.0
    rate = l / cfg.n_total if cfg.n_total > 0 else 0.0
    return KeyRateResult(l, rate, m1, mph1_upper, eph, l_raw=l_raw)


def evaluate_bb84(
    cfg: ExperimentConfig,
    obs: ObservedStatistics | None = None,
    *,
    finite_size: bool = True,
    source: PoissonSource | None = None,
    delta: float | None = None,
    exact_decoy: bool = False,
) -> KeyRateResult:
    """Run the full BB84 estimation.

    ``source`` and ``delta`` override the analysis-side intensities and
    overlap while observations and Kato predictions stay those of ``cfg``.
    ``exact_decoy`` replaces the decoy LPs by the channel model's true
    single-photon yield and error (the infinite-decoy limit); it is a test
    hook, not a security statement.
    """
    if cfg.budget.n_applications != BB84_APPLICATIONS:
        raise EpsilonAccountingError(
            f"BB84 budget must split varepsilon over {BB84_APPLICATIONS} bounds, got {cfg.budget.n_applications}"
        )
    obs = obs if obs is not None else expected_statistics(cfg.channel, cfg)
    if cfg.n_total == 0:
        return KeyRateResult(0.0, 0.0, 0.0, 0.0, 0.5, n_applications=BB84_APPLICATIONS)
    delta = cfg.effective_delta if delta is None else delta
    source = source or cfg.source
    predictions = _predictions(cfg)
    ledger = KatoLedger(cfg.n_total, cfg.budget.eps_kato, finite_size)
    diag: dict[str, float] = {}
    m1 = _m1_lower(cfg, obs, ledger, delta, source, predictions, diag, exact_decoy)
    mph = _mph1_upper(cfg, obs, ledger, delta, source, predictions, diag, exact_decoy)
    if ledger.count != cfg.budget.n_applications:
        raise EpsilonAccountingError(f"applied {ledger.count} concentration bounds, budget allows {cfg.budget.n_applications}")
    result = key_length(cfg, m1, mph, obs)
    result.lp_values = diag
    result.n_applications = ledger.count
    return result


def bb84_rate(cfg: ExperimentConfig, *, finite_size: bool = True, exact_decoy: bool = False) -> KeyRateResult:
    """Key rate of ``cfg`` evaluated on its expected channel statistics."""
    return evaluate_bb84(cfg, finite_size=finite_size, exact_decoy=exact_decoy)
