"""Three-state loss-tolerant protocol with decoy states.

The single-photon count is estimated exactly as for BB84. Phase errors are
bounded through the single-photon X-basis yields of the three sent states:
the detection operator for each X outcome restricted to one photon is a
qubit operator, so three yields fix it (up to a sigma_y part the states in
the x-z plane cannot see), and the phase-error probability of the virtual
X-basis states is a signed linear combination of those yields.

Each yield with a non-zero coefficient is bounded by its own decoy LP,
maximised when its coefficient is positive and minimised otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel_model import LT_OUTCOMES, LT_SETTINGS, ObservedStatistics, expected_statistics, lt_setting_probs
from .channel_model import photon_error, photon_outcome_prob
from .config import LT_APPLICATIONS, ExperimentConfig
from .cs_bounds import G_upper
from .decoy_lp import PoissonSource, build_lt_yield_lp, p_n, solve_lp
from .keyrate_bb84 import EpsilonAccountingError, KatoLedger, KeyRateResult, _m1_lower, key_length, reference_gain_bounds

# Bloch angles (x-z plane, measured from +z) of the ideal three states.
IDEAL_STATES = {"0Z": 0.0, "1Z": math.pi, "0X": math.pi / 2}

COEFF_TOL = 1e-12


@dataclass(frozen=True)
class LtYieldEstimate:
    """Bounds on averaged single-photon reference yields, keyed by (setting, X outcome)."""

    lower: dict[tuple[str, str], float] = field(default_factory=dict)
    upper: dict[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        for key, lo in self.lower.items():
            hi = self.upper.get(key, 1.0)
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError(f"yield bounds for {key} must satisfy 0 <= lo <= hi <= 1")


@dataclass(frozen=True)
class LtProbabilities:
    """Probabilities entering the phase-error relation."""

    p_1: float
    p_z_b: float
    setting_probs: dict[str, float]
    states: dict[str, float] = field(default_factory=lambda: dict(IDEAL_STATES))

    def __post_init__(self):
        if not 0.0 < self.p_z_b < 1.0:
            raise ValueError("p_z_b must lie in (0, 1)")
        if not 0.0 <= self.p_1 <= 1.0:
            raise ValueError("p_1 must lie in [0, 1]")
        if set(self.setting_probs) != set(LT_SETTINGS) or any(p <= 0 for p in self.setting_probs.values()):
            raise ValueError("setting_probs needs positive entries for 0Z, 1Z, 0X")
        if abs(sum(self.setting_probs.values()) - 1.0) > 1e-12:
            raise ValueError("setting_probs must sum to 1")


def _ket(theta: float) -> np.ndarray:
    return np.array([math.cos(theta / 2.0), math.sin(theta / 2.0)])


def virtual_states(probs: LtProbabilities):
    """Virtual-state weights and Bloch vectors ``(p_vir_j, (x, z))`` for j = 0, 1.

    Alice's Z-basis key register read in its X basis splits the Z-state
    pair into ``(sqrt p0 |s0> +/- sqrt p1 |s1>)/sqrt 2``.
    """
    p0, p1 = probs.setting_probs["0Z"], probs.setting_probs["1Z"]
    s0, s1 = _ket(probs.states["0Z"]), _ket(probs.states["1Z"])
    out = []
    for sign in (1.0, -1.0):
        v = (math.sqrt(p0) * s0 + sign * math.sqrt(p1) * s1) / math.sqrt(2.0)
        weight = float(v @ v)
        u = v / math.sqrt(weight)
        out.append((weight, (2.0 * u[0] * u[1], u[0] ** 2 - u[1] ** 2)))
    return out


def phase_error_coefficients(probs: LtProbabilities) -> dict[tuple[str, str], float]:
    """Coefficients ``c`` with averaged phase-error probability ``= sum c * Ytilde``.

    ``Ytilde[(a, b)]`` is the single-photon yield conditioned on Alice
    sending ``a`` and Bob measuring X.
    """
    rows = []
    for a in LT_SETTINGS:
        th = probs.states[a]
        rows.append([1.0, math.sin(th), math.cos(th)])
    inv = np.linalg.inv(np.array(rows))
    (pv0, r0), (pv1, r1) = virtual_states(probs)
    coeffs = {}
    # Virtual 0 errs on outcome 1X; virtual 1 errs on outcome 0X.
    for b, weight, r in (("1X", pv0, r0), ("0X", pv1, r1)):
        w = weight * np.array([1.0, r[0], r[1]])
        for a, c in zip(LT_SETTINGS, w @ inv):
            coeffs[(a, b)] = probs.p_1 * probs.p_z_b * float(c)
    return {k: (0.0 if abs(v) < COEFF_TOL else v) for k, v in coeffs.items()}


def lt_phase_error_bound(est: LtYieldEstimate, probs: LtProbabilities) -> float:
    """Upper bound on the averaged single-photon reference phase-error probability."""
    total = 0.0
    for key, c in phase_error_coefficients(probs).items():
        if c == 0.0:
            continue
        bound = est.upper.get(key) if c > 0 else est.lower.get(key)
        if bound is None:
            raise ValueError(f"missing {'upper' if c > 0 else 'lower'} yield bound for {key}")
        total += c * bound
    return min(max(total, 0.0), 1.0)


def lt_applications(probs: LtProbabilities, n_intensities: int) -> int:
    needed = sum(1 for c in phase_error_coefficients(probs).values() if c != 0.0)
    return 2 + 2 * n_intensities + 2 * n_intensities * needed


def lt_probabilities(cfg: ExperimentConfig, source: PoissonSource | None = None) -> LtProbabilities:
    return LtProbabilities(p_n(source or cfg.source, 1), cfg.p_z_b, lt_setting_probs(cfg.p_z_a))


def true_phase_error(cfg: ExperimentConfig) -> float:
    """Channel-model averaged single-photon phase-error probability (BB84 symmetry)."""
    return p_n(cfg.source, 1) * cfg.p_z_a * cfg.p_z_b * photon_error(cfg.channel, 1, "X")


def true_lt_yields(cfg: ExperimentConfig) -> dict[tuple[str, str], float]:
    return {(a, b): photon_outcome_prob(cfg.channel, a, 1, "X", int(b[0])) for a in LT_SETTINGS for b in LT_OUTCOMES}


def estimate_lt_yields(cfg, obs, ledger, delta, source, predictions, probs, diag, exact_decoy=False) -> LtYieldEstimate:
    pxb = 1.0 - cfg.p_z_b
    truth = true_lt_yields(cfg) if exact_decoy else {}
    lower, upper = {}, {}
    for key, c in phase_error_coefficients(probs).items():
        if c == 0.0:
            continue
        gains = reference_gain_bounds(ledger, delta, obs.m_abmu[key], predictions.m_abmu[key])
        sense = "max" if c > 0 else "min"
        if exact_decoy:
            value = truth[key]
        else:
            value, _ = solve_lp(build_lt_yield_lp(source, gains, (probs.setting_probs[key[0]], pxb), sense))
        diag[f"y1_{key[0]}_{key[1]}_{sense}"] = value
        (upper if c > 0 else lower)[key] = value
    return LtYieldEstimate(lower, upper)


def evaluate_lt(
    cfg: ExperimentConfig,
    obs: ObservedStatistics | None = None,
    *,
    finite_size: bool = True,
    source: PoissonSource | None = None,
    delta: float | None = None,
    exact_decoy: bool = False,
) -> KeyRateResult:
    """Run the three-state estimation; keyword hooks as in ``evaluate_bb84``."""
    source = source or cfg.source
    probs = lt_probabilities(cfg, source)
    expected = lt_applications(probs, len(source.intensities))
    if cfg.budget.n_applications != expected:
        raise EpsilonAccountingError(
            f"LT budget must split varepsilon over {expected} bounds, got {cfg.budget.n_applications}"
        )
    obs = obs if obs is not None else expected_statistics(cfg.channel, cfg)
    if cfg.n_total == 0:
        return KeyRateResult(0.0, 0.0, 0.0, 0.0, 0.5, n_applications=expected)
    delta = cfg.effective_delta if delta is None else delta
    predictions = expected_statistics(cfg.channel, cfg)
    ledger = KatoLedger(cfg.n_total, cfg.budget.eps_kato, finite_size)
    diag: dict[str, float] = {}
    m1 = _m1_lower(cfg, obs, ledger, delta, source, predictions, diag, exact_decoy)
    est = estimate_lt_yields(cfg, obs, ledger, delta, source, predictions, probs, diag, exact_decoy)
    avg_phase = lt_phase_error_bound(est, probs)
    diag["phase_error_avg_upper"] = avg_phase
    n = ledger.n
    mph = ledger.count_upper(n * G_upper(delta, avg_phase), n * true_phase_error(cfg))
    if ledger.count != expected:
        raise EpsilonAccountingError(f"applied {ledger.count} concentration bounds, budget allows {expected}")
    result = key_length(cfg, m1, mph, obs)
    result.lp_values = diag
    result.n_applications = ledger.count
    return result


def lt_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """``cfg`` with its epsilon budget split over the LT number of bounds."""
    return cfg.replace(budget=cfg.budget.with_applications(LT_APPLICATIONS))


def lt_rate(cfg: ExperimentConfig, *, finite_size: bool = True, exact_decoy: bool = False) -> KeyRateResult:
    """Key rate of the three-state protocol; ``cfg``'s budget is re-split over 32 bounds."""
    return evaluate_lt(lt_config(cfg), finite_size=finite_size, exact_decoy=exact_decoy)


__all__ = [
    "IDEAL_STATES",
    "LtProbabilities",
    "LtYieldEstimate",
    "evaluate_lt",
    "lt_config",
    "lt_probabilities",
    "lt_phase_error_bound",
    "lt_rate",
    "phase_error_coefficients",
    "true_phase_error",
    "true_lt_yields",
    "virtual_states",
]
