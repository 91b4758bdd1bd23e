from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkd_tha.channel_model import ChannelParams, expected_statistics
from qkd_tha.config import ExperimentConfig
from qkd_tha.keyrate_bb84 import EpsilonAccountingError, bb84_rate
from qkd_tha.keyrate_lt import (
    LtProbabilities,
    LtYieldEstimate,
    evaluate_lt,
    lt_applications,
    lt_config,
    lt_phase_error_bound,
    lt_probabilities,
    lt_rate,
    phase_error_coefficients,
    true_lt_yields,
    true_phase_error,
)

NEEDED = {("0X", "1X"), ("0Z", "0X"), ("1Z", "0X"), ("0X", "0X")}


def _exact_estimate(cfg):
    probs = lt_probabilities(cfg)
    truth = true_lt_yields(cfg)
    return LtYieldEstimate(dict(truth), dict(truth)), probs


def test_coefficients_of_the_ideal_state_set():
    probs = LtProbabilities(1.0, 0.5, {"0Z": 0.45, "1Z": 0.45, "0X": 0.1})
    coeffs = phase_error_coefficients(probs)
    nonzero = {k: v for k, v in coeffs.items() if v != 0.0}
    assert set(nonzero) == NEEDED
    assert nonzero[("0X", "0X")] < 0
    for v in nonzero.values():
        assert abs(v) == pytest.approx(0.225, rel=1e-12)


@pytest.mark.parametrize("distance", [0.0, 30.0, 90.0, 180.0])
@pytest.mark.parametrize("p_z", [0.5, 0.9])
def test_identity_with_exact_yields(distance, p_z):
    cfg = ExperimentConfig(channel=ChannelParams(distance_km=distance, p_d=1e-6), p_z_a=p_z, p_z_b=p_z)
    est, probs = _exact_estimate(cfg)
    assert lt_phase_error_bound(est, probs) == pytest.approx(true_phase_error(cfg), abs=1e-9)


def test_zero_yields_give_zero_bound():
    probs = lt_probabilities(ExperimentConfig())
    zeros = {k: 0.0 for k in NEEDED}
    assert lt_phase_error_bound(LtYieldEstimate(zeros, zeros), probs) == 0.0


def test_missing_bound_is_reported():
    probs = lt_probabilities(ExperimentConfig())
    with pytest.raises(ValueError):
        lt_phase_error_bound(LtYieldEstimate({}, {}), probs)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(sorted(NEEDED)), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_widening_an_interval_never_lowers_the_bound(key, down, up):
    cfg = ExperimentConfig(channel=ChannelParams(distance_km=40.0))
    est, probs = _exact_estimate(cfg)
    base = lt_phase_error_bound(est, probs)
    lower, upper = dict(est.lower), dict(est.upper)
    lower[key] *= 1.0 - down
    upper[key] += up * (1.0 - upper[key])
    assert lt_phase_error_bound(LtYieldEstimate(lower, upper), probs) >= base - 1e-15


def test_thirty_two_applications():
    cfg = ExperimentConfig()
    assert lt_applications(lt_probabilities(cfg), 3) == 32
    assert lt_rate(cfg).n_applications == 32
    with pytest.raises(EpsilonAccountingError):
        evaluate_lt(cfg)
    assert lt_config(cfg).budget.eps_kato == cfg.budget.varepsilon / 32


def test_zero_counts_give_zero_rate():
    cfg = lt_config(ExperimentConfig())
    obs = expected_statistics(cfg.channel, cfg)
    zero_lt = {k: (0.0,) * 3 for k in obs.m_abmu}
    zero = type(obs)(obs.n_total, (0.0,) * 3, (0.0,) * 3, 0.0, 0.0, (0.0,) * 3, zero_lt)
    assert evaluate_lt(cfg, zero).rate == 0.0


@pytest.mark.parametrize("delta", [1.0, 1 - 1e-7, 1 - 1e-5])
def test_never_beats_bb84(delta):
    for distance in range(0, 200, 25):
        cfg = ExperimentConfig(n_total=1e11, channel=ChannelParams(distance_km=float(distance)), delta=delta)
        assert lt_rate(cfg).l <= bb84_rate(cfg).l


@pytest.mark.parametrize("distance", [0.0, 50.0, 100.0])
def test_infinite_decoy_limit_matches_bb84(distance):
    cfg = ExperimentConfig(n_total=1e11, channel=ChannelParams(distance_km=distance), delta=1.0)
    lt = lt_rate(cfg, finite_size=False, exact_decoy=True)
    bb = bb84_rate(cfg, finite_size=False, exact_decoy=True)
    assert lt.rate == pytest.approx(bb.rate, rel=1e-9)
    assert lt.mph1_upper == pytest.approx(bb.mph1_upper, rel=1e-9)


def test_flawed_state_hook_changes_coefficients():
    tilted = {"0Z": 0.0, "1Z": math.pi, "0X": math.pi / 2 + 0.1}
    probs = LtProbabilities(0.3, 0.9, {"0Z": 0.45, "1Z": 0.45, "0X": 0.1}, tilted)
    ideal = LtProbabilities(0.3, 0.9, {"0Z": 0.45, "1Z": 0.45, "0X": 0.1})
    assert phase_error_coefficients(probs) != phase_error_coefficients(ideal)
