"""Kato-type concentration bounds for sums of dependent Bernoulli variables.

Four directions are provided. With ``S`` the sum of conditional
probabilities and ``Lambda`` the realised count over ``N`` trials:

* :func:`count_lower`  -- ``Lambda >= Kbar_L(S)``
* :func:`count_upper`  -- ``Lambda <= Kbar_U(S)``
* :func:`sum_lower`    -- ``S >= K_L(Lambda)``
* :func:`sum_upper`    -- ``S <= K_U(Lambda)``

each holding except with probability ``epsilon``. The free parameters
``(a, b)`` are chosen in closed form to be optimal when the realised value
equals a prediction fixed before the data are seen. Any pair with
``b >= |a|`` that satisfies the tail constraint is valid, so whenever the
closed form degenerates we fall back to ``a = 0`` (a Hoeffding-style bound).

For strongly skewed predictions the optimal ``|a|`` is close to ``b``, so
``b - |a|`` is carried separately as ``gap`` and every formula is written in
terms of it; recovering it from the rounded ``b`` would lose all precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


RESUBSTITUTION_TOL = 1e-10
# Smallest accepted 1 +- 4a/(3 sqrt N); below it the tail constraint is
# ill-conditioned in a (only reached for predictions at the range edges).
MIN_TAIL_FACTOR = 1e-6


class InvalidQueryError(ValueError):
    """Raised when ``N``, ``epsilon`` or the prediction is out of range."""


@dataclass(frozen=True)
class KatoParams:
    a: float
    b: float
    fallback: bool = False
    # b - |a|, computed without cancellation; derived from b when omitted.
    gap: float | None = None

    def __post_init__(self):
        if self.gap is None:
            object.__setattr__(self, "gap", self.b - abs(self.a))

    def b_minus_a(self) -> float:
        return self.gap + (abs(self.a) - self.a)

    def log_tail(self, n: float, sign: int) -> float:
        """:func:`tail_exponent` of this pair, evaluated through ``gap``."""
        return tail_exponent(n, self.a, self.b, sign, self.gap)


@dataclass(frozen=True)
class BoundQuery:
    """Trial count, failure probability and pre-run prediction for one bound."""

    n: float
    epsilon: float
    prediction: float

    def __post_init__(self):
        if not (self.n > 0 and math.isfinite(self.n)):
            raise InvalidQueryError(f"N must be positive, got {self.n}")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidQueryError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0.0 <= self.prediction <= self.n:
            raise InvalidQueryError(
                f"prediction must lie in [0, N={self.n}], got {self.prediction}"
            )


def tail_exponent(n: float, a: float, b: float, sign: int, gap: float | None = None) -> float:
    """``ln`` of the Kato tail probability, ``-2(b^2-a^2)/(1 + sign*4a/(3 sqrt N))^2``.

    With ``gap = b - |a|`` given, ``b^2 - a^2`` is formed as ``gap (gap + 2|a|)``.
    """
    diff = b * b - a * a if gap is None else gap * (gap + 2.0 * abs(a))
    return -2.0 * diff / (1.0 + sign * 4.0 * a / (3.0 * math.sqrt(n))) ** 2


def hoeffding_params(epsilon: float) -> KatoParams:
    return KatoParams(0.0, math.sqrt(-math.log(epsilon) / 2.0), fallback=True)


def _gap_for(n: float, log_eps: float, a: float, sign: int) -> float:
    # b - |a| with b solving tail_exponent(n, a, b, sign) == log_eps:
    # b^2 - a^2 = D, so b - |a| = D / (|a| + sqrt(a^2 + D)).
    d = -0.5 * log_eps * (1.0 + sign * 4.0 * a / (3.0 * math.sqrt(n))) ** 2
    return d / (abs(a) + math.sqrt(a * a + d))


def _finish(n, log_eps, a, sign, denom_sign):
    """Pair ``a`` with its ``b``; fall back to ``a = 0`` if anything degenerates."""
    try:
        if not math.isfinite(a):
            raise ValueError
        gap = _gap_for(n, log_eps, a, sign)
    except (ValueError, ZeroDivisionError, OverflowError):
        return hoeffding_params(math.exp(log_eps))
    sqrt_n = math.sqrt(n)
    params = KatoParams(a, abs(a) + gap, gap=gap)
    if (
        not (math.isfinite(gap) and gap > 0.0)
        or 1.0 + sign * 4.0 * a / (3.0 * sqrt_n) < MIN_TAIL_FACTOR
        or (denom_sign != 0 and sqrt_n + denom_sign * 2.0 * a <= 0.0)
        or abs(params.log_tail(n, sign) - log_eps) > RESUBSTITUTION_TOL * abs(log_eps)
    ):
        return hoeffding_params(math.exp(log_eps))
    return params


def _a_count(n: float, log_eps: float, s: float, sign: int) -> float:
    # Closed-form optimum for the bounds on the realised count. sign=+1 is
    # the lower bound Kbar_L, sign=-1 the upper bound Kbar_U.
    L = log_eps
    root = n * L * (n * L - 18.0 * s * (n - s))
    if root < 0.0:
        return math.nan
    num = (
        -sign * 9.0 * (3.0 * n * n - 8.0 * n * s + 8.0 * s * s) * L
        + 9.0 * (n - 2.0 * s) * math.sqrt(root)
        - sign * 4.0 * n * L * L
    )
    den = 4.0 * (
        36.0 * (n * n - 2.0 * n * s + 2.0 * s * s) * L
        + 81.0 * n * s * (n - s)
        + 4.0 * n * L * L
    )
    if den == 0.0:
        return math.nan
    return 3.0 * math.sqrt(n) * num / den


def _a_sum(n: float, log_eps: float, t: float, sign: int) -> float:
    # Closed-form optimum for the bounds on the sum of probabilities.
    # sign=+1 is the lower bound K_L, sign=-1 the upper bound K_U.
    L = log_eps
    q = 9.0 * t * (n - t) - 2.0 * n * L
    root = -n * n * L * q
    if root < 0.0:
        return math.nan
    num = (
        sign * (-72.0 * math.sqrt(n) * t * (n - t) * L + 16.0 * n**1.5 * L * L)
        + 9.0 * math.sqrt(2.0) * (n - 2.0 * t) * math.sqrt(root)
    )
    den = 4.0 * (9.0 * n - 8.0 * L) * q
    if den == 0.0:
        return math.nan
    return 3.0 * num / den


def optimal_ab_count_lower(q: BoundQuery) -> KatoParams:
    """Parameters for :func:`count_lower`; tail constraint uses ``1 + 4a/(3 sqrt N)``."""
    log_eps = math.log(q.epsilon)
    return _finish(q.n, log_eps, _a_count(q.n, log_eps, q.prediction, +1), +1, +1)


def optimal_ab_count_upper(q: BoundQuery) -> KatoParams:
    """Parameters for :func:`count_upper`; tail constraint uses ``1 - 4a/(3 sqrt N)``."""
    log_eps = math.log(q.epsilon)
    return _finish(q.n, log_eps, _a_count(q.n, log_eps, q.prediction, -1), -1, -1)


def optimal_ab_sum_lower(q: BoundQuery) -> KatoParams:
    """Parameters for :func:`sum_lower`; tail constraint uses ``1 - 4a/(3 sqrt N)``."""
    log_eps = math.log(q.epsilon)
    return _finish(q.n, log_eps, _a_sum(q.n, log_eps, q.prediction, +1), -1, 0)


def optimal_ab_sum_upper(q: BoundQuery) -> KatoParams:
    """Parameters for :func:`sum_upper`; tail constraint uses ``1 + 4a/(3 sqrt N)``."""
    log_eps = math.log(q.epsilon)
    return _finish(q.n, log_eps, _a_sum(q.n, log_eps, q.prediction, -1), +1, 0)


def _clamp(x: float, n: float) -> float:
    return min(max(x, 0.0), n)


def _check_arg(x: float, n: float, name: str) -> None:
    if not (0.0 <= x <= n):
        raise InvalidQueryError(f"{name} must lie in [0, N={n}], got {x}")


def count_lower(q: BoundQuery, s: float, params: KatoParams | None = None) -> float:
    """Lower bound on the realised count given the sum of probabilities ``s``."""
    _check_arg(s, q.n, "s")
    p = params or optimal_ab_count_lower(q)
    sqrt_n = math.sqrt(q.n)
    return _clamp(q.n / (sqrt_n + 2.0 * p.a) * (s / sqrt_n - p.b_minus_a()), q.n)


def count_upper(q: BoundQuery, s: float, params: KatoParams | None = None) -> float:
    """Upper bound on the realised count given the sum of probabilities ``s``."""
    _check_arg(s, q.n, "s")
    p = params or optimal_ab_count_upper(q)
    sqrt_n = math.sqrt(q.n)
    return _clamp(q.n / (sqrt_n - 2.0 * p.a) * (s / sqrt_n + p.b_minus_a()), q.n)


def sum_lower(q: BoundQuery, count: float, params: KatoParams | None = None) -> float:
    """Lower bound on the sum of probabilities given the observed ``count``."""
    _check_arg(count, q.n, "count")
    p = params or optimal_ab_sum_lower(q)
    dev = (p.b_minus_a() + 2.0 * p.a * count / q.n) * math.sqrt(q.n)
    return _clamp(count - dev, q.n)


def sum_upper(q: BoundQuery, count: float, params: KatoParams | None = None) -> float:
    """Upper bound on the sum of probabilities given the observed ``count``."""
    _check_arg(count, q.n, "count")
    p = params or optimal_ab_sum_upper(q)
    dev = (p.b_minus_a() + 2.0 * p.a * count / q.n) * math.sqrt(q.n)
    return _clamp(count + dev, q.n)
