"""Exact counts and closed-form bounds for term and lattice-point counting.

Every report pairs an exact big-integer count with a bound kept in the log
domain.  Where the bound is rational it is also carried exactly, so the
strict comparison never depends on rounding.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from .numerics import LogValue

__all__ = [
    "CountBoundReport",
    "robbins_binomial_check",
    "lattice_l1_count",
    "l1_count_closed",
    "l1_count_brute",
    "l1_count_log",
    "multinomial_power_bound",
    "zn_bound",
    "lattice_ball_bound",
    "lattice_ball_count",
]

L1_MAX_K = 6
L1_MAX_N = 64
BALL_MAX_BOX = 10**7


@dataclass(frozen=True)
class CountBoundReport:
    exact: int
    bound: LogValue
    holds: bool
    params: dict[str, Any]
    bound_exact: Fraction | None = None
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def bound_float(self) -> float:
        return math.exp(self.bound.log_abs)


def _pow0(base: int, e: int) -> int:
    # 0**0 == 1 in Python already; kept explicit because the bounds rely on it
    return 1 if e == 0 else base**e


def _strictly_below(exact: int, bound: LogValue, bound_exact: Fraction | None) -> bool:
    if bound_exact is not None:
        return exact < bound_exact
    if exact == 0:
        return bound.sign > 0
    return math.log(exact) < bound.log_abs


def _at_most(exact: int, bound: LogValue) -> bool:
    # non-strict; the bound is a float, so allow a few ulps of log slack
    if exact == 0:
        return bound.sign >= 0
    return math.log(exact) <= bound.log_abs + 1e-12 * max(1.0, abs(bound.log_abs))


def _lv_of_fraction(q: Fraction) -> LogValue:
    return LogValue(1, math.log(q.numerator) - math.log(q.denominator))


def robbins_binomial_check(n: int, k: int) -> CountBoundReport:
    """C(n, k) against ``n**n / ((n-k)**(n-k) * k**k)``.

    At ``k == n`` the bound collapses to exactly 1 (with ``0**0 = 1``) and the
    strict inequality fails; the report says so instead of hiding it.
    """
    if n < 2 or not 1 <= k <= n:
        raise ValueError(f"need n >= 2 and 1 <= k <= n, got n={n}, k={k}")
    exact = math.comb(n, k)
    bound_exact = Fraction(n**n, _pow0(n - k, n - k) * k**k)
    return CountBoundReport(
        exact=exact,
        bound=_lv_of_fraction(bound_exact),
        holds=_strictly_below(exact, None, bound_exact),
        params={"n": n, "k": k},
        bound_exact=bound_exact,
    )


def l1_count_closed(n: int, k: int) -> int:
    """``|{z in Z^k : sum |z_i| <= n}|`` by choosing which j coordinates are nonzero."""
    return sum(2**j * math.comb(k, j) * math.comb(n, j) for j in range(min(n, k) + 1))


def l1_count_brute(n: int, k: int) -> int:
    return sum(1 for z in itertools.product(range(-n, n + 1), repeat=k) if sum(map(abs, z)) <= n)


def l1_count_log(n: float, k: int) -> float:
    """Natural log of the L1-ball count for a possibly astronomically large ``n``.

    Exact when ``n`` is a manageable integer; otherwise the leading term
    ``2**k n**k / k!`` with its first correction ``(1 + k/(2n))``.
    """
    if float(n).is_integer() and n < 2**62:
        return math.log(l1_count_closed(int(n), k))
    return k * math.log(2.0) + k * math.log(n) - math.lgamma(k + 1) + math.log1p(k / (2.0 * n))


def zn_bound(n: int, k: int) -> Fraction:
    """``2**k (n+k)**(n+k) / (n**n k**k)`` exactly."""
    return Fraction(2**k * (n + k) ** (n + k), _pow0(n, n) * k**k)


def lattice_l1_count(n: int, k: int) -> CountBoundReport:
    if n < 0 or k < 1:
        raise ValueError("need n >= 0 and k >= 1")
    if k > L1_MAX_K or n > L1_MAX_N:
        raise ValueError(f"exact L1 count limited to k <= {L1_MAX_K}, n <= {L1_MAX_N}")
    closed = l1_count_closed(n, k)
    details: dict[str, Any] = {
        "closed_form": closed,
        "stars_and_bars_upper": 2**k * math.comb(n + k, k),
    }
    if k <= 3 and n <= 12:
        brute = l1_count_brute(n, k)
        details["brute_force"] = brute
        if brute != closed:
            raise AssertionError(f"L1 count routes disagree at n={n}, k={k}: {brute} vs {closed}")
    bound_exact = zn_bound(n, k)
    return CountBoundReport(
        exact=closed,
        bound=_lv_of_fraction(bound_exact),
        holds=_strictly_below(closed, None, bound_exact),
        params={"n": n, "k": k},
        bound_exact=bound_exact,
        details=details,
    )


def multinomial_power_bound(n: int, d: int) -> tuple[LogValue, LogValue]:
    """Tight and loose forms of the term-count bound for the n-th power in dimension d."""
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    tight = d * math.log(2.0) + (n + d) * math.log(n + d) - n * math.log(n) - d * math.log(d)
    loose = d * math.log(2.0 * math.e * (n / d + 1.0))
    return LogValue(1, tight), LogValue(1, loose)


def lattice_ball_bound(d: int, R: float, rho: float) -> LogValue:
    """Volume of the ball of radius ``R + rho*sqrt(d)/2``, as a LogValue."""
    if d < 1 or R <= 0 or rho <= 0:
        raise ValueError("need d >= 1, R > 0, rho > 0")
    return LogValue(
        1,
        0.5 * d * math.log(math.pi) + d * math.log(R + rho * math.sqrt(d) / 2.0) - math.lgamma(d / 2.0 + 1.0),
    )


def _ball_norm_cap(R: float, rho: float) -> int:
    # Decimal inputs become exact rationals via their shortest repr, so the
    # test sum(m_i**2) <= (R/rho)**2 is an exact integer comparison.
    q = (Fraction(repr(float(R))) / Fraction(repr(float(rho)))) ** 2
    return math.floor(q)


def lattice_ball_count(d: int, R: float, rho: float) -> CountBoundReport:
    """Points of ``rho * Z^d`` within Euclidean distance ``R`` of the origin."""
    bound = lattice_ball_bound(d, R, rho)
    # disjoint cells of volume rho**d fit in the enlarged ball
    corrected = LogValue(1, bound.log_abs - d * math.log(rho))
    cap = _ball_norm_cap(R, rho)
    m = math.isqrt(cap)
    if (2 * m + 1) ** d > BALL_MAX_BOX or (2 * R / rho + 1) ** d > BALL_MAX_BOX:
        raise ValueError("lattice box too large for exact enumeration")
    axis = np.arange(-m, m + 1, dtype=np.int64) ** 2
    sq = axis
    for _ in range(d - 1):
        sq = (sq[:, None] + axis[None, :]).ravel()
    exact = int(np.count_nonzero(sq <= cap))
    return CountBoundReport(
        exact=exact,
        bound=bound,
        holds=_at_most(exact, bound),
        params={"d": d, "R": R, "rho": rho},
        details={
            "norm_sq_cap": cap,
            "box_side": 2 * m + 1,
            "volume_corrected_bound_log": corrected.log_abs,
            "volume_corrected_holds": _at_most(exact, corrected),
        },
    )
