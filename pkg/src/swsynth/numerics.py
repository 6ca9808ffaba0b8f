"""Signed log-domain scalars and the stable kernels built on them.

A :class:`LogValue` stores ``sign * exp(log_abs)``.  Quantities such as
``k**n`` or ``exp(s * B)`` that show up in the cube indicator routinely
exceed the double range, so everything that multiplies them stays in this
representation until the very end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "LogValue",
    "ZERO",
    "ONE",
    "CANCELLATION_THRESHOLD",
    "FIRST_ORDER_CUTOFF",
    "from_real",
    "to_real",
    "lv_mul",
    "lv_neg",
    "lv_sum",
    "log1mexp",
    "stable_one_minus_pn_pow_kn",
    "stable_one_minus_pn_pow_kn_lv",
    "log_one_minus_pn_pow_kn_array",
]

# Accumulator magnitude (relative to the largest term) under which a signed
# sum is reported as cancellation-degraded.
CANCELLATION_THRESHOLD = 1e-12

# For n*log(p) <= -40 the first-order expansion log1p(-x) ~ -x is used.
# The dropped remainder satisfies |log1p(-x) + x| <= x**2 / (2(1-x)), so the
# relative error is below x/2 < e**-40 / 2 ~ 2.1e-18.
FIRST_ORDER_CUTOFF = -40.0


@dataclass(frozen=True)
class LogValue:
    """Real number ``sign * exp(log_abs)``; ``sign == 0`` is exact zero.

    ``degraded`` marks results of a signed sum whose terms cancelled down to
    less than ``CANCELLATION_THRESHOLD`` of the largest term.  It is
    bookkeeping and does not take part in equality.
    """

    sign: int
    log_abs: float = 0.0
    degraded: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign!r}")
        if self.sign != 0 and not math.isfinite(self.log_abs):
            raise ValueError(f"log_abs must be finite for a nonzero value, got {self.log_abs!r}")
        if self.sign == 0 and self.log_abs != 0.0:
            # canonical zero
            object.__setattr__(self, "log_abs", 0.0)

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def log10_abs(self) -> float:
        if self.sign == 0:
            return -math.inf
        return self.log_abs / math.log(10.0)

    def __float__(self) -> float:
        return to_real(self)

    def __mul__(self, other: "LogValue") -> "LogValue":
        return lv_mul(self, other)

    def __neg__(self) -> "LogValue":
        return lv_neg(self)


ZERO = LogValue(0, 0.0)
ONE = LogValue(1, 0.0)


def from_real(v: float) -> LogValue:
    if v == 0:
        return ZERO
    if not math.isfinite(v):
        raise ValueError(f"cannot represent {v!r} as a LogValue")
    return LogValue(1 if v > 0 else -1, math.log(abs(v)))


def to_real(a: LogValue) -> float:
    """Convert to a float; overflows to +-inf and underflows to 0."""
    if a.sign == 0:
        return 0.0
    if a.log_abs > 709.782712893384:
        return math.copysign(math.inf, a.sign)
    return a.sign * math.exp(a.log_abs)


def lv_mul(a: LogValue, b: LogValue) -> LogValue:
    if a.sign == 0 or b.sign == 0:
        return ZERO
    return LogValue(a.sign * b.sign, a.log_abs + b.log_abs)


def lv_neg(a: LogValue) -> LogValue:
    return LogValue(-a.sign, a.log_abs, a.degraded)


def lv_sum(terms: Iterable[LogValue]) -> LogValue:
    """Signed log-sum-exp.

    The largest magnitude is factored out and the signed ratios are added
    with ``math.fsum`` (exactly rounded), so the only error comes from the
    ``exp`` of each ratio.  A result that cancels to below
    ``CANCELLATION_THRESHOLD`` of the largest term is flagged ``degraded``.
    """
    live = [t for t in terms if t.sign != 0]
    if not live:
        return ZERO
    if len(live) == 1:
        t = live[0]
        return LogValue(t.sign, t.log_abs)
    top = max(t.log_abs for t in live)
    acc = math.fsum(t.sign * math.exp(t.log_abs - top) for t in live)
    if acc == 0.0:
        return ZERO
    degraded = abs(acc) < CANCELLATION_THRESHOLD
    return LogValue(1 if acc > 0 else -1, top + math.log(abs(acc)), degraded)


def log1mexp(x: float) -> float:
    """``log(1 - exp(x))`` for ``x <= 0`` without cancellation."""
    if x > 0:
        raise ValueError("log1mexp needs x <= 0")
    if x == 0:
        return -math.inf
    if x > -math.log(2.0):
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


def _log_neg_log_g(log_p: LogValue, n: int, log_k: float) -> float | None:
    """``log(-log g)`` with ``g = (1 - p**n)**(k**n)``; None when g == 1, +inf when g == 0."""
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if log_p.sign == -1:
        raise ValueError("p must be non-negative")
    if log_p.sign == 0:
        return None
    if log_p.log_abs > 0.0:
        raise ValueError(f"p must be <= 1, got log p = {log_p.log_abs!r}")
    if log_p.log_abs == 0.0:
        return math.inf
    x = n * log_p.log_abs
    if x <= FIRST_ORDER_CUTOFF:
        return n * log_k + x
    return n * log_k + math.log(-log1mexp(x))


def stable_one_minus_pn_pow_kn_lv(log_p: LogValue, n: int, log_k: float) -> LogValue | None:
    """``log g`` as a LogValue (always non-positive).

    Returns ``None`` for ``p == 1`` where ``log g = -inf``; this form never
    overflows, unlike the float returned by :func:`stable_one_minus_pn_pow_kn`.
    """
    t = _log_neg_log_g(log_p, n, log_k)
    if t is None:
        return ZERO
    if math.isinf(t):
        return None
    return LogValue(-1, t)


def stable_one_minus_pn_pow_kn(log_p: LogValue, n: int, log_k: float) -> float:
    """Return ``log((1 - p**n) ** (k**n))`` given ``log p`` and ``log k``.

    ``p == 1`` gives ``-inf`` (g is exactly zero), as does any result whose
    magnitude exceeds the double range.
    """
    t = _log_neg_log_g(log_p, n, log_k)
    if t is None:
        return 0.0
    if t > 709.782712893384:
        return -math.inf
    return -math.exp(t)


def log_one_minus_pn_pow_kn_array(log_p: np.ndarray, n: int, log_k: float) -> np.ndarray:
    """Vectorised kernel over an array of ``log p`` values (``-inf`` means p = 0).

    Same branches as the scalar version; entries with ``log p > 0`` (p > 1)
    come back as NaN so the caller can decide how to flag them.
    """
    log_p = np.asarray(log_p, dtype=float)
    x = n * log_p
    out = np.zeros_like(x)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        small = x <= FIRST_ORDER_CUTOFF
        mid = (x > FIRST_ORDER_CUTOFF) & (x < 0.0)
        out[small] = -np.exp(n * log_k + x[small])
        xm = x[mid]
        l1m = np.where(xm > -math.log(2.0), np.log(-np.expm1(xm)), np.log1p(-np.exp(xm)))
        out[mid] = -np.exp(n * log_k + np.log(-l1m))
        out[x == 0.0] = -np.inf
        out[x > 0.0] = np.nan
        out[np.isneginf(log_p)] = 0.0
    return out
