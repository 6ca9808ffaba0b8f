"""Audit of the gap amplification ``(1 - a**n)**(k**n)`` vs ``(1 - b**n)**(k**n)``.

Nothing here corrects the lemma's choice of ``n`` and ``k``; the audit
reports where the two claimed inequalities actually hold.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .numerics import from_real, stable_one_minus_pn_pow_kn

__all__ = [
    "GapParams",
    "GapAuditReport",
    "derive_gap_params",
    "audit_gap",
    "sweep_gap",
    "sweep_to_csv",
    "CSV_COLUMNS",
    "bernoulli_minus_gap",
    "bernoulli_plus_gap",
    "WORST_CASE_OFFSET",
]

log = logging.getLogger(__name__)

WORST_CASE_OFFSET = 1e-6

CSV_COLUMNS = ("eps", "alpha", "beta", "n", "k", "a", "b", "lower_value", "upper_value", "lower_holds", "upper_holds")


@dataclass(frozen=True)
class GapParams:
    eps: float
    alpha: float
    beta: float
    n: int
    k: int
    bracket_holds: bool

    @property
    def sufficient_upper(self) -> bool:
        """The proof's own sufficient condition ``(k*beta)**n > 1/eps``."""
        return self.n * math.log(self.k * self.beta) > -math.log(self.eps)


@dataclass(frozen=True)
class GapAuditReport:
    lower_value: float
    upper_value: float
    lower_claim_holds: bool
    upper_claim_holds: bool
    params: GapParams
    a: float
    b: float

    def row(self) -> dict:
        p = self.params
        return {
            "eps": p.eps,
            "alpha": p.alpha,
            "beta": p.beta,
            "n": p.n,
            "k": p.k,
            "a": self.a,
            "b": self.b,
            "lower_value": self.lower_value,
            "upper_value": self.upper_value,
            "lower_holds": self.lower_claim_holds,
            "upper_holds": self.upper_claim_holds,
        }


def slices_for_eps(eps: float) -> int:
    """``ceil(-log(eps) / log 2)``, never below 1."""
    return max(1, math.ceil(-math.log2(eps)))


def derive_gap_params(eps: float, alpha: float, beta: float) -> GapParams:
    for name, v in (("eps", eps), ("alpha", alpha), ("beta", beta)):
        if not 0.0 < v < 1.0:
            raise ValueError(f"{name} must lie in (0, 1), got {v!r}")
    if not alpha < beta:
        raise ValueError("alpha must be smaller than beta")
    if not 1.0 / alpha - 1.0 / beta > 1.0:
        raise ValueError(f"1/alpha - 1/beta = {1.0 / alpha - 1.0 / beta:.6g} must exceed 1")
    n = slices_for_eps(eps)
    k = math.floor(1.0 / beta) + 1
    return GapParams(eps, alpha, beta, n, k, bracket_holds=1.0 / beta < k < 1.0 / alpha)


def _power_value(x: float, n: int, k: int) -> float:
    return math.exp(stable_one_minus_pn_pow_kn(from_real(x), n, math.log(k)))


def audit_gap(params: GapParams, a: float, b: float) -> GapAuditReport:
    """Evaluate both sides at ``a`` in ``[0, alpha)`` and ``b`` in ``[beta, 1]``.

    ``b == beta`` is admitted (the lemma's interval is open there) so the
    boundary case of the proof can be measured directly.
    """
    if not 0.0 <= a < params.alpha:
        raise ValueError(f"a must lie in [0, alpha), got {a!r}")
    if not params.beta <= b <= 1.0:
        raise ValueError(f"b must lie in [beta, 1], got {b!r}")
    lower = _power_value(a, params.n, params.k)
    upper = _power_value(b, params.n, params.k)
    return GapAuditReport(
        lower_value=lower,
        upper_value=upper,
        lower_claim_holds=lower > 1.0 - params.eps,
        upper_claim_holds=upper < params.eps,
        params=params,
        a=a,
        b=b,
    )


def sweep_gap(
    eps_grid: Iterable[float],
    alpha_beta_grid: Iterable[tuple[float, float]],
    samples_per_cell: int,
    seed: int = 0,
) -> list[GapAuditReport]:
    """Audit every admissible (eps, alpha, beta) cell.

    The first sample of a cell is the worst admissible pair
    ``a = (1 - 1e-6) alpha``, ``b = (1 + 1e-6) beta``; the rest are uniform.
    Inadmissible cells are skipped with a log message.
    """
    rng = np.random.default_rng(seed)
    ab = list(alpha_beta_grid)
    out: list[GapAuditReport] = []
    for eps in eps_grid:
        for alpha, beta in ab:
            try:
                params = derive_gap_params(eps, alpha, beta)
            except ValueError as exc:
                log.info("skipping cell eps=%g alpha=%g beta=%g: %s", eps, alpha, beta, exc)
                continue
            for j in range(samples_per_cell):
                if j == 0:
                    a = (1.0 - WORST_CASE_OFFSET) * alpha
                    b = min(1.0, beta * (1.0 + WORST_CASE_OFFSET))
                else:
                    a = float(rng.uniform(0.0, alpha))
                    b = float(beta + (1.0 - beta) * (1.0 - rng.uniform()))
                out.append(audit_gap(params, a, b))
    return out


def sweep_to_csv(reports: Sequence[GapAuditReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.row().items()})
    return buf.getvalue()


def bernoulli_minus_gap(x: float, m: int) -> float:
    """``(1-x)**m - (1 - x*m)``, non-negative for integer m > 0 and 0 <= x <= 1."""
    if x == 1.0:
        return 0.0 - (1.0 - m)
    # expm1/log1p keep the gap accurate when x*m is tiny
    return math.expm1(m * math.log1p(-x)) + x * m


def bernoulli_plus_gap(x: float, m: int) -> float:
    """``(1+x)**m - (1 + x*m)``, non-negative for integer m > 0 and x >= -1."""
    if x == -1.0:
        return 0.0 - (1.0 - m)
    try:
        lhs = math.expm1(m * math.log1p(x))
    except OverflowError:
        return math.inf
    return lhs - x * m
