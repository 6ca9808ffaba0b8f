"""Replace exp units by one-dimensional sums of sigmoid, step or ReLU units.

Each term ``c * exp(t)`` with ``t = <w, x> + b`` ranging over ``[-M, M]``
is approximated by a staircase whose breakpoints sit where ``c * exp(t)``
has grown by ``tol``.  Substituting every unit gives a network of the same
shape whose transfer is the chosen one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .cube import Box
from .expnet import ExpNetwork, ExpUnit, eval_batch
from .numerics import from_real, to_real

__all__ = [
    "KINDS",
    "MAX_UNITS_1D",
    "PROBE_POINTS",
    "Exp1DApproximation",
    "LiftResult",
    "approximate_exp_1d",
    "constant_approximation",
    "unit_range",
    "lift_to_two_layer",
    "probe_error",
]

KINDS = ("sigmoid", "relu", "step")
MAX_UNITS_1D = 10**6
PROBE_POINTS = 10**4
_MAX_SHARPEN = 40


@dataclass(frozen=True)
class Exp1DApproximation:
    """``t -> sum_j alpha_j * sigma(beta_j * t - gamma_j)`` on ``[-M, M]``."""

    units: tuple[tuple[float, float, float], ...]
    kind: str
    interval: tuple[float, float]
    tol: float
    achieved_err: float
    c: float

    @property
    def u(self) -> int:
        return len(self.units)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for a, b, g in self.units:
            out = out + a * _sigma(self.kind, b * t - g)
        return out


def _sigma(kind: str, z):
    if kind == "sigmoid":
        return expit(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "step":
        return (np.asarray(z) >= 0.0).astype(float)
    raise ValueError(f"unknown kind {kind!r}; choose from {', '.join(KINDS)}")


def _constant_unit(kind: str, value: float) -> tuple[float, float, float]:
    # sigma(0) = 1/2 for the sigmoid; relu needs a positive argument
    if kind == "sigmoid":
        return (2.0 * value, 0.0, 0.0)
    if kind == "relu":
        return (value, 0.0, -1.0)
    return (value, 0.0, 0.0)


def _probe_grid(M: float, breaks: np.ndarray) -> np.ndarray:
    return np.unique(np.concatenate([np.linspace(-M, M, PROBE_POINTS), breaks[(breaks >= -M) & (breaks <= M)]]))


def _measure(units, kind, c, M, breaks) -> float:
    t = _probe_grid(M, breaks)
    approx = Exp1DApproximation(tuple(units), kind, (-M, M), 0.0, 0.0, c)
    return float(np.max(np.abs(c * np.exp(t) - approx(t))))


def constant_approximation(value: float, kind: str, tol: float = 0.0) -> Exp1DApproximation:
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; choose from {', '.join(KINDS)}")
    units = () if value == 0 else (_constant_unit(kind, value),)
    return Exp1DApproximation(units, kind, (0.0, 0.0), tol, 0.0, value)


def approximate_exp_1d(c: float, M: float, tol: float, kind: str) -> Exp1DApproximation:
    """Approximate ``c * exp(t)`` on ``[-M, M]`` to within ``tol``.

    Breakpoints ``t_j`` solve ``|c| exp(t_j) = |c| exp(-M) + j * tol``.  The
    step staircase sits half a level above each breakpoint value, so its
    error is at most ``tol/2``; the sigmoid version sharpens until the probe
    error is within ``tol``; ReLU interpolates linearly between breakpoints.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; choose from {', '.join(KINDS)}")
    if not tol > 0 or not M > 0:
        raise ValueError("need tol > 0 and M > 0")
    if c == 0:
        return Exp1DApproximation((), kind, (-M, M), tol, 0.0, 0.0)
    sign = 1.0 if c > 0 else -1.0
    mag = abs(c)
    lo = mag * math.exp(-M)
    hi = mag * math.exp(M)
    if not math.isfinite(hi):
        raise ValueError("infeasible tolerance: c*exp(M) overflows")
    u_float = (hi - lo) / tol
    if u_float > MAX_UNITS_1D:
        raise ValueError(f"infeasible tolerance: about {u_float:.3g} units needed (limit {MAX_UNITS_1D})")
    u = max(1, math.ceil(u_float))
    levels = lo + tol * np.arange(1, u)
    breaks = np.log(levels / mag)

    if kind == "relu":
        knots = np.concatenate([[-M], breaks, [M]])
        vals = mag * np.exp(knots)
        slopes = np.diff(vals) / np.diff(knots)
        units = [_constant_unit("relu", sign * lo), (sign * slopes[0], 1.0, -M)]
        units += [(sign * ds, 1.0, float(tj)) for ds, tj in zip(np.diff(slopes), breaks)]
        err = _measure(units, kind, c, M, knots)
        return Exp1DApproximation(tuple(units), kind, (-M, M), tol, err, c)

    base = _constant_unit(kind, sign * (lo + tol / 2.0))
    if kind == "step":
        units = [base] + [(sign * tol, 1.0, float(tj)) for tj in breaks]
        err = _measure(units, kind, c, M, breaks)
        return Exp1DApproximation(tuple(units), kind, (-M, M), tol, err, c)

    knots = np.concatenate([[-M], breaks, [M]])
    gap = float(np.min(np.diff(knots))) if len(knots) > 1 else 2.0 * M
    eta = 1.0 / (100.0 * u)
    # sigma is within eta of 0/1 outside a window of width gap/10
    beta = 2.0 * math.log(1.0 / eta) / (gap / 10.0)
    for _ in range(_MAX_SHARPEN):
        units = [base] + [(sign * tol, beta, beta * float(tj)) for tj in breaks]
        err = _measure(units, kind, c, M, breaks)
        if err <= tol:
            break
        beta *= 2.0
    return Exp1DApproximation(tuple(units), kind, (-M, M), tol, err, c)


def unit_range(unit: ExpUnit, domain: Box) -> tuple[float, float]:
    """Exact range of ``<w, x> + b`` over the box by interval arithmetic."""
    w = np.asarray(unit.weight)
    a = w * np.asarray(domain.lower)
    b = w * np.asarray(domain.upper)
    return unit.bias + float(np.minimum(a, b).sum()), unit.bias + float(np.maximum(a, b).sum())


@dataclass(frozen=True)
class LiftResult:
    network: ExpNetwork
    per_unit: tuple[Exp1DApproximation, ...]
    ranges: tuple[float, ...]  # M_i
    tol: float
    probe_err: float
    n_probes: int

    @property
    def unit_count(self) -> int:
        return sum(a.u for a in self.per_unit)

    @property
    def u_max(self) -> int:
        return max((a.u for a in self.per_unit), default=0)

    @property
    def hu(self) -> int:
        return len(self.per_unit) * self.u_max

    @property
    def achieved_sum(self) -> float:
        return math.fsum(a.achieved_err for a in self.per_unit)


def probe_error(exp_net: ExpNetwork, lifted: ExpNetwork, points) -> float:
    return float(np.max(np.abs(eval_batch(exp_net, points) - eval_batch(lifted, points)))) if len(points) else 0.0


def lift_to_two_layer(net: ExpNetwork, domain: Box, eps: float, kind: str, n_probes: int = 1000, seed: int = 0) -> LiftResult:
    """Substitute every exp unit with a ``kind`` approximation of tolerance ``eps/(2h)``.

    A unit whose weight is zero is constant on K and becomes a single unit.
    The composite probe error is measured on ``n_probes`` scrambled Halton
    points of K.
    """
    if net.transfer != "exp":
        raise ValueError(f"transfer mismatch: expected an exp network, got {net.transfer!r}")
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; choose from {', '.join(KINDS)}")
    if domain.dim != net.dim:
        raise ValueError("domain and network dimensions differ")
    if not eps > 0:
        raise ValueError("eps must be positive")
    h = net.m
    if h == 0:
        return LiftResult(ExpNetwork(net.dim, kind, (), net.flags), (), (), 0.0, 0.0, 0)
    tol = eps / (2.0 * h)
    approxs, ranges, units = [], [], []
    for i, unit in enumerate(net.units):
        c = to_real(unit.coeff)
        w = np.asarray(unit.weight)
        lo, hi = unit_range(unit, domain)
        M = max(abs(lo), abs(hi))
        ranges.append(M)
        try:
            if not math.isfinite(c):
                raise ValueError("coefficient overflows a float")
            if not np.any(w):
                a = constant_approximation(c * math.exp(unit.bias), kind, tol)
            else:
                a = approximate_exp_1d(c, M, tol, kind)
        except (ValueError, OverflowError) as exc:
            raise ValueError(f"unit {i}: {exc}") from exc
        approxs.append(a)
        for alpha, beta, gamma in a.units:
            units.append(ExpUnit(from_real(alpha), tuple(beta * w), beta * unit.bias - gamma))
    lifted = ExpNetwork(net.dim, kind, tuple(units), net.flags)
    probes = domain.halton(n_probes, seed=seed)
    return LiftResult(lifted, tuple(approxs), tuple(ranges), tol, probe_error(net, lifted, probes), len(probes))
