"""Sums ``sum_z c_z exp(s <z, x>)`` over integer exponent vectors ``z``.

Products and powers collect terms by their lattice key, so the size of a
result is exactly its number of distinct exponent vectors.  Coefficients
live in the signed log domain; keys are exact integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .combinatorics import l1_count_closed
from .expnet import ExpNetwork, ExpUnit
from .numerics import CANCELLATION_THRESHOLD, LogValue, from_real, lv_sum

__all__ = [
    "SymbolicExpSum",
    "MAX_TERMS",
    "constant",
    "from_terms",
    "multiply",
    "pow_expand",
    "affine_combine",
    "add",
    "to_network",
    "evaluate",
    "evaluate_batch",
]

MAX_TERMS = 10**6
# Pair products formed per vectorised block in multiply().
_BLOCK = 1 << 21


@dataclass(frozen=True, eq=False)
class SymbolicExpSum:
    """Keys are rows of ``keys`` in lexicographic order; zero coefficients are never stored."""

    dim: int
    scale: float
    keys: np.ndarray  # (m, dim) int64
    signs: np.ndarray  # (m,) int8, never 0
    logs: np.ndarray  # (m,) float
    flagged: np.ndarray  # (m,) bool, cancellation-degraded coefficients

    def __len__(self) -> int:
        return len(self.signs)

    @property
    def terms(self) -> dict[tuple[int, ...], LogValue]:
        return {
            tuple(int(v) for v in z): LogValue(int(s), float(l), bool(f))
            for z, s, l, f in zip(self.keys, self.signs, self.logs, self.flagged)
        }

    @property
    def support(self) -> set[tuple[int, ...]]:
        return {tuple(int(v) for v in z) for z in self.keys}

    @property
    def max_l1(self) -> int:
        return int(np.abs(self.keys).sum(axis=1).max()) if len(self) else 0

    @property
    def n_flagged(self) -> int:
        return int(self.flagged.sum())


def _build(dim: int, scale: float, keys, signs, logs, flagged) -> SymbolicExpSum:
    keys = np.asarray(keys, dtype=np.int64).reshape(-1, dim)
    signs = np.asarray(signs, dtype=np.int8)
    logs = np.asarray(logs, dtype=float)
    flagged = np.asarray(flagged, dtype=bool)
    keep = signs != 0
    keys, signs, logs, flagged = keys[keep], signs[keep], logs[keep], flagged[keep]
    order = np.lexsort(keys.T[::-1]) if len(keys) else np.zeros(0, dtype=np.int64)
    return SymbolicExpSum(dim, float(scale), keys[order], signs[order], logs[order], flagged[order])


def from_terms(dim: int, scale: float, terms: dict) -> SymbolicExpSum:
    """Build from ``{z: LogValue or real}``; duplicate keys are not possible in a dict."""
    keys, signs, logs, flags = [], [], [], []
    for z, c in terms.items():
        z = (z,) if isinstance(z, int) else tuple(z)
        if len(z) != dim:
            raise ValueError(f"key {z} does not have dimension {dim}")
        c = c if isinstance(c, LogValue) else from_real(float(c))
        keys.append(z)
        signs.append(c.sign)
        logs.append(c.log_abs)
        flags.append(c.degraded)
    return _build(dim, scale, keys, signs, logs, flags)


def constant(dim: int, scale: float, value: float | LogValue = 1.0) -> SymbolicExpSum:
    return from_terms(dim, scale, {(0,) * dim: value})


def _check_compatible(a: SymbolicExpSum, b: SymbolicExpSum) -> None:
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if a.scale != b.scale:
        raise ValueError(f"scale mismatch: {a.scale!r} vs {b.scale!r}")


def _reduce(codes, signs, logs, flagged):
    """Collect entries sharing a code: signed log-sum-exp per group with fsum."""
    order = np.argsort(codes, kind="stable")
    codes, signs, logs, flagged = codes[order], signs[order], logs[order], flagged[order]
    starts = np.flatnonzero(np.r_[True, codes[1:] != codes[:-1]])
    ends = np.r_[starts[1:], len(codes)]
    top = np.maximum.reduceat(logs, starts)
    ratios = signs * np.exp(logs - np.repeat(top, ends - starts))
    any_flag = np.logical_or.reduceat(flagged, starts)
    out_s = np.empty(len(starts), dtype=np.int8)
    out_l = np.empty(len(starts))
    out_f = np.empty(len(starts), dtype=bool)
    single = (ends - starts) == 1
    out_s[single] = signs[starts[single]]
    out_l[single] = logs[starts[single]]
    out_f[single] = any_flag[single]
    for g in np.flatnonzero(~single):
        acc = math.fsum(ratios[starts[g] : ends[g]].tolist())
        if acc == 0.0:
            out_s[g], out_l[g], out_f[g] = 0, 0.0, False
            continue
        out_s[g] = 1 if acc > 0 else -1
        out_l[g] = top[g] + math.log(abs(acc))
        out_f[g] = any_flag[g] or abs(acc) < CANCELLATION_THRESHOLD
    return codes[starts], out_s, out_l, out_f


def _codec(dim: int, radius: int):
    base = 2 * radius + 1
    if base**dim >= 2**62:
        raise ValueError("exponent lattice too large to encode")
    powers = base ** np.arange(dim, dtype=np.int64)
    offset = int(radius * powers.sum())

    def encode(keys):
        return keys @ powers

    def decode(codes):
        shifted = codes + offset
        return (shifted[:, None] // powers[None, :]) % base - radius

    return encode, decode


def multiply(a: SymbolicExpSum, b: SymbolicExpSum) -> SymbolicExpSum:
    """Product with term collection."""
    _check_compatible(a, b)
    if not len(a) or not len(b):
        return _build(a.dim, a.scale, np.zeros((0, a.dim)), [], [], [])
    if len(a) < len(b):
        a, b = b, a
    encode, decode = _codec(a.dim, max(a.max_l1 + b.max_l1, 1))
    ca, cb = encode(a.keys), encode(b.keys)
    sb = b.signs.astype(np.int8)
    rows = max(1, _BLOCK // len(b))
    parts = []
    for i in range(0, len(a), rows):
        sl = slice(i, i + rows)
        codes = (ca[sl, None] + cb[None, :]).ravel()
        signs = (a.signs[sl, None] * sb[None, :]).ravel()
        logs = (a.logs[sl, None] + b.logs[None, :]).ravel()
        flags = (a.flagged[sl, None] | b.flagged[None, :]).ravel()
        parts.append(_reduce(codes, signs, logs, flags))
    if len(parts) == 1:
        codes, signs, logs, flags = parts[0]
    else:
        codes, signs, logs, flags = _reduce(*(np.concatenate(p) for p in zip(*parts)))
    return _build(a.dim, a.scale, decode(codes), signs, logs, flags)


def pow_expand(base: SymbolicExpSum, e: int, max_terms: int = MAX_TERMS) -> SymbolicExpSum:
    """``base ** e`` by repeated squaring, collecting terms after every product."""
    if e < 1:
        raise ValueError("exponent must be a positive integer")
    estimate = l1_count_closed(base.max_l1 * e, base.dim) if base.max_l1 * e <= 10**7 else math.inf
    if estimate > max_terms:
        raise ValueError(f"expansion infeasible: up to {estimate} terms exceeds the limit of {max_terms}")
    result = None
    square = base
    while True:
        if e & 1:
            result = square if result is None else multiply(result, square)
        e >>= 1
        if not e:
            return result
        square = multiply(square, square)


def affine_combine(a: float, s: SymbolicExpSum, b: float) -> SymbolicExpSum:
    """``a * S + b``, with ``b`` entering at the zero key."""
    if a == 0:
        return constant(s.dim, s.scale, b) if b else _build(s.dim, s.scale, np.zeros((0, s.dim)), [], [], [])
    la = from_real(a)
    keys = s.keys
    signs = s.signs * la.sign
    logs = s.logs + la.log_abs
    flags = s.flagged
    if b != 0:
        lb = from_real(b)
        encode, decode = _codec(s.dim, max(s.max_l1, 1))
        codes = np.r_[encode(keys), 0]
        codes, signs, logs, flags = _reduce(
            codes, np.r_[signs, lb.sign].astype(np.int8), np.r_[logs, lb.log_abs], np.r_[flags, False]
        )
        keys = decode(codes)
    return _build(s.dim, s.scale, keys, signs, logs, flags)


def add(a: SymbolicExpSum, b: SymbolicExpSum) -> SymbolicExpSum:
    _check_compatible(a, b)
    if not len(a) or not len(b):
        return a if len(a) else b
    encode, decode = _codec(a.dim, max(a.max_l1, b.max_l1, 1))
    codes, signs, logs, flags = _reduce(
        np.r_[encode(a.keys), encode(b.keys)],
        np.r_[a.signs, b.signs].astype(np.int8),
        np.r_[a.logs, b.logs],
        np.r_[a.flagged, b.flagged],
    )
    return _build(a.dim, a.scale, decode(codes), signs, logs, flags)


def to_network(s: SymbolicExpSum) -> ExpNetwork:
    """One exp unit per term: weight ``scale * z``, bias 0."""
    units = tuple(
        ExpUnit(LogValue(int(sg), float(lg), bool(f)), tuple(s.scale * z.astype(float)), 0.0)
        for z, sg, lg, f in zip(s.keys, s.signs, s.logs, s.flagged)
    )
    return ExpNetwork(s.dim, "exp", units)


def evaluate(s: SymbolicExpSum, x) -> LogValue:
    x = np.asarray(x, dtype=float)
    t = s.scale * (s.keys @ x)
    return lv_sum(LogValue(int(sg), float(lg + ti)) for sg, lg, ti in zip(s.signs, s.logs, t))


def evaluate_batch(s: SymbolicExpSum, points) -> tuple[np.ndarray, np.ndarray]:
    """Values at each row of ``points`` plus a per-point cancellation flag."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    vals = np.empty(len(pts))
    flags = np.empty(len(pts), dtype=bool)
    for j, x in enumerate(pts):
        v = evaluate(s, x)
        vals[j] = float(v)
        flags[j] = v.degraded
    return vals, flags
