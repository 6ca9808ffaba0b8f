"""Shallow networks ``sum_i c_i * psi(<a_i, x> + b_i)`` and their JSON format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .numerics import LogValue, from_real, lv_sum, to_real

__all__ = [
    "TRANSFERS",
    "ExpUnit",
    "ExpNetwork",
    "eval_network",
    "eval_batch",
    "eval_exp_logvalue",
    "network_from_reals",
    "merge_units",
    "concat",
    "network_to_dict",
    "network_from_dict",
    "dumps_network",
    "save_network",
    "load_network",
]

TRANSFERS = ("exp", "sigmoid", "relu", "step")


@dataclass(frozen=True)
class ExpUnit:
    coeff: LogValue
    weight: tuple[float, ...]
    bias: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "weight", tuple(float(w) for w in self.weight))
        if len(self.weight) < 1:
            raise ValueError("unit weight must have length >= 1")
        if not all(math.isfinite(w) for w in self.weight) or not math.isfinite(self.bias):
            raise ValueError("unit weight and bias must be finite")


@dataclass(frozen=True)
class ExpNetwork:
    dim: int
    transfer: str = "exp"
    units: tuple[ExpUnit, ...] = field(default_factory=tuple)
    # Free-form provenance (e.g. "k-override") carried into serialisation.
    flags: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "units", tuple(self.units))
        object.__setattr__(self, "flags", tuple(self.flags))
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.transfer not in TRANSFERS:
            raise ValueError(f"unknown transfer {self.transfer!r}")
        for i, u in enumerate(self.units):
            if len(u.weight) != self.dim:
                raise ValueError(f"unit {i} has weight length {len(u.weight)}, expected {self.dim}")

    @property
    def m(self) -> int:
        return len(self.units)

    def weights(self) -> np.ndarray:
        if not self.units:
            return np.zeros((0, self.dim))
        return np.array([u.weight for u in self.units], dtype=float)

    def biases(self) -> np.ndarray:
        return np.array([u.bias for u in self.units], dtype=float)


def _psi(transfer: str, t: np.ndarray) -> np.ndarray:
    if transfer == "sigmoid":
        return expit(t)
    if transfer == "relu":
        return np.maximum(t, 0.0)
    if transfer == "step":
        # Heaviside with H(0) = 1
        return (t >= 0.0).astype(float)
    raise ValueError(transfer)


def _check_point(net: ExpNetwork, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (net.dim,):
        raise ValueError(f"expected a point of dimension {net.dim}, got shape {x.shape}")
    return x


def eval_network(net: ExpNetwork, x) -> float:
    """Evaluate at one point.  Exp networks are summed in the log domain."""
    x = _check_point(net, x)
    if not net.units:
        return 0.0
    if net.transfer == "exp":
        return to_real(eval_exp_logvalue(net, x))
    t = net.weights() @ x + net.biases()
    c = np.array([to_real(u.coeff) for u in net.units])
    return math.fsum(c * _psi(net.transfer, t))


def eval_exp_logvalue(net: ExpNetwork, x) -> LogValue:
    """Value of an exp network at ``x`` as a LogValue (keeps the degraded flag)."""
    x = _check_point(net, x)
    t = net.weights() @ x + net.biases() if net.units else np.zeros(0)
    return lv_sum(LogValue(u.coeff.sign, u.coeff.log_abs + ti) for u, ti in zip(net.units, t) if u.coeff.sign)


def eval_batch(net: ExpNetwork, points) -> np.ndarray:
    """Evaluate at each row of ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != net.dim:
        raise ValueError(f"expected points of dimension {net.dim}, got {pts.shape[1]}")
    if not net.units:
        return np.zeros(len(pts))
    t = pts @ net.weights().T + net.biases()
    if net.transfer == "exp":
        signs = np.array([u.coeff.sign for u in net.units], dtype=float)
        logs = t + np.array([u.coeff.log_abs for u in net.units])
        logs[:, signs == 0] = -np.inf
        top = logs.max(axis=1)
        out = np.empty(len(pts))
        for j in range(len(pts)):
            if not np.isfinite(top[j]):
                out[j] = 0.0
                continue
            acc = math.fsum(signs * np.exp(logs[j] - top[j]))
            out[j] = to_real(from_real(acc) * LogValue(1, top[j])) if acc else 0.0
        return out
    c = np.array([to_real(u.coeff) for u in net.units])
    return _psi(net.transfer, t) @ c


def merge_units(net: ExpNetwork, tol: float = 0.0) -> ExpNetwork:
    """Fold biases into coefficients and combine units with matching weights.

    With ``tol == 0`` weights must match exactly.  With ``tol > 0`` units are
    clustered greedily in lexicographic weight order: a unit joins the
    current cluster when every component is within ``tol`` of the cluster's
    first weight, which then represents the whole cluster.
    """
    if net.transfer != "exp":
        raise ValueError("merge_units only applies to exp networks")
    folded = sorted(
        ((u.weight, LogValue(u.coeff.sign, u.coeff.log_abs + u.bias)) for u in net.units if u.coeff.sign),
        key=lambda wc: wc[0],
    )
    groups: list[tuple[tuple[float, ...], list[LogValue]]] = []
    for w, c in folded:
        if groups:
            rep = groups[-1][0]
            same = w == rep if tol == 0 else all(abs(a - b) <= tol for a, b in zip(w, rep))
            if same:
                groups[-1][1].append(c)
                continue
        groups.append((w, [c]))
    units = []
    for w, cs in groups:
        c = lv_sum(cs)
        if c.sign:
            units.append(ExpUnit(c, w, 0.0))
    return ExpNetwork(net.dim, "exp", tuple(units), net.flags)


def concat(a: ExpNetwork, b: ExpNetwork) -> ExpNetwork:
    if a.dim != b.dim or a.transfer != b.transfer:
        raise ValueError("networks must share dim and transfer")
    return ExpNetwork(a.dim, a.transfer, a.units + b.units, tuple(dict.fromkeys(a.flags + b.flags)))


def network_to_dict(net: ExpNetwork) -> dict:
    d = {
        "dim": net.dim,
        "transfer": net.transfer,
        "units": [
            {
                "coeff_sign": u.coeff.sign,
                "coeff_log_abs": u.coeff.log_abs,
                "weight": list(u.weight),
                "bias": u.bias,
            }
            for u in net.units
        ],
    }
    if net.flags:
        d["flags"] = list(net.flags)
    return d


def network_from_dict(d: dict) -> ExpNetwork:
    try:
        units = tuple(
            ExpUnit(LogValue(int(u["coeff_sign"]), float(u["coeff_log_abs"])), u["weight"], float(u["bias"]))
            for u in d["units"]
        )
        return ExpNetwork(int(d["dim"]), d["transfer"], units, tuple(d.get("flags", ())))
    except KeyError as exc:
        raise ValueError(f"network file is missing field {exc.args[0]!r}") from None


def dumps_network(net: ExpNetwork) -> str:
    # json writes floats with repr(), i.e. the shortest round-trip decimal
    return json.dumps(network_to_dict(net), indent=1) + "\n"


def save_network(net: ExpNetwork, path: str | Path) -> None:
    Path(path).write_text(dumps_network(net))


def load_network(path: str | Path) -> ExpNetwork:
    return network_from_dict(json.loads(Path(path).read_text()))


def network_from_reals(dim: int, coeffs: Sequence[float], weights, biases=None, transfer: str = "exp") -> ExpNetwork:
    """Convenience constructor from plain real coefficients."""
    weights = np.atleast_2d(np.asarray(weights, dtype=float)).reshape(len(coeffs), dim)
    biases = np.zeros(len(coeffs)) if biases is None else biases
    units = tuple(ExpUnit(from_real(c), tuple(w), float(b)) for c, w, b in zip(coeffs, weights, biases))
    return ExpNetwork(dim, transfer, units)
