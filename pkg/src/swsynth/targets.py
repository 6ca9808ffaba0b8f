"""Target functions on a box: a small closed-form catalog plus gridded CSV data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .cube import Box

__all__ = ["CATALOG", "TargetFunction", "make_target", "load_csv_target"]

CATALOG = ("constant", "linear", "gaussian_bump", "sin_product", "runge")


@dataclass(frozen=True, eq=False)
class TargetFunction:
    kind: str
    domain: Box
    params: dict[str, Any] = field(default_factory=dict)
    _interp: Any = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def __call__(self, points) -> np.ndarray:
        y = np.atleast_2d(np.asarray(points, dtype=float))
        if y.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}")
        p = self.params
        if self.kind == "constant":
            return np.full(len(y), float(p["value"]))
        if self.kind == "linear":
            return y @ np.asarray(p["weights"], dtype=float) + float(p["bias"])
        if self.kind == "gaussian_bump":
            r2 = np.sum((y - np.asarray(p["center"])) ** 2, axis=1)
            return p["amplitude"] * np.exp(-r2 / (2.0 * p["width"] ** 2))
        if self.kind == "sin_product":
            return p["amplitude"] * np.prod(np.sin(p["frequency"] * y), axis=1)
        if self.kind == "runge":
            r2 = np.sum((y - np.asarray(p["center"])) ** 2, axis=1)
            return 1.0 / (1.0 + p["steepness"] * r2)
        if self.kind == "sampled":
            return self._interp(self.domain.clip(y))
        raise ValueError(f"unknown target kind {self.kind!r}")

    def exact_inverse_modulus(self, eps: float) -> float | None:
        """Closed-form inverse modulus where one is known, else None.

        Linear: ``eps/|w|`` is tight when the box holds a segment parallel
        to ``w`` of that length; otherwise no closed form is claimed.
        """
        diam = self.domain.diameter
        if self.kind == "constant":
            return diam
        if self.kind == "linear":
            w = np.asarray(self.params["weights"], dtype=float)
            norm = float(np.linalg.norm(w))
            widths = self.domain.widths
            spread = float(np.abs(w) @ widths)
            if norm == 0 or spread <= eps:
                return diam
            length = eps / norm
            if np.all(length * np.abs(w) / norm <= widths):
                return min(length, diam)
        return None

    def lipschitz(self) -> float | None:
        p = self.params
        if self.kind == "constant":
            return 0.0
        if self.kind == "linear":
            return float(np.linalg.norm(p["weights"]))
        if self.kind == "gaussian_bump":
            return p["amplitude"] * math.exp(-0.5) / p["width"]
        return None

    def describe(self) -> dict:
        return {"kind": self.kind, "params": {k: _jsonable(v) for k, v in self.params.items()},
                "domain": {"lower": list(self.domain.lower), "upper": list(self.domain.upper)}}


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return list(v)
    return v


def make_target(kind: str, domain: Box, **params) -> TargetFunction:
    """Catalog function with defaults filled in (center defaults to the box center)."""
    d = domain.dim
    center = tuple((np.asarray(domain.lower) + np.asarray(domain.upper)) / 2.0)
    defaults: dict[str, dict[str, Any]] = {
        "constant": {"value": 0.5},
        "linear": {"weights": (1.0,) + (0.0,) * (d - 1), "bias": 0.0},
        "gaussian_bump": {"amplitude": 1.0, "width": 0.25, "center": center},
        "sin_product": {"amplitude": 1.0, "frequency": math.pi},
        "runge": {"steepness": 25.0, "center": center},
    }
    if kind not in defaults:
        raise ValueError(f"unknown catalog function {kind!r}; choose from {', '.join(CATALOG)}")
    merged = {**defaults[kind], **{k: v for k, v in params.items() if v is not None}}
    for key in ("weights", "center"):
        if key in merged:
            merged[key] = tuple(float(v) for v in merged[key])
            if len(merged[key]) != d:
                raise ValueError(f"{key} must have length {d}")
    return TargetFunction(kind, domain, merged)


def load_csv_target(path: str | Path) -> TargetFunction:
    """Read ``x1,...,xd,value`` rows on a full regular grid; multilinear in between."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if len(header) < 2:
        raise ValueError(f"{path}: header needs at least one coordinate column and 'value'")
    for i, name in enumerate(header[:-1]):
        if name != f"x{i + 1}":
            raise ValueError(f"{path}: column {i + 1} is named {name!r}, expected 'x{i + 1}'")
    if header[-1] != "value":
        raise ValueError(f"{path}: last column is named {header[-1]!r}, expected 'value'")
    d = len(header) - 1
    try:
        data = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[1] != d + 1 or len(data) == 0:
        raise ValueError(f"{path}: every row needs {d + 1} fields")
    axes = [np.unique(data[:, i]) for i in range(d)]
    if any(len(a) < 2 for a in axes):
        raise ValueError(f"{path}: every axis needs at least two grid values")
    shape = tuple(len(a) for a in axes)
    if len(data) != math.prod(shape):
        raise ValueError(f"{path}: {len(data)} rows do not form a regular {'x'.join(map(str, shape))} grid")
    idx = tuple(np.searchsorted(axes[i], data[:, i]) for i in range(d))
    values = np.full(shape, np.nan)
    values[idx] = data[:, d]
    if np.isnan(values).any():
        raise ValueError(f"{path}: grid has duplicate or missing points")
    domain = Box(tuple(a[0] for a in axes), tuple(a[-1] for a in axes))
    interp = RegularGridInterpolator(axes, values, method="linear")
    return TargetFunction("sampled", domain, {"source": str(path), "shape": list(shape)}, interp)
