"""Global approximant: cube grid, level slices and ``g = eps * sum_i p_i``.

The domain is covered by cubes ``I(x, r)`` with centers on ``r Z^d`` and
``r = delta / (3 sqrt d)``, where ``delta`` is the inverse modulus of
continuity of ``f`` at ``eps/2``.  Each cube gets a soft indicator with
band factor 2; cubes whose mid-value reaches level ``i*eps`` are merged into
slice ``p_i = 1 - prod (1 - g_x)``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from . import expansion
from .combinatorics import l1_count_closed, lattice_ball_bound
from .cube import Box, CubeIndicatorSpec, HyperCube, expand_indicator_symbolic, log_g_batch, make_spec
from .expnet import ExpNetwork
from .numerics import LogValue
from .targets import TargetFunction

__all__ = [
    "GridConstruction",
    "TheoremBound",
    "SupError",
    "PartitionReport",
    "estimate_inverse_modulus",
    "build_grid",
    "eval_slice",
    "eval_global",
    "measure_sup_error",
    "theorem_bound",
    "case_partition_check",
    "uncovered_points",
    "slices_nested",
    "mid_value_spread",
    "log10_full_expansion_units",
    "expand_global",
    "OMEGA",
    "MAX_CUBES",
]

log = logging.getLogger(__name__)

OMEGA = 2.0
MAX_CUBES = 10**5
CONSERVATIVE_FACTOR = 0.9
_PAIR_POINT_BUDGET = 2000
_POINT_CHUNK = 256


def _default_density(d: int) -> int:
    return max(2, int(math.floor(_PAIR_POINT_BUDGET ** (1.0 / d) + 1e-9)))


def _grid_points(domain: Box, density: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, density) for lo, hi in zip(domain.lower, domain.upper)]
    return np.array(list(itertools.product(*axes)), dtype=float)


def estimate_inverse_modulus(f: TargetFunction, eps: float, grid_density: int | None = None) -> float:
    """Largest ``delta`` such that points closer than ``delta`` differ by at most ``eps``.

    Closed forms are used where the catalog provides them.  Otherwise the
    smallest distance among sampled pairs whose values differ by more than
    ``eps`` is taken, shrunk by 0.9 and clamped to ``(0, diam K]``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    diam = f.domain.diameter
    if diam <= 0:
        raise ValueError("degenerate domain: zero diameter")
    exact = f.exact_inverse_modulus(eps)
    if exact is not None:
        return exact
    density = grid_density or _default_density(f.dim)
    if density < 2:
        raise ValueError("grid_density must be at least 2")
    pts = _grid_points(f.domain, density)
    vals = f(pts)
    dist = pdist(pts)
    diff = pdist(vals[:, None], "cityblock")
    bad = dist[diff > eps]
    delta = float(bad.min()) if bad.size else diam
    return min(diam, max(CONSERVATIVE_FACTOR * delta, np.nextafter(0.0, 1.0)))


@dataclass(frozen=True, eq=False)
class GridConstruction:
    domain: Box
    eps: float
    delta: float
    r: float
    centers: np.ndarray  # (C, d), lexicographic in the integer lattice index
    v_min: np.ndarray
    v_max: np.ndarray
    v_mid: np.ndarray  # after subtracting range_shift
    n_slices: int
    slice_masks: np.ndarray  # (n_slices, C) bool; row i-1 is X_i
    range_shift: float
    f_range: float
    per_cube_eps: float
    template: CubeIndicatorSpec
    degenerate: np.ndarray  # (C,) bool, K inside I(x, 2r)
    subgrid: int
    flags: tuple[str, ...] = field(default_factory=tuple)

    @property
    def d(self) -> int:
        return self.domain.dim

    @property
    def num_cubes(self) -> int:
        return len(self.centers)

    @property
    def diam(self) -> float:
        return self.domain.diameter

    def slice(self, i: int) -> np.ndarray:
        """Center indices of ``X_i`` (1-based ``i``)."""
        if not 1 <= i <= self.n_slices:
            raise IndexError(f"slice index {i} out of range 1..{self.n_slices}")
        return np.flatnonzero(self.slice_masks[i - 1])

    def spec(self, j: int) -> CubeIndicatorSpec:
        t = self.template
        return make_spec(
            HyperCube(tuple(self.centers[j]), self.r),
            OMEGA,
            self.per_cube_eps,
            self.diam,
            domain=self.domain,
            k_override=t.k_int if "k-override" in t.overrides else None,
            n_override=t.n if "n-override" in t.overrides else None,
        )


def _lattice_range(lo: float, hi: float, r: float) -> list[int]:
    # candidates first, then the exact float intersection test decides
    m_lo = math.ceil((lo - r) / r) - 1
    m_hi = math.floor((hi + r) / r) + 1
    return [m for m in range(m_lo, m_hi + 1) if m * r - r <= hi and m * r + r >= lo]


def _cube_samples(domain: Box, center: np.ndarray, r: float, subgrid: int) -> np.ndarray:
    """Regular ``subgrid**d`` points (corners included) of ``I(x, r)`` clipped to K."""
    lo = np.maximum(center - r, domain.lower)
    hi = np.minimum(center + r, domain.upper)
    axes = [np.linspace(a, b, subgrid) for a, b in zip(lo, hi)]
    return np.array(list(itertools.product(*axes)), dtype=float)


def build_grid(
    f: TargetFunction,
    eps: float,
    *,
    grid_density: int | None = None,
    subgrid: int = 3,
    r_override: float | None = None,
    cube_k_override: int | None = None,
    cube_n_override: int | None = None,
    max_cubes: int = MAX_CUBES,
) -> GridConstruction:
    """Build the cube grid, mid-values and slices for accuracy ``eps``.

    ``r_override`` and the ``cube_*_override`` hooks exist for tests and
    desk-scale expansion; each one used is recorded in ``flags``.
    """
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    if subgrid < 2:
        raise ValueError("subgrid must be at least 2 (cube corners)")
    K = f.domain
    d = K.dim
    flags = []
    delta = estimate_inverse_modulus(f, eps / 2.0, grid_density)
    r = delta / (3.0 * math.sqrt(d))
    if r_override is not None:
        r = float(r_override)
        flags.append("r-override")
    ranges = [_lattice_range(lo, hi, r) for lo, hi in zip(K.lower, K.upper)]
    count = math.prod(len(a) for a in ranges)
    if count > max_cubes:
        raise ValueError(f"grid infeasible; increase eps or shrink K ({count} cubes > {max_cubes})")
    centers = np.array(list(itertools.product(*ranges)), dtype=float) * r

    v_min = np.empty(len(centers))
    v_max = np.empty(len(centers))
    for j, c in enumerate(centers):
        vals = f(_cube_samples(K, c, r, subgrid))
        v_min[j], v_max[j] = vals.min(), vals.max()
    shift = float(v_min.min())
    f_range = float(v_max.max()) - shift
    v_mid = 0.5 * (v_min + v_max) - shift

    n_slices = math.floor(2.0 / eps * f_range) - 1
    if n_slices < 1:
        flags.append("n-slices-clamped")
        n_slices = 1
    levels = eps * np.arange(1, n_slices + 1)
    masks = v_mid[None, :] >= levels[:, None]

    per_cube_eps = eps / (len(centers) * n_slices)
    template = make_spec(
        HyperCube(tuple(centers[0]), r),
        OMEGA,
        per_cube_eps,
        K.diameter,
        k_override=cube_k_override,
        n_override=cube_n_override,
    )
    flags.extend(template.overrides)
    wide = 2.0 * r
    degenerate = np.all((np.asarray(K.lower) >= centers - wide) & (np.asarray(K.upper) <= centers + wide), axis=1)
    return GridConstruction(
        domain=K,
        eps=eps,
        delta=delta,
        r=r,
        centers=centers,
        v_min=v_min - shift,
        v_max=v_max - shift,
        v_mid=v_mid,
        n_slices=n_slices,
        slice_masks=masks,
        range_shift=shift,
        f_range=f_range,
        per_cube_eps=per_cube_eps,
        template=template,
        degenerate=degenerate,
        subgrid=subgrid,
        flags=tuple(flags),
    )


def _log_one_minus_g(gc: GridConstruction, idx: np.ndarray, points: np.ndarray) -> np.ndarray:
    """``log(1 - g_x(y))`` for centers ``idx`` and points; shape ``(len(idx), len(points))``."""
    lg = log_g_batch(gc.template, points, gc.centers[idx])
    deg = gc.degenerate[idx]
    if deg.any():
        lg[deg] = math.log1p(-gc.per_cube_eps / 2.0)
    with np.errstate(divide="ignore"):
        return np.log(-np.expm1(lg))


def _slice_values(gc: GridConstruction, points: np.ndarray) -> np.ndarray:
    """All slice values, shape ``(n_slices, len(points))``."""
    out = np.zeros((gc.n_slices, len(points)))
    active = np.flatnonzero(gc.slice_masks.any(axis=0))
    if not active.size:
        return out
    masks = gc.slice_masks[:, active]
    for a in range(0, len(points), _POINT_CHUNK):
        pts = points[a : a + _POINT_CHUNK]
        l1mg = _log_one_minus_g(gc, active, pts)
        for i in range(gc.n_slices):
            if masks[i].any():
                out[i, a : a + len(pts)] = -np.expm1(l1mg[masks[i]].sum(axis=0))
    return out


def eval_slice(gc: GridConstruction, i: int, y) -> np.ndarray | float:
    """``p_i(y) = 1 - prod_{x in X_i} (1 - g_x(y))``, summed as logs."""
    pts = np.atleast_2d(np.asarray(y, dtype=float))
    idx = gc.slice(i)
    if not idx.size:
        vals = np.zeros(len(pts))
    else:
        vals = np.empty(len(pts))
        for a in range(0, len(pts), _POINT_CHUNK):
            chunk = pts[a : a + _POINT_CHUNK]
            vals[a : a + len(chunk)] = -np.expm1(_log_one_minus_g(gc, idx, chunk).sum(axis=0))
    return float(vals[0]) if np.ndim(y) == 1 else vals


def eval_global(gc: GridConstruction, y) -> np.ndarray | float:
    """``eps * sum_i p_i(y) + range_shift``."""
    pts = np.atleast_2d(np.asarray(y, dtype=float))
    vals = gc.eps * _slice_values(gc, pts).sum(axis=0) + gc.range_shift
    return float(vals[0]) if np.ndim(y) == 1 else vals


@dataclass(frozen=True)
class SupError:
    sup_err: float
    witness: tuple[float, ...]
    n_points: int

    def __iter__(self):
        yield self.sup_err
        yield self.witness


def measurement_points(domain: Box, sample_density: int, n_halton: int = 1000) -> np.ndarray:
    return np.vstack([_grid_points(domain, sample_density), domain.halton(n_halton, seed=None)])


def measure_sup_error(gc: GridConstruction, f: TargetFunction, sample_density: int = 21, n_halton: int = 1000) -> SupError:
    """Max ``|f - g|`` over a regular grid plus unscrambled Halton points."""
    if sample_density < 10:
        raise ValueError("sample_density must be at least 10 per axis")
    pts = measurement_points(gc.domain, sample_density, n_halton)
    err = np.abs(f(pts) - eval_global(gc, pts))
    j = int(np.argmax(err))
    return SupError(float(err[j]), tuple(float(v) for v in pts[j]), len(pts))


@dataclass(frozen=True)
class TheoremBound:
    log_h: LogValue
    C: float
    log_lattice: float  # natural log of the lattice-count factor

    @property
    def h_log10(self) -> float:
        return self.log_h.log10_abs()

    @property
    def lattice_log10(self) -> float:
        return self.log_lattice / math.log(10.0)


def theorem_bound(d: int, diam_K: float, delta: float, eps: float, force: bool = False) -> TheoremBound:
    """Neuron-count bound for the global approximant, in the log domain."""
    if d < 2 and not force:
        raise ValueError("the bound assumes input dimension d >= 2 (pass force=True to evaluate anyway)")
    if d < 1 or not diam_K > 0 or not delta > 0 or not eps > 0:
        raise ValueError("need d >= 1 and positive diam_K, delta, eps")
    C = (4.0 + 1.5 * math.log2(d)) * 3.0 * math.sqrt(d * diam_K * diam_K) / delta
    log_lattice = lattice_ball_bound(d, diam_K / 2.0, delta / (3.0 * math.sqrt(d))).log_abs
    inner = float(np.logaddexp(log_lattice + C * math.log(2.0 / eps), 0.0))
    return TheoremBound(LogValue(1, d * (math.log(2.0 * math.e / d) + inner)), C, log_lattice)


@dataclass(frozen=True)
class PartitionReport:
    slice_index: int
    counts: tuple[int, int, int]  # (in some I(x,r), outside every I(x,2r), annulus)
    double_classified: int
    unclassified: int
    total: int

    @property
    def ok(self) -> bool:
        return self.double_classified == 0 and self.unclassified == 0 and sum(self.counts) == self.total


def _inf_dist(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return np.abs(points[:, None, :] - centers[None, :, :]).max(axis=2)


def _min_inf_dist(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    out = np.full(len(points), np.inf)
    if not len(centers):
        return out
    for a in range(0, len(points), _POINT_CHUNK):
        out[a : a + _POINT_CHUNK] = _inf_dist(points[a : a + _POINT_CHUNK], centers).min(axis=1)
    return out


def case_partition_check(gc: GridConstruction, slice_index: int, samples) -> PartitionReport:
    """Classify samples into the three cases of the slice argument, each by its own predicate."""
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    cen = gc.centers[gc.slice(slice_index)]
    dist = _min_inf_dist(pts, cen)
    case1 = dist <= gc.r
    case2 = ~(dist <= 2 * gc.r)
    case3 = (dist <= 2 * gc.r) & ~(dist <= gc.r)
    hits = case1.astype(int) + case2.astype(int) + case3.astype(int)
    return PartitionReport(
        slice_index,
        (int(case1.sum()), int(case2.sum()), int(case3.sum())),
        int((hits > 1).sum()),
        int((hits == 0).sum()),
        len(pts),
    )


def uncovered_points(gc: GridConstruction, samples) -> np.ndarray:
    """Samples of K not inside any ``I(x, r)``."""
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    return pts[~(_min_inf_dist(pts, gc.centers) <= gc.r)]


def slices_nested(gc: GridConstruction) -> bool:
    m = gc.slice_masks
    return bool(np.all(~m[1:] | m[:-1]))


def mid_value_spread(gc: GridConstruction, samples) -> float:
    """Max ``|v_mid(x) - v_mid(x')|`` over y in ``I(x,2r) minus I(x,r)`` and y in ``I(x',r)``."""
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    worst = 0.0
    for a in range(0, len(pts), 64):
        dist = _inf_dist(pts[a : a + 64], gc.centers)
        near = dist <= gc.r
        ring = (dist <= 2 * gc.r) & ~near
        hi_near = np.where(near, gc.v_mid, -np.inf).max(axis=1)
        lo_near = np.where(near, gc.v_mid, np.inf).min(axis=1)
        hi_ring = np.where(ring, gc.v_mid, -np.inf).max(axis=1)
        lo_ring = np.where(ring, gc.v_mid, np.inf).min(axis=1)
        ok = np.isfinite(hi_near) & np.isfinite(hi_ring)
        if ok.any():
            spread = np.maximum(hi_ring - lo_near, hi_near - lo_ring)[ok]
            worst = max(worst, float(spread.max()))
    return worst


def log10_full_expansion_units(gc: GridConstruction) -> float:
    """log10 of the exponent-lattice size of the fully expanded approximant.

    All cube indicators share the scale ``s``, so every term of ``g`` sits on
    ``{z : |z|_1 <= N}`` with ``N = n * k**n * |X_K|``; this counts that
    support without expanding anything.
    """
    t = gc.template
    log_n = math.log(t.n) + t.n * t.log_k + math.log(gc.num_cubes)
    d = gc.d
    if log_n < 40:
        N = t.n * (t.k_int or round(math.exp(t.log_k))) ** t.n * gc.num_cubes
        return math.log10(l1_count_closed(N, d))
    # 2^d N^d / d! leading term; the next term is O(1/N) relative
    return (d * math.log(2.0) + d * log_n - math.lgamma(d + 1)) / math.log(10.0)


def expand_global(gc: GridConstruction, max_terms: int = expansion.MAX_TERMS) -> ExpNetwork:
    """Explicit exp network for ``g``; only feasible with test-scale overrides."""
    t = gc.template
    if t.k_int is None:
        raise ValueError("expansion infeasible at these parameters: k is astronomically large")
    if 10 ** log10_full_expansion_units(gc) > max_terms:
        raise ValueError("expansion infeasible at these parameters: exponent lattice too large")
    one_minus: dict[int, expansion.SymbolicExpSum] = {}
    total = expansion.constant(gc.d, t.s, gc.range_shift) if gc.range_shift else None
    for i in range(1, gc.n_slices + 1):
        idx = gc.slice(i)
        if not idx.size:
            continue
        prod = None
        for j in idx:
            if j not in one_minus:
                one_minus[j] = expansion.affine_combine(-1.0, expand_indicator_symbolic(gc.spec(j), max_terms), 1.0)
            prod = one_minus[j] if prod is None else expansion.multiply(prod, one_minus[j])
        term = expansion.affine_combine(-gc.eps, prod, gc.eps)
        total = term if total is None else expansion.add(total, term)
    if total is None:
        return ExpNetwork(gc.d, "exp", ())
    net = expansion.to_network(total)
    return ExpNetwork(gc.d, "exp", net.units, gc.flags)
