"""Soft indicator of a hypercube built from 2d exponential ridge units.

For a cube ``I(x0, r) = x0 + [-r, r]^d`` and a band factor ``omega > 1``::

    p(x) = 1/(2d) * sum_i [ exp(s(-x_i + x0_i - (r + omega r)/2 - diam K))
                          + exp(s( x_i - x0_i - (r + omega r)/2 - diam K)) ]
    g(x) = (1 - p(x)**n) ** (k**n)

with ``s = log(4d) / ((omega - 1) r)``.  ``p`` stays below ``gamma/2`` on the
cube and above ``gamma`` outside ``I(x0, omega r)``, and ``g`` turns that
gap into an approximate indicator.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from scipy.stats import qmc

from . import expansion
from .bernoulli import slices_for_eps
from .combinatorics import l1_count_closed
from .expnet import ExpNetwork, ExpUnit
from .numerics import LogValue, from_real, log_one_minus_pn_pow_kn_array, lv_sum, stable_one_minus_pn_pow_kn

__all__ = [
    "HyperCube",
    "Box",
    "CubeIndicatorSpec",
    "MembershipReport",
    "make_spec",
    "eval_p",
    "eval_g",
    "eval_g_checked",
    "log_p_batch",
    "log_g_batch",
    "membership_sum",
    "check_membership_inequalities",
    "inside_samples",
    "outside_samples",
    "lemma1_unit_bound",
    "indicator_base",
    "expand_indicator_symbolic",
    "expand_indicator",
    "EXPANSION_MAX_POWER",
]

EXPANSION_MAX_POWER = 10**4
_INT64_LOG = 63 * math.log(2.0)


@dataclass(frozen=True)
class HyperCube:
    center: tuple[float, ...]
    half_width: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    def contains(self, y) -> np.ndarray | bool:
        y = np.asarray(y, dtype=float)
        inside = np.all(np.abs(y - np.asarray(self.center)) <= self.half_width, axis=-1)
        return bool(inside) if inside.ndim == 0 else inside

    def scaled(self, factor: float) -> "HyperCube":
        return HyperCube(self.center, self.half_width * factor)

    def corners(self) -> np.ndarray:
        c = np.asarray(self.center)
        return np.array([c + self.half_width * np.array(sg) for sg in itertools.product((-1.0, 1.0), repeat=self.dim)])

    def face_midpoints(self) -> np.ndarray:
        c = np.asarray(self.center)
        eye = np.eye(self.dim) * self.half_width
        return np.vstack([c + eye, c - eye])


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``prod [lower_i, upper_i]``; the compact set K."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not lo:
            raise ValueError("lower and upper must be non-empty and of equal length")
        if any(h < l for l, h in zip(lo, hi)):
            raise ValueError("upper must be >= lower in every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, d: int) -> "Box":
        return cls((0.0,) * d, (1.0,) * d)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def diameter(self) -> float:
        return math.sqrt(math.fsum(w * w for w in self.widths))

    def contains(self, y) -> np.ndarray | bool:
        y = np.asarray(y, dtype=float)
        inside = np.all((y >= np.asarray(self.lower)) & (y <= np.asarray(self.upper)), axis=-1)
        return bool(inside) if inside.ndim == 0 else inside

    def clip(self, y) -> np.ndarray:
        return np.clip(y, self.lower, self.upper)

    def corners(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lower, self.upper))), dtype=float)

    def intersects_cube(self, cube: HyperCube) -> bool:
        c = np.asarray(cube.center)
        return bool(np.all(c - cube.half_width <= np.asarray(self.upper)) and np.all(c + cube.half_width >= np.asarray(self.lower)))

    def inside_cube(self, cube: HyperCube) -> bool:
        c = np.asarray(cube.center)
        return bool(np.all(np.asarray(self.lower) >= c - cube.half_width) and np.all(np.asarray(self.upper) <= c + cube.half_width))

    def halton(self, n: int, seed: int | None = 0) -> np.ndarray:
        """``n`` Halton points in the box; ``seed=None`` gives the unscrambled sequence."""
        if n <= 0:
            return np.zeros((0, self.dim))
        sampler = qmc.Halton(self.dim, scramble=seed is not None, seed=seed)
        return np.asarray(self.lower) + sampler.random(n) * self.widths


@dataclass(frozen=True)
class CubeIndicatorSpec:
    cube: HyperCube
    omega: float
    eps: float
    diam_K: float
    s: float
    gamma: LogValue
    n: int
    k: LogValue
    k_int: int | None
    floor_skipped: bool
    degenerate: bool = False
    overrides: tuple[str, ...] = field(default_factory=tuple)

    @property
    def d(self) -> int:
        return self.cube.dim

    @property
    def r(self) -> float:
        return self.cube.half_width

    @property
    def log_k(self) -> float:
        return self.k.log_abs

    @property
    def shift(self) -> float:
        """``(r + omega r)/2 + diam K``, subtracted inside every exponent of p."""
        return 0.5 * (self.r + self.omega * self.r) + self.diam_K

    @property
    def alpha(self) -> LogValue:
        return LogValue(1, self.gamma.log_abs - math.log(2.0))

    @property
    def beta(self) -> LogValue:
        return self.gamma


def make_spec(
    cube: HyperCube,
    omega: float,
    eps: float,
    diam_K: float,
    *,
    domain: Box | None = None,
    k_override: int | None = None,
    n_override: int | None = None,
) -> CubeIndicatorSpec:
    """Derive ``s, gamma, n, k`` for one cube.

    ``k_override``/``n_override`` replace the derived values for test-scale
    expansion and are recorded in ``overrides``.  When ``domain`` is given
    and lies entirely inside ``I(x0, omega r)`` the spec is degenerate and
    ``g`` is the constant ``1 - eps/2``.
    """
    if not omega > 1:
        raise ValueError("omega must exceed 1")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if not diam_K > 0:
        raise ValueError("diam_K must be positive")
    d = cube.dim
    r = cube.half_width
    band = (omega - 1.0) * r
    ratio = diam_K / band
    s = math.log(4 * d) / band
    gamma = LogValue(1, -0.5 * math.log(d) - ratio * math.log(4 * d))
    overrides = []
    n = slices_for_eps(eps)
    if n_override is not None:
        if n_override < 1:
            raise ValueError("n_override must be positive")
        n = int(n_override)
        overrides.append("n-override")
    log_k_raw = 0.5 * math.log(2 * d) + ratio * math.log(4 * d)
    if k_override is not None:
        if k_override < 2:
            raise ValueError("k_override must be >= 2")
        k_int, floor_skipped = int(k_override), False
        overrides.append("k-override")
    elif log_k_raw < _INT64_LOG:
        k_int, floor_skipped = math.floor(math.sqrt(2 * d) * (4 * d) ** ratio) + 1, False
    else:
        # floor and +1 change k by less than one part in 1e15 here
        k_int, floor_skipped = None, True
    k = LogValue(1, math.log(k_int)) if k_int is not None else LogValue(1, log_k_raw)
    degenerate = False
    if domain is not None:
        if domain.dim != d:
            raise ValueError("domain and cube dimensions differ")
        if not domain.intersects_cube(cube):
            raise ValueError("cube does not intersect the domain")
        degenerate = domain.inside_cube(cube.scaled(omega))
    return CubeIndicatorSpec(cube, omega, eps, diam_K, s, gamma, n, k, k_int, floor_skipped, degenerate, tuple(overrides))


def _check_dim(spec: CubeIndicatorSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.d,):
        raise ValueError(f"expected a point of dimension {spec.d}, got shape {x.shape}")
    return x


def eval_p(spec: CubeIndicatorSpec, x) -> LogValue:
    x = _check_dim(spec, x)
    u = x - np.asarray(spec.cube.center)
    base = -math.log(2 * spec.d)
    terms = [LogValue(1, base + spec.s * (-ui - spec.shift)) for ui in u]
    terms += [LogValue(1, base + spec.s * (ui - spec.shift)) for ui in u]
    return lv_sum(terms)


def eval_g_checked(spec: CubeIndicatorSpec, x) -> tuple[float, bool]:
    """``(g(x), outside_range)``; the flag is set when ``p(x) > 1`` and g is forced to 0."""
    if spec.degenerate:
        _check_dim(spec, x)
        return 1.0 - spec.eps / 2.0, False
    lp = eval_p(spec, x)
    if lp.log_abs > 0.0:
        return 0.0, True
    return math.exp(stable_one_minus_pn_pow_kn(lp, spec.n, spec.log_k)), False


def eval_g(spec: CubeIndicatorSpec, x) -> float:
    return eval_g_checked(spec, x)[0]


def log_p_batch(centers, points, *, s: float, shift: float) -> np.ndarray:
    """``log p`` for every (center, point) pair; shape ``(len(centers), len(points))``."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = centers.shape[1]
    u = points[None, :, :] - centers[:, None, :]
    expo = np.concatenate([s * (-u - shift), s * (u - shift)], axis=2)
    return logsumexp(expo, axis=2) - math.log(2 * d)


def log_g_batch(spec: CubeIndicatorSpec, points, centers=None) -> np.ndarray:
    """``log g`` over points for the spec's cube, or for ``centers`` sharing its parameters.

    Points with ``p > 1`` get ``-inf`` (g = 0), matching the flagged scalar path.
    """
    centers = np.asarray(spec.cube.center)[None, :] if centers is None else np.atleast_2d(centers)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if spec.degenerate:
        return np.full((len(centers), len(points)), math.log1p(-spec.eps / 2.0))
    lp = log_p_batch(centers, points, s=spec.s, shift=spec.shift)
    lg = log_one_minus_pn_pow_kn_array(lp, spec.n, spec.log_k)
    lg[np.isnan(lg)] = -np.inf
    return lg


def membership_sum(spec: CubeIndicatorSpec, points) -> np.ndarray:
    """``sum_i (4d)**((-u_i - (r+wr)/2)/((w-1)r)) + (4d)**((u_i - (r+wr)/2)/((w-1)r))``, u = y - x0."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    u = points - np.asarray(spec.cube.center)
    half = 0.5 * (spec.r + spec.omega * spec.r)
    band = (spec.omega - 1.0) * spec.r
    base = 4.0 * spec.d
    return np.sum(base ** ((-u - half) / band) + base ** ((u - half) / band), axis=1)


@dataclass
class MembershipReport:
    n_inside: int
    n_outside: int
    inside_max_sum: float
    outside_min_sum: float
    inside_violations: list = field(default_factory=list)
    outside_violations: list = field(default_factory=list)
    p_inside_max_ratio: float = 0.0  # max p / (gamma/2) over inside samples
    p_outside_min_ratio: float = math.inf  # min p / gamma over outside samples
    p_inside_violations: list = field(default_factory=list)
    p_outside_violations: list = field(default_factory=list)

    @property
    def total_violations(self) -> int:
        return (
            len(self.inside_violations)
            + len(self.outside_violations)
            + len(self.p_inside_violations)
            + len(self.p_outside_violations)
        )


def check_membership_inequalities(
    spec: CubeIndicatorSpec, samples_inside, samples_outside, rel_slack: float = 1e-12
) -> MembershipReport:
    """Check the sum bounds (<= sqrt d inside, > 2 sqrt d outside) and the matching p bounds."""
    inside = np.atleast_2d(np.asarray(samples_inside, dtype=float)).reshape(-1, spec.d)
    outside = np.atleast_2d(np.asarray(samples_outside, dtype=float)).reshape(-1, spec.d)
    if len(inside) and not np.all(spec.cube.contains(inside)):
        raise ValueError("an inside sample lies outside I(x0, r)")
    wide = spec.cube.scaled(spec.omega)
    if len(outside) and np.any(wide.contains(outside)):
        raise ValueError("an outside sample lies inside I(x0, omega r)")
    rd = math.sqrt(spec.d)
    s_in = membership_sum(spec, inside)
    s_out = membership_sum(spec, outside)
    rep = MembershipReport(
        n_inside=len(inside),
        n_outside=len(outside),
        inside_max_sum=float(s_in.max()) if len(s_in) else -math.inf,
        outside_min_sum=float(s_out.min()) if len(s_out) else math.inf,
    )
    rep.inside_violations = [tuple(p) for p in inside[s_in > rd * (1 + rel_slack)]]
    rep.outside_violations = [tuple(p) for p in outside[~(s_out > 2 * rd * (1 - rel_slack))]]
    c = np.asarray(spec.cube.center)[None, :]
    lg = spec.gamma.log_abs
    if len(inside):
        lp_in = log_p_batch(c, inside, s=spec.s, shift=spec.shift)[0]
        rep.p_inside_max_ratio = float(np.exp(lp_in.max() - (lg - math.log(2.0))))
        rep.p_inside_violations = [tuple(p) for p in inside[lp_in > lg - math.log(2.0) + math.log1p(rel_slack)]]
    if len(outside):
        lp_out = log_p_batch(c, outside, s=spec.s, shift=spec.shift)[0]
        rep.p_outside_min_ratio = float(np.exp(lp_out.min() - lg))
        rep.p_outside_violations = [tuple(p) for p in outside[lp_out < lg + math.log1p(-rel_slack)]]
    return rep


def inside_samples(spec: CubeIndicatorSpec, n: int, seed: int = 0) -> np.ndarray:
    """Halton points in ``I(x0, r)`` plus its corners and face midpoints."""
    c = np.asarray(spec.cube.center)
    box = Box(c - spec.r, c + spec.r)
    pts = np.clip(np.vstack([box.halton(n, seed), spec.cube.corners(), spec.cube.face_midpoints()]), c - spec.r, c + spec.r)
    # (c + r) - c can round above r; step such coordinates toward the center
    for _ in range(64):
        bad = np.abs(pts - c) > spec.r
        if not bad.any():
            break
        pts = np.where(bad, np.nextafter(pts, np.broadcast_to(c, pts.shape)), pts)
    return pts


def outside_samples(spec: CubeIndicatorSpec, domain: Box, n: int, seed: int = 0) -> np.ndarray:
    """Halton points of ``domain`` outside ``I(x0, omega r)``, plus the qualifying box corners."""
    wide = spec.cube.scaled(spec.omega)
    if domain.inside_cube(wide):
        return np.zeros((0, spec.d))
    corners = domain.corners()
    corners = corners[~wide.contains(corners)]
    sampler = qmc.Halton(spec.d, scramble=True, seed=seed)
    lo, w = np.asarray(domain.lower), domain.widths
    batches, count = [np.zeros((0, spec.d))], 0
    for _ in range(1000):
        if count >= n:
            break
        batch = lo + sampler.random(max(n, 256)) * w
        keep = batch[~wide.contains(batch)]
        batches.append(keep)
        count += len(keep)
    return np.vstack([np.vstack(batches)[:n], corners])


def lemma1_unit_bound(d: int, eps: float, diam_K: float, omega: float, r: float) -> LogValue:
    """``(2e/d)**d * ((2/eps)**E + 1)**d`` with ``E = (4 + 1.5 log2 d) diam K / ((omega-1) r)``."""
    if d < 1 or not eps > 0 or not diam_K > 0 or not omega > 1 or not r > 0:
        raise ValueError("invalid parameters for the unit bound")
    expo = (4.0 + 1.5 * math.log2(d)) * diam_K / ((omega - 1.0) * r)
    inner = float(np.logaddexp(expo * math.log(2.0 / eps), 0.0))
    return LogValue(1, d * (math.log(2.0 * math.e / d) + inner))


def indicator_base(spec: CubeIndicatorSpec) -> expansion.SymbolicExpSum:
    """``p`` as a symbolic sum over the keys ``+-e_i`` with scale ``s``."""
    d = spec.d
    base = -math.log(2 * d)
    terms = {}
    for i, x0 in enumerate(spec.cube.center):
        e = [0] * d
        e[i] = -1
        terms[tuple(e)] = LogValue(1, base + spec.s * (x0 - spec.shift))
        e[i] = 1
        terms[tuple(e)] = LogValue(1, base + spec.s * (-x0 - spec.shift))
    return expansion.from_terms(d, spec.s, terms)


def expand_indicator_symbolic(spec: CubeIndicatorSpec, max_terms: int = expansion.MAX_TERMS) -> expansion.SymbolicExpSum:
    if spec.degenerate:
        return expansion.constant(spec.d, spec.s, 1.0 - spec.eps / 2.0)
    if spec.k_int is None:
        raise ValueError("expansion infeasible at these parameters: k is astronomically large")
    power = spec.k_int**spec.n
    if spec.n * power > EXPANSION_MAX_POWER:
        raise ValueError(f"expansion infeasible at these parameters: n*k^n = {spec.n * power} > {EXPANSION_MAX_POWER}")
    if l1_count_closed(spec.n * power, spec.d) > max_terms:
        raise ValueError("expansion infeasible at these parameters: exponent lattice too large")
    pn = expansion.pow_expand(indicator_base(spec), spec.n, max_terms)
    return expansion.pow_expand(expansion.affine_combine(-1.0, pn, 1.0), power, max_terms)


def expand_indicator(spec: CubeIndicatorSpec) -> ExpNetwork:
    """The indicator as an explicit exp network (test-scale parameters only)."""
    net = expansion.to_network(expand_indicator_symbolic(spec))
    flags = spec.overrides + (("degenerate",) if spec.degenerate else ())
    return ExpNetwork(net.dim, "exp", net.units, flags)


def constant_network(d: int, value: float) -> ExpNetwork:
    return ExpNetwork(d, "exp", (ExpUnit(from_real(value), (0.0,) * d, 0.0),))
