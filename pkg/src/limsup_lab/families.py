"""Ball families with full-measure limsup and attached open shapes.

Generators produce balls B_i in [0,1]^d with nonincreasing radii; shape
rules attach an open set E_i inside each ball (concentric ball, ellipsoid
with power-law semiaxes, cube dust sized against the content module, or a
rasterized cusp) together with a piecewise-uniform smoothed measure on a
cube-union support inside E_i.

Rasterization is *inner*: only grid cells whose closure lies strictly
inside the open shape survive, so the support is genuinely contained in E_i.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from . import content as _content
from .errors import (
    DegenerateError,
    PreconditionError,
    RasterEmptyError,
    UnsupportedError,
)
from .geom import (
    AxisCube,
    Ball,
    CubeUnion,
    Ellipsoid,
    contains,
    shape_from_json,
    shape_to_json,
    volume,
)

__all__ = [
    "ConcentricRule",
    "EllipsoidRule",
    "DustRule",
    "CuspRule",
    "ShapeRule",
    "FamilySpec",
    "ShapePair",
    "gen_balls",
    "attach_shapes",
    "attach_one",
    "verify_full_measure",
    "FullMeasureReport",
    "rasterize",
    "uniform_smoothed",
    "parse_shape_rule",
    "save_family",
    "load_family",
    "pair_to_json",
    "pair_from_json",
    "totient_sieve",
    "dirichlet_balls_in_window",
]


# --- shape rules --------------------------------------------------------------


@dataclass(frozen=True)
class ConcentricRule:
    """E_i is the ball with the same center and diameter (diam B_i)^a."""

    a: float

    def __post_init__(self):
        if self.a < 1.0:
            raise PreconditionError("concentric exponent must satisfy a >= 1")

    def tag(self) -> str:
        return f"concentric:{self.a:g}"


@dataclass(frozen=True)
class EllipsoidRule:
    """E_i is the concentric ellipsoid with semiaxes (diam B_i)^{a_j} / 2."""

    a: tuple[float, ...]

    def __init__(self, a: Sequence[float]):
        object.__setattr__(self, "a", tuple(float(x) for x in a))
        _content.AnisotropyVector(self.a)  # validates 1 <= a_1 <= ... <= a_d

    def tag(self) -> str:
        return "ellipsoid:" + ",".join(f"{x:g}" for x in self.a)


@dataclass(frozen=True)
class DustRule:
    """E_i is a k^d grid of small cubes sized so the dyadic-cover content at
    s_target matches lambda(B_i)."""

    k: int
    s_target: float

    def __post_init__(self):
        if self.k < 1:
            raise PreconditionError("dust needs k >= 1")

    def tag(self) -> str:
        return f"dust:{self.k}:{self.s_target:g}"


@dataclass(frozen=True)
class CuspRule:
    """E_i is the power cusp {0 < u < delta, |v_j| < u^gamma} placed in B_i."""

    gamma: float

    def __post_init__(self):
        if self.gamma < 1.0:
            raise PreconditionError("cusp exponent must satisfy gamma >= 1")

    def tag(self) -> str:
        return f"cusp:{self.gamma:g}"


ShapeRule = Union[ConcentricRule, EllipsoidRule, DustRule, CuspRule]


def parse_shape_rule(text: str) -> ShapeRule:
    """Parse 'concentric:2', 'ellipsoid:1,2', 'dust:4:0.5', 'cusp:2'."""
    head, _, rest = text.partition(":")
    if head == "concentric":
        return ConcentricRule(float(rest))
    if head == "ellipsoid":
        return EllipsoidRule([float(x) for x in rest.split(",")])
    if head == "dust":
        k, s = rest.split(":")
        return DustRule(int(k), float(s))
    if head == "cusp":
        return CuspRule(float(rest))
    raise PreconditionError(f"unknown shape rule {text!r}")


@dataclass(frozen=True)
class FamilySpec:
    """Recipe for a reproducible ball family."""

    kind: str  # random_cover | dirichlet | explicit
    d: int
    shape_rule: ShapeRule
    count: int
    seed: int = 0
    radius_const: float = 2.0  # random_cover: r_i = radius_const * i^{-1/d}
    path: str | None = None  # explicit: JSONL file of balls

    def __post_init__(self):
        if self.count < 1:
            raise PreconditionError("count must be >= 1")
        if self.kind not in ("random_cover", "dirichlet", "explicit"):
            raise PreconditionError(f"unknown family kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class ShapePair:
    """One (B_i, E_i) with its smoothed cube-union support and measure."""

    ball: Ball
    shape: Union[Ball, Ellipsoid, CubeUnion]
    smoothed: _content.SmoothedShape
    index: int

    def __post_init__(self):
        if not contains(self.ball, self.shape):
            raise PreconditionError(f"shape of pair {self.index} not inside its ball")
        for c in self.smoothed.support.cubes:
            if not contains(self.ball, c):
                raise PreconditionError(
                    f"smoothed support of pair {self.index} leaks outside the ball"
                )

    @property
    def ell(self) -> float:
        return self.smoothed.density_bound

    @property
    def lambda_ball(self) -> float:
        return volume(self.ball)


# --- generators ---------------------------------------------------------------


def totient_sieve(n: int) -> np.ndarray:
    """Euler phi for 0..n by a vectorized sieve."""
    phi = np.arange(n + 1, dtype=np.int64)
    for p in range(2, n + 1):
        if phi[p] == p:  # p prime
            phi[p::p] -= phi[p::p] // p
    return phi


def spf_sieve(n: int) -> np.ndarray:
    """Smallest prime factor for 0..n (spf[1] = 1)."""
    spf = np.zeros(n + 1, dtype=np.int64)
    if n >= 1:
        spf[1] = 1
    for p in range(2, n + 1):
        if spf[p] == 0:
            view = spf[p::p]
            view[view == 0] = p
    return spf


def _dirichlet_index(p: int, q: int, cum_phi: np.ndarray) -> int:
    """0-based enumeration index of p/q among all coprime fractions ordered by
    increasing q, then increasing p."""
    base = int(cum_phi[q - 1]) if q >= 2 else 0
    ps = np.arange(1, p + 1)
    rank = int(np.count_nonzero(np.gcd(ps, q) == 1)) - 1
    return base + rank


def dirichlet_balls_in_window(
    lo: float,
    hi: float,
    q_min: int,
    q_max: int,
) -> list[tuple[int, int]]:
    """All (p, q) with q in [q_min, q_max], gcd(p,q)=1, and the ball
    B(p/q, q^-2) contained in [lo, hi]."""
    qs = np.arange(max(2, q_min), q_max + 1, dtype=np.int64)
    if len(qs) == 0:
        return []
    qf = qs.astype(float)
    r = 1.0 / (qf * qf)
    p_lo = np.maximum(np.ceil((lo + r) * qf - 1e-12).astype(np.int64), 1)
    p_hi = np.minimum(np.floor((hi - r) * qf + 1e-12).astype(np.int64), qs - 1)
    has = p_hi >= p_lo
    out: list[tuple[int, int]] = []
    for q, a, b in zip(qs[has], p_lo[has], p_hi[has]):
        ps = np.arange(a, b + 1)
        ps = ps[np.gcd(ps, int(q)) == 1]
        out.extend((int(p), int(q)) for p in ps)
    return out


def gen_balls(spec: FamilySpec) -> list[Ball]:
    """Generate the ball sequence of a family, radii nonincreasing."""
    if spec.kind == "random_cover":
        rng = np.random.default_rng(spec.seed)
        centers = rng.random((spec.count, spec.d))
        i = np.arange(1, spec.count + 1, dtype=float)
        r = spec.radius_const * i ** (-1.0 / spec.d)
        border = np.minimum(centers, 1.0 - centers).min(axis=1)
        r = np.minimum(r, border)
        if np.any(r <= 0.0):
            keep = r > 0.0
            centers, r = centers[keep], r[keep]
        order = np.argsort(-r, kind="stable")
        return [Ball(tuple(centers[k]), float(r[k])) for k in order]
    if spec.kind == "dirichlet":
        if spec.d != 1:
            raise UnsupportedError("dirichlet families are one-dimensional")
        balls: list[Ball] = []
        q = 2
        while len(balls) < spec.count:
            r = 1.0 / (q * q)
            for p in range(1, q):
                if math.gcd(p, q) == 1:
                    balls.append(Ball([p / q], r))
                    if len(balls) == spec.count:
                        break
            q += 1
        return balls
    if spec.kind == "explicit":
        if not spec.path:
            raise PreconditionError("explicit family needs a path")
        balls = []
        with open(spec.path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                shape = shape_from_json(obj.get("ball", obj))
                if not isinstance(shape, Ball):
                    raise PreconditionError("explicit family lines must hold balls")
                balls.append(shape)
        if not balls:
            raise DegenerateError(f"explicit family file {spec.path} is empty")
        balls.sort(key=lambda b: -b.radius)
        return balls
    raise PreconditionError(f"unknown family kind {spec.kind!r}")


# --- rasterization ------------------------------------------------------------


def _raster_cells_inside(
    lo: np.ndarray,
    hi: np.ndarray,
    cell: float,
    inside: "callable",
    max_cells: int = 2_000_000,
) -> list[AxisCube]:
    """Grid the box [lo, hi] at pitch ``cell`` and keep cells whose corners
    all satisfy the (strict) inside predicate."""
    d = len(lo)
    counts = np.maximum(1, np.ceil((hi - lo) / cell - 1e-12).astype(int))
    if int(np.prod(counts)) > max_cells:
        raise PreconditionError(
            f"rasterization would need {int(np.prod(counts))} cells; "
            "increase the cell size"
        )
    axes = [lo[j] + cell * np.arange(counts[j] + 1) for j in range(d)]
    grids = np.meshgrid(*axes, indexing="ij")
    corner_ok = inside(np.stack([g.ravel() for g in grids], axis=1)).reshape(
        grids[0].shape
    )
    # a cell survives iff all 2^d of its corners are inside
    ok = np.ones(tuple(counts), dtype=bool)
    for off in np.ndindex(*([2] * d)):
        sl = tuple(
            slice(off[j], off[j] + counts[j]) for j in range(d)
        )
        ok &= corner_ok[sl]
    cells = [
        AxisCube(tuple(lo[j] + idx[j] * cell for j in range(d)), cell)
        for idx in np.argwhere(ok)
    ]
    return cells


def rasterize(
    shape: Union[Ball, Ellipsoid],
    cells_per_minor: int = 8,
    max_cells: int = 2_000_000,
) -> CubeUnion:
    """Inner rasterization of an open ball or ellipsoid on a regular grid with
    ``cells_per_minor`` cells across the smallest semiaxis."""
    if isinstance(shape, Ball):
        center = np.asarray(shape.center)
        semiaxes = np.full(shape.d, shape.radius)
    else:
        center = np.asarray(shape.center)
        semiaxes = np.asarray(shape.semiaxes)
    d = len(center)
    if d == 1:
        # exact: a 1-d ball is an interval
        return CubeUnion(
            [AxisCube([float(center[0] - semiaxes[0])], 2.0 * float(semiaxes[0]))],
            validate=False,
        )
    cell = 2.0 * float(semiaxes.min()) / cells_per_minor

    def inside(points: np.ndarray) -> np.ndarray:
        return np.sum(((points - center) / semiaxes) ** 2, axis=1) < 1.0 - 1e-12

    cells = _raster_cells_inside(center - semiaxes, center + semiaxes, cell, inside, max_cells)
    if not cells:
        raise RasterEmptyError(
            f"no grid cell fits inside the shape at {cells_per_minor} cells per minor axis"
        )
    return CubeUnion(cells, validate=False)


def _rasterize_cusp(
    ball: Ball, gamma: float, cells_per_minor: int = 8, max_cells: int = 2_000_000
) -> CubeUnion:
    """Inner raster of the cusp {0 < u < delta, |v_j| < u^gamma} translated
    into the ball; delta fills the inscribed cube."""
    d = ball.d
    r = ball.radius
    L = 2.0 * r / math.sqrt(d)  # inscribed cube side
    delta = 0.95 * min(L, (L / 2.0) ** (1.0 / gamma)) if gamma > 1 else 0.95 * L
    if d == 1:
        lo = ball.center[0] - delta / 2.0
        return CubeUnion([AxisCube([lo], delta)], validate=False)
    half_w = delta**gamma
    apex = np.array(ball.center, dtype=float)
    apex[0] -= delta / 2.0

    def inside(points: np.ndarray) -> np.ndarray:
        u = points[:, 0] - apex[0]
        ok = (u > 1e-15) & (u < delta * (1.0 - 1e-12))
        v = np.abs(points[:, 1:] - apex[1:])
        with np.errstate(invalid="ignore"):
            lim = np.where(u > 0, u**gamma, 0.0)
        return ok & np.all(v < lim[:, None] * (1.0 - 1e-12), axis=1)

    cell = 2.0 * half_w / cells_per_minor
    lo = apex.copy()
    lo[1:] -= half_w
    hi = apex.copy()
    hi[0] += delta
    hi[1:] += half_w
    cells = _raster_cells_inside(lo, hi, cell, inside, max_cells)
    if not cells:
        raise RasterEmptyError("cusp rasterization produced no cells")
    return CubeUnion(cells, validate=False)


def uniform_smoothed(support: CubeUnion) -> _content.SmoothedShape:
    """Normalized Lebesgue measure on a cube union as a SmoothedShape:
    one atom per cell with weight lambda(cell)/lambda(support)."""
    vols = np.array([volume(c) for c in support.cubes])
    total = float(vols.sum())
    if total <= 0.0:
        raise DegenerateError("support has zero volume")
    centers = np.array([c.center for c in support.cubes])
    return _content.SmoothedShape(
        support=support,
        measure=_content.DiscreteMeasure(centers, vols / total),
        density_bound=1.0 / total,
    )


def _dust_support(ball: Ball, k: int, t: float) -> CubeUnion:
    """k^d cubes of side t on a regular grid inside the inscribed cube."""
    d = ball.d
    L = 2.0 * ball.radius / math.sqrt(d)
    corner0 = np.array(ball.center) - L / 2.0
    cells = []
    for idx in np.ndindex(*([k] * d)):
        c = corner0 + (np.array(idx) + 0.5) * (L / k) - t / 2.0
        cells.append(AxisCube(tuple(c), t))
    return CubeUnion(cells, validate=False)


def _size_dust(ball: Ball, k: int, s_target: float, rel_tol: float = 0.08) -> float:
    """Bisect the dust cube side so content_dp at s_target lands just above
    lambda(ball): inside [lam*(1+margin), lam*(1+rel_tol)] when reachable.

    Evaluating a couple of levels below the cube scale keeps the value
    stable against the evaluation depth used later by callers."""
    d = ball.d
    lam = volume(ball)
    L = 2.0 * ball.radius / math.sqrt(d)
    t_hi = 0.95 * L / k

    def measure(t: float) -> float:
        depth = min(24, max(8, int(math.ceil(-math.log2(max(t, 1e-12)))) + 4))
        return _content.content_dp(_dust_support(ball, k, t), s_target, depth)

    if measure(t_hi) < lam * 1.02:
        raise PreconditionError(
            f"dust with k={k} cannot reach content {lam:.3e} at s={s_target}; "
            "use fewer, larger cubes or a smaller ball"
        )
    t_lo = t_hi * 1e-6
    for _ in range(80):
        t = math.sqrt(t_lo * t_hi)
        c = measure(t)
        if c < lam * 1.02:
            t_lo = t
        else:
            t_hi = t
            if c <= lam * (1.0 + rel_tol):
                break
    return t_hi


def attach_one(
    ball: Ball,
    rule: ShapeRule,
    index: int,
    cells_per_minor: int = 8,
    max_cells: int = 2_000_000,
) -> ShapePair:
    """Attach the rule's open shape and smoothed measure to a single ball."""
    if isinstance(rule, ConcentricRule):
        diam_e = ball.diameter**rule.a
        shape: Union[Ball, Ellipsoid, CubeUnion] = Ball(ball.center, diam_e / 2.0)
        support = rasterize(shape, cells_per_minor, max_cells)
    elif isinstance(rule, EllipsoidRule):
        if len(rule.a) != ball.d:
            raise PreconditionError("ellipsoid exponent vector must have length d")
        semi = tuple(ball.diameter ** aj / 2.0 for aj in rule.a)
        shape = Ellipsoid(ball.center, semi)
        support = rasterize(shape, cells_per_minor, max_cells)
    elif isinstance(rule, DustRule):
        t = _size_dust(ball, rule.k, rule.s_target)
        support = _dust_support(ball, rule.k, t)
        shape = support
    elif isinstance(rule, CuspRule):
        support = _rasterize_cusp(ball, rule.gamma, cells_per_minor, max_cells)
        shape = support
    else:
        raise PreconditionError(f"unknown shape rule {rule!r}")
    return ShapePair(
        ball=ball, shape=shape, smoothed=uniform_smoothed(support), index=index
    )


def attach_shapes(
    balls: Sequence[Ball],
    rule: ShapeRule,
    cells_per_minor: int = 8,
    max_cells: int = 2_000_000,
) -> list[ShapePair]:
    return [
        attach_one(b, rule, i, cells_per_minor, max_cells)
        for i, b in enumerate(balls)
    ]


# --- full-measure verification -------------------------------------------------


@dataclass(frozen=True)
class FullMeasureReport:
    depth: int
    tolerance: float
    cutoffs: tuple[int, ...]
    coverages: tuple[float, ...]

    @property
    def passed(self) -> bool:
        return all(c >= 1.0 - self.tolerance for c in self.coverages)


def verify_full_measure(
    balls: Sequence[Ball],
    depth: int,
    tolerance: float = 0.01,
    cutoffs: Sequence[int] | None = None,
) -> FullMeasureReport:
    """Grid estimate of lambda(union of B_i, i >= n) for several tail
    cutoffs n, at grid resolution 2^-depth.  Report-only."""
    if not balls:
        raise DegenerateError("empty family")
    d = balls[0].d
    m = 2**depth
    if m**d > 4_000_000:
        raise PreconditionError("grid too fine for this dimension")
    if cutoffs is None:
        n = len(balls)
        cutoffs = sorted({0, n // 10, n // 4})
    cutoffs = tuple(int(c) for c in cutoffs)
    cutoff_set = set(cutoffs)
    centers_1d = (np.arange(m) + 0.5) / m
    covered = np.zeros((m,) * d, dtype=bool)
    coverage_at: dict[int, float] = {n: 0.0 for n in cutoffs if n >= len(balls)}
    # accumulate from the tail so cutoff n sees exactly union_{i>=n}
    for i in range(len(balls) - 1, -1, -1):
        b = balls[i]
        c = np.asarray(b.center)
        ranges = []
        for j in range(d):
            lo = int(np.searchsorted(centers_1d, c[j] - b.radius, side="left"))
            hi = int(np.searchsorted(centers_1d, c[j] + b.radius, side="right"))
            ranges.append((lo, hi))
        if all(lo < hi for lo, hi in ranges):
            axes = [centers_1d[lo:hi] - c[j] for j, (lo, hi) in enumerate(ranges)]
            grids = np.meshgrid(*axes, indexing="ij")
            mask = sum(g**2 for g in grids) <= b.radius**2
            sl = tuple(slice(lo, hi) for lo, hi in ranges)
            covered[sl] |= mask
        if i in cutoff_set:
            coverage_at[i] = float(covered.mean())
    return FullMeasureReport(
        depth=depth,
        tolerance=tolerance,
        cutoffs=cutoffs,
        coverages=tuple(coverage_at[n] for n in cutoffs),
    )


# --- family files (JSON lines) --------------------------------------------------


def pair_to_json(pair: ShapePair) -> dict:
    return {
        "index": pair.index,
        "ball": shape_to_json(pair.ball),
        "shape": shape_to_json(pair.shape),
        "support": shape_to_json(pair.smoothed.support),
        "weights": [float(w) for w in pair.smoothed.measure.weights],
        "density_bound": pair.smoothed.density_bound,
    }


def pair_from_json(obj: dict) -> ShapePair:
    support = shape_from_json(obj["support"])
    weights = np.asarray(obj["weights"], dtype=float)
    centers = np.array([c.center for c in support.cubes])
    smoothed = _content.SmoothedShape(
        support=support,
        measure=_content.DiscreteMeasure(centers, weights),
        density_bound=float(obj["density_bound"]),
    )
    return ShapePair(
        ball=shape_from_json(obj["ball"]),
        shape=shape_from_json(obj["shape"]),
        smoothed=smoothed,
        index=int(obj["index"]),
    )


def save_family(pairs: Iterable[ShapePair], path: str) -> None:
    with open(path, "w") as fh:
        for p in pairs:
            fh.write(json.dumps(pair_to_json(p), sort_keys=True) + "\n")


def load_family(path: str) -> list[ShapePair]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(pair_from_json(json.loads(line)))
    if not out:
        raise DegenerateError(f"family file {path} is empty")
    return out
