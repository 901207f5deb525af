"""Singular value function, Hausdorff content, and measure smoothing.

Four quantities live here, all parameterized by s in [0, d]:

* ``falconer_svf`` -- the classical closed form alpha_1...alpha_m *
  alpha_{m+1}^{s-m} for ellipsoids;
* ``phi_lower_lp`` -- the generalized max-min value for cube unions,
  sup over probability measures of the worst-case r^s / mu(B_r(x)),
  discretized to a finite net and solved as a linear program;
* ``content_dp`` -- a dyadic-cover upper bound on the Hausdorff content
  H^s_inf computed by dynamic programming over the dyadic tree of [0,1]^d;
* ``smooth_to_cubes`` -- mollification of a discrete measure into a
  bounded-density measure supported on a cube union.

``sandwich_check`` ties the first three together: the max-min value and the
cover value must bracket each other up to explicit comparability factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from ._ballvol import ball_box_volume_many
from .errors import DegenerateError, PreconditionError
from .geom import AxisCube, Ball, CubeUnion, Ellipsoid, volume, unit_ball_volume

__all__ = [
    "DiscreteMeasure",
    "SmoothedShape",
    "AnisotropyVector",
    "falconer_svf",
    "wwx_bound",
    "phi_lower_lp",
    "PhiLowerResult",
    "content_dp",
    "ball_cube_comparability",
    "sandwich_check",
    "SandwichReport",
    "smooth_to_cubes",
    "phi_of_shape",
    "kappa1_budget",
    "distance_to_complement",
]


# --- measures ---------------------------------------------------------------


class DiscreteMeasure:
    """Weighted atoms at points of R^d.

    Stands in for two different objects: probability measures produced by the
    max-min optimizer, and piecewise-uniform cell measures where atom k
    carries the mass of the cell it sits in.
    """

    __slots__ = ("points", "weights")

    def __init__(self, points, weights, normalized: bool = True):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        w = np.asarray(weights, dtype=float).ravel()
        if len(pts) != len(w):
            raise PreconditionError("points and weights must have equal length")
        if np.any(w < -1e-15):
            raise PreconditionError("weights must be nonnegative")
        w = np.maximum(w, 0.0)
        if normalized and abs(float(w.sum()) - 1.0) > 1e-12:
            raise PreconditionError(
                f"weights must sum to 1 (got {w.sum()!r}); pass normalized=False "
                "for an unnormalized measure"
            )
        self.points = pts
        self.weights = w

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    @property
    def atoms(self) -> list[tuple[tuple[float, ...], float]]:
        return [
            (tuple(map(float, p)), float(w))
            for p, w in zip(self.points, self.weights)
        ]

    def __len__(self) -> int:
        return len(self.weights)

    def mass_in_ball(self, x, r: float) -> float:
        x = np.asarray(x, dtype=float)
        dist2 = np.sum((self.points - x) ** 2, axis=1)
        return float(self.weights[dist2 <= r * r * (1 + 1e-15)].sum())

    def normalize(self) -> "DiscreteMeasure":
        t = self.total
        if t <= 0:
            raise DegenerateError("cannot normalize a zero measure")
        return DiscreteMeasure(self.points, self.weights / t)


@dataclass(frozen=True, eq=False)
class SmoothedShape:
    """A cube-union support with a piecewise-uniform measure on it.

    ``measure`` has one atom per support cell, sitting at the cell center and
    carrying the cell mass; ``density_bound`` dominates every cell density
    mass/volume.
    """

    support: CubeUnion
    measure: DiscreteMeasure
    density_bound: float

    def __post_init__(self):
        if len(self.support.cubes) != len(self.measure):
            raise PreconditionError("one measure atom per support cell required")
        centers = np.array([c.center for c in self.support.cubes])
        if not np.allclose(centers, self.measure.points, atol=1e-12):
            raise PreconditionError("atoms must sit at the support cell centers")
        vols = np.array([volume(c) for c in self.support.cubes])
        if np.any(self.measure.weights > self.density_bound * vols * (1 + 1e-9)):
            raise PreconditionError("cell mass exceeds density_bound * cell volume")

    @property
    def cell_densities(self) -> np.ndarray:
        vols = np.array([volume(c) for c in self.support.cubes])
        return self.measure.weights / vols


@dataclass(frozen=True)
class AnisotropyVector:
    """Exponent vector 1 <= a_1 <= ... <= a_d."""

    a: tuple[float, ...]

    def __init__(self, a: Sequence[float]):
        object.__setattr__(self, "a", tuple(float(x) for x in a))
        if not self.a or self.a[0] < 1.0:
            raise PreconditionError("anisotropy exponents must satisfy a_1 >= 1")
        if any(self.a[i] > self.a[i + 1] for i in range(len(self.a) - 1)):
            raise PreconditionError("anisotropy exponents must be nondecreasing")

    @property
    def d(self) -> int:
        return len(self.a)


# --- closed forms ------------------------------------------------------------


def falconer_svf(e: Ellipsoid, s: float) -> float:
    """alpha_1...alpha_m * alpha_{m+1}^{s-m} with m = floor(s).

    For integer s the trailing factor is 1, so the value is the product of
    the s largest semiaxes; s = d gives the full product.
    """
    d = e.d
    if not (0.0 <= s <= d):
        raise PreconditionError(f"s must lie in [0, {d}], got {s}")
    alpha = e.semiaxes
    m = int(math.floor(s))
    out = 1.0
    for j in range(m):
        out *= alpha[j]
    if s > m:
        out *= alpha[m] ** (s - m)
    return out


def wwx_bound(d: int, a: Union[AnisotropyVector, Sequence[float]]) -> float:
    """min over j = 1..d of (d + j*a_j - sum_{i<=j} a_i) / a_j."""
    if not isinstance(a, AnisotropyVector):
        a = AnisotropyVector(a)
    if a.d != d:
        raise PreconditionError("anisotropy vector length must equal d")
    best = math.inf
    for j in range(1, d + 1):
        aj = a.a[j - 1]
        # j*a_j - sum_{i<=j} a_i written as a sum of differences, so the
        # isotropic case gives exactly d/a_j with no rounding residue
        num = float(d) + sum(aj - a.a[i] for i in range(j))
        best = min(best, num / aj)
    return best


def kappa1_budget(s: float, eps: float = 0.1) -> float:
    """Guaranteed smoothing degradation 2^s / (1-eps)^2 of the max-min value
    when passing to a bounded-density cube-union measure."""
    if not (0.0 < eps < 1.0):
        raise PreconditionError("eps must lie in (0,1)")
    return 2.0**s / (1.0 - eps) ** 2


# --- generalized singular value function (max-min LP) ------------------------


@dataclass(frozen=True, eq=False)
class PhiLowerResult:
    """Finite max-min value over the constraint net plus certification data.

    ``value`` is the raw net optimum 1/z*.  ``certified`` divides out the
    radius-net slack 2^s and the center-shift slack (1 + h/r_min)^s, giving a
    bound that holds against all centers and radii, not just the net;
    ``dual_upper`` multiplies the same slack back in, an upper proxy used by
    the content sandwich.
    """

    value: float
    witness: DiscreteMeasure
    certified: float
    dual_upper: float
    radius_slack: float
    shift_slack: float
    z_star: float
    n_atoms: int
    n_constraints: int

    def __iter__(self):
        yield self.value
        yield self.witness


def _atom_grid(e: CubeUnion, resolution: int):
    """Cell centers (atoms), cell sides, and constraint points for the net."""
    centers = []
    sides = []
    corners = []
    for comp in e.cubes:
        d = comp.d
        k = resolution
        sub = comp.side / k
        for idx in np.ndindex(*([k] * d)):
            centers.append(
                [comp.corner[j] + (idx[j] + 0.5) * sub for j in range(d)]
            )
            sides.append(sub)
        for idx in np.ndindex(*([2] * d)):
            corners.append(
                [comp.corner[j] + idx[j] * comp.side for j in range(d)]
            )
    return (
        np.array(centers),
        np.array(sides),
        np.unique(np.array(corners), axis=0),
    )


def phi_lower_lp(
    e: CubeUnion, s: float, resolution: int = 4
) -> PhiLowerResult:
    """Solve the finite max-min: atoms on sub-cell centers, constraints
    mu(B_r(x)) <= z * r^s over x in the atom grid plus component corners and
    r in a dyadic ladder from min-cell-side/2 through diam(e).

    Maximizing the minimum of r^s/mu(B_r(x)) is the linear program
    min z subject to mu(B_r(x)) - z r^s <= 0, sum of weights = 1, w >= 0;
    the reported value is 1/z*.
    """
    if len(e.cubes) == 0 or volume(e) <= 0.0:
        raise DegenerateError("cube union has zero volume")
    if resolution < 1:
        raise PreconditionError("resolution must be >= 1")
    d = e.d
    if not (0.0 <= s <= d):
        raise PreconditionError(f"s must lie in [0, {d}], got {s}")

    atoms, cell_sides, corners = _atom_grid(e, resolution)
    xs = np.vstack([atoms, corners])
    n = len(atoms)

    r_min = float(cell_sides.min()) / 2.0
    diam = e.diameter
    n_rungs = max(1, int(math.ceil(math.log2(max(diam / r_min, 1.0)) - 1e-12)) + 1)
    rungs = r_min * 2.0 ** np.arange(n_rungs)

    # membership masks per (x, r): atom j in closed ball B_r(x)
    dist = np.sqrt(
        np.maximum(
            np.sum((xs[:, None, :] - atoms[None, :, :]) ** 2, axis=2), 0.0
        )
    )
    rows = []
    data_rows = []
    r_of_row = []
    for r in rungs:
        mask = dist <= r * (1.0 + 1e-12)
        occupied = np.flatnonzero(mask.any(axis=1))
        for i in occupied:
            rows.append(np.flatnonzero(mask[i]))
            r_of_row.append(r)
    m = len(rows)
    indptr = np.zeros(m + 1, dtype=np.int64)
    for k, cols in enumerate(rows):
        indptr[k + 1] = indptr[k] + len(cols) + 1
    # append z column (index n) with coefficient -r^s per row
    col_idx = np.concatenate(
        [np.concatenate([cols, [n]]) for cols in rows]
    )
    vals = np.concatenate(
        [
            np.concatenate([np.ones(len(cols)), [-(r_of_row[k] ** s)]])
            for k, cols in enumerate(rows)
        ]
    )
    A_ub = csr_matrix((vals, col_idx, indptr), shape=(m, n + 1))
    A_eq = csr_matrix(
        (np.ones(n), np.arange(n), np.array([0, n])), shape=(1, n + 1)
    )
    c = np.zeros(n + 1)
    c[n] = 1.0
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=np.zeros(m),
        A_eq=A_eq,
        b_eq=np.array([1.0]),
        bounds=[(0, None)] * (n + 1),
        method="highs",
    )
    if not res.success:
        raise DegenerateError(f"LP solver failed: {res.message}")
    w = np.maximum(res.x[:n], 0.0)
    w = w / w.sum()
    z_star = float(res.x[n])
    if z_star <= 0:
        raise DegenerateError("degenerate LP optimum z* <= 0")

    # witness feasibility re-check against every generated constraint
    r_arr = np.array(r_of_row)
    masses = np.array([w[cols].sum() for cols in rows])
    slackv = masses - z_star * r_arr**s
    if np.any(slackv > 1e-9 * np.maximum(1.0, z_star * r_arr**s)):
        raise DegenerateError("LP witness violates a net constraint after solve")

    value = 1.0 / z_star
    h = float((cell_sides.max()) * math.sqrt(d) / 2.0)
    radius_slack = 2.0**s
    shift_slack = (1.0 + h / r_min) ** s
    witness = DiscreteMeasure(atoms, w)
    return PhiLowerResult(
        value=value,
        witness=witness,
        certified=value / (radius_slack * shift_slack),
        dual_upper=value * radius_slack * shift_slack,
        radius_slack=radius_slack,
        shift_slack=shift_slack,
        z_star=z_star,
        n_atoms=n,
        n_constraints=m,
    )


# --- Hausdorff content by dyadic dynamic programming --------------------------


def content_dp(e: CubeUnion, s: float, max_depth: int = 10) -> float:
    """Dyadic-cover content of e inside [0,1]^d.

    cost(Q) = min(diam(Q)^s, sum of children costs) over dyadic cubes meeting
    e, zero otherwise; the root cost is an upper bound on the Hausdorff
    content H^s_inf(e).  The ball-vs-cube comparability factor d^{s/2} is
    reported by :func:`ball_cube_comparability`, not folded in.
    """
    if max_depth < 1:
        raise PreconditionError("max_depth must be >= 1")
    if len(e.cubes) == 0:
        return 0.0
    d = e.d
    lo, hi = e.bounds()
    if np.any(lo < -1e-9) or np.any(hi > 1.0 + 1e-9):
        raise PreconditionError("cube union must lie inside [0,1]^d")
    cells_lo = np.array([c.corner for c in e.cubes])
    cells_hi = cells_lo + np.array([c.side for c in e.cubes])[:, None]
    sqrt_d = math.sqrt(d)
    offsets = np.array(list(np.ndindex(*([2] * d))), dtype=float)

    def cost(qlo: np.ndarray, side: float, depth: int, idx: np.ndarray) -> float:
        diam_s = (side * sqrt_d) ** s
        if depth == max_depth:
            return diam_s
        half = side / 2.0
        total = 0.0
        for off in offsets:
            clo = qlo + off * half
            chi = clo + half
            mask = np.all(
                (cells_lo[idx] < chi) & (cells_hi[idx] > clo), axis=1
            )
            if mask.any():
                total += cost(clo, half, depth + 1, idx[mask])
                if total >= diam_s:
                    return diam_s
        return min(diam_s, total)

    return cost(np.zeros(d), 1.0, 0, np.arange(len(e.cubes)))


def ball_cube_comparability(d: int, s: float) -> float:
    """Cube covers report diam = side*sqrt(d); this d^{s/2} factor converts
    between ball-based and cube-based cover sums."""
    return float(d) ** (s / 2.0)


@dataclass(frozen=True)
class SandwichReport:
    """Both sides of the content sandwich with explicit slack factors."""

    s: float
    d: int
    phi_value: float
    phi_certified: float
    dual_upper: float
    content: float
    comparability: float
    slack: float
    lower_ok: bool
    upper_ok: bool

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok


def sandwich_check(
    e: CubeUnion,
    s: float,
    resolution: int = 4,
    max_depth: int = 10,
    slack: float = 1.05,
) -> SandwichReport:
    """Compute L = max-min value and U = cover content and test
    L <= U * d^{s/2} * slack and U <= 6^s * dual_upper * slack."""
    if len(e.cubes) == 0:
        raise DegenerateError("empty cube union")
    phi = phi_lower_lp(e, s, resolution=resolution)
    u = content_dp(e, s, max_depth=max_depth)
    comp = ball_cube_comparability(e.d, s)
    lower_ok = phi.value <= u * comp * slack * (1.0 + 1e-12)
    upper_ok = u <= 6.0**s * phi.dual_upper * slack * (1.0 + 1e-12)
    return SandwichReport(
        s=s,
        d=e.d,
        phi_value=phi.value,
        phi_certified=phi.certified,
        dual_upper=phi.dual_upper,
        content=u,
        comparability=comp,
        slack=slack,
        lower_ok=lower_ok,
        upper_ok=upper_ok,
    )


# --- mollification (measure smoothing onto cube unions) -----------------------


def distance_to_complement(point, u: CubeUnion) -> float:
    """Distance from a point to the complement of a cube union, computed on
    the exact box arrangement induced by the component faces."""
    p = np.atleast_1d(np.asarray(point, dtype=float))
    d = u.d
    cuts = []
    for j in range(d):
        vals = sorted(
            {c.corner[j] for c in u.cubes} | {c.corner[j] + c.side for c in u.cubes}
        )
        cuts.append(np.array(vals))
    # covered flags on the bounded arrangement grid
    shape = tuple(len(cj) - 1 for cj in cuts)
    covered = np.zeros(shape, dtype=bool)
    for c in u.cubes:
        sl = tuple(
            slice(
                int(np.searchsorted(cuts[j], c.corner[j], side="left")),
                int(np.searchsorted(cuts[j], c.corner[j] + c.side, side="left")),
            )
            for j in range(d)
        )
        covered[sl] = True
    # distance to any uncovered bounded box
    best = math.inf
    it = np.argwhere(~covered)
    for idx in it:
        s2 = 0.0
        for j, i in enumerate(idx):
            lo, hi = cuts[j][i], cuts[j][i + 1]
            s2 += max(lo - p[j], 0.0, p[j] - hi) ** 2
        best = min(best, math.sqrt(s2))
    # distance to the unbounded complement outside the arrangement bounds
    lo_env = np.array([cuts[j][0] for j in range(d)])
    hi_env = np.array([cuts[j][-1] for j in range(d)])
    best = min(best, float(np.min(p - lo_env)), float(np.min(hi_env - p)))
    return max(best, 0.0)


def smooth_to_cubes(
    mu: DiscreteMeasure,
    e_open: CubeUnion,
    delta: float,
    eps: float = 0.1,
    cell_target: float | None = None,
) -> SmoothedShape:
    """Mollify mu by the uniform kernel on B_delta, restrict to a cube grid
    over e_open, and renormalize.

    Requires delta strictly smaller than the distance from supp(mu) to the
    complement of e_open, so no mass leaks out and the renormalization is
    only the restriction loss (at most eps by construction of the grid).
    The output density is bounded by 1/lambda(B_delta) divided by the kept
    mass fraction.
    """
    if delta <= 0.0:
        raise PreconditionError("delta must be positive")
    if not (0.0 < eps < 1.0):
        raise PreconditionError("eps must lie in (0,1)")
    d = e_open.d
    if mu.d != d:
        raise PreconditionError("measure and union dimension mismatch")
    margin = min(distance_to_complement(p, e_open) for p in mu.points)
    if delta >= margin:
        raise PreconditionError(
            f"delta={delta} exceeds the boundary margin {margin:.3e} of supp(mu)"
        )

    target = cell_target if cell_target is not None else delta / 2.0
    cells: list[AxisCube] = []
    for comp in e_open.cubes:
        k = max(1, math.ceil(comp.side / target))
        sub = comp.side / k
        for idx in np.ndindex(*([k] * d)):
            cells.append(
                AxisCube(
                    tuple(comp.corner[j] + idx[j] * sub for j in range(d)), sub
                )
            )
    lo = np.array([c.corner for c in cells])
    hi = lo + np.array([c.side for c in cells])[:, None]
    vol_ball = unit_ball_volume(d) * delta**d
    weights = np.zeros(len(cells))
    for p, w in zip(mu.points, mu.weights):
        if w == 0.0:
            continue
        weights += w * ball_box_volume_many(p, delta, lo, hi) / vol_ball
    kept = float(weights.sum())
    if kept < 1.0 - eps:
        raise PreconditionError(
            f"grid kept only mass {kept:.6f} < 1-eps; refine cell_target"
        )
    weights = weights / kept
    keep = weights > 0.0
    cells = [c for c, k_ in zip(cells, keep) if k_]
    weights = weights[keep]
    support = CubeUnion(cells, validate=False)
    centers = np.array([c.center for c in cells])
    vols = np.array([volume(c) for c in cells])
    density_bound = float(np.max(weights / vols))
    return SmoothedShape(
        support=support,
        measure=DiscreteMeasure(centers, weights),
        density_bound=density_bound,
    )


# --- dispatch -----------------------------------------------------------------


def phi_of_shape(
    shape: Union[Ball, Ellipsoid, CubeUnion], s: float, resolution: int = 4
) -> float:
    """Closed form for balls and ellipsoids, max-min LP value for cube unions."""
    if isinstance(shape, Ball):
        if not (0.0 <= s <= shape.d):
            raise PreconditionError(f"s must lie in [0, {shape.d}], got {s}")
        return shape.radius**s
    if isinstance(shape, Ellipsoid):
        return falconer_svf(shape, s)
    if isinstance(shape, CubeUnion):
        return phi_lower_lp(shape, s, resolution=resolution).value
    raise PreconditionError(f"phi is not defined for {type(shape)!r}")
