"""Local-dimension verification and dimension estimators for construction trees.

Three instruments:

* ``verify_case_bounds`` checks the two-case local estimate of the tree
  measure with explicit constants.  For a sample point x on the deepest
  generation and a radius r between consecutive realized branch scales
  t_n < r <= t_{n-1}:

  - Case 1 (r >= diam B_{i_n}):   mu(B_r(x)) <= 20^d / kappa2 * max_y C_{n-1}(y) * r^d
  - Case 2 (r <  diam B_{i_n}):   mu(B_r(x)) <= C_{n-1}(x) / kappa2 * kappa1 * (2r)^s

  Both are finite-depth theorems for a correctly built tree; any violation
  indicates a construction bug (or an injected fault).

* ``mdp_lower_bound`` certifies the largest s in a grid such that
  mu(B_r(x)) <= C * r^s across a sliding window of two decades of r, the
  finite-scale form of the mass distribution principle.

* ``box_counting`` fits the slope of log N(delta) against log(1/delta)
  over dyadic scales, the packing-dimension proxy for tail unions.

The case split uses the *realized* per-branch scales stored in the tree
(actual cube and ball diameters), not the literal schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import content as _content
from .cantor import ConstructionTree, SelectionRecord, measure_of_ball, validate_tree
from .errors import DegenerateError, PreconditionError, UnresolvedScaleError
from .geom import AxisCube, Ball, CubeUnion, Ellipsoid, Shape

__all__ = [
    "BranchInfo",
    "case_split",
    "CaseSample",
    "LocalDimReport",
    "verify_case_bounds",
    "mdp_lower_bound",
    "box_counting",
    "BoxCountResult",
]


# --- branch walking and the case split -------------------------------------------


@dataclass(frozen=True)
class BranchInfo:
    """Branch of a point through the tree: node index and selection record
    per generation 1..depth, plus realized cube diameters t_0..t_depth."""

    nodes: tuple[int, ...]
    selections: tuple[SelectionRecord, ...]
    scales: tuple[float, ...]


def _walk_branch(tree: ConstructionTree, x: np.ndarray) -> BranchInfo:
    nodes = []
    sels = []
    scales = [math.sqrt(tree.d)]
    cur = 0
    for g in range(1, tree.depth + 1):
        kids = tree.children_of(g - 1, cur)
        if len(kids) == 0:
            raise PreconditionError("point left the construction before max depth")
        lo = tree.gen_lo[g][kids]
        side = tree.gen_side[g][kids]
        inside = np.all(
            (x >= lo - 1e-15) & (x <= lo + side[:, None] + 1e-15), axis=1
        )
        hit = np.flatnonzero(inside)
        if len(hit) == 0:
            raise PreconditionError(
                "point does not lie on the deepest resolved generation"
            )
        cur = int(kids[hit[0]])
        nodes.append(cur)
        sels.append(tree.selections[int(tree.gen_selection[g][cur])])
        scales.append(float(tree.gen_side[g][cur]) * math.sqrt(tree.d))
    return BranchInfo(tuple(nodes), tuple(sels), tuple(scales))


def case_split(
    tree: ConstructionTree, x, r: float
) -> tuple[int, int, BranchInfo]:
    """Return (case, n, branch) for the sample: n is the generation with
    t_n < r <= t_{n-1} in realized branch scales; case 1 when
    r >= diam B_{i_n}, case 2 otherwise."""
    x = np.asarray(x, dtype=float)
    branch = _walk_branch(tree, x)
    if tree.depth == 0:
        return 1, 1, branch  # generation-0 handling: no balls yet, Case 1
    n = None
    for j in range(1, tree.depth + 1):
        if branch.scales[j] < r:
            n = j
            break
    if n is None:
        raise UnresolvedScaleError(
            f"r={r:.3e} at or below the finest branch scale "
            f"{branch.scales[-1]:.3e}"
        )
    ball = branch.selections[n - 1].ball
    case = 1 if r >= ball.diameter else 2
    return case, n, branch


@dataclass(frozen=True)
class CaseSample:
    x: tuple[float, ...]
    r: float
    mu: float
    case: int
    generation: int
    bound: float
    passed: bool


@dataclass(frozen=True)
class LocalDimReport:
    """Case-bound samples plus summary statistics."""

    s: float
    kappa1: float
    samples: tuple[CaseSample, ...]
    fitted_slope: float
    s_certified: float
    consistency_problems: tuple[str, ...]

    @property
    def n_violations(self) -> int:
        return sum(1 for smp in self.samples if not smp.passed)

    @property
    def passed(self) -> bool:
        return self.n_violations == 0 and not self.consistency_problems


def _sample_points(
    tree: ConstructionTree,
    n: int,
    rng: np.random.Generator,
    mass_weighted: bool,
) -> np.ndarray:
    g = tree.depth
    vol = tree.gen_side[g] ** tree.d
    w = tree.gen_mass[g] if mass_weighted else vol
    p = w / w.sum()
    leaves = rng.choice(len(p), size=n, p=p)
    u = rng.random((n, tree.d))
    return tree.gen_lo[g][leaves] + u * tree.gen_side[g][leaves][:, None]


def verify_case_bounds(
    tree: ConstructionTree,
    s: float,
    n_samples: int = 10_000,
    seed: int = 0,
    kappa1: float | None = None,
    rungs_per_decade: int = 16,
    check_consistency: bool = True,
) -> LocalDimReport:
    """Sample (x, r) pairs and check the Case 1 / Case 2 bounds.

    x is drawn uniformly from the deepest-generation cube union, r from a
    log grid between the finest branch scale and diam([0,1]^d).  kappa1
    defaults to the smoothing budget 2^s/0.9^2.
    """
    k1 = _content.kappa1_budget(s) if kappa1 is None else kappa1
    rng = np.random.default_rng(seed)
    consistency = (
        tuple(validate_tree(tree)) if check_consistency else ()
    )
    max_c = [tree.max_c_const(g) for g in range(tree.depth + 1)]
    d = tree.d
    top = math.sqrt(d) * 0.999
    xs = _sample_points(tree, n_samples, rng, mass_weighted=False)
    samples: list[CaseSample] = []
    for i in range(n_samples):
        x = xs[i]
        branch = _walk_branch(tree, x)
        r_lo = branch.scales[-1] * (1.0 + 1e-9)
        n_rungs = max(2, int(math.log10(top / r_lo) * rungs_per_decade))
        rung = int(rng.integers(0, n_rungs))
        r = r_lo * (top / r_lo) ** (rung / (n_rungs - 1.0))
        r = min(r, top)
        if tree.depth == 0:
            mu = measure_of_ball(tree, x, r).value
            bound = 20.0**d / tree.kappa2 * r**d
            samples.append(
                CaseSample(
                    x=tuple(map(float, x)),
                    r=float(r),
                    mu=mu,
                    case=1,
                    generation=1,
                    bound=float(bound),
                    passed=mu <= bound * (1.0 + 1e-9),
                )
            )
            continue
        n = None
        for j in range(1, tree.depth + 1):
            if branch.scales[j] < r:
                n = j
                break
        if n is None:
            continue
        sel = branch.selections[n - 1]
        mu = measure_of_ball(tree, x, r).value
        if r >= sel.ball.diameter:
            case = 1
            bound = 20.0**d / tree.kappa2 * max_c[n - 1] * r**d
        else:
            case = 2
            c_here = (
                float(tree.gen_cconst[n - 1][branch.nodes[n - 2]])
                if n >= 2
                else 1.0
            )
            bound = c_here / tree.kappa2 * k1 * (2.0 * r) ** s
        samples.append(
            CaseSample(
                x=tuple(map(float, x)),
                r=float(r),
                mu=mu,
                case=case,
                generation=n,
                bound=float(bound),
                passed=mu <= bound * (1.0 + 1e-9),
            )
        )
    mus = np.array([smp.mu for smp in samples])
    rs = np.array([smp.r for smp in samples])
    pos = (
        (mus > 0)
        & (rs >= tree.coarsest_leaf_scale())
        & (rs <= max(tree.support_diameter(), tree.coarsest_leaf_scale() * 10))
    )
    if pos.sum() >= 2:
        lr = np.log(rs[pos])
        lm = np.log(mus[pos])
        slope = float(np.sum((lr - lr.mean()) * (lm - lm.mean())) / np.sum((lr - lr.mean()) ** 2))
    else:
        slope = float("nan")
    s_cert = _certify_from_samples(
        np.log(rs[pos]), np.log(mus[pos]), s_grid=np.arange(0.0, d + 1e-9, 0.05)
    )
    return LocalDimReport(
        s=s,
        kappa1=k1,
        samples=tuple(samples),
        fitted_slope=slope,
        s_certified=s_cert,
        consistency_problems=consistency,
    )


def _certify_from_samples(
    log_r: np.ndarray,
    log_mu: np.ndarray,
    s_grid: np.ndarray,
    C: float = 32.0,
    decades: float = 2.0,
) -> float:
    """Largest s such that some window of `decades` decades of r has
    mu <= C r^s for every sample inside."""
    if len(log_r) == 0:
        return 0.0
    width = decades * math.log(10.0)
    starts = np.unique(log_r)
    top = float(np.max(log_r))
    best = 0.0
    logC = math.log(C)
    for a in starts:
        if a + width > top + 1e-9:
            break  # truncated window: cannot span the required decades
        inside = (log_r >= a) & (log_r <= a + width)
        if inside.sum() < 8:
            continue
        lr = log_r[inside]
        lm = log_mu[inside]
        # need max over window of (log mu - s log r) <= log C
        for s in s_grid[::-1]:
            if np.max(lm - s * lr) <= logC:
                best = max(best, float(s))
                break
    return best


def mdp_lower_bound(
    tree: ConstructionTree,
    s_grid: Sequence[float],
    n_points: int = 300,
    rungs_per_decade: int = 12,
    C: float = 32.0,
    decades: float = 2.0,
    max_decades: float = 12.0,
    seed: int = 0,
) -> float:
    """Largest s in s_grid with sup mu(B_r(x))/r^s <= C over a sliding
    window of `decades` decades of r, sampled at mass-weighted points.

    Windows live between the coarsest leaf diameter (the scale down to
    which the measure equals any deeper refinement) and the diameter of the
    measure's support (above it the bound is vacuous), cut off at
    max_decades below the top."""
    if tree.depth < 0:
        raise PreconditionError("empty tree")
    rng = np.random.default_rng(seed)
    d = tree.d
    top = tree.support_diameter()
    r_lo = max(tree.coarsest_leaf_scale() * 1.01, top * 10.0 ** (-max_decades))
    if r_lo >= top:
        return 0.0
    n_r = max(4, int(math.log10(top / r_lo) * rungs_per_decade))
    rungs = np.geomspace(r_lo, top, n_r)
    xs = _sample_points(tree, n_points, rng, mass_weighted=True)
    mu = np.empty((n_points, n_r))
    for i in range(n_points):
        for k, r in enumerate(rungs):
            mu[i, k] = measure_of_ball(tree, xs[i], float(r)).value
    s_sorted = sorted(float(s) for s in s_grid)
    best = 0.0
    width = decades * math.log(10.0)
    log_r = np.log(rungs)
    logC = math.log(C)
    with np.errstate(divide="ignore"):
        log_mu = np.log(mu)
    for a_idx in range(n_r):
        a = log_r[a_idx]
        if a + width > log_r[-1] + 1e-9:
            break  # truncated window: cannot span the required decades
        cols = (log_r >= a - 1e-12) & (log_r <= a + width + 1e-12)
        if cols.sum() < 3:
            continue
        lm = log_mu[:, cols]
        lr = log_r[cols]
        for s in reversed(s_sorted):
            if s <= best:
                break
            worst = np.max(lm - s * lr[None, :])
            if worst <= logC:
                best = s
                break
    return best


# --- box counting -----------------------------------------------------------------


@dataclass(frozen=True)
class BoxCountResult:
    scales: tuple[int, ...]
    counts: tuple[int, ...]
    slope: float

    def __float__(self) -> float:
        return self.slope


def _mark_shape(shape: Shape, m: int, occupied: set) -> None:
    """Add dyadic cell indices (resolution m = 2^k per axis) meeting the shape."""
    if isinstance(shape, CubeUnion):
        for c in shape.cubes:
            _mark_shape(c, m, occupied)
        return
    if isinstance(shape, AxisCube):
        lo = np.floor(np.array(shape.corner) * m).astype(int)
        hi = np.ceil((np.array(shape.corner) + shape.side) * m).astype(int) - 1
        lo = np.clip(lo, 0, m - 1)
        hi = np.clip(hi, 0, m - 1)
        for idx in np.ndindex(*(hi - lo + 1)):
            occupied.add(tuple(lo + np.array(idx)))
        return
    if isinstance(shape, Ball):
        center = np.array(shape.center)
        semi = np.full(len(center), shape.radius)
    elif isinstance(shape, Ellipsoid):
        center = np.array(shape.center)
        semi = np.array(shape.semiaxes)
    else:
        raise PreconditionError(f"cannot box-count {type(shape)!r}")
    lo = np.clip(np.floor((center - semi) * m).astype(int), 0, m - 1)
    hi = np.clip(np.ceil((center + semi) * m).astype(int) - 1, 0, m - 1)
    for idx in np.ndindex(*(hi - lo + 1)):
        cell = lo + np.array(idx)
        # nearest point of the cell to the center, in semiaxis units
        a = cell / m
        b = (cell + 1) / m
        nearest = np.clip(center, a, b)
        if np.sum(((nearest - center) / semi) ** 2) <= 1.0:
            occupied.add(tuple(cell))


def box_counting(
    target: Union[ConstructionTree, Sequence[Shape]],
    scales: Sequence[int],
) -> BoxCountResult:
    """Least-squares slope of log N(delta) vs log(1/delta) over dyadic
    scales delta = 2^-k, where N counts occupied cells."""
    scales = sorted(int(k) for k in scales)
    if len(scales) < 3:
        raise DegenerateError("box counting needs at least 3 scales")
    if isinstance(target, ConstructionTree):
        g = target.depth
        shapes: Sequence[Shape] = [
            AxisCube(tuple(target.gen_lo[g][i]), float(target.gen_side[g][i]))
            for i in range(target.n_nodes(g))
        ]
    else:
        shapes = list(target)
    if not shapes:
        raise DegenerateError("nothing to count")
    counts = []
    for k in scales:
        m = 2**k
        occ: set = set()
        for sh in shapes:
            _mark_shape(sh, m, occ)
        counts.append(len(occ))
    log_n = np.log(np.maximum(counts, 1))
    log_inv = np.array([k * math.log(2.0) for k in scales])
    slope = float(np.polyfit(log_inv, log_n, 1)[0])
    return BoxCountResult(tuple(scales), tuple(counts), slope)
