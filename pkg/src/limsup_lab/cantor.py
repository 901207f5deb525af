"""Nested Cantor-type construction and its mass distribution.

Starting from the unit cube, each generation j applies the greedy covering
selection inside every current cube D, passes the cube's mass to the
selected balls proportionally to their volumes (nu), pushes each ball's
share onto its smoothed support through the piecewise-uniform measure eta,
and subdivides the supports into the next generation of cubes whose
diameters lie in [rtilde_j/2, rtilde_j].

The literal scale schedule

    rtilde_j = min(r_j, rtilde_{j-1} * (kappa2 * min 1/(ell_i lambda(B_i)))^(1/eps_j))

collapses super-exponentially, far below anything a finite family can
populate, so the realized subdivision target floors it at ``rtilde_floor``
and additionally caps the per-cell subdivision at ``subdiv_cap`` pieces per
axis.  Both the schedule values and the realized values are recorded; a
warning flags every generation where they differ.  All downstream
verification uses the realized scales stored in the tree.

Nodes are stored columnarly (numpy arrays per generation), so trees with
10^5+ leaves stay cheap to build and query.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from ._ballvol import ball_box_volume_many
from .cover import CoverParams, greedy_vitali
from .errors import InsufficientFamilyError, PreconditionError
from .families import (
    ShapePair,
    ShapeRule,
    attach_one,
    dirichlet_balls_in_window,
    spf_sieve,
    totient_sieve,
)
from .geom import AxisCube, Ball, contains, volume

__all__ = [
    "ConstructionParams",
    "ConstructionTree",
    "GenerationNode",
    "SelectionRecord",
    "CandidateSource",
    "ExplicitPairsSource",
    "RandomCoverSource",
    "DirichletSource",
    "build",
    "measure_of_ball",
    "BallMass",
    "c_constants",
    "validate_tree",
    "tree_to_json",
    "tree_from_json",
]


# --- parameters ---------------------------------------------------------------


def harmonic_eps(depth: int) -> tuple[float, ...]:
    """eps_j = 1/(j+1) for j = 1..depth (strictly decreasing to 0)."""
    return tuple(1.0 / (j + 1) for j in range(1, depth + 1))


@dataclass(frozen=True)
class ConstructionParams:
    max_depth: int
    kappa2: float | None = None  # None: (1-2*cover_epsilon)^d 15^-d
    cover_epsilon: float = 0.25
    eps_schedule: tuple[float, ...] | None = None  # None: harmonic
    rtilde_floor: float = 2.0**-40
    subdiv_cap: int = 8
    candidate_diam_frac: float = 1.0 / 3.0
    subdivide_last: bool = False  # deepest supports stay at cell granularity

    def __post_init__(self):
        if self.max_depth < 0:
            raise PreconditionError("max_depth must be >= 0")
        if self.rtilde_floor <= 0.0:
            raise PreconditionError("rtilde_floor must be positive")
        if self.subdiv_cap < 1:
            raise PreconditionError("subdiv_cap must be >= 1")
        if self.eps_schedule is not None:
            eps = tuple(self.eps_schedule)
            if len(eps) < self.max_depth:
                raise PreconditionError("eps_schedule shorter than max_depth")
            if any(e <= 0 for e in eps) or any(
                eps[i] <= eps[i + 1] for i in range(len(eps) - 1)
            ):
                raise PreconditionError("eps_schedule must be strictly decreasing > 0")

    def eps(self, j: int) -> float:
        if self.eps_schedule is not None:
            return self.eps_schedule[j - 1]
        return 1.0 / (j + 1)


# --- candidate sources ----------------------------------------------------------


class CandidateSource(Protocol):
    """Supplies candidate balls inside a cube and materializes selected pairs."""

    d: int

    def candidates(
        self, cube: AxisCube, max_diam: float, min_index: int, need_volume: float
    ) -> list[tuple[int, Ball]]:
        ...

    def materialize(self, index: int, ball: Ball) -> ShapePair:
        ...


class ExplicitPairsSource:
    """A finite, pre-attached family (the file-based path)."""

    def __init__(self, pairs: Sequence[ShapePair]):
        if not pairs:
            raise PreconditionError("empty family")
        diams = [p.ball.diameter for p in pairs]
        if any(diams[i] < diams[i + 1] - 1e-15 for i in range(len(diams) - 1)):
            raise PreconditionError("pairs must be sorted by nonincreasing diameter")
        self.pairs = list(pairs)
        self.d = pairs[0].ball.d
        self._centers = np.array([p.ball.center for p in pairs])
        self._radii = np.array([p.ball.radius for p in pairs])

    def candidates(self, cube, max_diam, min_index, need_volume):
        lo = np.array(cube.corner)
        hi = lo + cube.side
        r = self._radii
        ok = (
            (2.0 * r <= max_diam * (1 + 1e-12))
            & np.all(self._centers - r[:, None] >= lo - 1e-15, axis=1)
            & np.all(self._centers + r[:, None] <= hi + 1e-15, axis=1)
        )
        ok[: min_index] = False
        return [(int(i), self.pairs[i].ball) for i in np.flatnonzero(ok)]

    def materialize(self, index, ball):
        return self.pairs[index]


class RandomCoverSource:
    """Radius-sorted random ball family with lazy shape attachment.

    Balls are binned on a coarse grid so per-cube candidate queries touch a
    few bins instead of the whole family.
    """

    def __init__(
        self,
        balls: Sequence[Ball],
        rule: ShapeRule,
        cells_per_minor: int = 2,
        collect_factor: float = 8.0,
    ):
        if not balls:
            raise PreconditionError("empty family")
        self.d = balls[0].d
        self.rule = rule
        self.cells_per_minor = cells_per_minor
        self.collect_factor = collect_factor
        self._centers = np.array([b.center for b in balls])
        self._radii = np.array([b.radius for b in balls])
        if np.any(np.diff(self._radii) > 1e-15):
            raise PreconditionError("balls must be sorted by nonincreasing radius")
        self._nbins = max(1, min(256, int(len(balls) ** (1.0 / (2 * self.d)))))
        bins = np.minimum(
            (self._centers * self._nbins).astype(int), self._nbins - 1
        )
        code = bins[:, 0]
        for j in range(1, self.d):
            code = code * self._nbins + bins[:, j]
        self._bin_order = np.argsort(code, kind="stable")
        sorted_code = code[self._bin_order]
        self._bin_start = np.searchsorted(
            sorted_code, np.arange(self._nbins**self.d), side="left"
        )
        self._bin_stop = np.searchsorted(
            sorted_code, np.arange(self._nbins**self.d), side="right"
        )
        self._pair_cache: dict[int, ShapePair] = {}

    def _bin_codes_for(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        rngs = []
        for j in range(self.d):
            a = max(0, min(self._nbins - 1, int(lo[j] * self._nbins)))
            b = max(0, min(self._nbins - 1, int(hi[j] * self._nbins)))
            rngs.append(np.arange(a, b + 1))
        grids = np.meshgrid(*rngs, indexing="ij")
        code = grids[0].ravel()
        for j in range(1, self.d):
            code = code * self._nbins + grids[j].ravel()
        return code

    def candidates(self, cube, max_diam, min_index, need_volume):
        lo = np.array(cube.corner)
        hi = lo + cube.side
        cand = np.concatenate(
            [
                self._bin_order[self._bin_start[c] : self._bin_stop[c]]
                for c in self._bin_codes_for(lo, hi)
            ]
        )
        cand = cand[cand >= min_index]
        r = self._radii[cand]
        ctr = self._centers[cand]
        ok = (
            (2.0 * r <= max_diam * (1 + 1e-12))
            & np.all(ctr - r[:, None] >= lo - 1e-15, axis=1)
            & np.all(ctr + r[:, None] <= hi + 1e-15, axis=1)
        )
        cand = cand[ok]
        cand = cand[np.argsort(self._radii[cand] * -1.0, kind="stable")]
        # keep a prefix with enough volume; greedy discards the rest anyway
        vols = volume(Ball([0.5] * self.d, 1.0)) * self._radii[cand] ** self.d
        cum = np.cumsum(vols)
        enough = np.searchsorted(cum, self.collect_factor * need_volume) + 1
        keep = cand[: max(64, int(enough))]
        return [
            (int(i), Ball(tuple(self._centers[i]), float(self._radii[i])))
            for i in keep
        ]

    def materialize(self, index, ball):
        if index not in self._pair_cache:
            self._pair_cache[index] = attach_one(
                ball, self.rule, index, cells_per_minor=self.cells_per_minor
            )
        return self._pair_cache[index]


class DirichletSource:
    """Lazy rationals p/q with radius q^-2, searched per cube on demand.

    Enumeration order (increasing q, then p) matches the eager generator, and
    global indices are recovered from a totient sieve, so selections carry
    the same indices the finite family would.
    """

    def __init__(
        self,
        rule: ShapeRule,
        cells_per_minor: int = 8,
        collect_factor: float = 8.0,
        q_cap: int = 50_000_000,
    ):
        self.d = 1
        self.rule = rule
        self.cells_per_minor = cells_per_minor
        self.collect_factor = collect_factor
        self.q_cap = q_cap
        self._cum_phi = np.zeros(2, dtype=np.int64)  # cum_phi[q] = sum phi(2..q)
        self._spf = np.zeros(2, dtype=np.int64)
        self._pair_cache: dict[int, ShapePair] = {}

    def _ensure_sieve(self, q: int) -> None:
        if q < len(self._cum_phi):
            return
        n = max(q, 2 * (len(self._cum_phi) - 1), 1024)
        phi = totient_sieve(n)
        cum = np.zeros(n + 1, dtype=np.int64)
        cum[2:] = np.cumsum(phi[2:])
        self._cum_phi = cum
        self._spf = spf_sieve(n)

    def _prime_divisors(self, q: int) -> list[int]:
        out = []
        while q > 1:
            p = int(self._spf[q])
            out.append(p)
            while q % p == 0:
                q //= p
        return out

    def index_of(self, p: int, q: int) -> int:
        """0-based index of p/q in the (increasing q, increasing p) order;
        the coprime rank of p is counted by inclusion-exclusion over the
        prime divisors of q."""
        self._ensure_sieve(q)
        base = int(self._cum_phi[q - 1])
        primes = self._prime_divisors(q)
        rank = 0
        for mask in range(1 << len(primes)):
            prod = 1
            bits = 0
            m = mask
            i = 0
            while m:
                if m & 1:
                    prod *= primes[i]
                    bits += 1
                m >>= 1
                i += 1
            rank += (p // prod) if bits % 2 == 0 else -(p // prod)
        return base + rank - 1

    def min_q_of_index(self, min_index: int) -> int:
        if min_index <= 0:
            return 2
        self._ensure_sieve(1024)
        while self._cum_phi[-1] < min_index + 1:
            self._ensure_sieve(2 * (len(self._cum_phi) - 1))
        return int(np.searchsorted(self._cum_phi, min_index, side="right"))

    def candidates(self, cube, max_diam, min_index, need_volume):
        lo = cube.corner[0]
        hi = lo + cube.side
        q_min = max(2, math.ceil(math.sqrt(2.0 / max_diam) - 1e-9))
        q_min = max(q_min, self.min_q_of_index(min_index))
        out: list[tuple[int, Ball]] = []
        got = 0.0
        q_lo = q_min
        step = max(64, q_min // 8)
        while q_lo <= self.q_cap:
            q_hi = min(self.q_cap, q_lo + step - 1)
            for p, q in dirichlet_balls_in_window(lo, hi, q_lo, q_hi):
                idx = self.index_of(p, q)
                if idx < min_index:
                    continue
                out.append((idx, Ball([p / q], 1.0 / (q * q))))
                got += 2.0 / (q * q)
            if got >= self.collect_factor * need_volume and len(out) >= 32:
                break
            q_lo = q_hi + 1
            step *= 2
        return out

    def materialize(self, index, ball):
        if index not in self._pair_cache:
            self._pair_cache[index] = attach_one(
                ball, self.rule, index, cells_per_minor=self.cells_per_minor
            )
        return self._pair_cache[index]


# --- tree ------------------------------------------------------------------------


@dataclass
class SelectionRecord:
    """One ball selected inside a generation-(j-1) cube, with its nu mass and
    the contiguous slice of generation-j nodes carved from its support."""

    generation: int
    parent: int
    pair_index: int
    ball: Ball
    ell: float
    lambda_ball: float
    nu: float
    child_start: int = 0
    child_stop: int = 0


@dataclass(frozen=True)
class GenerationNode:
    """Read-only view of one construction cube."""

    generation: int
    index: int
    cube: AxisCube
    mass: float
    c_const: float
    branch_bound: float
    parent: int | None
    selection: int | None


class ConstructionTree:
    def __init__(self, d: int, params: ConstructionParams, kappa2: float):
        self.d = d
        self.params = params
        self.kappa2 = kappa2
        self.gen_lo: list[np.ndarray] = []
        self.gen_side: list[np.ndarray] = []
        self.gen_mass: list[np.ndarray] = []
        self.gen_cconst: list[np.ndarray] = []
        self.gen_bound: list[np.ndarray] = []
        self.gen_parent: list[np.ndarray] = []
        self.gen_selection: list[np.ndarray] = []
        self.selections: list[SelectionRecord] = []
        self.rtilde_schedule: list[float] = []
        self.rtilde_realized: list[float] = []
        self.r_min_cell: list[float] = []
        self.warnings: list[str] = []
        self._children_csr: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def depth(self) -> int:
        return len(self.gen_lo) - 1

    def n_nodes(self, g: int) -> int:
        return len(self.gen_side[g])

    def node(self, g: int, i: int) -> GenerationNode:
        sel = int(self.gen_selection[g][i])
        return GenerationNode(
            generation=g,
            index=i,
            cube=AxisCube(tuple(self.gen_lo[g][i]), float(self.gen_side[g][i])),
            mass=float(self.gen_mass[g][i]),
            c_const=float(self.gen_cconst[g][i]),
            branch_bound=float(self.gen_bound[g][i]),
            parent=int(self.gen_parent[g][i]) if g > 0 else None,
            selection=sel if g > 0 else None,
        )

    def selections_of(self, g: int, i: int) -> list[SelectionRecord]:
        """Selection records attached to cube i of generation g (their
        children live in generation g+1)."""
        return [
            s
            for s in self.selections
            if s.generation == g + 1 and s.parent == i
        ]

    def children_of(self, g: int, i: int) -> np.ndarray:
        if g + 1 > self.depth:
            return np.array([], dtype=int)
        order, indptr = self._children_index(g + 1)
        return order[indptr[i] : indptr[i + 1]]

    def _children_index(self, g: int) -> tuple[np.ndarray, np.ndarray]:
        if g not in self._children_csr:
            parents = self.gen_parent[g]
            order = np.argsort(parents, kind="stable")
            indptr = np.searchsorted(
                parents[order], np.arange(self.n_nodes(g - 1) + 1), side="left"
            )
            self._children_csr[g] = (order, indptr)
        return self._children_csr[g]

    def finest_scale(self, g: int | None = None) -> float:
        g = self.depth if g is None else g
        if g == 0:
            return math.sqrt(self.d)
        return float(self.gen_side[g].min()) * math.sqrt(self.d)

    def coarsest_leaf_scale(self) -> float:
        """Largest deepest-generation cube diameter: above this scale the
        depth-n measure agrees with any deeper refinement up to cube
        boundary effects."""
        if self.depth == 0:
            return 0.0
        return float(self.gen_side[self.depth].max()) * math.sqrt(self.d)

    def support_diameter(self) -> float:
        """Diameter of the deepest-generation cube union (the support of
        the current mass distribution)."""
        g = self.depth
        lo = self.gen_lo[g]
        hi = lo + self.gen_side[g][:, None]
        return float(np.linalg.norm(hi.max(axis=0) - lo.min(axis=0)))

    def max_c_const(self, g: int) -> float:
        return float(self.gen_cconst[g].max())


# --- build -------------------------------------------------------------------------


def build(source, params: ConstructionParams) -> ConstructionTree:
    """Run the construction to params.max_depth over the given source.

    ``source`` is a CandidateSource; a plain sequence of ShapePair is wrapped
    in :class:`ExplicitPairsSource` (sorted-by-diameter contract applies).
    """
    if isinstance(source, (list, tuple)):
        source = ExplicitPairsSource(source)
    d = source.d
    cover = CoverParams(epsilon=params.cover_epsilon, kappa2=params.kappa2)
    kappa2 = cover.resolved_kappa2(d)
    tree = ConstructionTree(d, params, kappa2)
    tree.gen_lo.append(np.zeros((1, d)))
    tree.gen_side.append(np.ones(1))
    tree.gen_mass.append(np.ones(1))
    tree.gen_cconst.append(np.ones(1))
    tree.gen_bound.append(np.ones(1))
    tree.gen_parent.append(np.full(1, -1, dtype=int))
    tree.gen_selection.append(np.full(1, -1, dtype=int))

    rtilde_prev = 1.0
    next_index = 0  # index window: balls must have index >= next_index
    for j in range(1, params.max_depth + 1):
        n_prev = tree.n_nodes(j - 1)
        gen_selections: list[tuple[SelectionRecord, ShapePair]] = []
        max_index_this_gen = next_index - 1
        for i in range(n_prev):
            cube = AxisCube(tuple(tree.gen_lo[j - 1][i]), float(tree.gen_side[j - 1][i]))
            mass = float(tree.gen_mass[j - 1][i])
            max_diam = cube.side * params.candidate_diam_frac
            need = kappa2 * volume(cube)
            cand: list[tuple[int, Ball]] = []
            selected = None
            ask = need
            for attempt in range(4):
                cand = source.candidates(cube, max_diam, next_index, ask)
                balls = [b for _, b in cand]
                try:
                    selected = greedy_vitali(balls, cube, cover, check_containment=False)
                    break
                except InsufficientFamilyError:
                    if attempt == 3 or not cand:
                        raise InsufficientFamilyError(
                            f"generation {j}, cube {i} (side {cube.side:.3e}): "
                            f"family cannot reach kappa2*lambda(C)"
                        )
                    ask *= 8.0
            ids = {id(b): k for k, (_, b) in enumerate(cand)}
            total = sum(volume(b) for b in selected)
            for b in selected:
                idx, ball = cand[ids[id(b)]]
                pair = source.materialize(idx, ball)
                nu = mass * volume(ball) / total
                rec = SelectionRecord(
                    generation=j,
                    parent=i,
                    pair_index=idx,
                    ball=ball,
                    ell=pair.ell,
                    lambda_ball=volume(ball),
                    nu=nu,
                )
                gen_selections.append((rec, pair))
                max_index_this_gen = max(max_index_this_gen, idx)
        next_index = max_index_this_gen + 1

        # scale schedule from this generation's selections
        r_j = min(
            min(c.diameter for c in pair.smoothed.support.cubes)
            for _, pair in gen_selections
        )
        max_cell = max(
            max(c.diameter for c in pair.smoothed.support.cubes)
            for _, pair in gen_selections
        )
        inv = min(
            1.0 / (rec.ell * rec.lambda_ball) for rec, _ in gen_selections
        )
        base = kappa2 * inv
        log_sched = math.log(rtilde_prev) + math.log(base) / params.eps(j)
        sched = math.exp(log_sched) if log_sched > -700 else 0.0
        sched_clamped = min(r_j, sched)
        realized = min(
            r_j, max(sched, params.rtilde_floor, max_cell / params.subdiv_cap)
        )
        if sched < params.rtilde_floor:
            tree.warnings.append(
                f"generation {j}: schedule rtilde={sched:.3e} underflows the floor "
                f"{params.rtilde_floor:.3e}; using realized {realized:.3e} "
                "(DEPTH_UNREACHABLE at the literal schedule)"
            )
        elif realized > sched_clamped * (1 + 1e-12):
            tree.warnings.append(
                f"generation {j}: subdivision cap raises rtilde from "
                f"{sched_clamped:.3e} to {realized:.3e}"
            )
        tree.rtilde_schedule.append(sched_clamped)
        tree.rtilde_realized.append(realized)
        tree.r_min_cell.append(r_j)

        lo_rows: list[np.ndarray] = []
        side_rows: list[float] = []
        mass_rows: list[float] = []
        cc_rows: list[float] = []
        bound_rows: list[float] = []
        parent_rows: list[int] = []
        sel_rows: list[int] = []
        split_gen = params.subdivide_last or j < params.max_depth
        for rec, pair in gen_selections:
            sel_id = len(tree.selections)
            rec.child_start = len(side_rows)
            parent_bound = float(tree.gen_bound[j - 1][rec.parent])
            bound = parent_bound * rec.lambda_ball * rec.ell / kappa2
            weights = pair.smoothed.measure.weights
            for cell, w in zip(pair.smoothed.support.cubes, weights):
                k = (
                    max(1, math.ceil(cell.diameter / realized - 1e-12))
                    if split_gen
                    else 1
                )
                sub = cell.side / k
                child_mass = rec.nu * float(w) / k**d
                cc = child_mass / sub**d
                corner = np.array(cell.corner)
                for off in np.ndindex(*([k] * d)):
                    lo_rows.append(corner + np.array(off) * sub)
                    side_rows.append(sub)
                    mass_rows.append(child_mass)
                    cc_rows.append(cc)
                    bound_rows.append(bound)
                    parent_rows.append(rec.parent)
                    sel_rows.append(sel_id)
            rec.child_stop = len(side_rows)
            tree.selections.append(rec)
        tree.gen_lo.append(np.array(lo_rows))
        tree.gen_side.append(np.array(side_rows))
        tree.gen_mass.append(np.array(mass_rows))
        tree.gen_cconst.append(np.array(cc_rows))
        tree.gen_bound.append(np.array(bound_rows))
        tree.gen_parent.append(np.array(parent_rows, dtype=int))
        tree.gen_selection.append(np.array(sel_rows, dtype=int))
        rtilde_prev = realized
    return tree


# --- queries -----------------------------------------------------------------------


@dataclass(frozen=True)
class BallMass:
    """mu_g(B_r(x)) with a flag for radii below the finest realized scale."""

    value: float
    resolved: bool

    def __float__(self) -> float:
        return self.value


def measure_of_ball(
    tree: ConstructionTree, x, r: float, generation: int | None = None
) -> BallMass:
    """Exact mu_g(B_r(x)) at generation g (deepest by default), via a
    hierarchical walk: nodes fully inside contribute their mass, partially
    overlapped leaves contribute mass * vol(B cap Q)/vol(Q), which is exact
    because the measure is uniform on every generation-g cube."""
    if r <= 0.0:
        raise PreconditionError("radius must be positive")
    g_target = tree.depth if generation is None else generation
    if not (0 <= g_target <= tree.depth):
        raise PreconditionError(f"generation must lie in [0, {tree.depth}]")
    x = np.asarray(x, dtype=float)
    total = 0.0
    frontier = np.array([0], dtype=int)
    for g in range(g_target + 1):
        if len(frontier) == 0:
            break
        lo = tree.gen_lo[g][frontier]
        side = tree.gen_side[g][frontier]
        hi = lo + side[:, None]
        nearest = np.sum(np.maximum(np.maximum(lo - x, x - hi), 0.0) ** 2, axis=1)
        farthest = np.sum(np.maximum(np.abs(x - lo), np.abs(x - hi)) ** 2, axis=1)
        r2 = r * r
        inside = farthest <= r2
        outside = nearest > r2
        partial = ~inside & ~outside
        total += float(tree.gen_mass[g][frontier[inside]].sum())
        part_ids = frontier[partial]
        if g == g_target:
            if len(part_ids):
                lo_p = tree.gen_lo[g][part_ids]
                side_p = tree.gen_side[g][part_ids]
                vols = ball_box_volume_many(x, r, lo_p, lo_p + side_p[:, None])
                total += float(
                    np.sum(
                        tree.gen_mass[g][part_ids] * vols / side_p**tree.d
                    )
                )
            break
        if len(part_ids) == 0:
            break
        order, indptr = tree._children_index(g + 1)
        frontier = np.concatenate(
            [order[indptr[i] : indptr[i + 1]] for i in part_ids]
        ) if len(part_ids) else np.array([], dtype=int)
    resolved = r > tree.finest_scale(g_target) * (1 - 1e-12)
    return BallMass(value=total, resolved=resolved)


def c_constants(tree: ConstructionTree) -> list[tuple[int, float, float]]:
    """(generation, max C_j over nodes, max branch bound) per generation."""
    return [
        (g, float(tree.gen_cconst[g].max()), float(tree.gen_bound[g].max()))
        for g in range(tree.depth + 1)
    ]


def validate_tree(tree: ConstructionTree, sample_selections: int = 50) -> list[str]:
    """Re-check the construction invariants; returns violation messages.

    Checks per generation: mass sums to 1, c_const = mass/lambda(cube),
    eq-Cn branch bound, child nesting, selection mass conservation, and
    3-dilation disjointness within sampled cubes.
    """
    problems: list[str] = []
    for g in range(tree.depth + 1):
        total = float(tree.gen_mass[g].sum())
        if abs(total - 1.0) > 1e-9:
            problems.append(f"generation {g}: mass sum {total!r} != 1")
        vol = tree.gen_side[g] ** tree.d
        cc = tree.gen_mass[g] / vol
        bad = np.abs(cc - tree.gen_cconst[g]) > 1e-10 * np.maximum(1.0, cc)
        if bad.any():
            problems.append(
                f"generation {g}: c_const inconsistent with mass/lambda at "
                f"{int(bad.sum())} nodes"
            )
        over = tree.gen_cconst[g] > tree.gen_bound[g] * (1 + 1e-9)
        if over.any():
            problems.append(
                f"generation {g}: eq-Cn bound violated at {int(over.sum())} nodes"
            )
        if g > 0:
            plo = tree.gen_lo[g - 1][tree.gen_parent[g]]
            pside = tree.gen_side[g - 1][tree.gen_parent[g]]
            if np.any(tree.gen_lo[g] < plo - 1e-12) or np.any(
                tree.gen_lo[g] + tree.gen_side[g][:, None]
                > plo + pside[:, None] + 1e-12
            ):
                problems.append(f"generation {g}: some cube leaks its parent cube")
    # selection-level checks
    for sel_id, rec in enumerate(tree.selections):
        g = rec.generation
        child_mass = float(
            tree.gen_mass[g][tree.gen_selection[g] == sel_id].sum()
        )
        if abs(child_mass - rec.nu) > 1e-9 * max(1.0, rec.nu):
            problems.append(
                f"selection {sel_id} (gen {g}): children mass {child_mass!r} "
                f"!= nu {rec.nu!r}"
            )
    # geometric checks on a sample of cubes with selections
    by_parent: dict[tuple[int, int], list[SelectionRecord]] = {}
    for rec in tree.selections:
        by_parent.setdefault((rec.generation - 1, rec.parent), []).append(rec)
    items = sorted(by_parent.items())[:sample_selections]
    for (g, i), recs in items:
        cube = AxisCube(tuple(tree.gen_lo[g][i]), float(tree.gen_side[g][i]))
        for rec in recs:
            if not contains(cube, rec.ball):
                problems.append(
                    f"selection in gen {g + 1} cube {i}: ball not inside cube"
                )
        from .geom import disjoint, scale_ball

        for a in range(len(recs)):
            for b in range(a + 1, len(recs)):
                if not disjoint(
                    scale_ball(recs[a].ball, 3.0), scale_ball(recs[b].ball, 3.0)
                ):
                    problems.append(
                        f"selections in gen {g + 1} cube {i}: 3-dilations intersect"
                    )
    return problems


# --- serialization -------------------------------------------------------------------


def tree_to_json(tree: ConstructionTree) -> dict:
    return {
        "d": tree.d,
        "depth": tree.depth,
        "kappa2": tree.kappa2,
        "params": {
            "max_depth": tree.params.max_depth,
            "kappa2": tree.params.kappa2,
            "cover_epsilon": tree.params.cover_epsilon,
            "eps_schedule": list(tree.params.eps_schedule)
            if tree.params.eps_schedule
            else None,
            "rtilde_floor": tree.params.rtilde_floor,
            "subdiv_cap": tree.params.subdiv_cap,
            "candidate_diam_frac": tree.params.candidate_diam_frac,
        },
        "rtilde_schedule": tree.rtilde_schedule,
        "rtilde_realized": tree.rtilde_realized,
        "r_min_cell": tree.r_min_cell,
        "warnings": tree.warnings,
        "generations": [
            {
                "lo": tree.gen_lo[g].tolist(),
                "side": tree.gen_side[g].tolist(),
                "mass": tree.gen_mass[g].tolist(),
                "c_const": tree.gen_cconst[g].tolist(),
                "bound": tree.gen_bound[g].tolist(),
                "parent": tree.gen_parent[g].tolist(),
                "selection": tree.gen_selection[g].tolist(),
            }
            for g in range(tree.depth + 1)
        ],
        "selections": [
            {
                "generation": s.generation,
                "parent": s.parent,
                "pair_index": s.pair_index,
                "center": list(s.ball.center),
                "radius": s.ball.radius,
                "ell": s.ell,
                "lambda_ball": s.lambda_ball,
                "nu": s.nu,
                "child_start": s.child_start,
                "child_stop": s.child_stop,
            }
            for s in tree.selections
        ],
    }


def tree_from_json(obj: dict) -> ConstructionTree:
    p = obj["params"]
    params = ConstructionParams(
        max_depth=p["max_depth"],
        kappa2=p["kappa2"],
        cover_epsilon=p["cover_epsilon"],
        eps_schedule=tuple(p["eps_schedule"]) if p["eps_schedule"] else None,
        rtilde_floor=p["rtilde_floor"],
        subdiv_cap=p["subdiv_cap"],
        candidate_diam_frac=p["candidate_diam_frac"],
    )
    tree = ConstructionTree(obj["d"], params, obj["kappa2"])
    for gen in obj["generations"]:
        tree.gen_lo.append(np.array(gen["lo"], dtype=float).reshape(-1, obj["d"]))
        tree.gen_side.append(np.array(gen["side"], dtype=float))
        tree.gen_mass.append(np.array(gen["mass"], dtype=float))
        tree.gen_cconst.append(np.array(gen["c_const"], dtype=float))
        tree.gen_bound.append(np.array(gen["bound"], dtype=float))
        tree.gen_parent.append(np.array(gen["parent"], dtype=int))
        tree.gen_selection.append(np.array(gen["selection"], dtype=int))
    tree.rtilde_schedule = list(obj["rtilde_schedule"])
    tree.rtilde_realized = list(obj["rtilde_realized"])
    tree.r_min_cell = list(obj["r_min_cell"])
    tree.warnings = list(obj["warnings"])
    for s in obj["selections"]:
        tree.selections.append(
            SelectionRecord(
                generation=s["generation"],
                parent=s["parent"],
                pair_index=s["pair_index"],
                ball=Ball(s["center"], s["radius"]),
                ell=s["ell"],
                lambda_ball=s["lambda_ball"],
                nu=s["nu"],
                child_start=s["child_start"],
                child_stop=s["child_stop"],
            )
        )
    return tree
