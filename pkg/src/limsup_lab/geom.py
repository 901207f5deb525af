"""Axis-aligned geometry in R^d: balls, cubes, ellipsoids, disjoint cube unions.

All shapes are immutable value types.  Conventions used throughout the
package:

* shapes are closed sets; containment is closed-in-closed;
* two balls are *disjoint* only under strict separation, so tangent balls
  are not disjoint (this keeps the 3-dilation disjointness used by the
  covering module conservative);
* a cube union keeps cubes with pairwise disjoint interiors, so its
  volume is the plain sum over components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import PreconditionError

__all__ = [
    "Ball",
    "AxisCube",
    "Ellipsoid",
    "CubeUnion",
    "Shape",
    "unit_ball_volume",
    "volume",
    "scale_ball",
    "contains",
    "disjoint",
    "subdivide",
    "shape_to_json",
    "shape_from_json",
]


def unit_ball_volume(d: int) -> float:
    """Volume pi_d of the d-dimensional Euclidean unit ball."""
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def _as_point(p) -> tuple[float, ...]:
    if isinstance(p, (int, float)):
        return (float(p),)
    return tuple(float(c) for c in p)


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball with center in [0,1]^d."""

    center: tuple[float, ...]
    radius: float

    def __init__(self, center, radius: float):
        object.__setattr__(self, "center", _as_point(center))
        object.__setattr__(self, "radius", float(radius))
        if self.radius <= 0.0:
            raise PreconditionError(f"ball radius must be positive, got {radius}")
        if len(self.center) < 1:
            raise PreconditionError("ball needs ambient dimension >= 1")

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class AxisCube:
    """Axis-aligned cube given by its lower corner and side length."""

    corner: tuple[float, ...]
    side: float

    def __init__(self, corner, side: float):
        object.__setattr__(self, "corner", _as_point(corner))
        object.__setattr__(self, "side", float(side))
        if self.side <= 0.0:
            raise PreconditionError(f"cube side must be positive, got {side}")

    @property
    def d(self) -> int:
        return len(self.corner)

    @property
    def diameter(self) -> float:
        return self.side * math.sqrt(self.d)

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(c + self.side for c in self.corner)

    @property
    def center(self) -> tuple[float, ...]:
        return tuple(c + 0.5 * self.side for c in self.corner)


@dataclass(frozen=True)
class Ellipsoid:
    """Axis-aligned ellipsoid with semiaxes sorted nonincreasing."""

    center: tuple[float, ...]
    semiaxes: tuple[float, ...]

    def __init__(self, center, semiaxes):
        object.__setattr__(self, "center", _as_point(center))
        object.__setattr__(self, "semiaxes", tuple(float(a) for a in semiaxes))
        if len(self.center) != len(self.semiaxes):
            raise PreconditionError("center and semiaxes must share a dimension")
        if any(a <= 0.0 for a in self.semiaxes):
            raise PreconditionError("semiaxes must be positive")
        if any(
            self.semiaxes[i] < self.semiaxes[i + 1]
            for i in range(len(self.semiaxes) - 1)
        ):
            raise PreconditionError("semiaxes must be sorted nonincreasing")

    @property
    def d(self) -> int:
        return len(self.center)


@dataclass(frozen=True)
class CubeUnion:
    """Finite union of axis cubes with pairwise disjoint interiors.

    ``validate=False`` skips the quadratic disjointness check; callers that
    construct unions from a grid (rasterizers, subdividers) use it because
    disjointness holds by construction.
    """

    cubes: tuple[AxisCube, ...]

    def __init__(self, cubes: Sequence[AxisCube], validate: bool = True):
        object.__setattr__(self, "cubes", tuple(cubes))
        if not self.cubes:
            return
        d = self.cubes[0].d
        if any(c.d != d for c in self.cubes):
            raise PreconditionError("all cubes must share the ambient dimension")
        if validate:
            self._check_disjoint()

    def _check_disjoint(self) -> None:
        lo = np.array([c.corner for c in self.cubes])
        hi = lo + np.array([c.side for c in self.cubes])[:, None]
        n = len(self.cubes)
        if n > 6000:  # pairwise check is O(n^2); trust grid construction above this
            return
        for i in range(n - 1):
            overlap = np.all(
                (lo[i + 1 :] < hi[i] - 1e-15) & (hi[i + 1 :] > lo[i] + 1e-15), axis=1
            )
            if overlap.any():
                j = i + 1 + int(np.argmax(overlap))
                raise PreconditionError(
                    f"cube union components {i} and {j} have overlapping interiors"
                )

    @property
    def d(self) -> int:
        if not self.cubes:
            raise PreconditionError("empty cube union has no dimension")
        return self.cubes[0].d

    def __len__(self) -> int:
        return len(self.cubes)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([c.corner for c in self.cubes])
        hi = lo + np.array([c.side for c in self.cubes])[:, None]
        return lo.min(axis=0), hi.max(axis=0)

    @property
    def diameter(self) -> float:
        lo, hi = self.bounds()
        return float(np.linalg.norm(hi - lo))


Shape = Union[Ball, AxisCube, Ellipsoid, CubeUnion]


def volume(shape: Shape) -> float:
    """Lebesgue measure of a shape; sums over components for a cube union."""
    if isinstance(shape, Ball):
        return unit_ball_volume(shape.d) * shape.radius**shape.d
    if isinstance(shape, AxisCube):
        return shape.side**shape.d
    if isinstance(shape, Ellipsoid):
        return unit_ball_volume(shape.d) * float(np.prod(shape.semiaxes))
    if isinstance(shape, CubeUnion):
        return float(sum(c.side**c.d for c in shape.cubes))
    raise PreconditionError(f"unknown shape type {type(shape)!r}")


def scale_ball(b: Ball, m: float) -> Ball:
    """Ball with the same center and m times the radius."""
    if m <= 0.0:
        raise PreconditionError("scale factor must be positive")
    return Ball(b.center, m * b.radius)


def _dist(p: Sequence[float], q: Sequence[float]) -> float:
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(p, q)))


def _cube_farthest_corner_dist(cube: AxisCube, point: Sequence[float]) -> float:
    s = 0.0
    for c, p in zip(cube.corner, point):
        s += max(abs(c - p), abs(c + cube.side - p)) ** 2
    return math.sqrt(s)


def contains(outer: Union[Ball, AxisCube], inner: Shape) -> bool:
    """Closed containment inner ⊆ outer for balls, cubes, and cube unions."""
    if isinstance(inner, CubeUnion):
        return all(contains(outer, c) for c in inner.cubes)
    if isinstance(outer, Ball):
        if isinstance(inner, Ball):
            if inner.d != outer.d:
                raise PreconditionError("dimension mismatch")
            return _dist(outer.center, inner.center) + inner.radius <= outer.radius
        if isinstance(inner, AxisCube):
            if inner.d != outer.d:
                raise PreconditionError("dimension mismatch")
            return _cube_farthest_corner_dist(inner, outer.center) <= outer.radius
        if isinstance(inner, Ellipsoid):
            if inner.d != outer.d:
                raise PreconditionError("dimension mismatch")
            # sufficient test (exact for concentric centers, the generated case)
            return (
                _dist(outer.center, inner.center) + max(inner.semiaxes)
                <= outer.radius
            )
    if isinstance(outer, AxisCube):
        if isinstance(inner, Ball):
            if inner.d != outer.d:
                raise PreconditionError("dimension mismatch")
            return all(
                lo <= c - inner.radius and c + inner.radius <= lo + outer.side
                for lo, c in zip(outer.corner, inner.center)
            )
        if isinstance(inner, AxisCube):
            if inner.d != outer.d:
                raise PreconditionError("dimension mismatch")
            return all(
                lo <= ic and ic + inner.side <= lo + outer.side
                for lo, ic in zip(outer.corner, inner.corner)
            )
        if isinstance(inner, Ellipsoid):
            if inner.d != outer.d:
                raise PreconditionError("dimension mismatch")
            # semiaxes[j] is aligned with coordinate axis j
            return all(
                lo <= c - a and c + a <= lo + outer.side
                for lo, c, a in zip(outer.corner, inner.center, inner.semiaxes)
            )
    raise PreconditionError(
        f"containment not defined for {type(outer).__name__}/{type(inner).__name__}"
    )


def disjoint(a: Ball, b: Ball) -> bool:
    """Strict separation |c_a - c_b| > r_a + r_b; tangent balls are not disjoint."""
    if a.d != b.d:
        raise PreconditionError("dimension mismatch")
    return _dist(a.center, b.center) > a.radius + b.radius


def subdivide(u: CubeUnion, target_diam: float) -> CubeUnion:
    """Uniform k-section of every component into cubes of diameter in
    [target_diam/2, target_diam].

    Every component must have diameter >= target_diam, which guarantees
    k = ceil(side*sqrt(d)/target) produces sub-cubes inside the window.
    """
    if target_diam <= 0.0:
        raise PreconditionError("target diameter must be positive")
    out: list[AxisCube] = []
    for comp in u.cubes:
        if comp.diameter < target_diam * (1.0 - 1e-12):
            raise PreconditionError(
                f"component diameter {comp.diameter} below target {target_diam}"
            )
        k = max(1, math.ceil(comp.diameter / target_diam - 1e-12))
        sub = comp.side / k
        d = comp.d
        for idx in np.ndindex(*([k] * d)):
            corner = tuple(comp.corner[j] + idx[j] * sub for j in range(d))
            out.append(AxisCube(corner, sub))
    return CubeUnion(out, validate=False)


def subdivision_counts(u: CubeUnion, target_diam: float) -> list[int]:
    """Per-component k used by :func:`subdivide` (k cubes per axis)."""
    return [
        max(1, math.ceil(comp.diameter / target_diam - 1e-12)) for comp in u.cubes
    ]


# --- JSON schema -----------------------------------------------------------
#
# {"type": "ball",       "center": [...], "radius": r}
# {"type": "cube",       "corner": [...], "side": s}
# {"type": "ellipsoid",  "center": [...], "semiaxes": [...]}
# {"type": "cube_union", "cubes": [{"corner": [...], "side": s}, ...]}


def shape_to_json(shape: Shape) -> dict:
    if isinstance(shape, Ball):
        return {"type": "ball", "center": list(shape.center), "radius": shape.radius}
    if isinstance(shape, AxisCube):
        return {"type": "cube", "corner": list(shape.corner), "side": shape.side}
    if isinstance(shape, Ellipsoid):
        return {
            "type": "ellipsoid",
            "center": list(shape.center),
            "semiaxes": list(shape.semiaxes),
        }
    if isinstance(shape, CubeUnion):
        return {
            "type": "cube_union",
            "cubes": [{"corner": list(c.corner), "side": c.side} for c in shape.cubes],
        }
    raise PreconditionError(f"unknown shape type {type(shape)!r}")


def shape_from_json(obj: dict) -> Shape:
    kind = obj.get("type")
    if kind == "ball":
        return Ball(obj["center"], obj["radius"])
    if kind == "cube":
        return AxisCube(obj["corner"], obj["side"])
    if kind == "ellipsoid":
        return Ellipsoid(obj["center"], obj["semiaxes"])
    if kind == "cube_union":
        return CubeUnion(
            [AxisCube(c["corner"], c["side"]) for c in obj["cubes"]], validate=False
        )
    raise PreconditionError(f"unknown shape tag {kind!r}")
