"""Greedy Vitali-type ball selection inside a cube.

Given a finite candidate family of balls contained in a cube C, select a
subfamily S, largest radius first, so that the 3-fold dilations of the
selected balls are pairwise disjoint and the selected volume reaches
kappa2 * lambda(C).  The selection walks radius classes in nonincreasing
order (ties broken by candidate index) and stops at the first class
boundary after which the volume target is met; exhausting the candidates
below the target raises :class:`InsufficientFamilyError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import InsufficientFamilyError, PreconditionError
from .geom import AxisCube, Ball, contains, disjoint, scale_ball, volume

__all__ = ["CoverParams", "kappa2_default", "greedy_vitali", "validate_cover"]


def kappa2_default(d: int, epsilon: float) -> float:
    """The selected-volume fraction (1-2*epsilon)^d * 15^{-d} guaranteed by
    the 5r-covering argument."""
    if not (0.0 < epsilon < 0.5):
        raise PreconditionError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    if d < 1:
        raise PreconditionError("dimension must be >= 1")
    return (1.0 - 2.0 * epsilon) ** d * 15.0 ** (-d)


@dataclass(frozen=True)
class CoverParams:
    """epsilon: cube shrinkage in the covering argument; kappa2: target
    volume fraction, at most (1-2*epsilon)^d * 15^{-d}."""

    epsilon: float = 0.25
    kappa2: float | None = None

    def resolved_kappa2(self, d: int) -> float:
        cap = kappa2_default(d, self.epsilon)
        if self.kappa2 is None:
            return cap
        if self.kappa2 > cap * (1.0 + 1e-12):
            raise PreconditionError(
                f"kappa2={self.kappa2} exceeds (1-2eps)^d 15^-d = {cap}"
            )
        if self.kappa2 <= 0.0:
            raise PreconditionError("kappa2 must be positive")
        return self.kappa2


def greedy_vitali(
    candidates: Sequence[Ball],
    c: AxisCube,
    params: CoverParams,
    check_containment: bool = True,
) -> list[Ball]:
    """Select balls from ``candidates`` inside cube ``c`` so that 3-dilations
    are pairwise disjoint and the selected volume reaches kappa2*lambda(c).

    Returns the selected balls in selection order.  Candidates are processed
    largest radius first with index as the tie-break; the volume test is
    evaluated at radius-class boundaries so all tied balls of the current
    radius get their chance before the pass stops.
    """
    kappa2 = params.resolved_kappa2(c.d)
    target = kappa2 * volume(c)
    if check_containment:
        for i, b in enumerate(candidates):
            if b.d != c.d:
                raise PreconditionError(f"candidate {i} has wrong dimension")
            if not contains(c, b):
                raise PreconditionError(f"candidate {i} is not contained in the cube")

    order = sorted(range(len(candidates)), key=lambda i: (-candidates[i].radius, i))
    selected: list[Ball] = []
    selected_dilated: list[Ball] = []
    total = 0.0
    prev_radius: float | None = None
    for i in order:
        b = candidates[i]
        if prev_radius is not None and b.radius < prev_radius and total >= target:
            return selected
        prev_radius = b.radius
        dilated = scale_ball(b, 3.0)
        if all(disjoint(dilated, s) for s in selected_dilated):
            selected.append(b)
            selected_dilated.append(dilated)
            total += volume(b)
    if total >= target:
        return selected
    raise InsufficientFamilyError(
        f"greedy pass reached volume {total:.3e} < target {target:.3e} "
        f"({len(candidates)} candidates)"
    )


def validate_cover(
    selection: Sequence[Ball], c: AxisCube, params: CoverParams
) -> list[str]:
    """Re-check a selection against the covering contract.

    Returns a list of violation messages (empty when the selection is valid):
    containment in the cube, pairwise disjoint 3-dilations, and total volume
    at least kappa2*lambda(c).
    """
    kappa2 = params.resolved_kappa2(c.d)
    problems: list[str] = []
    for i, b in enumerate(selection):
        if not contains(c, b):
            problems.append(f"ball {i} not contained in cube")
    dilated = [scale_ball(b, 3.0) for b in selection]
    for i in range(len(dilated)):
        for j in range(i + 1, len(dilated)):
            if not disjoint(dilated[i], dilated[j]):
                problems.append(f"3-dilations of balls {i} and {j} intersect")
    total = sum(volume(b) for b in selection)
    if total < kappa2 * volume(c) * (1.0 - 1e-12):
        problems.append(
            f"selected volume {total:.3e} below kappa2*lambda(C) "
            f"= {kappa2 * volume(c):.3e}"
        )
    return problems
