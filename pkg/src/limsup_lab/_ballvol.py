"""Volume of the intersection of a Euclidean ball with axis-aligned boxes.

Exact in closed form for d = 1 (interval overlap) and d = 2 (circular
segment integrals).  For d >= 3 an adaptive bisection bound is used with a
relative tolerance; the construction and verification pipelines only need
d <= 2 exactly.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["ball_box_volume", "ball_box_volume_many"]


def _disk_corner_area(x: np.ndarray, y: np.ndarray, r: float) -> np.ndarray:
    """Area of {(u,v): u <= x, v <= y, u^2+v^2 <= r^2} for a disk of radius r
    centered at the origin; x, y broadcast elementwise."""
    x = np.clip(x, -r, r)
    y = np.clip(y, -r, r)

    def F(u):
        u = np.clip(u, -r, r)
        return 0.5 * (u * np.sqrt(np.maximum(r * r - u * u, 0.0)) + r * r * np.arcsin(np.clip(u / r, -1.0, 1.0)))

    uy = np.sqrt(np.maximum(r * r - y * y, 0.0))
    # piece 1: u in [-r, min(x, -uy)], full chord 2*s(u)
    b1 = np.minimum(x, -uy)
    p1 = np.where(b1 > -r, 2.0 * (F(b1) - F(-r)), 0.0)
    # piece 2: u in [-uy, clip(x, -uy, uy)], chord y + s(u)  (requires y >= -s)
    b2 = np.clip(x, -uy, uy)
    p2 = np.where(b2 > -uy, y * (b2 - (-uy)) + (F(b2) - F(-uy)), 0.0)
    # piece 3: u in [uy, max(x, uy)], full chord, only when y >= 0
    b3 = np.maximum(x, uy)
    p3 = np.where((y >= 0.0) & (b3 > uy), 2.0 * (F(b3) - F(uy)), 0.0)
    return np.where(y >= 0.0, p1 + p2 + p3, np.where(b2 > -uy, p2, 0.0))


def _ball_box_d2(center, r, lo, hi) -> np.ndarray:
    a1 = lo[..., 0] - center[0]
    b1 = hi[..., 0] - center[0]
    a2 = lo[..., 1] - center[1]
    b2 = hi[..., 1] - center[1]
    return (
        _disk_corner_area(b1, b2, r)
        - _disk_corner_area(a1, b2, r)
        - _disk_corner_area(b1, a2, r)
        + _disk_corner_area(a1, a2, r)
    )


def _ball_box_dn(center, r, lo, hi, rel_tol=1e-6, depth=0) -> float:
    """Adaptive bisection for d >= 3 (returns a value within ~rel_tol of the
    exact volume relatively to the box volume)."""
    c = np.asarray(center)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    nearest = np.clip(c, lo, hi)
    if np.sum((nearest - c) ** 2) > r * r:
        return 0.0
    far = np.where(np.abs(lo - c) > np.abs(hi - c), lo, hi)
    box_vol = float(np.prod(hi - lo))
    if np.sum((far - c) ** 2) <= r * r:
        return box_vol
    if depth >= 12 or box_vol <= rel_tol * (r**len(c)):
        return 0.5 * box_vol
    j = int(np.argmax(hi - lo))
    mid = 0.5 * (lo[j] + hi[j])
    hi1 = hi.copy()
    hi1[j] = mid
    lo2 = lo.copy()
    lo2[j] = mid
    return _ball_box_dn(c, r, lo, hi1, rel_tol, depth + 1) + _ball_box_dn(
        c, r, lo2, hi, rel_tol, depth + 1
    )


def ball_box_volume(center, r: float, lo, hi) -> float:
    """Volume of B_r(center) ∩ [lo, hi] (single box)."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    d = center.shape[0]
    if d == 1:
        return float(
            max(0.0, min(hi[0], center[0] + r) - max(lo[0], center[0] - r))
        )
    if d == 2:
        return float(_ball_box_d2(center, r, lo, hi))
    return _ball_box_dn(center, r, lo, hi)


def ball_box_volume_many(center, r: float, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Vectorized ball-box volumes for boxes given by (n,d) arrays lo, hi."""
    center = np.asarray(center, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.shape[1]
    if d == 1:
        return np.maximum(
            0.0,
            np.minimum(hi[:, 0], center[0] + r) - np.maximum(lo[:, 0], center[0] - r),
        )
    if d == 2:
        return np.maximum(0.0, _ball_box_d2(center, r, lo, hi))
    return np.array([_ball_box_dn(center, r, lo[i], hi[i]) for i in range(len(lo))])
