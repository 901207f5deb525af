"""Positive-but-not-full-measure limsup with empty shrunk limsup, exactly.

A binary tree of closed intervals B_w indexed by words w in {0,1}*: from
B_empty = [0,1], each level removes the centered open gap J_w of relative
length a_n = 1/(2(n+1)^2) at depth n = |w|, and B_{w0}, B_{w1} are the two
remaining components.  Everything is exact rational arithmetic: interval
lengths depend only on the word length,

    len(n) = 2^-n * prod_{i<n} (1 - a_i),

the level measure is the partial product itself, and the infinite product
kappa = prod (1 - a_i) equals sin(pi/sqrt(2))/(pi/sqrt(2)) ~ 0.3582.

For every shrinkage exponent a > 1 there is a level N(a) past which the
concentric interval E_w of length |B_w|^a falls strictly inside the gap
J_w, so E_w meets no deeper B_v and limsup E_w is empty.  The scan for
N(a) and the per-level containment checks run on exact rationals whenever
a is rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .errors import DepthTooShallowError, PreconditionError

__all__ = [
    "CexNode",
    "CexTree",
    "build_cex",
    "level_measure",
    "kappa_estimate",
    "kappa_lower_bound",
    "n_of_a",
    "verify_empty_limsup",
    "EmptyLimsupReport",
]


def gap_fraction(n: int) -> Fraction:
    """a_n = 1/(2(n+1)^2)."""
    return Fraction(1, 2 * (n + 1) * (n + 1))


@dataclass(frozen=True)
class CexNode:
    """Interval B_w with its centered open gap J_w (exact endpoints)."""

    word: str
    lo: Fraction
    hi: Fraction

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    @property
    def gap(self) -> tuple[Fraction, Fraction]:
        g = gap_fraction(len(self.word)) * self.length
        mid_lo = self.lo + (self.length - g) / 2
        return (mid_lo, mid_lo + g)

    def shrunk(self, length: Fraction) -> tuple[Fraction, Fraction]:
        """Concentric subinterval of the given length."""
        off = (self.length - length) / 2
        return (self.lo + off, self.hi - off)


class CexTree:
    """Level data for the full binary construction down to ``depth``.

    Interval lengths depend only on the word length, so levels are stored,
    and nodes are materialized lazily from their words.
    """

    def __init__(self, depth: int):
        if depth < 0:
            raise PreconditionError("depth must be >= 0")
        self.depth = depth
        self.lengths: list[Fraction] = [Fraction(1)]
        for n in range(depth):
            self.lengths.append(self.lengths[-1] * (1 - gap_fraction(n)) / 2)

    def node(self, word: str) -> CexNode:
        if len(word) > self.depth:
            raise PreconditionError("word longer than the built depth")
        lo = Fraction(0)
        for n, bit in enumerate(word):
            parent_len = self.lengths[n]
            child_len = self.lengths[n + 1]
            if bit == "0":
                pass
            elif bit == "1":
                lo = lo + parent_len - child_len
            else:
                raise PreconditionError(f"word must be binary, got {word!r}")
        return CexNode(word=word, lo=lo, hi=lo + self.lengths[len(word)])

    def level_length(self, n: int) -> Fraction:
        if n > self.depth:
            raise PreconditionError("level beyond the built depth")
        return self.lengths[n]


def build_cex(depth: int) -> CexTree:
    return CexTree(depth)


def level_measure(tree: CexTree, n: int) -> Fraction:
    """lambda of the union of the 2^n level-n intervals, exactly
    prod_{i<n} (1 - a_i); cross-checked against 2^n * interval length."""
    if n > tree.depth:
        raise PreconditionError("level beyond the built depth")
    prod = Fraction(1)
    for i in range(n):
        prod *= 1 - gap_fraction(i)
    direct = (2**n) * tree.level_length(n)
    if prod != direct:
        raise AssertionError("level measure mismatch against interval summation")
    return prod


def kappa_estimate(n_terms: int) -> tuple[Fraction, float]:
    """Partial product prod_{i<n_terms} (1 - a_i) plus the closed-form limit
    sin(pi/sqrt 2)/(pi/sqrt 2) of the infinite product."""
    if n_terms < 1:
        raise PreconditionError("need at least one term")
    partial = Fraction(1)
    for i in range(n_terms):
        partial *= 1 - gap_fraction(i)
    x = math.pi / math.sqrt(2.0)
    return partial, math.sin(x) / x


def kappa_lower_bound(n_terms: int = 100) -> Fraction:
    """Certified rational lower bound for kappa: the partial product times
    (1 - tail), with the tail sum bounded by sum_{k>n} 1/(2k^2) < 1/(2n)."""
    partial, _ = kappa_estimate(n_terms)
    tail = Fraction(1, 2 * n_terms)
    return partial * (1 - tail)


def _pow_less(base: Fraction, a: Union[Fraction, float], rhs: Fraction) -> bool:
    """base^(a-1) < rhs with base, rhs rational in (0,1); exact when a is
    rational (clears denominators), float fallback otherwise."""
    if isinstance(a, Fraction):
        num = a.numerator - a.denominator  # a-1 = num/den
        den = a.denominator
        # base^(num/den) < rhs  <=>  base^num < rhs^den  (all in (0,1), num>0)
        if num <= 0:
            raise PreconditionError("exponent a must exceed 1")
        return base**num < rhs**den
    return float(base) ** (float(a) - 1.0) < float(rhs)


def n_of_a(a: Union[Fraction, float], kappa_bound: Fraction | None = None) -> int:
    """Least n with (kappa 2^-n)^a < a_n * kappa 2^-n, i.e.
    (kappa 2^-n)^(a-1) < a_n, computed against a certified rational lower
    bound for kappa."""
    if isinstance(a, float) and a.is_integer():
        a = Fraction(int(a))
    if isinstance(a, float):
        frac = Fraction(a).limit_denominator(10**6)
        if float(frac) == a:
            a = frac
    if (isinstance(a, Fraction) and a <= 1) or (isinstance(a, float) and a <= 1.0):
        raise PreconditionError("the empty-limsup scan needs a > 1")
    kb = kappa_bound if kappa_bound is not None else kappa_lower_bound()
    n = 0
    while True:
        if _pow_less(kb * Fraction(1, 2**n), a, gap_fraction(n)):
            return n
        n += 1
        if n > 10_000:
            raise PreconditionError("no N(a) found below 10000; a too close to 1?")


@dataclass(frozen=True)
class EmptyLimsupReport:
    a: object
    n_threshold: int
    depth: int
    levels_checked: tuple[int, ...]
    all_inside_gap: bool
    sampled_words_ok: bool

    @property
    def passed(self) -> bool:
        return self.all_inside_gap and self.sampled_words_ok


def verify_empty_limsup(
    tree: CexTree, a: Union[Fraction, float], sample_words_per_level: int = 4
) -> EmptyLimsupReport:
    """Check E_w subset J_w for every level N(a) < |w| <= depth.

    By symmetry the containment is a length comparison,
    len(n)^(a-1) < a_n, done exactly for rational a; on top of that a few
    explicit words per level get their intervals materialized and checked
    endpoint by endpoint, including disjointness from both children."""
    if isinstance(a, float):
        frac = Fraction(a).limit_denominator(10**6)
        if float(frac) == a:
            a = frac
    n0 = n_of_a(a)
    if tree.depth <= n0:
        raise DepthTooShallowError(
            f"depth {tree.depth} does not exceed N(a) = {n0}"
        )
    levels = tuple(range(n0 + 1, tree.depth + 1))
    all_inside = True
    for n in levels:
        if not _pow_less(tree.level_length(n), a, gap_fraction(n)):
            all_inside = False
    sampled_ok = True
    if isinstance(a, Fraction):
        for n in levels[:: max(1, len(levels) // 6)]:
            words = {"0" * n, "1" * n, ("01" * n)[:n], ("10" * n)[:n]}
            for w in sorted(words)[:sample_words_per_level]:
                node = tree.node(w)
                # E_w length: len^a is irrational in general; compare
                # endpoints via the exact length test plus gap centering
                g_lo, g_hi = node.gap
                # strict containment in the open gap is equivalent to
                # len(E_w) < len(J_w); both are concentric
                if not _pow_less(node.length, a, gap_fraction(n)):
                    sampled_ok = False
                # children do not meet the open gap
                c0 = tree.node(w + "0") if n < tree.depth else None
                if c0 is not None:
                    c1 = tree.node(w + "1")
                    if not (c0.hi <= g_lo and g_hi <= c1.lo):
                        sampled_ok = False
    return EmptyLimsupReport(
        a=a,
        n_threshold=n0,
        depth=tree.depth,
        levels_checked=levels,
        all_inside_gap=all_inside,
        sampled_words_ok=sampled_ok,
    )
