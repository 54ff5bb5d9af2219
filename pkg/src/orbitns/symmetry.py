"""The 48 signed coordinate permutations of Z^3 and their orbits.

The group acts by permuting coordinates and flipping signs, which preserves
both the sup-norm and the Euclidean norm, so it acts on every truncation
level and on every shell. Each orbit has a unique member (a, b, c) with
a >= b >= c >= 0, used as its canonical representative throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from .lattice import Mode, check_truncation


@dataclass(frozen=True)
class GroupElement:
    """One signed coordinate permutation: apply(k)[i] = signs[i] * k[perm[i]]."""

    perm: tuple[int, int, int]
    signs: tuple[int, int, int]

    def apply(self, k) -> Mode:
        return (
            self.signs[0] * k[self.perm[0]],
            self.signs[1] * k[self.perm[1]],
            self.signs[2] * k[self.perm[2]],
        )

    def compose(self, other: "GroupElement") -> "GroupElement":
        """Element acting as self-after-other: compose(g,h).apply == g.apply(h.apply(.))."""
        perm = tuple(other.perm[self.perm[i]] for i in range(3))
        signs = tuple(self.signs[i] * other.signs[self.perm[i]] for i in range(3))
        return GroupElement(perm, signs)


@lru_cache(maxsize=1)
def group_elements() -> tuple[GroupElement, ...]:
    """All 48 signed coordinate permutations; the identity comes first."""
    return tuple(
        GroupElement(perm, signs)
        for perm in itertools.permutations((0, 1, 2))
        for signs in itertools.product((1, -1), repeat=3)
    )


def canonical_rep(k) -> Mode:
    """The unique orbit member (a, b, c) with a >= b >= c >= 0."""
    if not any(k):
        raise ValueError("the zero vector has no orbit representative")
    a, b, c = sorted((abs(int(x)) for x in k), reverse=True)
    return (a, b, c)


@dataclass(frozen=True)
class Orbit:
    """A symmetry orbit of lattice modes.

    members are the distinct group images of the canonical representative,
    sorted lexicographically; size divides 48 by orbit-stabilizer.
    """

    canonical: Mode
    members: tuple[Mode, ...]
    size: int

    @property
    def norm2(self) -> int:
        a, b, c = self.canonical
        return a * a + b * b + c * c

    def __str__(self) -> str:
        return "(%d,%d,%d)" % self.canonical


def orbit_of(k) -> Orbit:
    """Orbit through k: enumerate all 48 images and deduplicate."""
    canon = canonical_rep(k)
    members = tuple(sorted({g.apply(canon) for g in group_elements()}))
    return Orbit(canon, members, len(members))


def enumerate_orbits(N) -> list[Orbit]:
    """One orbit per canonical triple a >= b >= c >= 0 with 1 <= a <= N.

    Ordered by squared norm ascending, then canonical triple descending
    lexicographically; a fixed total order keeps matrix indices stable.
    """
    check_truncation(N)
    canons = [
        (a, b, c)
        for a in range(1, N + 1)
        for b in range(a + 1)
        for c in range(b + 1)
    ]
    canons.sort(key=lambda t: (t[0] * t[0] + t[1] * t[1] + t[2] * t[2], (-t[0], -t[1], -t[2])))
    return [orbit_of(c) for c in canons]
