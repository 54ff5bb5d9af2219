"""Shell slices of translated cubes and exact orbit-pair triad counts.

For a target mode k, the admissible sources on one shell form the
intersection of that sphere with the cube of side 2N centered at k. This
module decomposes such slices by nearest cube face and dyadic face height,
counts slice points per source orbit (the incidence counts), and computes
the square-root row sums whose growth in N the bound sweeps track.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._util import box_source_points, parallel_map
from .lattice import Mode, check_truncation, in_lattice, require_mode, shell
from .symmetry import Orbit, enumerate_orbits

Face = tuple[int, int]  # (axis, sign) with axis in {0,1,2}, sign in {+1,-1}
PatchKey = tuple[Face, int]  # (face, dyadic height scale)

# Tie-break order for equal face heights: axis-major, + before -.
FACE_ORDER: tuple[Face, ...] = ((0, 1), (0, -1), (1, 1), (1, -1), (2, 1), (2, -1))


def two_squares_count(n) -> int:
    """Ordered integer pairs (a, b) with a^2 + b^2 = n, by direct scan.

    A factorization-free scan over a is plenty fast at the radii that occur
    here (n <= 3N^2) and is obviously correct.
    """
    n = int(n)
    if n < 0:
        raise ValueError(f"two-squares count needs n >= 0, got {n}")
    count = 0
    for a in range(-math.isqrt(n), math.isqrt(n) + 1):
        m = n - a * a
        b = math.isqrt(m)
        if b * b == m:
            count += 1 if b == 0 else 2
    return count


def shell_slice(k, r, N) -> list[Mode]:
    """Shell-r modes admissible as sources for target k.

    A source p qualifies when |p|^2 = r and the complementary mode k - p is
    also retained (in particular p != k). Empty when r is unrepresented.
    """
    k = require_mode(k, N)
    out = []
    for p in shell(r, N):
        q = (k[0] - p[0], k[1] - p[1], k[2] - p[2])
        if in_lattice(q, N):
            out.append(p)
    return out


def _require_in_box(p, k, N):
    if any(abs(p[j] - k[j]) > N for j in range(3)):
        raise ValueError(f"{tuple(p)} lies outside the source cube of {tuple(k)}")


def face_height(p, k, face: Face, N) -> int:
    """Inward distance from p to one face of the source cube centered at k."""
    _require_in_box(p, k, N)
    axis, sign = face
    if sign > 0:
        return k[axis] + N - p[axis]
    return p[axis] - (k[axis] - N)


def min_face(p, k, N) -> tuple[Face, int]:
    """Nearest face and its height; ties resolved by FACE_ORDER."""
    best_face, best_h = None, None
    for face in FACE_ORDER:
        h = face_height(p, k, face, N)
        if best_h is None or h < best_h:
            best_face, best_h = face, h
    return best_face, best_h


def dyadic_scale(h) -> int:
    """The power of two H with H <= h < 2H; by convention 1 when h = 0."""
    h = int(h)
    if h < 0:
        raise ValueError(f"face heights are nonnegative, got {h}")
    return 1 if h == 0 else 1 << (h.bit_length() - 1)


def patch_decompose(k, r, N) -> dict[PatchKey, list[Mode]]:
    """Partition a shell slice by (nearest face, dyadic height scale).

    Every slice point lands in exactly one patch, so the patch lists are
    pairwise disjoint and their union is the slice.
    """
    patches: dict[PatchKey, list[Mode]] = {}
    for p in shell_slice(k, r, N):
        face, h = min_face(p, k, N)
        patches.setdefault((face, dyadic_scale(h)), []).append(p)
    return patches


def _require_orbit(orbit: Orbit, N):
    check_truncation(N)
    if orbit.canonical[0] > N:
        raise ValueError(f"orbit {orbit.canonical} does not live at truncation level {N}")


def orbit_triad_count(alpha: Orbit, beta: Orbit, N) -> int:
    """Ordered triads whose target lies in alpha and source in beta.

    The count equals |alpha| times the number of beta members admissible for
    one fixed target; the canonical representative plays that role, and the
    result is independent of the choice.
    """
    _require_orbit(alpha, N)
    _require_orbit(beta, N)
    k = alpha.canonical
    m = sum(
        1
        for p in beta.members
        if in_lattice((k[0] - p[0], k[1] - p[1], k[2] - p[2]), N)
    )
    return alpha.size * m


@dataclass
class IncidenceRecord:
    """Exact per-source-orbit triad counts into one target orbit."""

    target: Orbit
    counts: dict[Mode, int]  # keyed by source canonical triple
    row_sqrt_sum: float


def incidence_row(alpha: Orbit, N, orbits=None) -> IncidenceRecord:
    """Triad counts from every source orbit into alpha, plus the square-root
    row sum accumulated in the fixed orbit order.

    Counting is one vectorized pass over the source cube of the canonical
    target: classify each admissible point by its canonical triple, then
    scale by |alpha|.
    """
    _require_orbit(alpha, N)
    if orbits is None:
        orbits = enumerate_orbits(N)
    pts = box_source_points(alpha.canonical, N)
    if len(pts):
        canon = np.sort(np.abs(pts), axis=1)[:, ::-1]
        uniq, cnt = np.unique(canon, axis=0, return_counts=True)
        slice_counts = {tuple(int(x) for x in row): int(c) for row, c in zip(uniq, cnt)}
    else:
        slice_counts = {}
    counts: dict[Mode, int] = {}
    total = 0.0
    for beta in orbits:
        g = alpha.size * slice_counts.get(beta.canonical, 0)
        counts[beta.canonical] = g
        total += math.sqrt(g)
    return IncidenceRecord(alpha, counts, total)


def max_incidence_scan(n_max, workers=1) -> list[tuple[int, float]]:
    """For each level N <= n_max, the largest square-root row sum over targets."""
    check_truncation(n_max)
    out = []
    for N in range(1, n_max + 1):
        orbits = enumerate_orbits(N)
        sums = parallel_map(
            lambda a: incidence_row(a, N, orbits).row_sqrt_sum, orbits, workers
        )
        out.append((N, max(sums)))
    return out


def fit_loglog_slope(scan, n_min=4) -> float:
    """Least-squares slope of log(value) against log(N), dropping N < n_min.

    Small levels are transient-dominated, so the fit starts at n_min by
    default.
    """
    pts = [(n, v) for n, v in scan if n >= n_min and v > 0]
    if len(pts) < 2:
        raise ValueError("slope fit needs at least two levels with N >= n_min")
    x = np.log([float(n) for n, _ in pts])
    y = np.log([float(v) for _, v in pts])
    return float(np.polyfit(x, y, 1)[0])
