"""Cubic truncation lattice: mode enumeration, shells, and exact triad counts.

Wavevectors are plain integer 3-tuples. The truncated lattice at level N is
the set of nonzero integer vectors with sup-norm at most N; a triad is an
ordered pair of retained sources (p, q) with p + q equal to the target mode.
"""

from __future__ import annotations

import itertools

Mode = tuple[int, int, int]


def check_truncation(N) -> None:
    if not isinstance(N, int) or isinstance(N, bool) or N < 1:
        raise ValueError(f"truncation level must be a positive integer, got {N!r}")


def in_lattice(k, N) -> bool:
    """True if k is retained: nonzero with sup-norm at most N."""
    return any(k) and max(abs(c) for c in k) <= N


def require_mode(k, N) -> Mode:
    """Coerce k to an integer 3-tuple and verify it is retained at level N."""
    check_truncation(N)
    k = tuple(int(c) for c in k)
    if len(k) != 3:
        raise ValueError(f"a mode needs exactly 3 coordinates, got {k!r}")
    if not in_lattice(k, N):
        raise ValueError(f"{k} is not a nonzero mode with sup-norm <= {N}")
    return k


def enumerate_lattice(N) -> list[Mode]:
    """All retained modes at level N, in lexicographic order.

    Cardinality is (2N+1)^3 - 1.
    """
    check_truncation(N)
    rng = range(-N, N + 1)
    return [k for k in itertools.product(rng, rng, rng) if any(k)]


def triad_count_exact(k, N) -> int:
    """Number of ordered retained pairs (p, q) with p + q = k.

    Closed form: the per-coordinate box intersections decouple, giving
    prod_i (2N+1-|k_i|) pairs inside the cube, minus the two pairs that use
    the excluded zero mode.
    """
    k = require_mode(k, N)
    prod = 1
    for c in k:
        prod *= 2 * N + 1 - abs(c)
    return prod - 2


def triad_count_brute(k, N) -> int:
    """Oracle for triad_count_exact: count pairs by direct enumeration of p.

    p runs over the coordinate box intersection of the cube with its
    translate by k, skipping p = 0 and p = k (which would make q = 0).
    """
    k = require_mode(k, N)
    k1, k2, k3 = k
    count = 0
    for p1 in range(max(-N, k1 - N), min(N, k1 + N) + 1):
        for p2 in range(max(-N, k2 - N), min(N, k2 + N) + 1):
            for p3 in range(max(-N, k3 - N), min(N, k3 + N) + 1):
                if (p1 or p2 or p3) and (p1, p2, p3) != k:
                    count += 1
    return count


def total_triads(N) -> int:
    """Total ordered triad count over all targets at level N.

    Closed form (3N^2+3N+1)^3 - 3(2N+1)^3 + 2. Python integers never
    overflow; a signed 64-bit integer would first overflow at N = 836.
    """
    check_truncation(N)
    s = 3 * N * N + 3 * N + 1
    c = 2 * N + 1
    return s**3 - 3 * c**3 + 2


def max_triad_count(N) -> int:
    """Largest per-target triad count, attained at the six axial unit vectors."""
    check_truncation(N)
    return 2 * N * (2 * N + 1) ** 2 - 2


def shell_radii(N) -> list[int]:
    """Sorted squared Euclidean norms represented at level N.

    Every radius lies in [1, 3N^2]; the squared norm only depends on
    coordinate absolute values, so scanning nonnegative triples suffices.
    """
    check_truncation(N)
    rng = range(N + 1)
    return sorted(
        {a * a + b * b + c * c for a, b, c in itertools.product(rng, rng, rng)} - {0}
    )


def shell(r, N) -> list[Mode]:
    """All retained modes with squared norm exactly r (may be empty)."""
    check_truncation(N)
    return [k for k in enumerate_lattice(N) if k[0] ** 2 + k[1] ** 2 + k[2] ** 2 == r]


def shell_map(N) -> dict[int, list[Mode]]:
    """Shells keyed by radius; one lattice pass, modes stay lexicographic."""
    check_truncation(N)
    out: dict[int, list[Mode]] = {}
    for k in enumerate_lattice(N):
        out.setdefault(k[0] ** 2 + k[1] ** 2 + k[2] ** 2, []).append(k)
    return out
