"""Divergence-free truncated Fourier states and the orbit transfer matrix.

A state stores one complex amplitude 3-vector per retained mode, in a dense
array aligned with the lexicographic mode order. On top of that this module
evaluates the projected quadratic term of the truncated system, assembles
the state-dependent transfer matrix between symmetry orbits together with
its antisymmetric/symmetric split, and computes the Sobolev-type quantities
(norms, kernel sums, row-sum bound shapes) used by the bound checks.

Conventions: the bilinear product u_p . u_q inside the quadratic term is the
unconjugated component sum; only the outer pairing against the target
amplitude conjugates. Floating accumulations run in a fixed order (targets
lexicographic, then sources lexicographic) so repeated runs are bit-stable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._util import atomic_write_text, box_source_points, parallel_map
from .lattice import Mode, check_truncation, enumerate_lattice, require_mode
from .symmetry import Orbit, canonical_rep, enumerate_orbits


class StateValidationError(ValueError):
    """A state document or array violates a structural invariant."""

    def __init__(self, invariant, mode=None, detail=""):
        self.invariant = invariant
        self.mode = tuple(mode) if mode is not None else None
        msg = f"state invariant '{invariant}' violated"
        if mode is not None:
            msg += f" at mode {self.mode}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class _ModeTable:
    """Dense indexing of one truncation level for vectorized triad loops."""

    def __init__(self, N):
        self.N = N
        modes = np.asarray(enumerate_lattice(N), dtype=np.int64)
        self.modes = modes
        self.n = len(modes)
        self.norm2 = (modes**2).sum(axis=1)
        self._side = 2 * N + 1
        cube = np.full(self._side**3, -1, dtype=np.int64)
        cube[self._flat(modes)] = np.arange(self.n)
        self._cube = cube
        self.row_index = {tuple(int(c) for c in m): i for i, m in enumerate(modes)}
        self.mirror = self.rows_of(-modes)
        # lexicographically positive half: first nonzero coordinate > 0
        self.half = np.nonzero(
            (modes[:, 0] > 0)
            | ((modes[:, 0] == 0) & (modes[:, 1] > 0))
            | ((modes[:, 0] == 0) & (modes[:, 1] == 0) & (modes[:, 2] > 0))
        )[0]

    def _flat(self, pts):
        N, side = self.N, self._side
        return ((pts[:, 0] + N) * side + (pts[:, 1] + N)) * side + (pts[:, 2] + N)

    def rows_of(self, pts) -> np.ndarray:
        """Rows of points assumed inside the cube and nonzero."""
        return self._cube[self._flat(pts)]


class _OrbitTable:
    """Orbit list for one level plus the mode-row -> orbit-position map."""

    def __init__(self, N):
        self.orbits = tuple(enumerate_orbits(N))
        self.n = len(self.orbits)
        self.position = {o.canonical: i for i, o in enumerate(self.orbits)}
        tbl = mode_table(N)
        canon = np.sort(np.abs(tbl.modes), axis=1)[:, ::-1]
        self.mode_orbit = np.asarray(
            [self.position[tuple(int(c) for c in row)] for row in canon],
            dtype=np.int64,
        )
        self.sizes = np.asarray([o.size for o in self.orbits], dtype=np.int64)


@lru_cache(maxsize=None)
def mode_table(N) -> _ModeTable:
    check_truncation(N)
    return _ModeTable(N)


@lru_cache(maxsize=None)
def orbit_table(N) -> _OrbitTable:
    check_truncation(N)
    return _OrbitTable(N)


class TruncatedState:
    """All retained Fourier amplitudes of a real divergence-free field.

    values[i] is the complex 3-vector of mode-table row i. Instances are
    treated as immutable once validated; time stepping returns new states.
    """

    __slots__ = ("N", "values")

    def __init__(self, N, values, validate=True):
        check_truncation(N)
        tbl = mode_table(N)
        values = np.ascontiguousarray(values, dtype=np.complex128)
        if values.shape != (tbl.n, 3):
            raise StateValidationError(
                "domain", detail=f"expected shape {(tbl.n, 3)}, got {values.shape}"
            )
        self.N = N
        self.values = values
        if validate:
            self.validate()

    @classmethod
    def zero(cls, N) -> "TruncatedState":
        return cls(N, np.zeros((mode_table(N).n, 3), dtype=np.complex128), validate=False)

    @classmethod
    def from_coeffs(cls, N, coeffs) -> "TruncatedState":
        """Build from a mode -> 3-vector mapping covering the whole lattice."""
        check_truncation(N)
        tbl = mode_table(N)
        seen = set()
        values = np.zeros((tbl.n, 3), dtype=np.complex128)
        for k, v in coeffs.items():
            k = tuple(int(c) for c in k)
            if k not in tbl.row_index:
                raise StateValidationError("domain", mode=k, detail="mode not retained")
            if k in seen:
                raise StateValidationError("domain", mode=k, detail="duplicate mode")
            seen.add(k)
            values[tbl.row_index[k]] = np.asarray(v, dtype=np.complex128)
        if len(seen) != tbl.n:
            missing = next(m for m in tbl.row_index if m not in seen)
            raise StateValidationError("domain", mode=missing, detail="mode missing")
        return cls(N, values)

    def coeff(self, k) -> np.ndarray:
        return self.values[mode_table(self.N).row_index[tuple(int(c) for c in k)]]

    def as_coeffs(self) -> dict[Mode, np.ndarray]:
        tbl = mode_table(self.N)
        return {m: self.values[i].copy() for m, i in tbl.row_index.items()}

    def copy(self) -> "TruncatedState":
        return TruncatedState(self.N, self.values.copy(), validate=False)

    def validate(self, rel_tol=1e-12) -> None:
        """Check finiteness, conjugate reality, and per-mode incompressibility.

        Reality is measured against max(1, |u_k|) per mode; incompressibility
        exactly as |k . u_k| <= rel_tol |k| |u_k| (zero amplitudes pass).
        """
        tbl = mode_table(self.N)
        v = self.values
        finite = np.isfinite(v).all(axis=1)
        if not finite.all():
            row = int(np.nonzero(~finite)[0][0])
            raise StateValidationError(
                "finite", mode=tbl.modes[row], detail="non-finite coefficient"
            )
        err = np.abs(v[tbl.mirror] - v.conj()).max(axis=1)
        scale = np.maximum(1.0, np.abs(v).max(axis=1))
        bad = err > rel_tol * scale
        if bad.any():
            row = int(np.nonzero(bad)[0][0])
            raise StateValidationError(
                "reality", mode=tbl.modes[row], detail="conjugate mirror mismatch"
            )
        kdot = np.abs((tbl.modes * v).sum(axis=1))
        knorm = np.sqrt(tbl.norm2.astype(float))
        vnorm = np.linalg.norm(v, axis=1)
        bad = kdot > rel_tol * knorm * vnorm
        if bad.any():
            row = int(np.nonzero(bad)[0][0])
            raise StateValidationError(
                "incompressibility", mode=tbl.modes[row], detail="k . u_k != 0"
            )


def leray_project(k, v) -> np.ndarray:
    """Remove the component of v along k; idempotent, output orthogonal to k."""
    k = tuple(int(c) for c in k)
    if not any(k):
        raise ValueError("the projector is undefined at the zero wavevector")
    karr = np.asarray(k, dtype=float)
    v = np.asarray(v, dtype=np.complex128)
    return v - karr * ((karr @ v) / (karr @ karr))


def nonlinear_term(u: TruncatedState, k) -> np.ndarray:
    """Projected quadratic term of the truncated system at one target mode.

    Sums q (u_p . u_q) over admissible sources, projects off k, multiplies
    by -i. Source order is lexicographic, so the sum is reproducible.
    """
    k = require_mode(k, u.N)
    tbl = mode_table(u.N)
    pts = box_source_points(k, u.N)
    if not len(pts):
        return np.zeros(3, dtype=np.complex128)
    karr = np.asarray(k, dtype=np.int64)
    q = karr - pts
    up = u.values[tbl.rows_of(pts)]
    uq = u.values[tbl.rows_of(q)]
    dot = (up * uq).sum(axis=1)
    w = (dot[:, None] * q).sum(axis=0)
    kf = karr.astype(float)
    w = w - kf * ((kf @ w) / float(karr @ karr))
    return -1j * w


def galerkin_rhs(u: TruncatedState, nu) -> TruncatedState:
    """Right side of the truncated system: -nu |k|^2 u_k plus the projected
    quadratic term.

    Computed on the lexicographically positive half lattice and mirrored by
    conjugation, so reality holds exactly; the whole per-mode value is
    projected once at the end, which pins incompressibility at rounding
    level even when viscous and quadratic parts nearly cancel.
    """
    if nu < 0:
        raise ValueError(f"viscosity must be nonnegative, got {nu}")
    tbl = mode_table(u.N)
    out = np.zeros_like(u.values)
    for i in tbl.half:
        k = tuple(int(c) for c in tbl.modes[i])
        total = -nu * float(tbl.norm2[i]) * u.values[i] + nonlinear_term(u, k)
        kf = tbl.modes[i].astype(float)
        total = total - kf * ((kf @ total) / float(tbl.norm2[i]))
        out[i] = total
        out[tbl.mirror[i]] = total.conj()
    return TruncatedState(u.N, out, validate=False)


def _require_orbit_level(orbit: Orbit, N):
    if orbit.canonical[0] > N:
        raise ValueError(
            f"orbit {orbit.canonical} does not live at truncation level {N}"
        )


def _orbit_contributions(u: TruncatedState, k) -> np.ndarray:
    """Transfer contributions of one target mode, grouped by source orbit.

    Entry j sums |k|^2 Im((u_p . u_q) (conj(u_k) . Pq)) over the triads of k
    whose source lies in orbit j; Pq is q projected off k. Grouping uses
    bincount, which accumulates in the lexicographic source order.
    """
    tbl = mode_table(u.N)
    ot = orbit_table(u.N)
    pts = box_source_points(k, u.N)
    if not len(pts):
        return np.zeros(ot.n)
    karr = np.asarray(k, dtype=np.int64)
    r = float(karr @ karr)
    q = (karr - pts).astype(float)
    rows_p = tbl.rows_of(pts)
    rows_q = tbl.rows_of(karr - pts)
    dot = (u.values[rows_p] * u.values[rows_q]).sum(axis=1)
    kf = karr.astype(float)
    qproj = q - np.outer(q @ kf, kf / r)
    s = qproj @ u.values[tbl.row_index[tuple(k)]].conj()
    weights = r * (dot * s).imag
    return np.bincount(ot.mode_orbit[rows_p], weights=weights, minlength=ot.n)


def transfer_entry(u: TruncatedState, alpha: Orbit, beta: Orbit) -> float:
    """One transfer-matrix entry: the mean over targets in alpha of the
    signed enstrophy transfer received from sources in beta."""
    _require_orbit_level(alpha, u.N)
    _require_orbit_level(beta, u.N)
    j = orbit_table(u.N).position[beta.canonical]
    total = 0.0
    for k in alpha.members:
        total += _orbit_contributions(u, k)[j]
    return total / alpha.size


@dataclass
class TransferMatrix:
    """Dense orbit-pair transfer matrix for one state."""

    orbits: tuple[Orbit, ...]
    entries: np.ndarray

    @property
    def n(self) -> int:
        return len(self.orbits)


def transfer_matrix(u: TruncatedState, workers=1) -> TransferMatrix:
    """Assemble every orbit-pair entry.

    Rows (one target orbit each) are independent, so they parallelize; the
    accumulation order inside a row is fixed, keeping results bit-identical
    at any worker count.
    """
    ot = orbit_table(u.N)

    def row(alpha):
        acc = np.zeros(ot.n)
        for k in alpha.members:
            acc += _orbit_contributions(u, k)
        return acc / alpha.size

    rows = parallel_map(row, ot.orbits, workers)
    return TransferMatrix(ot.orbits, np.vstack(rows))


def decompose(matrix) -> tuple[np.ndarray, np.ndarray]:
    """Split a square matrix into antisymmetric and symmetric halves.

    Returns (A, V) with A = (M - M^T)/2 and V = (M + M^T)/2; the transpose
    identities hold exactly in floating point and A + V reconstructs M to
    rounding.
    """
    m = matrix.entries if isinstance(matrix, TransferMatrix) else np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return (m - m.T) / 2.0, (m + m.T) / 2.0


def sobolev_norm(u: TruncatedState, s) -> float:
    """Square root of sum |k|^(2s) |u_k|^2 over all retained modes."""
    tbl = mode_table(u.N)
    amp2 = (np.abs(u.values) ** 2).sum(axis=1)
    return math.sqrt(float((tbl.norm2.astype(float) ** float(s) * amp2).sum()))


def random_state(N, s, amplitude, seed) -> TruncatedState:
    """Deterministic divergence-free Gaussian state with a prescribed norm.

    Draws independent standard complex Gaussian 3-vectors on the
    lexicographically positive half lattice, projects each off its
    wavevector, mirrors by conjugation, then rescales globally so the
    Sobolev norm of exponent s equals amplitude.
    """
    if amplitude <= 0:
        raise ValueError(f"amplitude must be positive, got {amplitude}")
    tbl = mode_table(N)
    rng = np.random.default_rng(seed)
    half = tbl.half
    z = rng.standard_normal((len(half), 3)) + 1j * rng.standard_normal((len(half), 3))
    kf = tbl.modes[half].astype(float)
    z = z - kf * ((kf * z).sum(axis=1) / (kf * kf).sum(axis=1))[:, None]
    values = np.zeros((tbl.n, 3), dtype=np.complex128)
    values[half] = z
    values[tbl.mirror[half]] = z.conj()
    u = TruncatedState(N, values, validate=False)
    norm = sobolev_norm(u, s)
    if norm == 0.0:
        raise ValueError("degenerate draw produced an identically zero state")
    values *= amplitude / norm
    return TruncatedState(N, values)


def triad_kernel_sum(k, s, N) -> float:
    """Sum of |p|^(-s) |k-p|^(1-s) over the admissible sources of target k.

    Constant on symmetry orbits of k, since the kernel and the admissible
    set are both invariant.
    """
    k = require_mode(k, N)
    pts = box_source_points(k, N)
    if not len(pts):
        return 0.0
    p2 = (pts**2).sum(axis=1).astype(float)
    q2 = ((np.asarray(k) - pts) ** 2).sum(axis=1).astype(float)
    return float((p2 ** (-s / 2.0) * q2 ** ((1.0 - s) / 2.0)).sum())


def orbit_pair_kernel_sums(N, s, workers=1) -> np.ndarray:
    """Matrix of kernel sums grouped by (target orbit, source orbit).

    Entry (i, j) sums |p|^(-s) |q|^(1-s) over every triad whose target lies
    anywhere in orbit i and whose source lies in orbit j, with no size
    normalization. Depends only on the lattice, not on a state.
    """
    tbl = mode_table(N)
    ot = orbit_table(N)

    def row(alpha):
        acc = np.zeros(ot.n)
        for k in alpha.members:
            pts = box_source_points(k, N)
            if not len(pts):
                continue
            p2 = (pts**2).sum(axis=1).astype(float)
            q2 = ((np.asarray(k) - pts) ** 2).sum(axis=1).astype(float)
            w = p2 ** (-s / 2.0) * q2 ** ((1.0 - s) / 2.0)
            acc += np.bincount(ot.mode_orbit[tbl.rows_of(pts)], weights=w, minlength=ot.n)
        return acc

    return np.vstack(parallel_map(row, ot.orbits, workers))


@dataclass
class RowSumRecord:
    """One row of the transfer matrix against its Sobolev bound shape."""

    orbit: Orbit
    row_sum: float
    bound_shape: float
    ratio: float


def row_sum_report(u: TruncatedState, s, matrix=None, workers=1) -> list[RowSumRecord]:
    """Absolute row sums of the transfer matrix against the bound shape
    norm^3 (|k|^(2-s) + |k|^(6-3s)).

    The bound shape carries an unspecified constant, so only the ratio is
    reported. Restricted to 3/2 < s < 3, the range where the row-sum bound
    is established.
    """
    if not 1.5 < s < 3.0:
        raise ValueError(f"row-sum bound shape requires 3/2 < s < 3, got s={s}")
    if matrix is None:
        matrix = transfer_matrix(u, workers=workers)
    norm = sobolev_norm(u, s)
    out = []
    for i, orbit in enumerate(matrix.orbits):
        row_sum = float(np.abs(matrix.entries[i]).sum())
        kn = math.sqrt(orbit.norm2)
        shape = norm**3 * (kn ** (2.0 - s) + kn ** (6.0 - 3.0 * s))
        ratio = row_sum / shape if shape > 0 else 0.0
        out.append(RowSumRecord(orbit, row_sum, shape, ratio))
    return out


def save_state(u: TruncatedState, path) -> None:
    """Write the JSON state document: every retained mode, lexicographic."""
    tbl = mode_table(u.N)
    modes = [
        {
            "k": [int(c) for c in tbl.modes[i]],
            "re": [float(x) for x in u.values[i].real],
            "im": [float(x) for x in u.values[i].imag],
        }
        for i in range(tbl.n)
    ]
    atomic_write_text(path, json.dumps({"N": u.N, "modes": modes}, indent=1) + "\n")


def load_state(path) -> TruncatedState:
    """Read and fully validate a JSON state document.

    Rejects missing, duplicate, or unretained modes, malformed vectors, and
    any violation of the reality or incompressibility invariants.
    """
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise StateValidationError("schema", detail=f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "N" not in doc or "modes" not in doc:
        raise StateValidationError("schema", detail="expected object with N and modes")
    N = doc["N"]
    if not isinstance(N, int) or N < 1:
        raise StateValidationError("schema", detail=f"bad truncation level {N!r}")
    tbl = mode_table(N)
    values = np.zeros((tbl.n, 3), dtype=np.complex128)
    seen = set()
    for entry in doc["modes"]:
        try:
            k = tuple(int(c) for c in entry["k"])
            re = [float(x) for x in entry["re"]]
            im = [float(x) for x in entry["im"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise StateValidationError("schema", detail=f"malformed mode entry: {exc}") from exc
        if len(k) != 3 or len(re) != 3 or len(im) != 3:
            raise StateValidationError("schema", mode=k, detail="entry is not 3-dimensional")
        if k not in tbl.row_index:
            raise StateValidationError("domain", mode=k, detail="mode not retained")
        if k in seen:
            raise StateValidationError("domain", mode=k, detail="duplicate mode")
        seen.add(k)
        values[tbl.row_index[k]] = np.asarray(re) + 1j * np.asarray(im)
    if len(seen) != tbl.n:
        missing = next(m for m in tbl.row_index if m not in seen)
        raise StateValidationError("domain", mode=missing, detail="mode missing")
    return TruncatedState(N, values)
