import numpy as np

from orbitns.spectral import TruncatedState, leray_project, mode_table


def single_pair_state(N, k, v) -> TruncatedState:
    """State supported on one conjugate mode pair, projected so it validates."""
    tbl = mode_table(N)
    values = np.zeros((tbl.n, 3), dtype=np.complex128)
    w = leray_project(k, np.asarray(v, dtype=np.complex128))
    values[tbl.row_index[tuple(k)]] = w
    values[tbl.row_index[tuple(-c for c in k)]] = w.conj()
    return TruncatedState(N, values)
