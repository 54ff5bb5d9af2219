"""Orbit-reduced cubic Galerkin truncation of the 3D incompressible
Navier-Stokes equations: exact lattice and symmetry-orbit combinatorics,
orbit-pair triad incidence counts, the state-dependent enstrophy transfer
matrix, and short verified simulations."""

__version__ = "0.1.0"

from .lattice import (
    enumerate_lattice,
    max_triad_count,
    shell,
    shell_radii,
    total_triads,
    triad_count_brute,
    triad_count_exact,
)
from .symmetry import GroupElement, Orbit, canonical_rep, enumerate_orbits, group_elements, orbit_of
from .incidence import (
    IncidenceRecord,
    dyadic_scale,
    face_height,
    fit_loglog_slope,
    incidence_row,
    max_incidence_scan,
    min_face,
    orbit_triad_count,
    patch_decompose,
    shell_slice,
    two_squares_count,
)
from .spectral import (
    StateValidationError,
    TransferMatrix,
    TruncatedState,
    decompose,
    galerkin_rhs,
    leray_project,
    load_state,
    nonlinear_term,
    orbit_pair_kernel_sums,
    random_state,
    row_sum_report,
    save_state,
    sobolev_norm,
    transfer_entry,
    transfer_matrix,
    triad_kernel_sum,
)
from .dynamics import (
    DiagnosticsRecord,
    OrbitDiagnostics,
    SimulationDiverged,
    default_timestep,
    enstrophy_balance_direct,
    enstrophy_identity_residuals,
    orbit_dissipation,
    orbit_enstrophy,
    simulate,
    step_rk4,
    total_energy,
    total_enstrophy,
)
