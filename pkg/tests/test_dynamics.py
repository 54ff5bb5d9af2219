import math
import warnings

import numpy as np
import pytest

from conftest import single_pair_state
from orbitns.dynamics import (
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
from orbitns.spectral import TruncatedState, random_state, transfer_matrix
from orbitns.symmetry import enumerate_orbits, orbit_of


def test_orbit_enstrophy_and_dissipation():
    orbits = enumerate_orbits(2)
    zero = TruncatedState.zero(2)
    for alpha in orbits:
        assert orbit_enstrophy(zero, alpha) == 0.0
        assert orbit_dissipation(zero, alpha) == 0.0

    k = (2, 1, 0)
    u = single_pair_state(2, k, [0.1, -0.2, 0.3j])
    alpha = orbit_of(k)
    c2 = float((np.abs(u.coeff(k)) ** 2).sum())
    assert orbit_enstrophy(u, alpha) == pytest.approx(5.0 * c2 / alpha.size, rel=1e-13)
    assert orbit_dissipation(u, alpha) == pytest.approx(2 * 25.0 * c2 / alpha.size, rel=1e-13)
    # orbits sit on one shell, so D = 2 |k|^2 Z
    assert orbit_dissipation(u, alpha) == pytest.approx(
        2 * 5.0 * orbit_enstrophy(u, alpha), rel=1e-13
    )


def test_orbit_enstrophies_sum_to_total():
    u = random_state(2, 2.0, 1.0, seed=3)
    orbits = enumerate_orbits(2)
    total = sum(a.size * orbit_enstrophy(u, a) for a in orbits)
    assert total == pytest.approx(total_enstrophy(u), rel=1e-13)


def test_orbit_diag_rejects_foreign_orbit():
    u = TruncatedState.zero(1)
    with pytest.raises(ValueError):
        orbit_enstrophy(u, orbit_of((2, 1, 0)))


def test_identity_residuals_zero_state():
    recs = enstrophy_identity_residuals(TruncatedState.zero(2), 0.1)
    assert all(r.residual == 0 for r in recs)
    assert all(r.enstrophy == 0 and r.dissipation == 0 for r in recs)


@pytest.mark.parametrize("nu", [0.0, 0.1])
def test_identity_residuals_random_states(nu):
    for seed in (0, 1, 2):
        u = random_state(2, 2.0, 1.0, seed=seed)
        recs = enstrophy_identity_residuals(u, nu)
        for r in recs:
            assert r.residual <= 1e-10 * r.scale


def test_aggregate_identity_matches_mode_level():
    nu = 0.1
    u = random_state(2, 2.0, 1.0, seed=5)
    matrix = transfer_matrix(u)
    recs = enstrophy_identity_residuals(u, nu, matrix=matrix)
    sizes = {o.canonical: o.size for o in matrix.orbits}
    weighted = sum(sizes[r.canonical] * r.dzdt_matrix for r in recs)
    direct = enstrophy_balance_direct(u, nu)
    scale = max(1.0, sum(sizes[r.canonical] * r.scale for r in recs))
    assert abs(weighted - direct) <= 1e-10 * scale


def test_step_rk4_zero_state_and_bad_dt():
    u = TruncatedState.zero(1)
    assert np.all(step_rk4(u, 1e-2, 0.5).values == 0)
    with pytest.raises(ValueError):
        step_rk4(u, 0.0, 0.5)


def test_step_rk4_viscous_decay_fifth_order():
    k, nu = (2, 1, 0), 0.3
    u = single_pair_state(2, k, [0.3 + 0.1j, -0.2 + 0.4j, 0.5 - 0.2j])
    c0 = np.linalg.norm(u.coeff(k))
    for dt in (0.2, 0.1):
        z = nu * 5.0 * dt
        got = np.linalg.norm(step_rk4(u, dt, nu).coeff(k)) / c0
        assert abs(got - math.exp(-z)) <= z**5 / 100.0
    # halving the step shrinks the one-step defect by about 2^5
    e1 = abs(np.linalg.norm(step_rk4(u, 0.2, nu).coeff(k)) / c0 - math.exp(-nu * 5 * 0.2))
    e2 = abs(np.linalg.norm(step_rk4(u, 0.1, nu).coeff(k)) / c0 - math.exp(-nu * 5 * 0.1))
    assert 24 <= e1 / e2 <= 40


def test_step_rk4_output_validates():
    u = random_state(2, 2.0, 1.0, seed=7)
    out = step_rk4(u, 1e-3, 0.2)
    out.validate()


def test_simulate_viscous_enstrophy_decays():
    u = random_state(2, 2.0, 1.0, seed=9)
    recs = simulate(u, 1.0, 1e-3, 20, diagnostics_every=5)
    totals = [sum(od.enstrophy for od in r.orbits) for r in recs]
    assert all(a > b for a, b in zip(totals, totals[1:]))


def test_simulate_energy_conserved_without_viscosity():
    u = random_state(2, 2.0, 1.0, seed=9)
    e0 = total_energy(u)
    v = u
    for _ in range(50):
        v = step_rk4(v, 1e-3, 0.0)
    assert abs(total_energy(v) - e0) <= 1e-8 * e0


def test_simulate_rejects_bad_parameters():
    u = TruncatedState.zero(1)
    with pytest.raises(ValueError):
        simulate(u, 0.1, 1e-3, 0)
    with pytest.raises(ValueError):
        simulate(u, 0.1, -1e-3, 5)
    with pytest.raises(ValueError):
        simulate(u, 0.1, 1e-3, 5, diagnostics_every=0)


def test_simulate_record_cadence():
    u = random_state(1, 2.0, 0.5, seed=2)
    recs = simulate(u, 0.1, 1e-3, 7, diagnostics_every=3)
    assert [r.step for r in recs] == [0, 3, 6, 7]
    assert recs[-1].time == pytest.approx(7e-3)
    for r in recs:
        for od in r.orbits:
            assert od.residual <= 1e-10 * od.scale


def test_simulate_divergence_detected():
    u = random_state(1, 2.0, 5.0, seed=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with pytest.raises(SimulationDiverged) as err:
            simulate(u, 5.0, 1e6, 50)
    assert err.value.step >= 1


def test_default_timestep():
    u = random_state(2, 2.0, 1.0, seed=1)
    dt = default_timestep(u, 0.5)
    amp = float(np.linalg.norm(u.values, axis=1).max())
    assert dt == pytest.approx(1e-3 / (0.5 * 12 + 2 * amp))
    assert default_timestep(TruncatedState.zero(2), 0.0) == 1e-3
