import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrinvariants import (
    ForceProfile, GridSpec, GridWavefunction, InvariantConstants, match_square, solve_linear_coeffs,
    solve_quadratic_coeffs, square_linear, verify_invariant_maps_solutions,
)
from lrinvariants.algebra import apply_coefficients
from lrinvariants.auxiliary import sample_times
from lrinvariants.completeness import IS_SQUARE, NOT_SQUARE, rank_certificate
from lrinvariants.errors import DegenerateState, OptimizerFailure
from lrinvariants.propagate import gaussian_packet
from lrinvariants.wavefunctions import linear_invariant_eigenstate, window_interior

WIDE = GridSpec(120.0, 2048)


def test_square_of_momentum():
    traj = solve_linear_coeffs(ForceProfile.constant(0.0), 1.0, 1.0, 0.0, 0.0, sample_times(1, 11))
    sq = square_linear(traj, 1.0)
    assert np.all(sq.D == 1) and np.all(sq.E == 0) and np.all(sq.F == 0)
    assert np.all(sq.A == 0) and np.all(sq.B == 0) and np.all(sq.C == 0)


def test_square_of_constant_force_invariant(unit_linear):
    sq = square_linear(unit_linear, 1.0)
    k = sq.index_of(2.0)
    assert np.allclose([sq.D[k], sq.E[k], sq.F[k], sq.A[k], sq.B[k], sq.C[k]], [4, -2, 1, 8, -4, 4], atol=1e-12)
    assert sq.max_lvn_residual("fd") < 1e-8


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-3, 3),
       st.sampled_from(["0", "1", "0.5*cos(t)", "exp(-t) - 0.5"]))
@settings(max_examples=12)
def test_squares_are_rank_one_invariants(A0, B0, C0, c, force):
    lin = solve_linear_coeffs(ForceProfile.from_expression(force), 1.0, A0, B0, C0, sample_times(3, 301))
    sq = square_linear(lin, c)
    assert np.max(np.abs(sq.D * sq.F - sq.E**2)) <= 1e-12 * max(1.0, np.max(sq.D * sq.F))
    assert sq.max_lvn_residual("fd") < 1e-8 * max(1.0, np.max(np.abs(sq.coefficients)))
    assert rank_certificate(sq) < 1e-12


@pytest.mark.parametrize("consts,c", [((0.0, 1.0, 0.0), 2.0), ((0.6, 0.8, -0.5), -1.5), ((-0.28, 0.96, 1.2), 0.3)])
def test_round_trip_recovers_c(consts, c):
    lin = solve_linear_coeffs(ForceProfile.from_expression("0.5*cos(t)"), 1.0, *consts, sample_times(5, 501))
    report = match_square(square_linear(lin, c))
    assert report.verdict == IS_SQUARE and report.method == "optimizer"
    assert report.residual < 1e-8
    assert report.c == pytest.approx(c, rel=1e-6)
    assert np.allclose([report.A0, report.B0, report.C0], consts, atol=1e-6)


def test_gauge_normalization_rescales_c():
    # (c, I_l) and (c / s^2, s I_l) give the same square; the report fixes A0^2 + B0^2 = 1
    lin = solve_linear_coeffs(ForceProfile.constant(1.0), 1.0, 0.0, 2.0, 1.0, sample_times(3, 301))
    report = match_square(square_linear(lin, 0.5))
    assert report.verdict == IS_SQUARE
    assert report.c == pytest.approx(2.0, rel=1e-6)
    assert report.C0 == pytest.approx(0.5, abs=1e-6)


def test_free_oscillator_invariant_is_not_square():
    traj = solve_quadratic_coeffs(ForceProfile.constant(0.0), 1.0, InvariantConstants(), sample_times(10, 2001))
    quick = match_square(traj)
    assert quick.verdict == NOT_SQUARE and quick.method == "rank-certificate"
    assert quick.residual == 0.5
    full = match_square(traj, use_rank_shortcut=False)
    assert full.verdict == NOT_SQUARE
    # the candidate c = 1, I_l = q already misses only the unit offset in D
    assert 0.5 <= full.residual <= 1.0
    assert full.residual >= full.certificate


def test_linear_operator_is_not_square():
    traj = solve_quadratic_coeffs(ForceProfile.constant(0.0), 1.0, InvariantConstants(0, 0, 0, 1, 0, 0),
                                  sample_times(5, 501))
    assert rank_certificate(traj) == 0.0
    report = match_square(traj)
    assert report.method == "optimizer" and report.verdict == NOT_SQUARE
    assert report.residual > 0.1


def test_optimizer_failure_is_reported():
    lin = solve_linear_coeffs(ForceProfile.constant(1.0), 1.0, 0.0, 1.0, 0.0, sample_times(2, 101))
    with pytest.raises(OptimizerFailure):
        match_square(square_linear(lin, 1.0), starts=1, max_nfev=1)


def test_match_is_deterministic():
    lin = solve_linear_coeffs(ForceProfile.constant(1.0), 1.0, 0.6, 0.8, 0.0, sample_times(2, 101))
    a = match_square(square_linear(lin, 1.0), seed=3)
    b = match_square(square_linear(lin, 1.0), seed=3)
    assert a == b


def test_report_json():
    traj = solve_quadratic_coeffs(ForceProfile.constant(0.0), 1.0, InvariantConstants(2, 0, 2), sample_times(1, 11))
    data = json.loads(match_square(traj).to_json())
    assert data["verdict"] == "NotSquare" and data["residual"] == pytest.approx(1.0)
    assert set(data) >= {"c", "A0", "B0", "C0", "residual", "verdict"}


def test_momentum_maps_free_solutions():
    lin = solve_linear_coeffs(ForceProfile.constant(0.0), 1.0, 1.0, 0.0, 0.0, sample_times(2, 201))
    psi0 = gaussian_packet(GridSpec(40.0, 1024), -1.0, 0.8)
    assert verify_invariant_maps_solutions(lin, psi0, 2.0) >= 1 - 1e-8


def test_constant_force_maps_solutions():
    lin = solve_linear_coeffs(ForceProfile.constant(1.0), 1.0, 0.0, 1.0, 0.0, sample_times(5, 1001))
    assert verify_invariant_maps_solutions(lin, gaussian_packet(WIDE, 0.0, 2.5), 5.0) >= 1 - 1e-5


@pytest.mark.filterwarnings("ignore::lrinvariants.errors.ResolutionWarning")
def test_windowed_eigenstate_maps_solutions():
    lin = solve_linear_coeffs(ForceProfile.constant(0.0), 1.0, 1.0, 0.0, 0.3, sample_times(1, 101))
    grid = GridSpec(40.0, 1024)
    lam = 2 * np.pi * 8 / grid.extent + 0.3  # on the momentum lattice, so no wrap-around kink
    psi0 = linear_invariant_eigenstate(lam, lin, 0.0, grid, window="plateau").normalized()
    # I_l psi is proportional to psi where the window is flat
    inside = window_interior(grid)
    mapped = apply_coefficients(lin.coefficients[0], psi0.amplitudes, grid)[inside]
    overlap = abs(np.vdot(psi0.amplitudes[inside], mapped)) ** 2
    assert overlap / (np.vdot(mapped, mapped).real * np.sum(abs(psi0.amplitudes[inside]) ** 2)) >= 1 - 1e-6
    assert verify_invariant_maps_solutions(lin, psi0, 1.0) >= 1 - 1e-6


def test_degenerate_state():
    grid = GridSpec(40.0, 256)
    lin = solve_linear_coeffs(ForceProfile.constant(0.0), 1.0, 1.0, 0.0, 0.0, sample_times(1, 11))
    with pytest.raises(DegenerateState):
        verify_invariant_maps_solutions(lin, GridWavefunction(grid, np.ones(256)), 1.0)
