import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lrinvariants import ForceProfile, InvariantConstants, casimir_sigma, solve_linear_coeffs, solve_quadratic_coeffs
from lrinvariants.auxiliary import (
    Antiderivative, casimir_drift, casimir_floor, fd_weights, finite_difference, read_trajectory_csv,
    reference_solution, sample_times, stencil_indices,
)
from lrinvariants.errors import ConservationError, ForceDomainError, NonElliptic

FORCES = {
    "zero": ForceProfile.from_expression("0"),
    "unit": ForceProfile.constant(1.0),
    "cos": ForceProfile.from_expression("0.5*cos(t)"),
    "chirp": ForceProfile.from_expression("sin(0.3*t*t) - 0.2"),
    "table": ForceProfile.from_table(np.arange(0, 5.25, 0.25), 0.2 + 0.3 * np.sin(0.7 * np.arange(0, 5.25, 0.25))),
}


def test_free_trivial_trajectory():
    traj = solve_quadratic_coeffs(FORCES["zero"], 1.0, InvariantConstants(1, 0, 0), sample_times(3, 31))
    assert np.all(traj.D == 1.0)
    assert np.all(traj.A == 0) and np.all(traj.B == 0) and np.all(traj.C == 0)


@pytest.mark.parametrize("name", sorted(FORCES))
def test_closed_form_values_at_two(name):
    traj = solve_quadratic_coeffs(FORCES[name], 1.0, InvariantConstants(), sample_times(4, 41))
    k = traj.index_of(2.0)
    assert traj.E[k] == pytest.approx(-2.0, abs=1e-14)
    assert traj.D[k] == pytest.approx(5.0, abs=1e-14)
    assert np.all(traj.F == 1.0)


def test_constant_force_quadratic():
    t = sample_times(5, 101)
    traj = solve_quadratic_coeffs(FORCES["unit"], 1.0, InvariantConstants(1, 0, 0), t)
    assert np.allclose(traj.A, 2 * t, atol=1e-13, rtol=0)
    assert np.allclose(traj.B, 0, atol=0)
    assert np.allclose(traj.C, t**2, atol=1e-12, rtol=0)


def test_constant_force_linear():
    t = sample_times(5, 101)
    traj = solve_linear_coeffs(FORCES["unit"], 1.0, 0.0, 1.0, 0.0, t)
    assert np.allclose(traj.A, -t, atol=1e-15, rtol=0)
    assert np.allclose(traj.C, -t**2 / 2, atol=1e-12, rtol=0)
    assert np.all(traj.B == 1.0)
    assert np.all(traj.D == 0) and np.all(traj.E == 0) and np.all(traj.F == 0)


def test_free_linear_invariant_is_constant():
    traj = solve_linear_coeffs(FORCES["zero"], 1.0, 0.7, 0.0, -1.1, sample_times(5, 51))
    assert np.all(traj.A == 0.7) and np.all(traj.C == -1.1)


@pytest.mark.parametrize("name", ["cos", "chirp", "table"])
def test_linear_with_zero_b(name):
    f = FORCES[name]
    t = sample_times(5, 201)
    traj = solve_linear_coeffs(f, 1.0, 1.3, 0.0, 0.4, t)
    ref = reference_solution(f, 1.0, InvariantConstants.linear(1.3, 0.0, 0.4), t)
    assert np.all(traj.A == 1.3)
    assert np.max(np.abs(traj.C - ref[:, 5])) < 1e-10


@pytest.mark.parametrize("name", sorted(FORCES))
@pytest.mark.parametrize("mass", [1.0, 0.6])
@pytest.mark.parametrize("constants", [InvariantConstants(), InvariantConstants(2.0, -0.5, 0.8, 0.3, -1.0, 0.2)])
def test_matches_ode_oracle(name, mass, constants):
    t = sample_times(5, 401)
    traj = solve_quadratic_coeffs(FORCES[name], mass, constants, t)
    ref = reference_solution(FORCES[name], mass, constants, t)
    assert np.max(np.abs(traj.coefficients - ref)) < 1e-10


@pytest.mark.parametrize("name", sorted(FORCES))
@pytest.mark.parametrize("method", ["exact", "fd"])
def test_lvn_residual_of_solutions(name, method):
    t = sample_times(5, 1001)
    q = solve_quadratic_coeffs(FORCES[name], 1.0, InvariantConstants(1.0, 0.3, 2.0, 0.5, -0.5, 1.0), t)
    lin = solve_linear_coeffs(FORCES[name], 1.0, 0.4, 1.0, -0.3, t)
    assert q.max_lvn_residual(method) < 1e-8
    assert lin.max_lvn_residual(method) < 1e-8


@given(st.floats(0.2, 3), st.floats(-1, 1), st.floats(0.2, 3), st.floats(0.3, 3), st.floats(-2, 2))
def test_conservation_properties(D0, E0, F0, mass, amp):
    f = ForceProfile.from_expression(f"{amp!r} * cos(t)" if amp >= 0 else f"-{-amp!r} * cos(t)")
    traj = solve_quadratic_coeffs(f, mass, InvariantConstants(D0, E0, F0, 0.1, 0.2, 0.3), sample_times(6, 301))
    assert np.all(traj.F == F0)
    assert casimir_drift(traj) < 1e-12 + casimir_floor(traj)
    assert traj.max_lvn_residual() < 1e-8


def test_casimir_unit():
    traj = solve_quadratic_coeffs(FORCES["zero"], 1.0, InvariantConstants(), sample_times(5, 51))
    assert casimir_sigma(traj) == 1.0
    t = traj.times
    assert np.allclose(traj.D * traj.F - traj.E**2, (1 + t**2) - t**2, atol=1e-13)


def test_casimir_floor_only_matters_for_large_forms():
    small = solve_quadratic_coeffs(FORCES["cos"], 1.0, InvariantConstants(), sample_times(5, 51))
    assert casimir_floor(small) < 1e-13
    # D(6) ~ 1100 with ς^2 = 0.75: cancellation alone is ~1e-12
    big = solve_quadratic_coeffs(FORCES["zero"], 0.3125, InvariantConstants(0.25, 0.0, 3.0), sample_times(6, 301))
    assert 1e-12 < casimir_floor(big) < 1e-11
    assert casimir_drift(big) < 1e-12 + casimir_floor(big)
    assert casimir_sigma(big) == pytest.approx(np.sqrt(0.75), rel=1e-15)


def test_casimir_two():
    traj = solve_quadratic_coeffs(FORCES["cos"], 1.0, InvariantConstants(2, 0, 2), sample_times(5, 51))
    assert casimir_sigma(traj) == 2.0


@pytest.mark.parametrize("constants", [InvariantConstants(1, 1, 1), InvariantConstants(0, 0, 1), InvariantConstants(1, 2, 1)])
def test_non_elliptic(constants):
    traj = solve_quadratic_coeffs(FORCES["cos"], 1.0, constants, sample_times(2, 21))
    with pytest.raises(NonElliptic, match="D0\\*F0 - E0\\^2"):
        casimir_sigma(traj)


def test_casimir_detects_broken_trajectory():
    traj = solve_quadratic_coeffs(FORCES["cos"], 1.0, InvariantConstants(), sample_times(2, 21))
    bad = traj.with_coefficients(D=traj.D * (1 + 1e-9))
    with pytest.raises(ConservationError):
        casimir_sigma(bad)


@pytest.mark.parametrize("times", [[0.0, 1.0, 1.0], [0.0, 2.0, 1.0], [0.5, 1.0], [0.0]])
def test_rejects_bad_time_grid(times):
    with pytest.raises(ValueError):
        solve_quadratic_coeffs(FORCES["cos"], 1.0, InvariantConstants(), times)


def test_rejects_short_table():
    with pytest.raises(ForceDomainError):
        solve_quadratic_coeffs(FORCES["table"], 1.0, InvariantConstants(), sample_times(6, 61))


def test_rejects_nonpositive_mass():
    with pytest.raises(ValueError):
        solve_linear_coeffs(FORCES["cos"], 0.0, times=sample_times(1, 11))


@pytest.mark.parametrize("points", [3, 5, 7])
def test_fd_weights_exact_on_polynomials(points):
    xs = np.linspace(0, 1, points) ** 1.3
    w = fd_weights(xs[1], xs)
    for deg in range(points):
        exact = deg * xs[1] ** (deg - 1) if deg else 0.0
        assert np.dot(w, xs**deg) == pytest.approx(exact, abs=1e-9)


def test_finite_difference_accuracy():
    t = np.linspace(0, 3, 301)
    d = finite_difference(np.sin(t), t)
    assert np.max(np.abs(d - np.cos(t))) < 1e-10


def test_stencils_stay_inside_smooth_pieces():
    t = np.linspace(0, 2, 21)
    idx = stencil_indices(t, 10, 7, breaks=[1.0])
    assert idx.max() == 10  # sample on the break uses the left piece
    idx = stencil_indices(t, 11, 7, breaks=[1.0])
    assert idx.min() == 10
    # kinked function with smooth pieces is differentiated exactly piecewise
    y = np.where(t < 1, t**2, 2 * t - 1 + (t - 1) ** 3)
    d = finite_difference(y, t, breaks=[1.0])
    exact = np.where(t <= 1, 2 * t, 2 + 3 * (t - 1) ** 2)
    assert np.max(np.abs(d - exact)) < 1e-12


def test_antiderivative_is_spectral():
    F = Antiderivative(np.exp, np.linspace(0, 2, 11))
    x = np.array([0.0, 0.37, 1.0, 1.93, 2.0])
    assert np.allclose(F(x), np.exp(x) - 1, atol=1e-14, rtol=0)


def test_csv_round_trip(tmp_path):
    traj = solve_quadratic_coeffs(FORCES["cos"], 1.0, InvariantConstants(), sample_times(2, 21))
    path = tmp_path / "traj.csv"
    text = traj.to_csv(path)
    assert text.splitlines()[0] == "t,D,E,F,A,B,C"
    back = read_trajectory_csv(path, FORCES["cos"], 1.0)
    assert np.array_equal(back.coefficients, traj.coefficients)
    assert np.array_equal(back.times, traj.times)


def test_json_dump():
    traj = solve_linear_coeffs(FORCES["unit"], 1.0, 0.0, 1.0, 0.0, sample_times(1, 5))
    data = json.loads(traj.to_json())
    assert data["mass"] == 1.0 and data["kind"] == "linear"
    assert data["A"] == pytest.approx([-0.0, -0.25, -0.5, -0.75, -1.0])
