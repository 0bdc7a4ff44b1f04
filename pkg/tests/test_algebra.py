import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_state
from lrinvariants import GridSpec, GridWavefunction, QuadOp, apply_quadop, commutator, hamiltonian, lvn_residual
from lrinvariants.algebra import STRUCTURE_CONSTANTS, dense_matrix
from lrinvariants.errors import GridMismatch

P2, SYM, Q2, P, Q, ONE = (QuadOp.basis(i) for i in range(6))

coef = st.floats(-3, 3, allow_nan=False) | st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)
quadops = st.lists(coef, min_size=6, max_size=6).map(QuadOp.from_vector)


def close(x: QuadOp, y: QuadOp, tol=1e-12) -> bool:
    return np.allclose(x.vector, y.vector, atol=tol, rtol=0)


def test_q2_p2_commutator():
    assert close(commutator(Q2, P2), QuadOp(sym=2j))


def test_q_p_commutator():
    assert close(commutator(Q, P), QuadOp(one=1j))


@given(quadops)
def test_self_commutator_vanishes(x):
    assert close(commutator(x, x), QuadOp())


def test_structure_table_is_integer():
    assert STRUCTURE_CONSTANTS.dtype.kind == "i"


@pytest.mark.parametrize("a,b,expected", [
    (P2, SYM, QuadOp(p2=-4j)),
    (SYM, Q2, QuadOp(q2=-4j)),
    (P2, Q, QuadOp(p=-2j)),
    (Q2, P, QuadOp(q=2j)),
    (SYM, P, QuadOp(p=2j)),
    (SYM, Q, QuadOp(q=-2j)),
    (ONE, P2, QuadOp()),
])
def test_basis_commutators(a, b, expected):
    assert close(commutator(a, b), expected)


def test_jacobi_all_basis_triples():
    basis = [QuadOp.basis(i) for i in range(6)]
    for x, y, z in itertools.product(basis, repeat=3):
        total = (commutator(x, commutator(y, z)) + commutator(y, commutator(z, x))
                 + commutator(z, commutator(x, y)))
        assert close(total, QuadOp(), 0.0)


@given(quadops, quadops)
def test_antisymmetry(x, y):
    assert close(commutator(x, y), -commutator(y, x), 1e-11)


@given(quadops, quadops, quadops, coef)
def test_bilinearity(x, y, z, s):
    assert close(commutator(x * s + y, z), commutator(x, z) * s + commutator(y, z), 1e-10)
    assert close(commutator(z, x * s + y), commutator(z, x) * s + commutator(z, y), 1e-10)


@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6), st.lists(st.floats(-2, 2), min_size=6, max_size=6),
       st.integers(0, 2**16))
def test_commutator_matches_grid(xv, yv, seed):
    grid = GridSpec(40.0, 256)
    x, y = QuadOp.from_vector(xv), QuadOp.from_vector(yv)
    psi = random_state(grid, seed)
    lhs = apply_quadop(commutator(x, y), psi).amplitudes
    rhs = (apply_quadop(x, apply_quadop(y, psi)) - apply_quadop(y, apply_quadop(x, psi))).amplitudes
    assert np.max(np.abs(lhs - rhs)) < 1e-8 * (1 + np.max(np.abs(rhs)))


def test_hamiltonian_is_invariant_of_itself():
    h = hamiltonian(1.0, 0.0)
    assert close(lvn_residual(h, QuadOp(), h), QuadOp())


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 4.5])
def test_constant_force_linear_invariant(t):
    inv = QuadOp(p=-t, q=1.0, one=-t**2 / 2)
    rate = QuadOp(p=-1.0, one=-t)
    assert close(lvn_residual(inv, rate, hamiltonian(1.0, 1.0)), QuadOp())


@pytest.mark.parametrize("m", [1.0, 2.0, 0.5])
def test_position_is_not_invariant_for_free_motion(m):
    res = lvn_residual(Q, QuadOp(), hamiltonian(m, 0.0))
    # d<q>/dt = <p>/m, so the residual of I = q is +p/m
    assert close(res, QuadOp(p=1.0 / m))


@given(quadops, quadops, quadops, quadops, coef)
def test_lvn_residual_is_linear(i1, i2, r1, r2, s):
    h = hamiltonian(1.3, 0.7)
    lhs = lvn_residual(i1 * s + i2, r1 * s + r2, h)
    rhs = lvn_residual(i1, r1, h) * s + lvn_residual(i2, r2, h)
    assert close(lhs, rhs, 1e-10)


def test_square_of_invariant_is_invariant():
    # (q - t p - t^2/2)^2 for f = 1, m = 1, with the product-rule rate
    t = 1.7
    A, B, C = -t, 1.0, -t**2 / 2
    inv = QuadOp(A**2, A * B, B**2, 2 * A * C, 2 * B * C, C**2)
    dA, dB, dC = -1.0, 0.0, -t
    rate = QuadOp(2 * A * dA, dA * B + A * dB, 2 * B * dB, 2 * (dA * C + A * dC), 2 * (dB * C + B * dC), 2 * C * dC)
    assert close(lvn_residual(inv, rate, hamiltonian(1.0, 1.0)), QuadOp(), 1e-12)


def test_apply_position_on_plane_wave(grid):
    k = grid.k[5]
    psi = GridWavefunction(grid, np.exp(1j * k * grid.q))
    out = apply_quadop(Q, psi)
    assert np.allclose(out.amplitudes, grid.q * psi.amplitudes, atol=0, rtol=0)


@pytest.mark.parametrize("index", [1, 7, -12, 100])
def test_apply_momentum_on_plane_wave(grid, index):
    k = grid.k[index]
    psi = GridWavefunction(grid, np.exp(1j * k * grid.q))
    assert np.max(np.abs(apply_quadop(P, psi).amplitudes - k * psi.amplitudes)) < 1e-10 * abs(k)


def test_oscillator_ground_state(grid):
    psi = GridWavefunction(grid, np.pi**-0.25 * np.exp(-grid.q**2 / 2))
    out = apply_quadop(P2 + Q2, psi)
    assert np.max(np.abs(out.amplitudes - psi.amplitudes)) < 1e-10


def test_grid_mismatch(grid):
    with pytest.raises(GridMismatch):
        GridWavefunction(grid, np.ones(128))
    small = GridWavefunction(GridSpec(40.0, 128), np.ones(128))
    with pytest.raises(GridMismatch):
        small.inner(GridWavefunction(grid, np.ones(grid.points)))


def test_dense_matrix_matches_apply():
    grid = GridSpec(20.0, 64)
    op = QuadOp(0.5, 0.3 - 0.1j, 0.2, -1.0, 0.4, 2.0)
    psi = random_state(grid, 3)
    assert np.allclose(dense_matrix(op, grid) @ psi.amplitudes, apply_quadop(op, psi).amplitudes, atol=1e-9)


def test_json_round_trip():
    op = QuadOp(1, 2j, -3.5, 0.25 + 1j, 0, 7)
    data = json.loads(json.dumps(op.to_json()))
    assert len(data) == 6 and all(len(pair) == 2 for pair in data)
    assert QuadOp.from_json(data) == op


def test_hermitian_flag():
    assert QuadOp(1, 2, 3, 4, 5, 6).is_hermitian()
    assert not QuadOp(one=1j).is_hermitian()
