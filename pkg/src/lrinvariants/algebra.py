"""Operators in span{p^2, pq+qp, q^2, p, q, 1} with hbar = 1.

Coefficients are stored in the fixed basis order ``(p2, sym, q2, p, q, one)``
where ``sym`` multiplies the symmetrized product ``pq + qp``.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterable

import numpy as np

from .grid import GridSpec, GridWavefunction, spectral_derivative
from .errors import GridMismatch

BASIS = ("p2", "sym", "q2", "p", "q", "one")
BASIS_LABELS = ("p^2", "pq+qp", "q^2", "p", "q", "1")

P2, SYM, Q2, P, Q, ONE = range(6)

# [X_i, X_j] = i * sum_k c * X_k, exact integers. Only i < j listed; the
# other half follows from antisymmetry.
_STRUCTURE = {
    (P2, SYM): ((P2, -4),),
    (P2, Q2): ((SYM, -2),),
    (P2, Q): ((P, -2),),
    (SYM, Q2): ((Q2, -4),),
    (SYM, P): ((P, 2),),
    (SYM, Q): ((Q, -2),),
    (Q2, P): ((Q, 2),),
    (P, Q): ((ONE, -1),),
}


def _full_table() -> np.ndarray:
    table = np.zeros((6, 6, 6), dtype=np.int64)
    for (i, j), terms in _STRUCTURE.items():
        for k, c in terms:
            table[i, j, k] = c
            table[j, i, k] = -c
    table.setflags(write=False)
    return table


STRUCTURE_CONSTANTS = _full_table()


@dataclass(frozen=True)
class QuadOp:
    """D p^2 + E (pq+qp) + F q^2 + A p + B q + C as six complex numbers."""

    p2: complex = 0.0
    sym: complex = 0.0
    q2: complex = 0.0
    p: complex = 0.0
    q: complex = 0.0
    one: complex = 0.0

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, complex(getattr(self, f.name)))

    @classmethod
    def from_vector(cls, vec: Iterable[complex]) -> "QuadOp":
        vec = list(vec)
        if len(vec) != 6:
            raise ValueError(f"QuadOp needs 6 coefficients, got {len(vec)}")
        return cls(*vec)

    @classmethod
    def basis(cls, index: int) -> "QuadOp":
        vec = [0.0] * 6
        vec[index] = 1.0
        return cls(*vec)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.p2, self.sym, self.q2, self.p, self.q, self.one], dtype=complex)

    def is_hermitian(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.vector.imag) <= tol))

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.vector)))

    def __add__(self, other: "QuadOp") -> "QuadOp":
        return QuadOp.from_vector(self.vector + other.vector)

    def __sub__(self, other: "QuadOp") -> "QuadOp":
        return QuadOp.from_vector(self.vector - other.vector)

    def __neg__(self) -> "QuadOp":
        return QuadOp.from_vector(-self.vector)

    def __mul__(self, scalar: complex) -> "QuadOp":
        return QuadOp.from_vector(self.vector * scalar)

    __rmul__ = __mul__

    def to_json(self) -> list:
        return [[v.real, v.imag] for v in self.vector]

    @classmethod
    def from_json(cls, data) -> "QuadOp":
        return cls.from_vector(complex(re, im) for re, im in data)

    def __str__(self) -> str:
        terms = [f"({v:.6g}){lab}" for v, lab in zip(self.vector, BASIS_LABELS) if v != 0]
        return " + ".join(terms) if terms else "0"


def commutator(x: QuadOp, y: QuadOp) -> QuadOp:
    """[x, y] = xy - yx, expanded on the basis with the exact structure table."""
    xv, yv = x.vector, y.vector
    coeffs = np.einsum("i,j,ijk->k", xv, yv, STRUCTURE_CONSTANTS)
    return QuadOp.from_vector(1j * coeffs)


def hamiltonian(mass: float, force: float) -> QuadOp:
    """H = p^2 / 2m + f q at one instant."""
    return QuadOp(p2=1.0 / (2.0 * mass), q=force)


def lvn_residual(inv: QuadOp, inv_rate: QuadOp, ham: QuadOp) -> QuadOp:
    """dI/dt + (1/i)[I, H]; zero exactly when ``inv`` is an invariant at this instant."""
    return inv_rate + commutator(inv, ham) * (-1j)


def lvn_residual_coefficients(inv: np.ndarray, inv_rate: np.ndarray, ham: np.ndarray) -> np.ndarray:
    """Vectorized :func:`lvn_residual` over a leading sample axis of shape (K, 6)."""
    comm = 1j * np.einsum("ni,nj,ijk->nk", inv, ham, STRUCTURE_CONSTANTS)
    return inv_rate - 1j * comm


def apply_quadop(op: QuadOp, psi: GridWavefunction) -> GridWavefunction:
    """Act with ``op`` on ``psi``: q by multiplication, p as a Fourier multiplier."""
    if psi.amplitudes.shape != (psi.grid.points,):
        raise GridMismatch("wavefunction amplitudes do not match their grid")
    return psi.with_amplitudes(apply_coefficients(op.vector, psi.amplitudes, psi.grid))


def apply_coefficients(vec: np.ndarray, values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Apply coefficient vectors to sampled states.

    ``vec`` is (6,) or (K, 6); ``values`` is (N,) or (K, N) with matching K.
    """
    vec = np.asarray(vec)
    values = np.asarray(values, dtype=complex)
    q = grid.q
    c = [vec[..., i, None] if vec.ndim > 1 else vec[i] for i in range(6)]
    dpsi = spectral_derivative(values, grid, 1)
    d2psi = spectral_derivative(values, grid, 2)
    sym = spectral_derivative(q * values, grid, 1) + q * dpsi
    return (
        c[P2] * d2psi
        + c[SYM] * sym
        + c[Q2] * q**2 * values
        + c[P] * dpsi
        + c[Q] * q * values
        + c[ONE] * values
    )


def dense_matrix(op: QuadOp, grid: GridSpec) -> np.ndarray:
    """N x N matrix of ``op`` on the grid (spectral p, diagonal q)."""
    n = grid.points
    eye = np.eye(n)
    pmat = np.fft.ifft(grid.k[:, None] * np.fft.fft(eye, axis=0), axis=0)
    p2mat = np.fft.ifft((grid.k**2)[:, None] * np.fft.fft(eye, axis=0), axis=0)
    qdiag = grid.q
    v = op.vector
    mat = v[P2] * p2mat
    mat = mat + v[SYM] * (pmat * qdiag[None, :] + qdiag[:, None] * pmat)
    mat = mat + v[P] * pmat
    mat[np.diag_indices(n)] += v[Q2] * qdiag**2 + v[Q] * qdiag + v[ONE]
    return mat
