"""Analytic invariant eigenstates and the particular solutions built from them."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_simpson

from .algebra import apply_coefficients
from .auxiliary import CoeffTrajectory, fd_weights, finite_difference, stencil_indices
from .errors import (
    GridTooSmall, NonRealIntegrand, ResolutionExceeded, ZeroMomentumCoefficient,
)
from .grid import (
    GridSpec, GridWavefunction, edge_mass, fourier_interpolate, spectral_tail_mass,
    translate,
)
from .transforms import SymplecticGaussian, TransformTrack, track_transforms


def hermite_functions(n_max: int, x: np.ndarray) -> np.ndarray:
    """Normalized Hermite functions h_0..h_{n_max} at ``x``, shape (n_max + 1, len(x)).

    Uses the three-term recurrence on the normalized functions, which stays
    finite where the bare polynomials would overflow.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = np.pi**-0.25 * np.exp(-(x**2) / 2)
    if n_max >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, n_max):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def hermite_function(n: int, x: np.ndarray) -> np.ndarray:
    return hermite_functions(n, x)[n]


def ho_eigenstate(n: int, grid: GridSpec, tol: float = 1e-12) -> GridWavefunction:
    """n-th eigenstate of p^2 + q^2 (eigenvalue 2n + 1) sampled on ``grid``."""
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    psi = hermite_function(n, grid.q)
    edge = max(abs(hermite_function(n, np.array([-grid.extent / 2]))[0]), abs(psi[-1]))
    if edge >= tol:
        raise GridTooSmall(
            f"|{n}> has amplitude {edge:.2e} at the grid edge; extent {grid.extent} is too small"
        )
    return GridWavefunction(grid, psi.astype(complex), {"state": f"ho[{n}]"})


# ---------------------------------------------------------------------------
# Gaussian unitaries on the grid

def check_resolution(values: np.ndarray, tol: float = 1e-10, stage: str = "") -> None:
    """Raise :class:`ResolutionExceeded` if a state reaches the box edge or the Nyquist band."""
    em = edge_mass(values)
    if em > tol:
        raise ResolutionExceeded(f"{stage}: {em:.2e} of the probability sits at the grid edge")
    tail = spectral_tail_mass(values)
    if tail > tol:
        raise ResolutionExceeded(f"{stage}: {tail:.2e} of the power sits near the Nyquist limit")


def _chirp(values, grid, kappa):
    return values * np.exp(1j * kappa * grid.q**2)


def _shear(values, grid, mu):
    return np.fft.ifft(np.exp(1j * mu * grid.k**2) * np.fft.fft(values))


def _scale(values, grid, s):
    # psi(q) -> s^{-1/2} psi(q / s); samples that come from outside the box are zero
    x = grid.q / s
    inside = np.abs(x) < grid.extent / 2
    out = np.zeros_like(values)
    out[inside] = fourier_interpolate(values, grid, x[inside])
    return out / np.sqrt(s)


def _parity(values: np.ndarray, grid: GridSpec, factor: complex) -> np.ndarray:
    # q_j = (j - N/2) dq, so -q_j sits at index (N - j) mod N
    idx = (-np.arange(grid.points)) % grid.points
    return factor * values[idx]


def _charts(S: np.ndarray, grid: GridSpec) -> list[list[tuple[str, float]]]:
    """Valid factorizations of Mp(S), cheapest first.

    The cost of a chart is the largest intermediate position spread relative
    to L/2, or momentum spread relative to the Nyquist wavenumber, that it
    produces from a unit-width state. Near half turns the charts of ``-S``
    followed by a parity flip are also offered.
    """
    pos, mom = grid.extent / 2, grid.k_nyquist

    def direct(M):
        S11, S12, S21, S22 = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
        z = np.hypot(S11, S12)
        out = []
        if S22 > 0:
            steps = [("chirp", S21 / (2 * S22)), ("dilation", 1 / S22), ("shear", -S12 / (2 * S22))]
            cost = max(max(1 / S22, z) / pos, max(np.hypot(1, S21 / S22), np.hypot(S21, S22)) / mom)
            out.append((cost, steps))
        if S11 > 0:
            steps = [("shear", -S12 / (2 * S11)), ("dilation", S11), ("chirp", S21 / (2 * S11))]
            cost = max(max(np.hypot(1, S12 / S11), z) / pos, max(1 / S11, np.hypot(S21, S22)) / mom)
            out.append((cost, steps))
        return out

    candidates = [(c, i, steps) for i, (c, steps) in enumerate(direct(S))]
    S11, S12, S21, S22 = S[0, 0], S[0, 1], S[1, 0], S[1, 1]
    if abs(S12) > 1e-12:  # smaller S12 makes both chirps unresolvable
        steps = [("chirp", (S11 - 1) / (2 * S12)), ("shear", -S12 / 2), ("chirp", (S22 - 1) / (2 * S12))]
        cost = max(np.hypot(S11, S12) / pos, np.hypot(1, (S11 - 1) / S12) / mom, np.hypot(S21, S22) / mom)
        candidates.append((cost, 2, steps))
    # Mp(S) = -+i P Mp(-S), the sign following the principal arg of S11 + i S12
    upper = S12 > 0 or (S12 == 0 and S11 < 0)
    flip = ("parity", -1j if upper else 1j)
    for i, (c, steps) in enumerate(direct(-S)):
        candidates.append((c, 3 + i, steps + [flip]))
    return [steps for _, _, steps in sorted(candidates, key=lambda c: c[:2])]


def _run_chart(v: np.ndarray, grid: GridSpec, steps, tol: float) -> np.ndarray:
    ops = {"chirp": _chirp, "shear": _shear, "dilation": _scale, "parity": _parity}
    for name, value in steps:
        if value == (1.0 if name == "dilation" else 0.0):
            continue
        v = ops[name](v, grid, value)
        check_resolution(v, tol, name)
    return v


def apply_gaussian_unitary(psi: GridWavefunction, gauss: SymplecticGaussian,
                           tol: float = 1e-10) -> GridWavefunction:
    """Apply the Gaussian unitary with Heisenberg action ``S z + d`` to ``psi``.

    The metaplectic part is factored into chirps ``exp(i k q^2)``, free shears
    ``exp(i m p^2)``, a dilation and possibly a parity flip, using whichever
    chart keeps the intermediate states smallest: chirp-dilation-shear
    (``S22 > 0``), shear-dilation-chirp (``S11 > 0``), chirp-shear-chirp
    (``S12 != 0``), or one of the first two applied to ``-S`` followed by
    parity. All of them select the same sign of the metaplectic lift, the one
    given by the principal branch of ``arg(S11 + i S12)``. If a chart loses
    the state off the grid the next one is tried. The displacement
    ``exp(i(y q + x p))`` and the global phase follow.
    """
    grid = psi.grid
    error = None
    for steps in _charts(gauss.S, grid):
        try:
            v = _run_chart(np.asarray(psi.amplitudes), grid, steps, tol)
            break
        except ResolutionExceeded as exc:
            error = error or exc
    else:
        raise error
    x, y = gauss.x, gauss.y
    if x != 0:
        v = translate(v, grid, x)
    if x != 0 or y != 0:
        v = v * np.exp(1j * (y * grid.q + x * y / 2))
        check_resolution(v, tol, "displacement")
    if gauss.phase:
        v = v * np.exp(1j * gauss.phase)
    return psi.with_amplitudes(v)


def _metaplectic_eigenfunctions(n_max: int, S: np.ndarray, q: np.ndarray, gauge: str) -> np.ndarray:
    """Mp(S)|n> for n <= n_max evaluated at points ``q``.

    In the ``"hermite"`` gauge the phase exp(-i (n + 1/2) arg z) is dropped,
    leaving a state that depends on S only through ``S S^T`` and is therefore
    smooth along any trajectory.
    """
    z = S[0, 0] + 1j * S[0, 1]
    width = abs(z)
    chirp = (S[0, 0] * S[1, 0] + S[0, 1] * S[1, 1]) / width**2
    h = hermite_functions(n_max, q / width) / np.sqrt(width)
    out = h * np.exp(0.5j * chirp * q**2)
    if gauge == "unitary":
        out = out * np.exp(-1j * (np.arange(n_max + 1) + 0.5) * np.angle(z))[:, None]
    elif gauge != "hermite":
        raise ValueError(f"unknown gauge {gauge!r}")
    return out


def transformed_eigenstates(n_max: int, gauss: SymplecticGaussian, grid: GridSpec,
                            gauge: str = "unitary", tol: float = 1e-10) -> np.ndarray:
    """Rows ``V1 V2 |n>`` for n = 0..n_max, evaluated in closed form on ``grid``."""
    x, y = gauss.x, gauss.y
    rows = _metaplectic_eigenfunctions(n_max, gauss.S, grid.q + x, gauge)
    rows = rows * np.exp(1j * (y * grid.q + x * y / 2 + gauss.phase))
    for n, row in enumerate(rows):
        check_resolution(row, tol, f"transformed |{n}>")
    return rows


def transformed_eigenstate(n: int, gauss: SymplecticGaussian, grid: GridSpec,
                           gauge: str = "unitary", tol: float = 1e-10) -> GridWavefunction:
    """``V1 V2 |n>`` on the grid; see :func:`transformed_eigenstates`."""
    row = transformed_eigenstates(n, gauss, grid, gauge, tol)[n]
    return GridWavefunction(grid, row, {"state": f"V1V2|{n}>", "gauge": gauge})


# ---------------------------------------------------------------------------
# continuum eigenstates of the linear invariant

def gaussian_window(grid: GridSpec, width: float | None = None) -> np.ndarray:
    """exp(-q^2 / (2 w^2)) with default ``w = 0.6 * L / 2``."""
    w = 0.3 * grid.extent if width is None else float(width)
    return np.exp(-(grid.q**2) / (2 * w**2))


def _smooth_step(x):
    # C-infinity step: 0 for x <= 0, 1 for x >= 1
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def plateau_window(grid: GridSpec, flat: float = 0.5, support: float = 0.9) -> np.ndarray:
    """Smooth flat-top window: 1 for |q| < flat*L/2, 0 for |q| > support*L/2."""
    half = grid.extent / 2
    lo, hi = flat * half, support * half
    return 1.0 - _smooth_step((np.abs(grid.q) - lo) / (hi - lo))


def linear_invariant_eigenstate(lam: float, traj: CoeffTrajectory, t: float, grid: GridSpec,
                                window: str | None = "gaussian", width: float | None = None,
                                flat: float = 0.5) -> GridWavefunction:
    """Generalized eigenfunction of ``A p + B q + C`` with eigenvalue ``lam``.

    ``exp(i((lam - C) q - B q^2 / 2) / A)``, multiplied by a Gaussian or
    plateau window so that it can be normalized. The window and its
    parameters are recorded in the metadata.
    """
    k = traj.index_of(t)
    A, B, C = traj.A[k], traj.B[k], traj.C[k]
    if abs(A) <= 1e-12 * max(1.0, abs(B), abs(C)):
        raise ZeroMomentumCoefficient(
            f"A({t}) = {A:.3g}: eigenstates of {B:.6g} q + {C:.6g} are position deltas"
        )
    q = grid.q
    values = np.exp(1j * ((lam - C) * q - B * q**2 / 2) / A)
    meta = {"state": "linear-invariant", "eigenvalue": float(lam), "t": float(t), "window": window}
    if window == "gaussian":
        w = 0.3 * grid.extent if width is None else float(width)
        values = values * gaussian_window(grid, w)
        meta["width"] = w
    elif window == "plateau":
        values = values * plateau_window(grid, flat)
        meta["flat"] = flat
    elif window is not None:
        raise ValueError(f"unknown window {window!r}")
    return GridWavefunction(grid, values, meta)


def window_interior(grid: GridSpec, fraction: float = 0.5) -> np.ndarray:
    """Boolean mask of |q| < fraction * L / 2."""
    return np.abs(grid.q) < fraction * grid.extent / 2


# ---------------------------------------------------------------------------
# particular solutions

def _hamiltonian_expectations(states: np.ndarray, grid: GridSpec, mass: float, force: np.ndarray):
    amps = np.fft.fft(states, axis=1)
    norm2 = np.sum(np.abs(states) ** 2, axis=1) * grid.spacing
    kinetic = np.sum(grid.k**2 * np.abs(amps) ** 2, axis=1) * grid.spacing / grid.points
    position = np.sum(grid.q * np.abs(states) ** 2, axis=1) * grid.spacing
    return (kinetic / (2 * mass) + force * position) / norm2


@dataclass(frozen=True, eq=False)
class LRSolution:
    """Particular solution ``exp(-i phi_n(t)) V1 V2 |n>`` sampled on the trajectory times.

    States are regenerated from the transform track on demand rather than
    stored, so a solution costs O(K) memory.
    """

    n: int
    grid: GridSpec
    track: TransformTrack = field(repr=False)
    phase: np.ndarray = field(repr=False)
    integrand: np.ndarray = field(repr=False)
    eigenvalue: float
    gauge: str = "hermite"

    @property
    def times(self) -> np.ndarray:
        return self.track.times

    def eigenstate(self, k: int) -> GridWavefunction:
        return transformed_eigenstate(self.n, self.track.gaussian(k), self.grid, self.gauge)

    def state(self, k: int) -> GridWavefunction:
        chi = self.eigenstate(k)
        return chi.with_amplitudes(chi.amplitudes * np.exp(-1j * self.phase[k]))

    def state_at(self, t: float) -> GridWavefunction:
        return self.state(int(np.argmin(np.abs(self.times - t))))


def eigenstate_stack(n: int, track: TransformTrack, grid: GridSpec, gauge: str = "hermite",
                     indices: Sequence[int] | None = None) -> np.ndarray:
    idx = range(len(track)) if indices is None else indices
    return np.stack([transformed_eigenstates(n, track.gaussian(k), grid, gauge)[n] for k in idx])


def lr_phase(n: int, traj: CoeffTrajectory, track: TransformTrack, grid: GridSpec,
             gauge: str = "hermite", imag_tol: float = 1e-8, stencil: int = 7):
    """Cumulative phase phi_n(t) = int_0^t <chi|H - i d/dt'|chi> dt'.

    ``chi = V1 V2 |n>`` is sampled at every trajectory time; its time
    derivative comes from ``stencil``-point finite differences across the
    samples, kept inside the smooth pieces of a tabulated force. Returns
    ``(phi, integrand)``.
    """
    states = eigenstate_stack(n, track, grid, gauge)
    dstates = finite_difference(states, track.times, points=stencil, breaks=traj.force.breakpoints)
    f = traj.force_values()
    energy = _hamiltonian_expectations(states, grid, traj.mass, f)
    geometric = -1j * np.sum(np.conj(states) * dstates, axis=1) * grid.spacing
    integrand = energy + geometric
    bad = np.abs(integrand.imag) > imag_tol * (1.0 + np.abs(integrand.real))
    if np.any(bad):
        k = int(np.argmax(np.abs(integrand.imag)))
        raise NonRealIntegrand(
            f"phase integrand has imaginary part {integrand.imag[k]:.3g} at t = {track.times[k]:.6g}"
        )
    phi = cumulative_simpson(integrand.real, x=track.times, initial=0.0)
    return phi, integrand.real


def build_lr_solutions(traj: CoeffTrajectory, grid: GridSpec, n_max: int,
                       gauge: str = "hermite", track: TransformTrack | None = None) -> list[LRSolution]:
    """Particular solutions for n = 0..n_max of the quadratic invariant ``traj``."""
    track = track_transforms(traj) if track is None else track
    out = []
    for n in range(n_max + 1):
        phi, integrand = lr_phase(n, traj, track, grid, gauge)
        lam = (2 * n + 1) * track.sigma + float(track.kappa[0])
        out.append(LRSolution(n, grid, track, phi, integrand, lam, gauge))
    return out


def project_initial_state(psi0: GridWavefunction, solutions: Sequence[LRSolution]) -> np.ndarray:
    """Expansion coefficients c_n = <n, 0|psi0> over the given solutions."""
    return np.array([s.state(0).inner(psi0) for s in solutions])


def assemble_solution(coeffs: Sequence[complex], solutions: Sequence[LRSolution], t: float,
                      tol: float = 1e-8) -> GridWavefunction:
    """General solution ``sum_n c_n exp(-i phi_n(t)) V1 V2 |n>`` at sample time ``t``."""
    coeffs = np.asarray(coeffs, dtype=complex)
    if len(coeffs) != len(solutions):
        raise ValueError(f"{len(coeffs)} coefficients for {len(solutions)} solutions")
    weight = float(np.sum(np.abs(coeffs) ** 2))
    if abs(weight - 1.0) > tol:
        raise ValueError(f"sum |c_n|^2 = {weight:.12g}, expected 1")
    total = None
    for c, sol in zip(coeffs, solutions):
        term = sol.state_at(t) * c
        total = term if total is None else total + term
    return total


# ---------------------------------------------------------------------------
# residual diagnostics

def eigen_residual(state: GridWavefunction, coefficients: np.ndarray, eigenvalue: float) -> float:
    """||(I - lam) psi|| / ||lam psi|| for the invariant with the given six coefficients."""
    v = state.amplitudes
    r = apply_coefficients(coefficients, v, state.grid) - eigenvalue * v
    return float(np.linalg.norm(r) / (abs(eigenvalue) * np.linalg.norm(v)))


def schrodinger_residual(solution: LRSolution, k: int, mass: float, force) -> float:
    """||i d/dt psi - H psi|| / ||H psi|| at sample ``k``, with a 5-point time stencil."""
    times = solution.times
    idx = stencil_indices(times, k, 5, getattr(force, "breakpoints", ()))
    w = fd_weights(times[k], times[idx])
    states = np.stack([solution.state(int(j)).amplitudes for j in idx])
    dpsi = np.tensordot(w, states, axes=(0, 0))
    psi = states[k - idx[0]]
    ham = np.array([1.0 / (2.0 * mass), 0, 0, 0, float(force(times[k])), 0])
    hpsi = apply_coefficients(ham, psi, solution.grid)
    return float(np.linalg.norm(1j * dpsi - hpsi) / np.linalg.norm(hpsi))
