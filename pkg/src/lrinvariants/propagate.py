"""Direct time stepping of i d/dt psi = [p^2/2m + f(t) q] psi on a periodic grid.

Two independent discretizations are provided so that a disagreement with
the analytic construction can be attributed: Strang split-step Fourier
(spectral in space, unitary) and Crank-Nicolson with a three-point
Laplacian (Dirichlet walls).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .algebra import QuadOp, apply_quadop
from .errors import ResolutionWarning
from .force import ForceProfile
from .grid import GridSpec, GridWavefunction, check_same_grid, edge_mass, spectral_tail_mass


@dataclass(frozen=True, eq=False)
class PropagationRun:
    """Snapshots of one propagation, shape (len(times), N)."""

    grid: GridSpec
    dt: float
    T: float
    method: str
    times: np.ndarray
    snapshots: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("times", "snapshots"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def index_of(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * (1 + abs(t)):
            raise ValueError(f"no snapshot at t = {t}")
        return i

    def state(self, i: int) -> GridWavefunction:
        return GridWavefunction(self.grid, self.snapshots[i], {"method": self.method, "t": float(self.times[i])})

    def state_at(self, t: float) -> GridWavefunction:
        return self.state(self.index_of(t))

    @property
    def final(self) -> GridWavefunction:
        return self.state(len(self.times) - 1)

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.snapshots) ** 2, axis=1) * self.grid.spacing)

    def norm_drift(self) -> float:
        n = self.norms()
        return float(np.max(np.abs(n - n[0])))

    def metadata(self) -> dict:
        return {
            "method": self.method, "dt": self.dt, "T": self.T,
            "grid": self.grid.to_dict(), "snapshots": len(self.times),
            "norm_drift": self.norm_drift(),
        }


def _step_count(dt: float, span: float) -> int:
    n = int(round(span / dt))
    if n < 0 or abs(n * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(f"dt = {dt} does not divide the interval {span}")
    return n


def _snapshot_steps(dt: float, T: float, snapshot_times) -> tuple[np.ndarray, np.ndarray]:
    total = _step_count(dt, T)
    if snapshot_times is None:
        snapshot_times = [0.0, T]
    ts = np.asarray(snapshot_times, dtype=float)
    if np.any(np.diff(ts) < 0) or ts[0] < 0 or ts[-1] > T + 1e-12:
        raise ValueError("snapshot times must be sorted and inside [0, T]")
    steps = np.array([_step_count(dt, t) for t in ts])
    return ts, np.minimum(steps, total)


def split_step_evolve(psi0: GridWavefunction, force: ForceProfile, mass: float, dt: float, T: float,
                      snapshot_times=None, warn_tol: float = 1e-8) -> PropagationRun:
    """Strang splitting ``exp(-i V dt/2) exp(-i K dt) exp(-i V dt/2)``.

    ``V = f(t + dt/2) q`` is frozen at the step midpoint, which keeps the
    scheme second order for time-dependent f. Snapshot times must be
    integer multiples of ``dt``. Emits :class:`ResolutionWarning` when a
    snapshot approaches the box edge or the Nyquist band.
    """
    grid = psi0.grid
    ts, steps = _snapshot_steps(dt, T, snapshot_times)
    kinetic = np.exp(-0.5j * dt * grid.k**2 / mass)
    q = grid.q
    psi = np.array(psi0.amplitudes)
    out = np.empty((len(ts), grid.points), dtype=complex)
    done = 0
    warned = False
    for j, target in enumerate(steps):
        while done < target:
            f_mid = float(force((done + 0.5) * dt))
            half = np.exp(-0.5j * dt * f_mid * q)
            psi = half * np.fft.ifft(kinetic * np.fft.fft(half * psi))
            done += 1
        out[j] = psi
        if not warned and (spectral_tail_mass(psi) > warn_tol or edge_mass(psi) > warn_tol):
            warnings.warn(f"state near grid resolution limit at t = {ts[j]:.6g}", ResolutionWarning, stacklevel=2)
            warned = True
    return PropagationRun(grid, dt, T, "split-step", ts, out)


def crank_nicolson_evolve(psi0: GridWavefunction, force: ForceProfile, mass: float, dt: float, T: float,
                          snapshot_times=None) -> PropagationRun:
    """Crank-Nicolson with the three-point Laplacian and H at the step midpoint.

    Second order in dt and in the grid spacing; the first and last grid
    points act as hard walls.
    """
    grid = psi0.grid
    ts, steps = _snapshot_steps(dt, T, snapshot_times)
    n = grid.points
    h = grid.spacing
    q = grid.q
    off = -1.0 / (2 * mass * h**2)
    diag0 = 1.0 / (mass * h**2)
    psi = np.array(psi0.amplitudes)
    out = np.empty((len(ts), n), dtype=complex)
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = 0.5j * dt * off
    ab[2, :-1] = 0.5j * dt * off
    done = 0
    for j, target in enumerate(steps):
        while done < target:
            diag = diag0 + float(force((done + 0.5) * dt)) * q
            ab[1] = 1.0 + 0.5j * dt * diag
            rhs = (1.0 - 0.5j * dt * diag) * psi
            rhs[1:] -= 0.5j * dt * off * psi[:-1]
            rhs[:-1] -= 0.5j * dt * off * psi[1:]
            psi = solve_banded((1, 1), ab, rhs)
            done += 1
        out[j] = psi
    return PropagationRun(grid, dt, T, "crank-nicolson", ts, out)


def expectation(psi: GridWavefunction, op: QuadOp) -> complex:
    """<psi|op|psi> / <psi|psi>."""
    return psi.inner(apply_quadop(op, psi)) / psi.inner(psi).real


def fidelity(psi1: GridWavefunction, psi2: GridWavefunction) -> float:
    """|<psi1|psi2>| after normalizing both states."""
    check_same_grid(psi1, psi2)
    return float(min(1.0, abs(psi1.inner(psi2)) / (psi1.norm() * psi2.norm())))


def gaussian_packet(grid: GridSpec, q0: float = 0.0, p0: float = 0.0, width: float = 1.0) -> GridWavefunction:
    """(pi w^2)^{-1/4} exp(-(q - q0)^2 / 2w^2 + i p0 (q - q0))."""
    q = grid.q
    amp = (np.pi * width**2) ** -0.25 * np.exp(-((q - q0) ** 2) / (2 * width**2) + 1j * p0 * (q - q0))
    return GridWavefunction(grid, amp, {"state": "gaussian", "q0": q0, "p0": p0, "width": width})


def free_gaussian(grid: GridSpec, t: float, mass: float = 1.0, q0: float = 0.0, p0: float = 0.0,
                  width: float = 1.0) -> GridWavefunction:
    """Closed-form free evolution of :func:`gaussian_packet` to time ``t``."""
    q = grid.q
    spread = 1.0 + 1j * t / (mass * width**2)
    centre = q0 + p0 * t / mass
    amp = ((np.pi * width**2) ** -0.25 / np.sqrt(spread)
           * np.exp(-((q - centre) ** 2) / (2 * width**2 * spread)
                    + 1j * p0 * (q - q0) - 0.5j * p0**2 * t / mass))
    return GridWavefunction(grid, amp, {"state": "free-gaussian", "t": t})


def observed_order(dts, errors) -> float:
    """Least-squares slope of log(error) against log(dt)."""
    return float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
