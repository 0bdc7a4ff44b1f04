"""Time-dependent coefficients of the linear and quadratic invariants.

For H = p^2/2m + f(t) q the invariant
I = D p^2 + E(pq+qp) + F q^2 + A p + B q + C obeys

    D' = -2E/m,  E' = -F/m,  F' = 0,
    A' = 2 D f - B/m,  B' = 2 E f,  C' = f A.

D, E, F have closed forms; B, A, C are cumulative integrals evaluated with
panelwise Gauss-Legendre quadrature on the sample grid.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np
from scipy.integrate import solve_ivp

from .algebra import QuadOp, lvn_residual_coefficients
from .errors import ConservationError, ForceDomainError, NonElliptic
from .force import ForceProfile

COLUMNS = ("D", "E", "F", "A", "B", "C")


@dataclass(frozen=True)
class InvariantConstants:
    """Values of D, E, F, A, B, C at t = 0."""

    D0: float = 1.0
    E0: float = 0.0
    F0: float = 1.0
    A0: float = 0.0
    B0: float = 0.0
    C0: float = 0.0

    def as_tuple(self) -> tuple:
        return (self.D0, self.E0, self.F0, self.A0, self.B0, self.C0)

    @property
    def determinant(self) -> float:
        return self.D0 * self.F0 - self.E0**2

    @classmethod
    def linear(cls, A0: float = 0.0, B0: float = 0.0, C0: float = 0.0) -> "InvariantConstants":
        return cls(0.0, 0.0, 0.0, A0, B0, C0)


def sample_times(T: float, samples: int = 2048) -> np.ndarray:
    return np.linspace(0.0, float(T), int(samples))


# ---------------------------------------------------------------------------
# numerical helpers

def fd_weights(x0: float, xs: np.ndarray, order: int = 1) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at ``x0`` (Fornberg)."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    c = np.zeros((n, order + 1))
    c1 = 1.0
    c4 = xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def stencil_indices(times: np.ndarray, k: int, points: int, breaks=()) -> np.ndarray:
    """Indices of a ``points``-wide stencil around sample ``k``.

    The stencil is centred where possible and never crosses a time in
    ``breaks`` (kinks of a tabulated force); a sample sitting exactly on a
    break uses the segment to its left, except at the first sample.
    """
    n = len(times)
    lo_edge, hi_edge = 0, n
    for b in np.asarray(breaks, dtype=float):
        j = int(np.searchsorted(times, b))
        if j >= n or j == 0 or abs(times[j] - b) > 1e-12 * (1 + abs(b)):
            continue  # only breaks that coincide with samples split the grid
        if j < k:
            lo_edge = max(lo_edge, j)
        elif j >= k and j > 0:
            hi_edge = min(hi_edge, j + 1)
    if hi_edge - lo_edge < points:
        lo_edge, hi_edge = 0, n
    half = points // 2
    lo = min(max(k - half, lo_edge), hi_edge - points)
    return np.arange(lo, lo + points)


def finite_difference(values: np.ndarray, times: np.ndarray, points: int = 7, breaks=()) -> np.ndarray:
    """First time derivative along axis 0 with ``points``-wide stencils.

    Interior samples use centered stencils; samples near the ends, or near
    a time in ``breaks`` that coincides with a sample, fall back to
    one-sided stencils of the same width.
    """
    values = np.asarray(values)
    times = np.asarray(times, dtype=float)
    k = len(times)
    if k < points:
        raise ValueError(f"need at least {points} samples for a {points}-point stencil")
    half = points // 2
    out = np.empty_like(values, dtype=np.result_type(values, float))
    h = np.diff(times)
    uniform = np.allclose(h, h[0], rtol=1e-9, atol=0.0)
    special = set(range(half)) | set(range(k - half, k))
    for b in np.asarray(breaks, dtype=float):
        j = int(np.searchsorted(times, b))
        if 0 < j < k and abs(times[j] - b) <= 1e-12 * (1 + abs(b)):
            special |= set(range(max(0, j - half), min(k, j + half + 1)))
    if uniform:
        offs = np.arange(-half, half + 1)
        w = fd_weights(0.0, offs * h[0])
        out[half:k - half] = sum(wi * values[half + o: k - half + o] for wi, o in zip(w, offs))
        edge = sorted(special)
    else:
        edge = range(k)
    for i in edge:
        idx = stencil_indices(times, i, points, breaks)
        w = fd_weights(times[i], times[idx])
        out[i] = np.tensordot(w, values[idx], axes=(0, 0))
    return out


_GL_ORDER = 10


class Antiderivative:
    """t -> int_{t0}^{t} g(s) ds by Gauss-Legendre on panels between ``edges``.

    Values at the edges are precomputed; evaluation at an arbitrary ``t`` adds
    a partial-panel rule, so nested antiderivatives stay spectrally accurate.
    """

    def __init__(self, integrand: Callable[[np.ndarray], np.ndarray], edges: np.ndarray,
                 order: int = _GL_ORDER):
        x, w = np.polynomial.legendre.leggauss(order)
        self._x = (x + 1.0) / 2.0
        self._w = w / 2.0
        self.integrand = integrand
        self.edges = np.asarray(edges, dtype=float)
        h = np.diff(self.edges)
        nodes = self.edges[:-1, None] + h[:, None] * self._x
        vals = np.asarray(integrand(nodes.ravel())).reshape(nodes.shape)
        panels = (vals @ self._w) * h
        self.values = np.concatenate([[0.0], np.cumsum(panels)])

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        idx = np.clip(np.searchsorted(self.edges, flat, side="right") - 1, 0, len(self.edges) - 2)
        left = self.edges[idx]
        h = flat - left
        nodes = left[:, None] + h[:, None] * self._x
        vals = np.asarray(self.integrand(nodes.ravel())).reshape(nodes.shape)
        out = self.values[idx] + (vals @ self._w) * h
        return out.reshape(t.shape)


def _panel_edges(times: np.ndarray, force: ForceProfile) -> tuple[np.ndarray, np.ndarray]:
    bp = force.breakpoints
    bp = bp[(bp > times[0]) & (bp < times[-1])]
    edges = np.union1d(times, bp)
    return edges, np.searchsorted(edges, times)


def _check_inputs(force: ForceProfile, mass: float, times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if not mass > 0 or not np.isfinite(mass):
        raise ValueError(f"mass must be positive, got {mass}")
    if times.ndim != 1 or len(times) < 2:
        raise ValueError("need a one-dimensional grid of at least two times")
    if times[0] != 0.0:
        raise ValueError(f"time grid must start at 0, starts at {times[0]}")
    if np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be strictly increasing")
    if not force.covers(times[0], times[-1]):
        lo, hi = force.span
        raise ForceDomainError(f"force table spans [{lo}, {hi}] but the run needs [0, {times[-1]}]")
    return times


# ---------------------------------------------------------------------------
# trajectories

@dataclass(frozen=True, eq=False)
class CoeffTrajectory:
    """Sampled invariant coefficients with the constants and drive that produced them."""

    mass: float
    times: np.ndarray
    D: np.ndarray
    E: np.ndarray
    F: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    constants: InvariantConstants
    force: ForceProfile = field(repr=False)
    kind: str = "quadratic"

    def __post_init__(self):
        for name in ("times",) + COLUMNS:
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def coefficients(self) -> np.ndarray:
        """(K, 6) array in basis order p^2, pq+qp, q^2, p, q, 1."""
        return np.stack([self.D, self.E, self.F, self.A, self.B, self.C], axis=1)

    def index_of(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * (1.0 + abs(t)):
            raise ValueError(f"t = {t} is not a sample time of this trajectory")
        return i

    def invariant(self, k: int) -> QuadOp:
        return QuadOp.from_vector(self.coefficients[k])

    def invariant_at(self, t: float) -> QuadOp:
        return self.invariant(self.index_of(t))

    def force_values(self) -> np.ndarray:
        return np.asarray(self.force(self.times), dtype=float)

    def hamiltonians(self) -> np.ndarray:
        h = np.zeros((len(self), 6))
        h[:, 0] = 1.0 / (2.0 * self.mass)
        h[:, 4] = self.force_values()
        return h

    def rates(self, method: str = "exact") -> np.ndarray:
        """Coefficient time derivatives, shape (K, 6).

        ``"exact"`` evaluates the closed-form derivatives of D, E, F and the
        integrands of the B, A, C quadratures; ``"fd"`` differentiates the
        samples with 7-point finite differences.
        """
        if method == "fd":
            return finite_difference(self.coefficients, self.times, breaks=self.force.breakpoints)
        if method != "exact":
            raise ValueError(f"unknown rate method {method!r}")
        f = self.force_values()
        m = self.mass
        return np.stack([
            -2.0 * self.E / m,
            -self.F / m,
            np.zeros_like(self.F),
            2.0 * self.D * f - self.B / m,
            2.0 * self.E * f,
            f * self.A,
        ], axis=1)

    def lvn_residuals(self, method: str = "exact") -> np.ndarray:
        """Per-sample coefficients of dI/dt + (1/i)[I, H], shape (K, 6)."""
        return lvn_residual_coefficients(
            self.coefficients.astype(complex), self.rates(method).astype(complex),
            self.hamiltonians().astype(complex),
        )

    def max_lvn_residual(self, method: str = "exact") -> float:
        return float(np.max(np.abs(self.lvn_residuals(method))))

    @property
    def determinant(self) -> np.ndarray:
        """D F - E^2 per sample."""
        return self.D * self.F - self.E**2

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("t",) + COLUMNS)
        for row in zip(self.times, *(getattr(self, c) for c in COLUMNS)):
            w.writerow([f"{v:.17g}" for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "mass": self.mass,
            "force": self.force.describe(),
            "constants": dict(zip(("D0", "E0", "F0", "A0", "B0", "C0"), self.constants.as_tuple())),
            "t": self.times.tolist(),
            **{c: getattr(self, c).tolist() for c in COLUMNS},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def with_coefficients(self, **columns) -> "CoeffTrajectory":
        return replace(self, **columns)


def read_trajectory_csv(path, force: ForceProfile, mass: float, kind: str = "quadratic") -> CoeffTrajectory:
    """Load a trajectory written by :meth:`CoeffTrajectory.to_csv`."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    cols = {c: np.atleast_1d(data[c]) for c in COLUMNS}
    consts = InvariantConstants(*(float(cols[c][0]) for c in COLUMNS))
    return CoeffTrajectory(mass, np.atleast_1d(data["t"]), constants=consts, force=force, kind=kind, **cols)


def solve_quadratic_coeffs(force: ForceProfile, mass: float,
                           constants: InvariantConstants = InvariantConstants(),
                           times: Iterable[float] | None = None) -> CoeffTrajectory:
    """Sample D..C of the quadratic invariant on ``times`` (default 2048 points on [0, 10])."""
    times = _check_inputs(force, mass, sample_times(10.0) if times is None else times)
    m = float(mass)
    D0, E0, F0, A0, B0, C0 = (float(v) for v in constants.as_tuple())

    def D(t):
        return D0 - 2.0 * E0 * t / m + F0 * t**2 / m**2

    def E(t):
        return E0 - F0 * t / m

    edges, at = _panel_edges(times, force)
    int_B = Antiderivative(lambda s: 2.0 * E(s) * force(s), edges)

    def B(t):
        return B0 + int_B(t)

    int_A = Antiderivative(lambda s: 2.0 * D(s) * force(s) - B(s) / m, edges)

    def A(t):
        return A0 + int_A(t)

    int_C = Antiderivative(lambda s: force(s) * A(s), edges)

    return CoeffTrajectory(
        mass=m, times=times,
        D=D(times), E=E(times), F=np.full_like(times, F0),
        A=A0 + int_A.values[at], B=B0 + int_B.values[at], C=C0 + int_C.values[at],
        constants=constants, force=force, kind="quadratic",
    )


def solve_linear_coeffs(force: ForceProfile, mass: float, A0: float = 0.0, B0: float = 0.0,
                        C0: float = 0.0, times: Iterable[float] | None = None) -> CoeffTrajectory:
    """Sample A, B, C of the linear invariant A p + B q + C (D = E = F = 0)."""
    times = _check_inputs(force, mass, sample_times(10.0) if times is None else times)
    m = float(mass)
    A0, B0, C0 = float(A0), float(B0), float(C0)

    def A(t):
        return A0 - B0 * t / m

    edges, at = _panel_edges(times, force)
    int_C = Antiderivative(lambda s: force(s) * A(s), edges)
    zeros = np.zeros_like(times)
    return CoeffTrajectory(
        mass=m, times=times, D=zeros, E=zeros, F=zeros,
        A=A(times), B=np.full_like(times, B0), C=C0 + int_C.values[at],
        constants=InvariantConstants.linear(A0, B0, C0), force=force, kind="linear",
    )


def casimir_drift(traj: CoeffTrajectory) -> float:
    """max_t |D F - E^2 - (D0 F0 - E0^2)| relative to max(1, |D0 F0 - E0^2|)."""
    det0 = traj.constants.determinant
    return float(np.max(np.abs(traj.determinant - det0)) / max(1.0, abs(det0)))


def casimir_floor(traj: CoeffTrajectory) -> float:
    """Round-off floor of :func:`casimir_drift`.

    D F - E^2 cancels terms of size D F; rounding D and E alone costs a few
    ulps of that size, however exact the solver is.
    """
    scale = np.max(np.abs(traj.D * traj.F) + traj.E**2)
    return float(4 * np.finfo(float).eps * scale / max(1.0, abs(traj.constants.determinant)))


def casimir_sigma(traj: CoeffTrajectory, rtol: float = 1e-12) -> float:
    """sqrt(D F - E^2), checked for conservation along the trajectory."""
    c = traj.constants
    det0 = c.determinant
    if not det0 > 0:
        raise NonElliptic(
            f"D0*F0 - E0^2 = {c.D0}*{c.F0} - {c.E0}^2 = {det0:.6g} <= 0; "
            "the quadratic form is not elliptic"
        )
    drift = casimir_drift(traj)
    if drift > rtol + casimir_floor(traj):
        raise ConservationError(f"D F - E^2 drifted by {drift:.3g} (tolerance {rtol:.1g})")
    return float(np.sqrt(det0))


def reference_solution(force: ForceProfile, mass: float, constants: InvariantConstants,
                       times, rtol: float = 1e-13, atol: float = 1e-13) -> np.ndarray:
    """Integrate all six auxiliary equations with adaptive DOP853; returns (K, 6).

    Independent of the closed forms and quadratures above, used as an oracle.
    """
    times = np.asarray(times, dtype=float)
    m = float(mass)

    def rhs(t, y):
        D, E, F, A, B, C = y
        f = float(force(t))
        return [-2 * E / m, -F / m, 0.0, 2 * D * f - B / m, 2 * E * f, f * A]

    # restart at table knots so the kinks in f do not degrade the step control
    bp = force.breakpoints
    stops = np.union1d([times[0], times[-1]], bp[(bp > times[0]) & (bp < times[-1])])
    out = np.empty((len(times), 6))
    y0 = list(constants.as_tuple())
    for lo, hi in zip(stops[:-1], stops[1:]):
        last = hi == stops[-1]
        mask = (times >= lo) & ((times <= hi) if last else (times < hi))
        sol = solve_ivp(rhs, (lo, hi), y0, method="DOP853", t_eval=times[mask],
                        rtol=rtol, atol=atol, dense_output=True)
        if not sol.success:
            raise RuntimeError(sol.message)
        out[mask] = sol.y.T
        y0 = sol.sol(hi)
    return out
