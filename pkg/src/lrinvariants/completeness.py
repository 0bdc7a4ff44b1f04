"""Is a quadratic invariant the square of a linear one?

A linear invariant ``I_l = A p + B q + C`` squares to the quadratic
invariant with ``D = c A^2``, ``E = c A B``, ``F = c B^2``, ``A' = 2c A C``,
``B' = 2c B C`` and ``C' = c C^2``. Such forms have ``D F - E^2 = 0``, so an
elliptic quadratic invariant is never a square; :func:`match_square`
certifies this directly and can also search for the best square by
multistart least squares.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import least_squares

from .algebra import QuadOp, apply_coefficients
from .auxiliary import CoeffTrajectory, InvariantConstants, solve_linear_coeffs
from .errors import DegenerateState, OptimizerFailure
from .grid import GridWavefunction
from .propagate import fidelity, split_step_evolve

IS_SQUARE = "IsSquare"
NOT_SQUARE = "NotSquare"


def square_linear(traj_l: CoeffTrajectory, c: float) -> CoeffTrajectory:
    """The quadratic trajectory of ``c * I_l^2``."""
    A, B, C = traj_l.A, traj_l.B, traj_l.C
    cols = dict(D=c * A**2, E=c * A * B, F=c * B**2, A=2 * c * A * C, B=2 * c * B * C, C=c * C**2)
    consts = InvariantConstants(*(float(cols[k][0]) for k in ("D", "E", "F", "A", "B", "C")))
    return CoeffTrajectory(traj_l.mass, traj_l.times, constants=consts, force=traj_l.force,
                           kind="quadratic", **cols)


@dataclass(frozen=True)
class SquareMatchReport:
    """Outcome of :func:`match_square`.

    ``residual`` is the max-norm of the six coefficient equations over all
    samples. When ``method == "rank-certificate"`` the optimizer was skipped
    and ``residual`` is the certified lower bound ``certificate``.
    """

    c: float
    A0: float
    B0: float
    C0: float
    residual: float
    verdict: str
    method: str
    certificate: float
    tolerance: float
    converged_starts: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def rank_certificate(traj_q: CoeffTrajectory) -> float:
    """Lower bound on the max-norm distance of ``(D, E, F)`` from every rank-one form.

    For an elliptic sample with ``D, F > 0`` no rank-one ``c (A^2, A B, B^2)``
    lies within ``(D F - E^2) / (D + F + 2|E|)`` in max-norm; the bound is
    zero for samples that are not elliptic. Returns the maximum over samples.
    """
    D, E, F = traj_q.D, traj_q.E, traj_q.F
    det = D * F - E**2
    ok = (det > 0) & (D > 0)
    bound = np.where(ok, det / np.where(ok, D + F + 2 * np.abs(E), 1.0), 0.0)
    return float(np.max(bound))


def _linear_basis(traj_q: CoeffTrajectory) -> np.ndarray:
    # (3, K, 3): A, B, C columns of the linear invariants with unit constants
    basis = []
    for consts in np.eye(3):
        tl = solve_linear_coeffs(traj_q.force, traj_q.mass, *consts, times=traj_q.times)
        basis.append(np.stack([tl.A, tl.B, tl.C], axis=1))
    return np.array(basis)


def _square_columns(J: np.ndarray) -> np.ndarray:
    A, B, C = J[:, 0], J[:, 1], J[:, 2]
    return np.stack([A**2, A * B, B**2, 2 * A * C, 2 * B * C, C**2], axis=1)


def _normalize(params: np.ndarray, sign: float) -> tuple[float, float, float, float]:
    # fix the scale freedom (c, k) -> (c / s^2, s k) by A0^2 + B0^2 = 1, B0 > 0
    a, b, cc = params
    n = np.hypot(a, b)
    if n < 1e-300:
        return sign * cc**2, 0.0, 0.0, 1.0
    flip = -1.0 if (b < 0 or (b == 0 and a < 0)) else 1.0
    return sign * n**2, flip * a / n, flip * b / n, flip * cc / n


def match_square(traj_q: CoeffTrajectory, force=None, mass: float | None = None,
                 use_rank_shortcut: bool = True, starts: int = 16, seed: int = 0,
                 box: float = 3.0, tol: float = 1e-8, max_nfev: int = 200) -> SquareMatchReport:
    """Best fit of ``traj_q`` by ``c * I_l^2`` over the constants of I_l.

    Parameters
    ----------
    traj_q : CoeffTrajectory
        Quadratic invariant to test; its force and mass define the linear
        invariants searched over unless ``force``/``mass`` are given.
    use_rank_shortcut : bool
        Return immediately with the rank certificate when it exceeds ``tol``.
    starts : int
        Deterministic starts per sign of c, drawn uniformly from
        ``[-box, box]^3`` with ``numpy.random.default_rng(seed)``.
    max_nfev : int
        Evaluation cap per start. Starts that hit it still compete for the
        best fit, but at least one start must converge.

    Notes
    -----
    The fit writes ``c I_l^2 = s J^2`` with ``s = sign(c)`` and
    ``J = sqrt|c| I_l``, which is linear in its constants, and minimizes the
    sum of squares of all six equations at every sample.
    """
    if force is not None or mass is not None:
        from dataclasses import replace

        traj_q = replace(traj_q, force=force or traj_q.force, mass=mass or traj_q.mass)
    cert = rank_certificate(traj_q)
    if use_rank_shortcut and cert > tol:
        return SquareMatchReport(float("nan"), float("nan"), float("nan"), float("nan"),
                                 cert, NOT_SQUARE, "rank-certificate", cert, tol)

    target = traj_q.coefficients
    basis = _linear_basis(traj_q)
    scale = max(1.0, float(np.max(np.abs(target))))

    def residual(params, sign):
        J = np.tensordot(params, basis, axes=(0, 0))
        return ((target - sign * _square_columns(J)) / scale).ravel()

    def jacobian(params, sign):
        J = np.tensordot(params, basis, axes=(0, 0))
        A, B, C = J[:, 0], J[:, 1], J[:, 2]
        cols = []
        for u in basis:
            dA, dB, dC = u[:, 0], u[:, 1], u[:, 2]
            d = np.stack([2 * A * dA, dA * B + A * dB, 2 * B * dB,
                          2 * (dA * C + A * dC), 2 * (dB * C + B * dC), 2 * C * dC], axis=1)
            cols.append((-sign * d / scale).ravel())
        return np.stack(cols, axis=1)

    rng = np.random.default_rng(seed)
    best = None
    converged = 0
    for sign in (1.0, -1.0):
        for x0 in rng.uniform(-box, box, size=(starts, 3)):
            sol = least_squares(residual, x0, jac=jacobian, args=(sign,), method="lm",
                                xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
            if not np.all(np.isfinite(sol.x)):
                continue
            converged += sol.status > 0
            err = float(np.max(np.abs(residual(sol.x, sign)))) * scale
            if best is None or err < best[0]:
                best = (err, sol.x, sign)
    if best is None or converged == 0:
        raise OptimizerFailure(f"none of the {2 * starts} starts converged")
    err, params, sign = best
    c, A0, B0, C0 = _normalize(params, sign)
    verdict = IS_SQUARE if err < tol else NOT_SQUARE
    return SquareMatchReport(float(c), float(A0), float(B0), float(C0), err, verdict,
                             "optimizer", cert, tol, converged)


def verify_invariant_maps_solutions(traj_l: CoeffTrajectory, psi0: GridWavefunction, T: float,
                                    dt: float = 1e-3, degenerate_tol: float = 1e-8) -> float:
    """Fidelity between ``I_l(T) psi(T)`` and the propagation of ``I_l(0) psi(0)``.

    Both sides are normalized; the propagation uses the force and mass of
    ``traj_l``. Equal to one when the invariant maps solutions to solutions.
    """
    grid = psi0.grid
    k0 = traj_l.index_of(0.0)
    kT = traj_l.index_of(T)
    mapped0 = apply_coefficients(traj_l.coefficients[k0], psi0.amplitudes, grid)
    size = np.linalg.norm(mapped0) / np.linalg.norm(psi0.amplitudes)
    if size < degenerate_tol:
        raise DegenerateState(f"||I_l(0) psi0|| / ||psi0|| = {size:.2e}")
    phi0 = GridWavefunction(grid, mapped0).normalized()
    psi_T = split_step_evolve(psi0, traj_l.force, traj_l.mass, dt, T).final
    phi_T = split_step_evolve(phi0, traj_l.force, traj_l.mass, dt, T).final
    mapped_T = psi_T.with_amplitudes(apply_coefficients(traj_l.coefficients[kT], psi_T.amplitudes, grid))
    return fidelity(mapped_T, phi_T)


def invariant_operator(traj: CoeffTrajectory, k: int) -> QuadOp:
    return traj.invariant(k)
