"""Displacement and squeeze transforms that reduce the quadratic invariant.

Conventions (hbar = 1, phase-space vector z = (q, p)):

* ``V1 = exp(i(y q + x p))`` shifts ``V1^+ q V1 = q - x`` and ``V1^+ p V1 = p + y``.
* ``V2 = exp(i(a p^2 + r q^2))`` acts as ``V2^+ z V2 = S z`` with
  ``S = expm([[0, -2a], [2r, 0]])``.
* The form ``D p^2 + E(pq+qp) + F q^2`` is ``z^T G z`` with ``G = [[F, E], [E, D]]``;
  conjugation by V2 maps ``G -> S^T G S``.

The reduction sends ``G`` to ``sigma * identity`` and the full quadratic
invariant to ``sigma (p^2 + q^2) + kappa``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .auxiliary import CoeffTrajectory
from .errors import DegenerateForm, NoConvergence, NonElliptic


# ---------------------------------------------------------------------------
# entire functions of X = (angle)^2, valid for either sign of X

def cosh_sqrt(X):
    """cosh(sqrt(X)), continued to cos(sqrt(-X)) for X < 0."""
    X = np.asarray(X, dtype=float)
    w = np.sqrt(np.abs(X))
    return np.where(X >= 0, np.cosh(w), np.cos(w))


def sinhc_sqrt(X):
    """sinh(sqrt(X)) / sqrt(X), equal to 1 at X = 0."""
    X = np.asarray(X, dtype=float)
    w = np.sqrt(np.abs(X))
    small = w < 1e-4
    ws = np.where(small, 1.0, w)
    big = np.where(X >= 0, np.sinh(ws) / ws, np.sin(ws) / ws)
    return np.where(small, 1.0 + X / 6.0 + X**2 / 120.0, big)


def coshm1c_sqrt(X):
    """(cosh(sqrt(X)) - 1) / X, equal to 1/2 at X = 0."""
    X = np.asarray(X, dtype=float)
    w = np.sqrt(np.abs(X))
    small = w < 1e-3
    ws = np.where(small, 1.0, w)
    # 2 sinh^2(w/2) / w^2 avoids cancellation in cosh(w) - 1
    big = np.where(X >= 0, 2.0 * np.sinh(ws / 2) ** 2, 2.0 * np.sin(ws / 2) ** 2) / ws**2
    return np.where(small, 0.5 + X / 24.0 + X**2 / 720.0, big)


# ---------------------------------------------------------------------------
# parameter records

@dataclass(frozen=True)
class DisplacementParams:
    """V1 parameters: eta = i*y, beta = i*x, and the scalar remainder kappa."""

    y: float = 0.0
    x: float = 0.0
    kappa: float = 0.0

    @property
    def eta(self) -> complex:
        return 1j * self.y

    @property
    def beta(self) -> complex:
        return 1j * self.x

    @property
    def shift(self) -> np.ndarray:
        """Heisenberg displacement d in ``V1^+ z V1 = z + d``."""
        return np.array([-self.x, self.y])


@dataclass(frozen=True)
class SqueezeParams:
    """V2 parameters: alpha = i*a, rho = i*r, and the reduced scale sigma."""

    a: float = 0.0
    r: float = 0.0
    sigma: float = 1.0

    @property
    def alpha(self) -> complex:
        return 1j * self.a

    @property
    def rho(self) -> complex:
        return 1j * self.r

    @property
    def generator(self) -> np.ndarray:
        return np.array([[0.0, -2.0 * self.a], [2.0 * self.r, 0.0]])

    @property
    def matrix(self) -> np.ndarray:
        return squeeze_matrix(self.a, self.r)


@dataclass(frozen=True)
class PaperParameterization:
    """The (u, v, theta, g, h, zeta) substitution for the squeeze.

    ``alpha = u theta / 4``, ``rho = v theta / 4``, ``F = h cosh(sqrt(uv) theta)``
    and ``D = g cosh(sqrt(uv) theta)``. The gauge is fixed by ``u = 1``;
    ``branch`` records which sign of ``zeta`` the principal square root
    ``sqrt(v)`` selected, or ``"shear"`` when ``v = 0`` and ``zeta`` is infinite.
    """

    u: complex
    v: complex
    theta: complex
    g: complex
    h: complex
    zeta: complex
    sigma: float
    branch: str
    residual: float

    @property
    def alpha(self) -> complex:
        return self.u * self.theta / 4

    @property
    def rho(self) -> complex:
        return self.v * self.theta / 4

    def squeeze(self) -> SqueezeParams:
        return SqueezeParams(float(self.alpha.imag), float(self.rho.imag), self.sigma)


@dataclass(frozen=True, eq=False)
class SymplecticGaussian:
    """Heisenberg action ``U^+ z U = S z + d`` of a Gaussian unitary, plus a global phase.

    The unitary is ``exp(i phase) * V1(d) * Mp(S)`` where ``Mp(S)`` is the
    metaplectic operator reached from the identity through the chart used by
    :func:`~lrinvariants.wavefunctions.apply_gaussian_unitary`.
    """

    S: np.ndarray
    d: np.ndarray = field(default_factory=lambda: np.zeros(2))
    phase: float = 0.0

    def __post_init__(self):
        S = np.array(self.S, dtype=float).reshape(2, 2)
        d = np.array(self.d, dtype=float).reshape(2)
        S.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "phase", float(self.phase))

    @classmethod
    def identity(cls) -> "SymplecticGaussian":
        return cls(np.eye(2))

    @classmethod
    def displacement(cls, q_shift: float, p_shift: float) -> "SymplecticGaussian":
        """The unitary moving a state centred at (q0, p0) to (q0 + q_shift, p0 + p_shift)."""
        return cls(np.eye(2), (q_shift, p_shift))

    @classmethod
    def scaling(cls, s: float) -> "SymplecticGaussian":
        """psi(q) -> s^{-1/2} psi(q / s), which widens a state by ``s``."""
        return cls(np.diag([s, 1.0 / s]))

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.S))

    @property
    def x(self) -> float:
        return float(-self.d[0])

    @property
    def y(self) -> float:
        return float(self.d[1])

    def to_dict(self) -> dict:
        return {"S": self.S.tolist(), "d": self.d.tolist(), "phase": self.phase}


# ---------------------------------------------------------------------------
# displacement

def displacement_from_coefficients(D, E, F, A, B, C, tol: float = 1e-12):
    """Vectorised elimination of the p and q terms; returns (y, x, kappa) arrays."""
    D, E, F, A, B, C = (np.asarray(v, dtype=float) for v in (D, E, F, A, B, C))
    det = D * F - E**2
    scale = np.maximum(1.0, np.maximum(np.abs(D * F), E**2))
    if np.any(np.abs(det) <= tol * scale):
        raise DegenerateForm(f"E^2 - D F = {-np.min(np.abs(det)):.3g} is numerically zero")
    y = (E * B - F * A) / (2.0 * det)
    x = (D * B - E * A) / (2.0 * det)
    kappa = C + A * y - B * x + D * y**2 - 2.0 * E * x * y + F * x**2
    return y, x, kappa


def eliminate_linear_part(traj: CoeffTrajectory, t: float) -> DisplacementParams:
    """Displacement that removes the linear terms of the invariant at time ``t``."""
    k = traj.index_of(t)
    y, x, kappa = displacement_from_coefficients(
        traj.D[k], traj.E[k], traj.F[k], traj.A[k], traj.B[k], traj.C[k]
    )
    return DisplacementParams(float(y), float(x), float(kappa))


# ---------------------------------------------------------------------------
# squeeze

def squeeze_matrix(a, r) -> np.ndarray:
    """expm([[0, -2a], [2r, 0]]), vectorised over a and r (shape (..., 2, 2))."""
    a = np.asarray(a, dtype=float)
    r = np.asarray(r, dtype=float)
    mu = -4.0 * a * r  # M^2 = mu * identity
    c = cosh_sqrt(mu)
    s = sinhc_sqrt(mu)
    return np.stack([np.stack([c, -2.0 * a * s], -1), np.stack([2.0 * r * s, c], -1)], -2)


def _check_elliptic(D, E, F):
    D, E, F = (np.asarray(v, dtype=float) for v in (D, E, F))
    det = D * F - E**2
    if np.any(~(det > 0)) or np.any(~(D > 0)):
        i = int(np.argmin(det)) if np.ndim(det) else 0
        Dv, Ev, Fv = (np.ravel(v)[i] if np.ndim(v) else v for v in (D, E, F))
        raise NonElliptic(
            f"D F - E^2 = {Dv:.6g}*{Fv:.6g} - {Ev:.6g}^2 = {Dv * Fv - Ev**2:.6g}; "
            "need D > 0 and D F - E^2 > 0"
        )
    return np.sqrt(det)


def diagonalizing_symplectic(D, E, F):
    """Symplectic S with ``S^T G S = sigma I`` and equal diagonal entries.

    Writes S = P R with P = sqrt(sigma) G^{-1/2} and a rotation R picked so
    that S is the exponential of a zero-diagonal generator, choosing the
    root with non-negative trace (the smaller rotation). Vectorised.
    Returns ``(S, sigma)``.
    """
    D, E, F = (np.asarray(v, dtype=float) for v in (D, E, F))
    sig = _check_elliptic(D, E, F)
    tau = np.sqrt(F + D + 2.0 * sig)
    norm = np.sqrt(sig) * tau
    # P in (q, p) ordering: sqrt(sigma) * (G^{-1})^{1/2}
    P11 = (D + sig) / norm
    P12 = -E / norm
    P22 = (F + sig) / norm
    n = np.hypot(2.0 * E, D - F)
    balanced = n == 0
    sign = np.where(E < 0, -1.0, 1.0)
    nn = np.where(balanced, 1.0, n)
    cphi = np.where(balanced, 1.0, sign * 2.0 * E / nn)
    sphi = np.where(balanced, 0.0, sign * (D - F) / nn)
    S11 = P11 * cphi + P12 * sphi
    S12 = -P11 * sphi + P12 * cphi
    S21 = P12 * cphi + P22 * sphi
    S22 = -P12 * sphi + P22 * cphi
    S = np.stack([np.stack([S11, S12], -1), np.stack([S21, S22], -1)], -2)
    return S, sig


def generator_from_symplectic(S):
    """Invert ``S = expm([[0, -2a], [2r, 0]])`` for (a, r); S must have S11 = S22."""
    S = np.asarray(S, dtype=float)
    S11, S12, S21 = S[..., 0, 0], S[..., 0, 1], S[..., 1, 0]
    prod = S12 * S21  # = S11^2 - 1 because det S = 1
    root = np.sqrt(np.abs(prod))
    w = np.where(prod < 0, np.arctan2(root, S11), np.arcsinh(root))
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(root < 1e-14, 1.0, w / np.where(root < 1e-14, 1.0, root))
    return -S12 * g / 2.0, S21 * g / 2.0


def diagonalize_quadratic(D: float, E: float, F: float) -> SqueezeParams:
    """Squeeze V2 taking ``D p^2 + E(pq+qp) + F q^2`` to ``sigma (p^2 + q^2)``.

    Parameters
    ----------
    D, E, F : float
        Coefficients of an elliptic form (``D > 0``, ``D F > E^2``).

    Returns
    -------
    SqueezeParams
        ``alpha = i a``, ``rho = i r`` and ``sigma = sqrt(D F - E^2)``.
    """
    S, sig = diagonalizing_symplectic(D, E, F)
    a, r = generator_from_symplectic(S)
    return SqueezeParams(float(a), float(r), float(sig))


def squeezed_form(D, E, F, a, r):
    """Coefficients (D', E', F') of ``V2^+ (D p^2 + E(pq+qp) + F q^2) V2``.

    Closed-form expansion in ``X = 16 rho alpha = -16 a r`` using the entire
    functions sinh(sqrt X)/sqrt X and (cosh(sqrt X) - 1)/X, so no branch of the
    square root is ever chosen.
    """
    X = -16.0 * np.asarray(a) * np.asarray(r)
    sh = sinhc_sqrt(X)
    chm = coshm1c_sqrt(X)
    ch = cosh_sqrt(X)
    cross = F * a - D * r
    Dn = D - 4.0 * E * a * sh + 8.0 * a * cross * chm
    En = -2.0 * cross * sh + E * ch
    Fn = F + 4.0 * E * r * sh - 8.0 * r * cross * chm
    return Dn, En, Fn


def _relation_residuals(params, D, E, F, sig):
    a, r = params
    X = -16.0 * a * r
    ch = cosh_sqrt(X)
    cross = F * a - D * r
    # E = zeta sinh(.), with zeta eliminated through the second relation
    e1 = 2.0 * cross * sinhc_sqrt(X) - E * ch
    # D' = F' = sigma after substituting the parameterization
    e2 = (D - sig) * ch - 8.0 * a * cross * coshm1c_sqrt(X)
    e3 = (F - sig) * ch + 8.0 * r * cross * coshm1c_sqrt(X)
    return np.array([e1, e2, e3]) / sig


_STARTS = np.array([-1.2, -0.5, -0.15, 0.15, 0.5, 1.2])


def solve_squeeze_paper(D: float, E: float, F: float, tol: float = 1e-11) -> PaperParameterization:
    """Root-find the substituted squeeze equations with a deterministic multistart.

    The unknowns are the real parts a = theta/(4i) and r = v theta/(4i) in the
    gauge u = 1. Every converged start is collected and the root with the
    smallest rotation angle ``16 |a r|`` is returned.
    """
    D, E, F = float(D), float(E), float(F)
    sig = float(_check_elliptic(D, E, F))
    if E == 0.0 and D == F:
        return PaperParameterization(1.0, 0.0, 0.0, D, F, 0.0, sig, "identity", 0.0)
    roots = []
    for a0 in _STARTS:
        for r0 in _STARTS:
            sol = least_squares(_relation_residuals, (a0, r0), args=(D, E, F, sig),
                                method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
            res = float(np.max(np.abs(sol.fun)))
            ch = float(cosh_sqrt(-16.0 * sol.x[0] * sol.x[1]))
            if res < tol and abs(ch) > 1e-8 and abs(sol.x[0]) > 1e-12:
                roots.append((abs(sol.x[0] * sol.x[1]), res, sol.x))
    if not roots:
        raise NoConvergence(f"no start converged for D={D}, E={E}, F={F}")
    roots.sort(key=lambda item: (round(item[0], 10), item[1]))
    _, res, (a, r) = roots[0]
    theta = 4j * a
    v = r / a
    ch = float(cosh_sqrt(-16.0 * a * r))
    g, h = D / ch, F / ch
    if v == 0.0:
        # pure shear: sqrt(uv) = 0 and zeta diverges while zeta*sinh stays finite
        return PaperParameterization(1.0, 0.0, theta, g, h, complex(np.inf), sig, "shear", res)
    zeta = -1j * (h - g * v) / (2.0 * np.sqrt(complex(v)))
    branch = "imaginary-zeta" if v > 0 else "real-zeta"
    return PaperParameterization(1.0, v, theta, g, h, complex(zeta), sig, branch, res)


def paper_relations(p: PaperParameterization, D: float, E: float, F: float) -> np.ndarray:
    """Residuals of every relation the parameterization is meant to satisfy.

    Products such as ``zeta sinh(sqrt(uv) theta)`` are evaluated through the
    entire functions of ``uv theta^2``, so the shear limit ``v = 0`` is covered.
    """
    X = float((p.u * p.v * p.theta**2).real)
    k = p.h * p.u - p.g * p.v
    ch = cosh_sqrt(X)
    half_cm1 = p.theta**2 * coshm1c_sqrt(X) / 2.0
    rel = [
        p.h * ch - F,
        p.g * ch - D,
        -0.5j * k * p.theta * sinhc_sqrt(X) - E,
        D + k * p.u * half_cm1 - p.sigma,
        F - k * p.v * half_cm1 - p.sigma,
    ]
    if p.v != 0:
        rel.append(1j * k / (2.0 * np.sqrt(complex(p.u * p.v))) + p.zeta)
    return np.abs(np.array(rel, dtype=complex))


# ---------------------------------------------------------------------------
# composition and tracks

def compose_symplectic(disp: DisplacementParams, sq: SqueezeParams, phase: float = 0.0) -> SymplecticGaussian:
    """Heisenberg action of ``V1 V2``: ``(V1 V2)^+ z (V1 V2) = S z + d``."""
    return SymplecticGaussian(sq.matrix, disp.shift, phase)


@dataclass(frozen=True, eq=False)
class TransformTrack:
    """Per-sample V1, V2 parameters along a quadratic-invariant trajectory."""

    times: np.ndarray
    y: np.ndarray
    x: np.ndarray
    kappa: np.ndarray
    a: np.ndarray
    r: np.ndarray
    sigma: float
    S: np.ndarray
    D: np.ndarray
    E: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def displacement(self, k: int) -> DisplacementParams:
        return DisplacementParams(float(self.y[k]), float(self.x[k]), float(self.kappa[k]))

    def squeeze(self, k: int) -> SqueezeParams:
        return SqueezeParams(float(self.a[k]), float(self.r[k]), self.sigma)

    def gaussian(self, k: int) -> SymplecticGaussian:
        return SymplecticGaussian(self.S[k], (-self.x[k], self.y[k]))

    def kappa_drift(self) -> float:
        return float(np.max(np.abs(self.kappa - self.kappa[0])))

    def records(self) -> list[dict]:
        return [
            {"t": float(t), "eta_im": float(y), "beta_im": float(x), "kappa": float(kp),
             "alpha_im": float(a), "rho_im": float(r), "sigma": self.sigma}
            for t, y, x, kp, a, r in zip(self.times, self.y, self.x, self.kappa, self.a, self.r)
        ]

    def to_json(self) -> str:
        return json.dumps(self.records(), indent=1)


def track_transforms(traj: CoeffTrajectory) -> TransformTrack:
    """Displacement and squeeze at every sample of ``traj``."""
    y, x, kappa = displacement_from_coefficients(traj.D, traj.E, traj.F, traj.A, traj.B, traj.C)
    S, sig = diagonalizing_symplectic(traj.D, traj.E, traj.F)
    a, r = generator_from_symplectic(S)
    return TransformTrack(traj.times, y, x, kappa, a, r, float(np.mean(sig)), S, traj.D, traj.E)
