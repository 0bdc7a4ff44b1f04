"""Uniform periodic position grids and wavefunctions sampled on them."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping

import numpy as np

from .errors import GridMismatch


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid of ``points`` samples spanning ``[-extent/2, extent/2)``.

    The momentum lattice is the discrete Fourier dual in ``numpy.fft`` order.
    """

    extent: float = 40.0
    points: int = 1024

    def __post_init__(self):
        n = int(self.points)
        if n < 64 or n & (n - 1):
            raise ValueError(f"grid point count must be a power of two >= 64, got {self.points}")
        if not np.isfinite(self.extent) or self.extent <= 0:
            raise ValueError(f"grid extent must be positive, got {self.extent}")
        object.__setattr__(self, "points", n)
        object.__setattr__(self, "extent", float(self.extent))

    @property
    def spacing(self) -> float:
        return self.extent / self.points

    @cached_property
    def q(self) -> np.ndarray:
        q = (np.arange(self.points) - self.points // 2) * self.spacing
        q.setflags(write=False)
        return q

    @cached_property
    def k(self) -> np.ndarray:
        k = 2 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)
        k.setflags(write=False)
        return k

    @property
    def k_nyquist(self) -> float:
        return np.pi / self.spacing

    def to_dict(self) -> dict:
        return {"extent": self.extent, "points": self.points}


@dataclass(frozen=True, eq=False)
class GridWavefunction:
    """Complex amplitudes on a :class:`GridSpec`.

    ``metadata`` carries provenance such as the window applied to a
    continuum state; it is never used in arithmetic.
    """

    grid: GridSpec
    amplitudes: np.ndarray
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.grid.points,):
            raise GridMismatch(
                f"amplitude array of shape {amps.shape} does not match grid of {self.grid.points} points"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.spacing))

    def normalized(self) -> "GridWavefunction":
        return self.with_amplitudes(self.amplitudes / self.norm())

    def with_amplitudes(self, amplitudes: np.ndarray) -> "GridWavefunction":
        return GridWavefunction(self.grid, amplitudes, dict(self.metadata))

    def inner(self, other: "GridWavefunction") -> complex:
        """<self|other> by the rectangle rule (spectrally exact for periodic data)."""
        check_same_grid(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.grid.spacing)

    def __add__(self, other: "GridWavefunction") -> "GridWavefunction":
        check_same_grid(self, other)
        return self.with_amplitudes(self.amplitudes + other.amplitudes)

    def __sub__(self, other: "GridWavefunction") -> "GridWavefunction":
        check_same_grid(self, other)
        return self.with_amplitudes(self.amplitudes - other.amplitudes)

    def __mul__(self, scalar: complex) -> "GridWavefunction":
        return self.with_amplitudes(self.amplitudes * scalar)

    __rmul__ = __mul__


def check_same_grid(*states: GridWavefunction) -> None:
    first = states[0].grid
    for s in states[1:]:
        if s.grid != first:
            raise GridMismatch(f"grids differ: {first} vs {s.grid}")


def spectral_derivative(values: np.ndarray, grid: GridSpec, power: int = 1, axis: int = -1) -> np.ndarray:
    """Apply ``p**power`` (p = -i d/dq) as an exact Fourier multiplier along ``axis``."""
    shape = [1] * np.ndim(values)
    shape[axis] = grid.points
    mult = grid.k.reshape(shape) ** power
    return np.fft.ifft(mult * np.fft.fft(values, axis=axis), axis=axis)


def translate(values: np.ndarray, grid: GridSpec, shift: float) -> np.ndarray:
    """Return samples of ``psi(q + shift)`` by a spectral phase ramp."""
    return np.fft.ifft(np.exp(1j * grid.k * shift) * np.fft.fft(values))


def fourier_interpolate(values: np.ndarray, grid: GridSpec, x: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``values`` at arbitrary points ``x``.

    The Nyquist mode is split symmetrically between +k and -k. Cost is
    O(len(x) * N).
    """
    n = grid.points
    coeffs = np.fft.fft(values) / n
    k = grid.k.copy()
    shifted = np.asarray(x, dtype=float) - grid.q[0]
    out = np.exp(1j * np.outer(shifted, k)) @ coeffs
    nyq = n // 2
    # replace the one-sided Nyquist term by its symmetric cosine form
    out -= coeffs[nyq] * np.exp(1j * k[nyq] * shifted)
    out += coeffs[nyq] * np.cos(k[nyq] * shifted)
    return out


def edge_mass(values: np.ndarray, fraction: float = 0.05) -> float:
    """Fraction of |psi|^2 living in the outer ``fraction`` of the box (both sides)."""
    p = np.abs(values) ** 2
    total = p.sum()
    if total == 0:
        return 0.0
    m = max(1, int(len(p) * fraction / 2))
    return float((p[:m].sum() + p[-m:].sum()) / total)


def spectral_tail_mass(values: np.ndarray, fraction: float = 0.1) -> float:
    """Fraction of the power spectrum above ``(1 - fraction)`` of the Nyquist wavenumber."""
    power = np.abs(np.fft.fft(values)) ** 2
    total = power.sum()
    if total == 0:
        return 0.0
    freq = np.abs(np.fft.fftfreq(len(values)))
    return float(power[freq > 0.5 * (1 - fraction)].sum() / total)
