"""Periodic grids, Fourier collocation operators and upwind differences.

Every axis in the package (space, velocity, fast phase, auxiliary ``p`` and
the clock variable ``s``) is a :class:`FourierAxis` with ``M = 2**m`` nodes
``x_j = L + j*step`` and frequencies ``mu_l = 2*pi*(l - M/2)/(R - L)``.  The
unpaired Nyquist mode sits at ``l = 0``.

Coefficients are stored in that shifted order, so ``values = Phi @ coeffs``
with ``Phi[j, l] = exp(1j*mu_l*(x_j - L))`` and ``Phi^{-1} = Phi^H / M``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np

from .errors import InvalidDomainError, SamplingError

__all__ = [
    "FourierAxis",
    "CollocationOps",
    "UpwindOps",
    "make_axis",
    "collocation_ops",
    "upwind_ops",
    "sample",
    "sample_diag",
]


@dataclass(frozen=True)
class FourierAxis:
    """Uniform periodic grid on ``[L, R)`` with ``2**m`` nodes."""

    L: float
    R: float
    m: int

    def __post_init__(self):
        if not (math.isfinite(self.L) and math.isfinite(self.R)) or self.R <= self.L:
            raise InvalidDomainError(f"need finite L < R, got L={self.L}, R={self.R}")
        if int(self.m) != self.m or self.m < 1:
            raise InvalidDomainError(f"qubit count must be a positive integer, got {self.m}")

    @property
    def M(self) -> int:
        return 1 << int(self.m)

    @property
    def N(self) -> int:
        return self.M // 2

    @property
    def length(self) -> float:
        return self.R - self.L

    @property
    def step(self) -> float:
        return (self.R - self.L) / self.M

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.L + np.arange(self.M) * self.step

    @cached_property
    def freqs(self) -> np.ndarray:
        """Frequencies in shifted order, ``mu_0 = -pi*M/(R-L)``."""
        return 2 * np.pi * (np.arange(self.M) - self.N) / self.length

    @cached_property
    def freqs_fft(self) -> np.ndarray:
        """The same frequencies in numpy FFT order (Nyquist stays negative)."""
        return np.fft.ifftshift(self.freqs)

    @property
    def mu_max(self) -> float:
        return float(np.max(np.abs(self.freqs)))

    # transforms -----------------------------------------------------------

    def to_coeffs(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        """Apply ``Phi^{-1}`` along ``axis`` using the FFT."""
        values = np.asarray(values)
        return np.fft.fftshift(np.fft.fft(values, axis=axis), axes=axis) / self.M

    def to_values(self, coeffs: np.ndarray, axis: int = -1) -> np.ndarray:
        """Apply ``Phi`` along ``axis`` using the inverse FFT."""
        coeffs = np.asarray(coeffs)
        return np.fft.ifft(np.fft.ifftshift(coeffs, axes=axis), axis=axis) * self.M

    def interp(self, values: np.ndarray, points, axis: int = -1) -> np.ndarray:
        """Trigonometric interpolant of ``values`` evaluated at ``points``.

        The interpolated axis is replaced by the axis of ``points``.
        """
        c = np.moveaxis(self.to_coeffs(values, axis=axis), axis, -1)
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        basis = np.exp(1j * np.outer(self.freqs, pts - self.L))
        return np.moveaxis(c @ basis, -1, axis)

    def interp_rows(self, values: np.ndarray, points) -> np.ndarray:
        """Interpolate each row of ``values[..., :]`` at its own point.

        ``points`` has the shape of ``values[..., 0]``.
        """
        c = self.to_coeffs(values, axis=-1)
        pts = np.asarray(points, dtype=float)[..., None]
        return np.sum(c * np.exp(1j * self.freqs * (pts - self.L)), axis=-1)

    def derivative(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        """Spectral derivative ``d/dx`` of samples along ``axis``."""
        shape = [1] * np.ndim(values)
        shape[axis] = self.M
        mult = (1j * self.freqs_fft).reshape(shape)
        return np.fft.ifft(mult * np.fft.fft(values, axis=axis), axis=axis)


def make_axis(L: float, R: float, m: int) -> FourierAxis:
    """Build a :class:`FourierAxis`, validating the bounds."""
    return FourierAxis(float(L), float(R), int(m))


@dataclass(frozen=True)
class CollocationOps:
    """Dense collocation transform, frequency diagonal and derivative ``P``."""

    axis: FourierAxis
    Phi: np.ndarray
    D: np.ndarray
    P: np.ndarray

    @property
    def Phi_inv(self) -> np.ndarray:
        return self.Phi.conj().T / self.axis.M


@lru_cache(maxsize=64)
def collocation_ops(axis: FourierAxis) -> CollocationOps:
    """Assemble ``Phi``, ``D = diag(mu)`` and ``P = Phi D Phi^{-1}``.

    ``P`` approximates ``-i d/dx`` and is symmetrised so it is Hermitian to
    machine precision.
    """
    j = np.arange(axis.M)
    l = np.arange(axis.M)
    # exp(i mu_l (x_j - L)) = exp(2 pi i (l - N) j / M)
    Phi = np.exp(2j * np.pi * np.outer(j, l - axis.N) / axis.M)
    D = np.diag(axis.freqs)
    P = (Phi * axis.freqs) @ Phi.conj().T / axis.M
    P = 0.5 * (P + P.conj().T)
    for a in (Phi, D, P):
        a.setflags(write=False)
    return CollocationOps(axis, Phi, D, P)


@dataclass(frozen=True)
class UpwindOps:
    """First-order periodic upwind differences."""

    axis: FourierAxis
    shift: np.ndarray
    backward: np.ndarray
    forward: np.ndarray


@lru_cache(maxsize=64)
def upwind_ops(axis: FourierAxis) -> UpwindOps:
    """``D^- = (I - S^+ - wrap)/step`` and ``D^+ = -(D^-)^T``."""
    M = axis.M
    S = np.eye(M, k=-1)
    wrap = np.zeros((M, M))
    wrap[0, M - 1] = 1.0
    Dm = (np.eye(M) - S - wrap) / axis.step
    Dp = -Dm.T
    for a in (S, Dm, Dp):
        a.setflags(write=False)
    return UpwindOps(axis, S, Dm, Dp)


def sample(f: Callable, axis: FourierAxis) -> np.ndarray:
    """Evaluate ``f`` at the nodes, rejecting non-finite values."""
    x = axis.nodes
    vals = np.asarray(f(x))
    vals = np.broadcast_to(vals, x.shape).copy() if vals.ndim == 0 else vals
    if vals.shape != x.shape:
        raise SamplingError(f"expected {x.shape} samples, got {vals.shape}")
    if not np.all(np.isfinite(vals)):
        raise SamplingError("non-finite sample on the grid")
    return vals


def sample_diag(f: Callable, axis: FourierAxis) -> np.ndarray:
    """Diagonal matrix ``diag(f(x_0), ..., f(x_{M-1}))``."""
    return np.diag(sample(f, axis))
