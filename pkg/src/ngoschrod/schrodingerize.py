"""Turn a linear system ``du/dt = A u + b`` into a Hamiltonian system.

The pipeline is: homogenise the source term, split the generator into
Hermitian parts ``A = H1 + i H2``, lift to ``v(t, p) = e^{-p} u(t)`` on an
auxiliary periodic ``p`` axis with an extension profile for ``p < 0``, and
diagonalise ``d/dp`` with the discrete Fourier transform.  In the Fourier
basis the generator is ``H = (H1 - lam0 I) (x) D_p - H2 (x) I``.

State layout: extended states are arrays of shape ``(n, M_p)`` with the
original index first and the ``p`` index second, which is the row-major
flattening of ``sum_{j,k} v_j(p_k)|j>|k>``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

from .errors import (
    InvalidHorizonError,
    MollifierResolutionError,
    UnsupportedError,
)
from .spectral import FourierAxis, collocation_ops

__all__ = [
    "HomogenizedSystem",
    "HermitianSplit",
    "ExtensionProfile",
    "SchrodSystem",
    "ExtendedState",
    "Lambda0Choice",
    "ShiftedReduction",
    "ForcedReduction",
    "NonautonomousExtension",
    "PDomainWarning",
    "homogenize",
    "homogenize_diag_forcing",
    "hermitian_split",
    "extension_profile",
    "eigen_extremes",
    "gershgorin_bounds",
    "choose_p_domain",
    "schrodingerize",
    "suggest_lambda0",
    "reduce_shifted",
    "reduce_forced",
    "mollifier",
    "extend_nonautonomous",
]

MatrixLike = Union[np.ndarray, Callable[[float], np.ndarray]]


class PDomainWarning(UserWarning):
    """The ``p`` axis is smaller than the sizing rule asks for."""


# ---------------------------------------------------------------------------
# homogenisation and splitting


@dataclass(frozen=True)
class HomogenizedSystem:
    """``d/dt [u; r] = [[A, I/T], [0, 0]] [u; r]`` with ``r(0) = T b``."""

    A_tilde: np.ndarray
    u0_tilde: np.ndarray
    T: float

    @property
    def n(self) -> int:
        return self.A_tilde.shape[0] // 2

    def original(self, u_tilde: np.ndarray) -> np.ndarray:
        """Drop the auxiliary half of a homogenised state."""
        return np.asarray(u_tilde)[..., : self.n]


def homogenize(A, b, u0, T: float) -> HomogenizedSystem:
    """Absorb a constant source ``b`` into an enlarged homogeneous system."""
    if not T > 0:
        raise InvalidHorizonError(f"horizon must be positive, got {T}")
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    n = A.shape[0]
    b = np.asarray(b, dtype=complex).reshape(-1)
    u0 = np.asarray(u0, dtype=complex).reshape(-1)
    if A.shape != (n, n) or b.shape != (n,) or u0.shape != (n,):
        raise ValueError("dimension mismatch between A, b and u0")
    At = np.zeros((2 * n, 2 * n), dtype=complex)
    At[:n, :n] = A
    At[:n, n:] = np.eye(n) / T
    return HomogenizedSystem(At, np.concatenate([u0, T * b]), float(T))


def homogenize_diag_forcing(A, F, u0, T: float = 1.0) -> HomogenizedSystem:
    """Homogenise ``du/dt = A u + F`` as ``[[A, diag(F)], [0, 0]]``, tail ones.

    This variant keeps the coupling block equal to the forcing profile
    itself, which is how a pointwise source such as ``a(x)`` enters the
    phase equation.
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    n = A.shape[0]
    F = np.asarray(F, dtype=complex).reshape(-1)
    u0 = np.asarray(u0, dtype=complex).reshape(-1)
    if F.shape != (n,) or u0.shape != (n,):
        raise ValueError("dimension mismatch between A, F and u0")
    At = np.zeros((2 * n, 2 * n), dtype=complex)
    At[:n, :n] = A
    At[:n, n:] = np.diag(F)
    return HomogenizedSystem(At, np.concatenate([u0, np.ones(n)]), float(T))


@dataclass(frozen=True)
class HermitianSplit:
    """``M = H1 + i H2`` with both parts Hermitian."""

    H1: np.ndarray
    H2: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return self.H1 + 1j * self.H2


def hermitian_split(M) -> HermitianSplit:
    """``H1 = (M + M^H)/2`` and ``H2 = (M - M^H)/(2i)``."""
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    if M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    Mh = M.conj().T
    return HermitianSplit(0.5 * (M + Mh), -0.5j * (M - Mh))


# ---------------------------------------------------------------------------
# extension profiles

_E1 = math.exp(-1.0)


def _xi_exp_abs(p):
    return np.exp(-np.abs(p))


def _xi_cubic(p):
    p = np.asarray(p, dtype=float)
    poly = ((-3 + 3 * _E1) * p + (-5 + 4 * _E1)) * p * p - p + 1
    return np.where((p > -1) & (p < 0), poly, np.exp(-np.abs(p)))


@dataclass(frozen=True)
class ExtensionProfile:
    """Extension ``xi`` of ``e^{-p}`` to negative ``p`` with Sobolev order."""

    kind: str
    order: int
    xi: Callable = field(compare=False)

    def __call__(self, p):
        return self.xi(p)


def extension_profile(kind: str = "cubic", xi: Callable | None = None,
                      order: int | None = None) -> ExtensionProfile:
    """Return ``exp_abs`` (order 1), ``cubic`` (order 2) or a custom profile."""
    if isinstance(kind, ExtensionProfile):
        return kind
    if kind == "exp_abs":
        return ExtensionProfile("exp_abs", 1, _xi_exp_abs)
    if kind == "cubic":
        return ExtensionProfile("cubic", 2, _xi_cubic)
    if kind == "custom":
        if xi is None or order is None:
            raise ValueError("custom profile needs xi and order")
        return ExtensionProfile("custom", int(order), xi)
    raise ValueError(f"unknown extension profile {kind!r}")


# ---------------------------------------------------------------------------
# spectra and the p-domain


def _as_family(H: MatrixLike) -> Callable[[float], np.ndarray]:
    if callable(H):
        return H
    H = np.asarray(H)
    return lambda t: H


def eigen_extremes(H1: MatrixLike, times=None) -> tuple[float, float]:
    """Smallest and largest eigenvalue of ``H1`` (min/max over ``times``)."""
    fam = _as_family(H1)
    ts = [0.0] if times is None or not callable(H1) else list(times)
    lo, hi = np.inf, -np.inf
    for t in ts:
        ev = np.linalg.eigvalsh(np.atleast_2d(fam(t)))
        lo, hi = min(lo, ev[0]), max(hi, ev[-1])
    return float(lo), float(hi)


def gershgorin_bounds(H) -> tuple[float, float]:
    """Cheap enclosure of the spectrum of a Hermitian matrix."""
    H = np.atleast_2d(np.asarray(H))
    d = np.real(np.diag(H))
    r = np.sum(np.abs(H), axis=1) - np.abs(np.diag(H))
    return float(np.min(d - r)), float(np.max(d + r))


def choose_p_domain(H1: MatrixLike, T: float, eps: float = 1e-8, R_p: float = 1.0,
                    times=None) -> tuple[float, float]:
    """Symmetric ``p`` interval large enough for tolerance ``eps``.

    ``L = min(ln eps - 2 lp T - R_p, ln eps - lm T - lp T - R_p)`` with
    ``lp``/``lm`` the largest positive/negative eigenvalue magnitudes.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if R_p < 1:
        raise ValueError("recovery length R_p must be at least 1")
    lo, hi = eigen_extremes(H1, times)
    lp, lm = max(hi, 0.0), max(-lo, 0.0)
    le = math.log(eps)
    L = min(le - 2 * lp * T - R_p, le - lm * T - lp * T - R_p)
    return L, -L


# ---------------------------------------------------------------------------
# Schrodingerised system


@dataclass(frozen=True)
class ExtendedState:
    """Extended state in the Fourier basis of the ``p`` axis.

    ``coeffs`` has shape ``(n, M_p)``.  ``t`` is the current time and
    ``lambda0`` the spectral shift, so the unshifted solution carries the
    factor ``exp(lambda0 * t)``.  ``decay`` records an extra ``exp(-decay*t)``
    factor from a scalar reduction.
    """

    coeffs: np.ndarray
    p_axis: FourierAxis
    lambda0: float = 0.0
    t: float = 0.0
    decay: float = 0.0

    @property
    def values(self) -> np.ndarray:
        """``v(t, p_k)`` samples, shape ``(n, M_p)``."""
        return self.p_axis.to_values(self.coeffs, axis=-1)

    @property
    def vector(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    @property
    def unshift_factor(self) -> float:
        return math.exp(self.lambda0 * self.t - self.decay * self.t)

    def with_coeffs(self, coeffs, t) -> "ExtendedState":
        return replace(self, coeffs=coeffs, t=float(t))


@dataclass(frozen=True)
class SchrodSystem:
    """Hamiltonian ``H(t) = (H1(t) - lam0 I) (x) D_p - H2(t) (x) I``.

    ``h1`` and ``h2`` are matrices or callables of time.  ``H`` is
    block-diagonal over the ``p`` frequencies with blocks
    ``mu_l (H1 - lam0) - H2``; evolution routines exploit that structure and
    the full matrix is only formed on request.
    """

    h1: MatrixLike
    h2: MatrixLike
    p_axis: FourierAxis
    lambda0: float = 0.0
    profile: ExtensionProfile = field(default_factory=lambda: extension_profile("cubic"))
    T: float = 1.0

    @property
    def time_dependent(self) -> bool:
        return callable(self.h1) or callable(self.h2)

    @property
    def n(self) -> int:
        return self.h1_at(0.0).shape[0]

    @property
    def dim(self) -> int:
        return self.n * self.p_axis.M

    def h1_at(self, t: float) -> np.ndarray:
        return np.asarray(self.h1(t) if callable(self.h1) else self.h1)

    def h2_at(self, t: float) -> np.ndarray:
        return np.asarray(self.h2(t) if callable(self.h2) else self.h2)

    def shifted_h1(self, t: float = 0.0) -> np.ndarray:
        h1 = self.h1_at(t)
        return h1 - self.lambda0 * np.eye(h1.shape[0])

    @property
    def split(self) -> HermitianSplit:
        return HermitianSplit(self.h1_at(0.0), self.h2_at(0.0))

    def blocks(self, t: float = 0.0) -> np.ndarray:
        """Stack of per-frequency blocks, shape ``(M_p, n, n)``."""
        mu = self.p_axis.freqs
        return mu[:, None, None] * self.shifted_h1(t)[None] - self.h2_at(t)[None]

    def hamiltonian(self, t: float = 0.0, sparse: bool | None = None):
        """Assemble ``H`` in the (state, p) ordering.

        Dense for small systems, CSR otherwise (or as requested).
        """
        if sparse is None:
            sparse = self.dim > 4096
        D = sp.diags(self.p_axis.freqs)
        I = sp.identity(self.p_axis.M)
        H = sp.kron(sp.csr_matrix(self.shifted_h1(t)), D) - sp.kron(sp.csr_matrix(self.h2_at(t)), I)
        return H.tocsr() if sparse else H.toarray()

    def initial_state(self, u0) -> ExtendedState:
        """``(I (x) Phi_p^{-1}) [xi(p_k) u0_j]``."""
        u0 = np.asarray(u0, dtype=complex).reshape(-1)
        if u0.shape[0] != self.n:
            raise ValueError(f"initial state has length {u0.shape[0]}, system has {self.n}")
        prof = np.asarray(self.profile(self.p_axis.nodes), dtype=float)
        v0 = u0[:, None] * prof[None, :]
        return ExtendedState(self.p_axis.to_coeffs(v0, axis=-1), self.p_axis, self.lambda0, 0.0)


def schrodingerize(system, p_axis: FourierAxis, profile="cubic", lambda0: float = 0.0,
                   u0=None, T: float | None = None, check_domain: bool = True):
    """Build the Schrodingerised system and its initial extended state.

    ``system`` is a :class:`HomogenizedSystem`, a generator matrix, a
    :class:`HermitianSplit`, or a callable ``t -> A(t)``.  For anything
    other than a homogenised system the initial state ``u0`` is required.
    """
    prof = extension_profile(profile)
    if isinstance(system, HomogenizedSystem):
        s = hermitian_split(system.A_tilde)
        h1, h2 = s.H1, s.H2
        u0 = system.u0_tilde if u0 is None else u0
        T = system.T if T is None else T
    elif isinstance(system, HermitianSplit):
        h1, h2 = system.H1, system.H2
    elif callable(system):
        h1 = lambda t: hermitian_split(system(t)).H1
        h2 = lambda t: hermitian_split(system(t)).H2
    else:
        s = hermitian_split(system)
        h1, h2 = s.H1, s.H2
    if u0 is None:
        raise ValueError("initial state required")
    T = 1.0 if T is None else float(T)
    S = SchrodSystem(h1, h2, p_axis, float(lambda0), prof, T)
    if np.asarray(u0).size != S.n:
        raise ValueError(f"initial state has size {np.asarray(u0).size}, system has {S.n}")
    if check_domain:
        times = np.linspace(0, T, 5) if S.time_dependent else [0.0]
        L, _ = choose_p_domain(S.shifted_h1, T, times=times)
        if p_axis.L > L or p_axis.R < -L:
            warnings.warn(
                f"p-domain [{p_axis.L:g}, {p_axis.R:g}] is smaller than the sizing rule [{L:.3g}, {-L:.3g}]",
                PDomainWarning, stacklevel=2)
    return S, S.initial_state(u0)


# ---------------------------------------------------------------------------
# spectral shift heuristics


@dataclass(frozen=True)
class Lambda0Choice:
    """Suggested spectral shift with the rule that produced it."""

    value: float
    interval: tuple[float, float]
    rule: str
    midpoint: float
    lam_min: float
    lam_max: float


def suggest_lambda0(H1: MatrixLike, T: float, dp: float, r: int, eps: float = 1e-8,
                    delta_T: float | None = None, times=None) -> Lambda0Choice:
    """Pick ``lambda0`` following the three shift heuristics.

    ``delta_T`` is the norm ratio ``|u(0)|/|u(T)|``; when absent it is
    estimated from the mean of the extreme eigenvalues as
    ``exp(-(lam_1 + lam_n) T / 2)``.
    """
    lam1, lamn = eigen_extremes(H1, times)
    mid = 0.5 * (lam1 + lamn)
    if delta_T is None:
        delta_T = math.exp(-mid * T)
    if not delta_T > 0:
        raise ValueError("delta_T must be positive")
    target = eps * delta_T
    err = dp ** r
    if lamn > 0 and err * math.exp(lamn * T) > target:
        return Lambda0Choice(lamn, (0.0, lamn), "shift-to-top", mid, lam1, lamn)
    if lamn > 0:
        return Lambda0Choice(min(max(mid, 0.0), lamn), (0.0, lamn), "midpoint", mid, lam1, lamn)
    if lamn < 0 and err < target:
        lam_b = max(lamn, math.log(err / target) / T)
        return Lambda0Choice(lam_b, (lam_b, 0.0), "negative-shift", mid, lam1, lamn)
    return Lambda0Choice(0.0, (0.0, 0.0), "fallback", mid, lam1, lamn)


# ---------------------------------------------------------------------------
# direct reductions for diagonal systems


@dataclass(frozen=True)
class ShiftedReduction:
    """``dx/dt = -i H x - lam x`` as ``x = e^{-Re(lam) t} x~``."""

    generator: np.ndarray
    decay: float

    def restore(self, x_tilde, t: float):
        return math.exp(-self.decay * t) * np.asarray(x_tilde)


def reduce_shifted(H, lam: complex) -> ShiftedReduction:
    """Move ``Im(lam)`` into the generator and ``Re(lam)`` into a scalar factor.

    ``H`` may be a matrix or a vector holding a diagonal.
    """
    H = np.asarray(H)
    lam = complex(lam)
    shift = lam.imag * (np.eye(H.shape[0]) if H.ndim == 2 else np.ones(H.shape[0]))
    return ShiftedReduction(H + shift, lam.real)


@dataclass(frozen=True)
class ForcedReduction:
    """``dy/dt = -i H y + F`` rewritten as ``y~ = H y + i F`` with ``dy~/dt = -i H y~``.

    Modes with a zero diagonal entry evolve affinely, ``y_j(t) = y_j(0) + t F_j``,
    and are integrated outside the unitary block unless ``policy='replace'``.
    """

    generator: np.ndarray
    forcing: np.ndarray
    zero_mask: np.ndarray
    policy: str

    @property
    def diagonal(self) -> bool:
        return self.generator.ndim == 1

    def _apply(self, y):
        return self.generator * y if self.diagonal else self.generator @ y

    def lift(self, y0):
        """Initial state of the unitary problem."""
        y0 = np.asarray(y0, dtype=complex)
        yt = self._apply(y0) + 1j * self.forcing
        return np.where(self.zero_mask, 0.0, yt)

    def restore(self, y_tilde, t: float, y0):
        """Recover ``y(t)`` from the evolved ``y~(t)`` and the initial ``y0``."""
        y_tilde = np.asarray(y_tilde, dtype=complex)
        rhs = y_tilde - 1j * self.forcing
        if self.diagonal:
            safe = np.where(self.zero_mask, 1.0, self.generator)
            y = rhs / safe
        else:
            y = np.linalg.solve(self.generator, rhs)
        affine = np.asarray(y0, dtype=complex) + t * self.forcing
        return np.where(self.zero_mask, affine, y)


def reduce_forced(H, F, policy: str = "exact", replace_value: float = 1.0,
                  zero_tol: float = 1e-13) -> ForcedReduction:
    """Reduce an affinely forced Hermitian system to a homogeneous one.

    ``policy='exact'`` integrates zero modes classically; ``'replace'``
    substitutes ``replace_value`` for zero diagonal entries, which alters the
    dynamics of those modes and is meant for comparison runs; ``'remove'``
    accepts at most one zero mode and treats it like ``'exact'``.
    """
    H = np.asarray(H)
    F = np.asarray(F, dtype=complex).reshape(-1)
    if H.ndim == 2 and np.count_nonzero(H - np.diag(np.diag(H))) == 0:
        H = np.diag(H).copy()
    if H.ndim == 1:
        zero = np.abs(H) <= zero_tol
    else:
        zero = np.zeros(H.shape[0], dtype=bool)
    if policy == "remove" and zero.sum() > 1:
        raise UnsupportedError("more than one zero mode under the 'remove' policy")
    if policy == "replace":
        H = np.where(zero, replace_value, H)
        zero = np.zeros_like(zero)
    elif policy not in ("exact", "remove"):
        raise ValueError(f"unknown zero-mode policy {policy!r}")
    return ForcedReduction(np.asarray(H), F, zero, policy)


# ---------------------------------------------------------------------------
# non-autonomous extension


def mollifier(kind: str, omega: float) -> Callable:
    """``zeta_omega(x) = zeta(x/omega)/omega`` supported on ``[-omega, omega]``."""
    if kind == "hat":
        base = lambda y: np.clip(1 - np.abs(y), 0, None)
    elif kind == "cosine":
        base = lambda y: np.where(np.abs(y) <= 1, 0.5 * (1 + np.cos(np.pi * y)), 0.0)
    else:
        raise ValueError(f"unknown mollifier {kind!r}")
    return lambda x: base(np.asarray(x) / omega) / omega


@dataclass(frozen=True)
class NonautonomousExtension:
    """Clock-augmented autonomous system ``i dz/dt = (P_s (x) I + diag_s H(s)) z``.

    Stored in the physical ``s`` basis (the Fourier basis differs by a
    unitary similarity).  ``z`` has shape ``(M_s, n)``.
    """

    s_axis: FourierAxis
    generator: np.ndarray
    z0: np.ndarray

    def collapse(self, z) -> np.ndarray:
        """``w(t) = sum_j z(t, s_j) ds``."""
        z = np.asarray(z).reshape(self.s_axis.M, -1)
        return z.sum(axis=0) * self.s_axis.step


def extend_nonautonomous(H: Callable[[float], np.ndarray], w0, s_axis: FourierAxis,
                         kind: str = "cosine", omega: float | None = None,
                         clamp: tuple[float, float] | None = None) -> NonautonomousExtension:
    """Replace time dependence by transport in a clock variable ``s``.

    ``H(s)`` is sampled at the ``s`` nodes (clamped to ``clamp`` if given).
    ``omega`` defaults to twice the ``s`` step.
    """
    ds = s_axis.step
    omega = 2 * ds if omega is None else float(omega)
    if omega < ds:
        raise MollifierResolutionError(f"omega={omega:g} is below the s step {ds:g}")
    w0 = np.asarray(w0, dtype=complex).reshape(-1)
    n = w0.size
    s = s_axis.nodes
    ss = s if clamp is None else np.clip(s, *clamp)
    Ms = s_axis.M
    G = np.kron(collocation_ops(s_axis).P, np.eye(n)).astype(complex)
    for j in range(Ms):
        G[j * n:(j + 1) * n, j * n:(j + 1) * n] += np.asarray(H(float(ss[j])))
    zeta = mollifier(kind, omega)(s)
    z0 = (zeta[:, None] * w0[None, :]).reshape(-1)
    return NonautonomousExtension(s_axis, 0.5 * (G + G.conj().T), z0)
