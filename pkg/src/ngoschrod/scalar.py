"""Geometric-optics solver for the scalar oscillatory transport equation.

Model: ``u_t + c(x) u_x + lam u = i a(x) u / eps`` with initial data
``u0(x) = f0(x, beta(x)/eps)`` that is periodic in its fast argument.  The
data is expanded in Fourier modes of the fast variable,
``u0 = sum_k f_k(x) e^{i k beta/eps}``, and each mode is written as
``alpha_k e^{i S_k/eps}`` with

    alpha_t + c alpha_x + lam alpha = 0,    alpha(0) = f_k,
    S_t + c S_x = a,                        S(0) = k beta.

Neither equation contains ``eps``, so the grid does not have to resolve the
wavelength.  A phase with a linear trend (``beta = x`` on a periodic cell)
is split into ``k kappa x`` plus a periodic remainder whose source becomes
``a - c k kappa``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import SamplingError, UnsupportedError
from .evolve import EvolutionConfig, evolve, p_star, recover, snap_up
from .schrodingerize import (
    ExtendedState,
    SchrodSystem,
    extension_profile,
    hermitian_split,
    homogenize_diag_forcing,
    reduce_forced,
    reduce_shifted,
    schrodingerize,
    suggest_lambda0,
)
from .spectral import FourierAxis, collocation_ops, make_axis, sample, upwind_ops

__all__ = [
    "ScalarProblem",
    "ModeExpansion",
    "ModeSystems",
    "ScalarSolution",
    "mode_expand",
    "build_mode_systems",
    "solve_scalar",
    "assemble_solution",
    "characteristics_oracle",
    "secular_slope",
]


@dataclass(frozen=True)
class ScalarProblem:
    """Coefficients, data and grid of the scalar model."""

    c: Callable
    a: Callable
    lam: complex
    eps: float
    f0: Callable
    beta: Callable
    x_axis: FourierAxis
    K: int | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        a = sample(self.a, self.x_axis)
        if np.min(np.real(a)) <= 0:
            raise UnsupportedError("a(x) must be bounded below by a positive constant")

    def u0(self, x):
        x = np.asarray(x, dtype=float)
        return self.f0(x, self.beta(x) / self.eps)

    def exact_constant(self, t: float, x=None):
        """Closed-form solution when ``c`` and ``a`` are constants."""
        x = self.x_axis.nodes if x is None else np.asarray(x, dtype=float)
        c = float(np.asarray(self.c(np.zeros(1)))[0])
        a = float(np.asarray(self.a(np.zeros(1)))[0])
        return np.exp(-(self.lam - 1j * a / self.eps) * t) * self.u0(x - c * t)


def secular_slope(beta: Callable, axis: FourierAxis) -> float:
    """Slope ``kappa`` making ``beta(x) - kappa x`` periodic on the axis."""
    return float((beta(np.array([axis.R]))[0] - beta(np.array([axis.L]))[0]) / axis.length)


# ---------------------------------------------------------------------------
# fast-variable expansion


@dataclass(frozen=True)
class ModeExpansion:
    """Fourier coefficients ``f_k(x_j)`` of the initial profile in ``tau``."""

    ks: np.ndarray
    f: np.ndarray
    tail: float

    @property
    def K(self) -> int:
        return int(np.max(np.abs(self.ks)))

    def reconstruct(self, beta_vals, eps: float) -> np.ndarray:
        ph = np.exp(1j * np.outer(self.ks, beta_vals) / eps)
        return np.sum(self.f * ph, axis=0)


def mode_expand(f0: Callable, x, K: int | None = None, tau_resolution: int = 64,
                tail_tol: float = 1e-12) -> ModeExpansion:
    """Expand ``f0(x, tau)`` in ``e^{i k tau}`` at the points ``x``.

    With ``K=None`` the smallest cutoff whose discarded coefficients sum
    below ``tail_tol`` is chosen.  A fixed ``K`` with a larger tail warns.
    """
    x = np.asarray(x, dtype=float)
    tau = 2 * np.pi * np.arange(tau_resolution) / tau_resolution
    vals = np.asarray(f0(x[:, None], tau[None, :]), dtype=complex)
    vals = np.broadcast_to(vals, (x.size, tau_resolution))
    if not np.all(np.isfinite(vals)):
        raise SamplingError("non-finite initial profile")
    coef = np.fft.fft(vals, axis=1) / tau_resolution
    kk = np.fft.fftfreq(tau_resolution, 1.0 / tau_resolution).astype(int)
    amp = np.max(np.abs(coef), axis=0)
    kmax = tau_resolution // 2 - 1

    def tail_of(Kc):
        return float(np.sum(amp[np.abs(kk) > Kc]))

    if K is None:
        K = next((Kc for Kc in range(kmax + 1) if tail_of(Kc) < tail_tol), kmax)
    elif tail_of(K) > max(tail_tol, 1e-8):
        warnings.warn(f"mode cutoff K={K} leaves a tail of {tail_of(K):.2e}", stacklevel=2)
    ks = np.arange(-K, K + 1)
    f = np.stack([coef[:, k % tau_resolution] for k in ks])
    return ModeExpansion(ks, f, tail_of(K))


# ---------------------------------------------------------------------------
# semi-discrete mode systems


@dataclass(frozen=True)
class ModeSystems:
    """Amplitude and phase systems shared by all modes.

    ``M1`` generates ``alpha``; ``M2`` is the phase convection operator and
    ``forcing[k]`` the source of the periodic part of ``S_k``.
    """

    method: str
    ks: np.ndarray
    M1: np.ndarray
    M2: np.ndarray
    forcing: np.ndarray
    alpha0: np.ndarray
    S0: np.ndarray
    kappa: float
    c_nodes: np.ndarray
    constant_c: bool

    def alpha_split(self):
        return hermitian_split(self.M1)

    def phase_homogenized(self, idx: int, T: float = 1.0):
        return homogenize_diag_forcing(self.M2, self.forcing[idx], self.S0[idx], T)


def build_mode_systems(problem: ScalarProblem, method: str = "spectral",
                       expansion: ModeExpansion | None = None) -> ModeSystems:
    """Discretise the amplitude and phase equations on the ``x`` grid."""
    ax = problem.x_axis
    x = ax.nodes
    cx = np.real(sample(problem.c, ax)).astype(float)
    if np.min(cx) < 0:
        raise UnsupportedError("convection speed must be nonnegative")
    ax_ = np.real(sample(problem.a, ax)).astype(float)
    lam = complex(problem.lam)
    n = ax.M
    if method == "spectral":
        conv = -1j * cx[:, None] * collocation_ops(ax).P
    elif method == "upwind":
        conv = -cx[:, None] * upwind_ops(ax).backward
    else:
        raise ValueError(f"unknown method {method!r}")
    M1 = conv - lam * np.eye(n)
    M2 = conv.astype(complex)
    exp = expansion or mode_expand(problem.f0, x, problem.K)
    kappa = secular_slope(problem.beta, ax)
    ks = exp.ks
    beta_per = problem.beta(x) - kappa * x
    S0 = ks[:, None] * beta_per[None, :]
    forcing = ax_[None, :] - cx[None, :] * (ks[:, None] * kappa)
    const = bool(np.ptp(cx) <= 1e-14 * max(1.0, np.max(np.abs(cx))))
    return ModeSystems(method, ks, M1, M2, forcing.astype(complex), exp.f,
                       S0.astype(complex), kappa, cx, const)


# ---------------------------------------------------------------------------
# solving


@dataclass
class ScalarSolution:
    """Amplitudes and phases at the final time, one row per mode."""

    ks: np.ndarray
    alpha: np.ndarray
    S: np.ndarray
    T: float
    x: np.ndarray
    info: dict = field(default_factory=dict)

    def u(self, eps: float) -> np.ndarray:
        return assemble_solution(self.alpha, self.S, eps)


def _solve_constant_spectral(sys_: ModeSystems, ax: FourierAxis, lam: complex, T: float,
                             cfg: EvolutionConfig):
    c = float(sys_.c_nodes[0])
    d = c * ax.freqs
    red_a = reduce_shifted(d, lam)
    alpha = []
    for f in sys_.alpha0:
        ct = evolve(red_a.generator, ax.to_coeffs(f), T, cfg)
        alpha.append(ax.to_values(red_a.restore(ct, T)))
    S = []
    for F, s0 in zip(sys_.forcing, sys_.S0):
        red = reduce_forced(d, ax.to_coeffs(F))
        y0 = ax.to_coeffs(s0)
        yt = evolve(red.generator, red.lift(y0), T, cfg)
        S.append(ax.to_values(red.restore(yt, T, y0)))
    return np.array(alpha), np.array(S), {"path": "diagonal"}


def _default_p_axis(H1, T: float, n_p: int = 9) -> FourierAxis:
    from .schrodingerize import choose_p_domain

    L, R = choose_p_domain(H1, T)
    return make_axis(L, R, n_p)


def _pick_lambda0(policy, H1, T, p_axis, profile):
    if policy == "auto":
        return suggest_lambda0(H1, T, p_axis.step, profile.order).value
    if policy == "top":
        return float(np.linalg.eigvalsh(H1)[-1])
    return float(policy)


def solve_scalar(problem: ScalarProblem, method: str = "spectral",
                 config: EvolutionConfig | None = None, T: float = 1.0,
                 lambda0="auto", p_axis: FourierAxis | None = None, p_k: float | None = None,
                 recovery: str = "point", profile="cubic", phase: str = "numerical",
                 force_schrodinger: bool = False) -> ScalarSolution:
    """Solve every mode up to ``T``.

    Constant speed with the spectral method uses the diagonal reductions
    with no auxiliary variable.  Otherwise both systems are Schrodingerised;
    ``lambda0`` is ``'auto'`` (shift heuristics), ``'top'`` (largest
    eigenvalue of ``H1``) or a number, applied to each system separately.
    ``phase='exact'`` replaces the numerical phase by the characteristics
    oracle.
    """
    cfg = config or EvolutionConfig()
    ax = problem.x_axis
    sys_ = build_mode_systems(problem, method)
    x = ax.nodes
    if sys_.constant_c and method == "spectral" and not force_schrodinger:
        alpha, Sp, info = _solve_constant_spectral(sys_, ax, problem.lam, T, cfg)
    else:
        prof = extension_profile(profile)
        info = {"path": "schrodinger", "alpha_states": [], "phase_states": []}
        H1a = sys_.alpha_split().H1
        pax = p_axis or _default_p_axis(H1a, T)
        lam_a = _pick_lambda0(lambda0, H1a, T, pax, prof)
        alpha = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for f in sys_.alpha0:
                S_, st = schrodingerize(sys_.M1, pax, prof, lam_a, u0=f, T=T)
                out = evolve(S_, st, T, cfg)
                ps = p_star(S_.h1_at(0.0), T, lam_a)
                pk = ps if p_k is None else p_k
                alpha.append(recover(out, p_k=pk, mode=recovery, pstar=ps))
                info["alpha_states"].append(out)
            info.update(alpha_lambda0=lam_a, alpha_pstar=ps, alpha_pk=float(pax.nodes[snap_up(pax, pk)]),
                        alpha_system=S_, p_axis=pax)
            Sp = []
            for i in range(len(sys_.ks)):
                hom = sys_.phase_homogenized(i, T)
                H1s = hermitian_split(hom.A_tilde).H1
                lam_s = _pick_lambda0(lambda0, H1s, T, pax, prof)
                S_, st = schrodingerize(hom, pax, prof, lam_s)
                out = evolve(S_, st, T, cfg)
                ps_s = p_star(H1s, T, lam_s)
                pk_s = ps_s if p_k is None else max(p_k, ps_s)
                Sp.append(recover(out, p_k=pk_s, mode=recovery, pstar=ps_s)[: ax.M])
                info["phase_states"].append(out)
            info.update(phase_lambda0=lam_s, phase_pstar=ps_s)
        alpha, Sp = np.array(alpha), np.array(Sp)
    S = Sp + sys_.ks[:, None] * sys_.kappa * x[None, :]
    if phase == "exact":
        _, S = characteristics_oracle(problem, T, sys_.ks)
        info["phase"] = "exact"
    return ScalarSolution(sys_.ks, alpha, S, T, x, info)


def assemble_solution(alpha, S, eps: float) -> np.ndarray:
    """``sum_k alpha_k e^{i S_k / eps}`` at every node."""
    alpha = np.atleast_2d(alpha)
    S = np.atleast_2d(S)
    return np.sum(alpha * np.exp(1j * S / eps), axis=0)


# ---------------------------------------------------------------------------
# reference


def characteristics_oracle(problem: ScalarProblem, T: float, ks=None, x=None,
                           rtol: float = 1e-12):
    """Exact ``alpha_k`` and ``S_k`` by integrating characteristics backwards.

    Each node is traced back along ``dX/ds = c(X)`` while accumulating
    ``int a(X) ds``; then ``alpha_k = e^{-lam T} f_k(X(0))`` and
    ``S_k = k beta(X(0)) + int a``.  The mode amplitudes ``f_k`` are
    extracted from ``f0`` at the foot points.
    """
    x = problem.x_axis.nodes if x is None else np.asarray(x, dtype=float)
    n = x.size

    def rhs(s, y):
        X = y[:n]
        return np.concatenate([-np.asarray(problem.c(X), float), -np.asarray(problem.a(X), float)])

    sol = solve_ivp(rhs, (0.0, T), np.concatenate([x, np.zeros(n)]), method="DOP853",
                    rtol=rtol, atol=rtol)
    X0 = sol.y[:n, -1]
    integral = -sol.y[n:, -1]
    exp = mode_expand(problem.f0, X0, problem.K if ks is None else int(np.max(np.abs(ks))))
    ks = exp.ks if ks is None else np.asarray(ks)
    fk = np.stack([exp.f[list(exp.ks).index(k)] for k in ks])
    alpha = np.exp(-complex(problem.lam) * T) * fk
    S = ks[:, None] * problem.beta(X0)[None, :] + integral[None, :]
    return alpha, S.astype(float)
