"""Norm-preserving time stepping and recovery from the extended state.

The default integrator is the implicit midpoint rule, a Cayley transform
``(I + i h H/2)^{-1} (I - i h H/2)`` that is exactly unitary.  For a
Schrodingerised system the Hamiltonian is block diagonal over ``p``
frequencies, so every block is stepped independently.  When the
Hamiltonian does not depend on time, ``K`` Cayley steps are applied at once
through an eigendecomposition, which is the same operator as stepping ``K``
times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import RecoveryRegionError
from .schrodingerize import ExtendedState, SchrodSystem, eigen_extremes
from .spectral import FourierAxis

__all__ = [
    "EvolutionConfig",
    "RecoveryReport",
    "MeasurementReport",
    "ScanResult",
    "time_steps",
    "implicit_midpoint_step",
    "evolve",
    "p_star",
    "snap_up",
    "recover",
    "recover_at",
    "recovery_report",
    "measurement_probability",
    "predicted_aggregate",
    "recovery_scan",
]

SCHEMES = ("implicit_midpoint", "diagonal_exact", "splitting")


@dataclass(frozen=True)
class EvolutionConfig:
    """Time step, scheme and solver settings.

    ``factor='eig'`` applies powers of the Cayley map through an
    eigendecomposition for time-independent problems, ``'lu'`` reuses one LU
    factorisation per distinct step length.
    """

    dt: float = 1e-3
    scheme: str = "implicit_midpoint"
    tol: float = 1e-12
    factor: str = "eig"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("time step must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.tol < np.finfo(float).eps:
            raise ValueError("tolerance below machine epsilon")
        if self.factor not in ("eig", "lu"):
            raise ValueError(f"unknown factorisation {self.factor!r}")


def time_steps(T: float, dt: float) -> list[tuple[float, float]]:
    """``(t_start, h)`` pairs covering ``[0, T]``; the last step is shortened."""
    if not T > 0:
        raise ValueError("final time must be positive")
    K = max(1, math.ceil(T / dt - 1e-9))
    steps = [(k * dt, dt) for k in range(K - 1)]
    steps.append(((K - 1) * dt, T - (K - 1) * dt))
    return steps


def _step_counts(T: float, dt: float) -> tuple[int, float, float]:
    """Number of full steps, their length, and the final step length."""
    K = max(1, math.ceil(T / dt - 1e-9))
    return K - 1, dt, T - (K - 1) * dt


# ---------------------------------------------------------------------------
# single step


def _cayley_phase(theta, h):
    # (1 - i x)/(1 + i x) = exp(-2i arctan x)
    return -2.0 * np.arctan(0.5 * h * np.asarray(theta))


def implicit_midpoint_step(H, w, t: float, dt: float) -> np.ndarray:
    """One Cayley step ``(I + i dt H/2) w' = (I - i dt H/2) w``.

    ``H`` is a matrix, a 1-D array holding a diagonal, or a callable of time
    evaluated at the midpoint.
    """
    Hm = H(t + 0.5 * dt) if callable(H) else H
    Hm = np.asarray(Hm)
    w = np.asarray(w, dtype=complex)
    if Hm.ndim == 1:
        return (1 - 0.5j * dt * Hm) / (1 + 0.5j * dt * Hm) * w
    n = Hm.shape[0]
    I = np.eye(n)
    return np.linalg.solve(I + 0.5j * dt * Hm, (I - 0.5j * dt * Hm) @ w)


# ---------------------------------------------------------------------------
# plain Hamiltonians


def _phase_total(theta, T, cfg: EvolutionConfig, t0_dt=None):
    if cfg.scheme == "diagonal_exact":
        return -np.asarray(theta) * T
    K, h, hl = _step_counts(T, cfg.dt)
    return K * _cayley_phase(theta, h) + _cayley_phase(theta, hl)


def _evolve_diag(d, w, T, cfg):
    return np.exp(1j * _phase_total(d, T, cfg))[(...,) + (None,) * (w.ndim - 1)] * w


def _evolve_const(H, w, T, cfg):
    """Time-independent dense Hamiltonian; ``w`` may carry extra columns."""
    if cfg.scheme == "implicit_midpoint" and cfg.factor == "lu":
        K, h, hl = _step_counts(T, cfg.dt)
        I = np.eye(H.shape[0])
        for count, hh in ((K, h), (1, hl)):
            if count == 0:
                continue
            lu = sla.lu_factor(I + 0.5j * hh * H)
            B = I - 0.5j * hh * H
            for _ in range(count):
                w = sla.lu_solve(lu, B @ w)
        return w
    theta, V = np.linalg.eigh(H)
    ph = np.exp(1j * _phase_total(theta, T, cfg))
    c = V.conj().T @ w
    c = (ph[:, None] * c) if c.ndim == 2 else ph * c
    return V @ c


def _evolve_family(H: Callable, w, T, cfg, t0=0.0):
    for ts, h in time_steps(T, cfg.dt):
        tm = t0 + ts + 0.5 * h
        Hm = np.asarray(H(tm))
        if cfg.scheme == "diagonal_exact":
            theta, V = np.linalg.eigh(Hm)
            ph = np.exp(-1j * theta * h)
            c = V.conj().T @ w
            w = V @ (ph[:, None] * c if c.ndim == 2 else ph * c)
        else:
            w = implicit_midpoint_step(Hm, w, 0.0, h)
    return w


# ---------------------------------------------------------------------------
# Schrodingerised systems


def _is_zero(A, tol=1e-14) -> bool:
    A = np.asarray(A)
    return A.size == 0 or float(np.max(np.abs(A))) <= tol * max(1.0, A.shape[0])


def _evolve_blocks_const(S: SchrodSystem, C, T, cfg):
    H1s = S.shifted_h1(0.0)
    H2 = S.h2_at(0.0)
    if cfg.scheme == "splitting":
        return _evolve_blocks_split(S, C, T, cfg)
    if _is_zero(H1s):
        return _evolve_const(-H2, C, T, cfg)
    blocks = S.blocks(0.0)
    theta, V = np.linalg.eigh(blocks)
    c = np.einsum("lji,jl->li", V.conj(), C)
    c = np.exp(1j * _phase_total(theta, T, cfg)) * c
    return np.einsum("lij,lj->il", V, c)


def _evolve_blocks_split(S: SchrodSystem, C, T, cfg, t0=0.0):
    """Strang splitting between the ``p``-convection and the ``H2`` parts."""
    mu = S.p_axis.freqs
    for ts, h in time_steps(T, cfg.dt):
        tm = t0 + ts + 0.5 * h
        th1, V1 = np.linalg.eigh(S.shifted_h1(tm))
        th2, V2 = np.linalg.eigh(S.h2_at(tm))
        half = np.exp(-0.5j * h * np.outer(th1, mu))
        C = V1 @ (half * (V1.conj().T @ C))
        C = V2 @ (np.exp(1j * h * th2)[:, None] * (V2.conj().T @ C))
        C = V1 @ (half * (V1.conj().T @ C))
    return C


def _evolve_blocks_family(S: SchrodSystem, C, T, cfg, t0=0.0):
    if cfg.scheme == "splitting":
        return _evolve_blocks_split(S, C, T, cfg, t0)
    mu = S.p_axis.freqs
    n = S.n
    I = np.eye(n)
    for ts, h in time_steps(T, cfg.dt):
        tm = t0 + ts + 0.5 * h
        H1s = S.shifted_h1(tm)
        H2 = S.h2_at(tm)
        if _is_zero(H1s):
            if cfg.scheme == "diagonal_exact":
                th, V = np.linalg.eigh(-H2)
                C = V @ (np.exp(-1j * h * th)[:, None] * (V.conj().T @ C))
            else:
                lu = sla.lu_factor(I - 0.5j * h * H2)
                C = sla.lu_solve(lu, C + 0.5j * h * (H2 @ C))
            continue
        blocks = mu[:, None, None] * H1s[None] - H2[None]
        if cfg.scheme == "diagonal_exact":
            th, V = np.linalg.eigh(blocks)
            c = np.einsum("lji,jl->li", V.conj(), C) * np.exp(-1j * h * th)
            C = np.einsum("lij,lj->il", V, c)
        else:
            rhs = C.T[:, :, None] - 0.5j * h * (blocks @ C.T[:, :, None])
            C = np.linalg.solve(I[None] + 0.5j * h * blocks, rhs)[:, :, 0].T
    return C


def evolve(system, w0, T: float, config: EvolutionConfig | None = None, t0: float = 0.0):
    """Advance ``i dw/dt = H w`` from ``t0`` to ``t0 + T``.

    ``system`` is a :class:`SchrodSystem` (with ``w0`` an
    :class:`ExtendedState` or an ``(n, M_p)`` coefficient array), a Hermitian
    matrix, a 1-D diagonal, or a callable ``t -> H(t)``.  Time-independent
    problems integrate exactly the composed Cayley map; the last step is
    shortened so the run lands on ``T``.
    """
    cfg = config or EvolutionConfig()
    if isinstance(system, SchrodSystem):
        state = w0 if isinstance(w0, ExtendedState) else None
        C = state.coeffs if state is not None else np.asarray(w0, dtype=complex)
        flat = C.ndim == 1
        C = C.reshape(system.n, system.p_axis.M)
        if system.time_dependent:
            out = _evolve_blocks_family(system, C, T, cfg, t0)
        else:
            out = _evolve_blocks_const(system, C, T, cfg)
        if state is not None:
            return state.with_coeffs(out, state.t + T)
        return out.reshape(-1) if flat else out
    w = np.asarray(w0, dtype=complex)
    if cfg.scheme == "splitting":
        raise ValueError("splitting needs a Schrodingerised system")
    if callable(system):
        return _evolve_family(system, w, T, cfg, t0)
    H = np.asarray(system)
    if H.ndim == 1:
        return _evolve_diag(H, w, T, cfg)
    return _evolve_const(H, w, T, cfg)


# ---------------------------------------------------------------------------
# recovery


def p_star(H1, T: float, lambda0: float = 0.0, times=None) -> float:
    """``max((lambda_n(H1) - lambda0) T, 0)``."""
    _, lamn = eigen_extremes(H1, times)
    return max((lamn - lambda0) * T, 0.0)


def snap_up(p_axis: FourierAxis, p: float, tol: float = 1e-9) -> int:
    """Index of the first node ``>= p`` (within ``tol``)."""
    idx = int(math.ceil((p - p_axis.L) / p_axis.step - tol))
    if idx < 0 or idx >= p_axis.M:
        raise RecoveryRegionError(f"p={p:g} lies outside the p axis")
    return idx


def _state_values(state, p_axis, lambda0, T):
    if isinstance(state, ExtendedState):
        return state.values, state.p_axis, state.lambda0, state.t, state.unshift_factor
    lam = 0.0 if lambda0 is None else float(lambda0)
    TT = 0.0 if T is None else float(T)
    return np.asarray(state), p_axis, lam, TT, math.exp(lam * TT)


def recover(state, p_axis: FourierAxis | None = None, p_k: float = 0.0, mode: str = "point",
            lambda0: float | None = None, T: float | None = None, pstar: float | None = None,
            override: bool = False, quadrature: str = "left") -> np.ndarray:
    """Undo the warped lift at ``p_k`` and the spectral shift.

    ``state`` is an :class:`ExtendedState` or an ``(n, M_p)`` array of
    ``p``-physical samples.  Point mode returns ``e^{lam0 T} e^{p_k} v(p_k)``,
    integral mode ``e^{lam0 T} e^{p_k} sum_{p_j >= p_k} v(p_j) dp``.
    """
    v, ax, lam, TT, fac = _state_values(state, p_axis, lambda0, T)
    if pstar is not None and p_k < pstar - 1e-12 and not override:
        raise RecoveryRegionError(f"p_k={p_k:g} is below p*={pstar:g}")
    k = snap_up(ax, p_k)
    pk = ax.nodes[k]
    if mode == "point":
        out = v[:, k]
    elif mode == "integral":
        w = np.full(ax.M - k, ax.step)
        if quadrature == "trapezoid":
            w[0] *= 0.5
        elif quadrature != "left":
            raise ValueError(f"unknown quadrature {quadrature!r}")
        out = v[:, k:] @ w
    else:
        raise ValueError(f"unknown recovery mode {mode!r}")
    return fac * math.exp(pk) * out


def recover_at(state, points, p_axis: FourierAxis | None = None, lambda0: float | None = None,
               T: float | None = None) -> np.ndarray:
    """Point recovery at arbitrary ``p`` using the trigonometric interpolant.

    Returns shape ``(n, len(points))``.
    """
    v, ax, _, _, fac = _state_values(state, p_axis, lambda0, T)
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    return fac * ax.interp(v, pts, axis=-1) * np.exp(pts)[None, :]


@dataclass(frozen=True)
class RecoveryReport:
    """Recovered vector with the bookkeeping used to produce it."""

    recovered: np.ndarray
    p_k: float
    mode: str
    unshift_factor: float
    admissible: np.ndarray
    probabilities: np.ndarray
    p_star: float
    errors: dict = field(default_factory=dict)


def recovery_report(state: ExtendedState, p_k: float | None = None, mode: str = "point",
                    pstar: float = 0.0, reference=None, component=slice(None)) -> RecoveryReport:
    """Recover at ``p_k`` (default: first node ``>= p*``) and collect diagnostics."""
    ax = state.p_axis
    k = snap_up(ax, pstar if p_k is None else p_k)
    pk = float(ax.nodes[k])
    rec = recover(state, p_k=pk, mode=mode, pstar=pstar)
    meas = measurement_probability(state.values, ax, pstar)
    adm = ax.nodes[ax.nodes >= pstar - 1e-12]
    errors = {}
    if reference is not None:
        errors["max_abs"] = float(np.max(np.abs(rec[component] - np.asarray(reference))))
    return RecoveryReport(rec, pk, mode, state.unshift_factor, adm, meas.probabilities, pstar, errors)


# ---------------------------------------------------------------------------
# measurement bookkeeping


@dataclass(frozen=True)
class MeasurementReport:
    probabilities: np.ndarray
    p_star: float | None
    aggregate: float | None


def measurement_probability(values, p_axis: FourierAxis, pstar: float | None = None) -> MeasurementReport:
    """Probability of each ``p`` outcome, ``|v(p_k)|^2 / sum_l |v(p_l)|^2``."""
    v = np.asarray(values)
    w = np.sum(np.abs(v) ** 2, axis=0)
    total = float(np.sum(w))
    if not total > 0:
        raise ValueError("state has zero norm")
    probs = w / total
    agg = None
    if pstar is not None:
        agg = float(np.sum(probs[p_axis.nodes >= pstar - 1e-12]))
    return MeasurementReport(probs, pstar, agg)


def predicted_aggregate(uT, u0, pstar: float) -> float:
    """``|e^{-p*} u(T)|^2 / (2 |u(0)|^2)``, valid for the ``e^{-|p|}`` profile."""
    return 0.5 * math.exp(-2 * pstar) * float(np.sum(np.abs(uT) ** 2)) / float(np.sum(np.abs(u0) ** 2))


# ---------------------------------------------------------------------------
# recovery scans


@dataclass(frozen=True)
class ScanResult:
    tolerance: float
    nodes: np.ndarray
    errors: np.ndarray

    @property
    def card(self) -> int:
        return int(self.nodes.size)


def _tolerance(rule, dp: float, ref_norm: float) -> float:
    if isinstance(rule, (int, float)):
        return float(rule)
    return {"dp": dp, "dp2": dp * dp, "dp_rel": dp * ref_norm}[rule]


def recovery_scan(state, p_axis: FourierAxis | None, reference, tolerances: Sequence = ("dp",),
                  lambda0: float | None = None, T: float | None = None, pstar: float | None = None,
                  component=slice(None)) -> dict:
    """For each tolerance rule, the nodes whose point recovery is that accurate.

    Rules are ``'dp'`` (``dp``), ``'dp2'`` (``dp**2``), ``'dp_rel'``
    (``dp * |reference|_inf``) or explicit numbers.  When ``pstar`` is given
    only nodes at or above it are considered.
    """
    v, ax, _, _, fac = _state_values(state, p_axis, lambda0, T)
    ref = np.asarray(reference)
    rec = fac * v[component] * np.exp(ax.nodes)[None, :]
    err = np.max(np.abs(rec - ref.reshape(-1, 1)), axis=0)
    mask = np.ones(ax.M, bool) if pstar is None else ax.nodes >= pstar - 1e-12
    ref_norm = float(np.max(np.abs(ref)))
    out = {}
    for rule in tolerances:
        tol = _tolerance(rule, ax.step, ref_norm)
        sel = mask & (err <= tol)
        out[rule] = ScanResult(tol, ax.nodes[sel], err[sel])
    return out
