"""Semiclassical surface hopping with a fast-phase variable.

Original unknowns ``f = (f+, f-, Re f^i, Im f^i)`` on ``(x, v)`` obey

    f_t + v f_x - A'(x) f_v = C f,   A = diag(U + E, U - E, U, U),

with a stiff ``2E/eps`` rotation of the coherence.  With the phase
``S_t + v S_x - U' S_v = 2E`` and ``tau = S/eps`` the augmented profiles
``g = (F+, F-, G, H)(t, x, v, tau)`` satisfy a system whose ``1/eps``
terms are transport in ``tau`` only.  Arrays are ordered
``(component, x, v, tau)`` and the Schrodingerised split solver appends
the ``p`` Fourier index as a last axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .errors import CapExceededError, DegenerateCorrectionError
from .evolve import EvolutionConfig, evolve, p_star, recover, time_steps
from .schrodingerize import ExtendedState, SchrodSystem, extension_profile
from .spectral import FourierAxis, collocation_ops, make_axis

__all__ = [
    "HoppingProblem",
    "HoppingPhase",
    "HoppingAssembly",
    "HoppingSolution",
    "paper_problem",
    "hopping_initial",
    "build_hopping_phase",
    "assemble_hopping",
    "solve_hopping",
    "reconstruct",
    "densities",
    "reference_split_solver",
    "DIRECT_DIM_CAP",
]

DIRECT_DIM_CAP = 4096


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class HoppingProblem:
    """Potentials, coupling, data and grids.  ``b^+ = b^- = 0`` and ``b^i`` is real."""

    E: Callable
    dE: Callable
    b: Callable
    eps: float
    f_plus: Callable
    f_minus: Callable
    f_i: Callable
    x_axis: FourierAxis
    v_axis: FourierAxis
    tau_axis: FourierAxis
    U: Callable = _zero
    dU: Callable = _zero

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def grid(self):
        return np.meshgrid(self.x_axis.nodes, self.v_axis.nodes, indexing="ij")

    @property
    def shape(self):
        return (4, self.x_axis.M, self.v_axis.M, self.tau_axis.M)

    @property
    def potential_free(self) -> bool:
        return bool(np.all(np.asarray(self.dU(self.x_axis.nodes)) == 0))

    def b_grid(self) -> np.ndarray:
        X, V = self.grid
        return np.real(np.broadcast_to(self.b(X, V), X.shape)).astype(float)

    def speeds_v(self) -> np.ndarray:
        """``v``-transport speeds ``d/dx diag(-U-E, -U+E, -U, -U)`` at the ``x`` nodes."""
        x = self.x_axis.nodes
        dU = np.asarray(self.dU(x), float) * np.ones_like(x)
        dE = np.asarray(self.dE(x), float) * np.ones_like(x)
        return np.stack([-dU - dE, -dU + dE, -dU, -dU])

    def initial_fields(self):
        X, V = self.grid
        return (np.broadcast_to(self.f_plus(X, V), X.shape).astype(complex),
                np.broadcast_to(self.f_minus(X, V), X.shape).astype(complex),
                np.broadcast_to(self.f_i(X, V), X.shape).astype(complex))


def paper_problem(eps: float, k: int = 3, l: int = 4, m: int = 4) -> HoppingProblem:
    """Benchmark with ``U = 0``, ``E = 1 - cos(x/2) + eps`` and ``b = -sin(v+1)/2``.

    ``k``, ``l``, ``m`` are the qubit counts of the ``tau``, ``v`` and ``x`` axes.
    """
    g = lambda v: np.exp(-v ** 2 / 2) / math.sqrt(2 * np.pi)
    fpm = lambda x, v: (1 + 0.5 * np.cos(x)) * g(v)
    return HoppingProblem(
        E=lambda x: 1 - np.cos(x / 2) + eps,
        dE=lambda x: 0.5 * np.sin(x / 2),
        b=lambda x, v: -0.5 * np.sin(v + 1) + 0 * x,
        eps=eps,
        f_plus=fpm,
        f_minus=fpm,
        f_i=lambda x, v: ((1 + 0.5 * np.sin(x)) + 1j * (1 + 0.5 * np.cos(x))) * g(v),
        x_axis=make_axis(-2 * np.pi, 2 * np.pi, m),
        v_axis=make_axis(-2 * np.pi, 2 * np.pi, l),
        tau_axis=make_axis(0.0, 2 * np.pi, k),
    )


# ---------------------------------------------------------------------------
# initial data and phase


def hopping_initial(problem: HoppingProblem) -> np.ndarray:
    """Corrected profiles ``(F+, F-, G, H)(0)``, shape ``(4, M_x, M_v, M_tau)``."""
    x = problem.x_axis.nodes
    E = np.asarray(problem.E(x), float) * np.ones_like(x)
    if np.any(E <= 0):
        raise DegenerateCorrectionError("E must be positive at every x node")
    fp, fm, fi = (f[..., None] for f in problem.initial_fields())
    b = problem.b_grid()[..., None]
    tau = problem.tau_axis.nodes
    r = problem.eps / (2 * E)[:, None, None]
    corr = 1j * r * (b * fi * (1 - np.exp(-1j * tau)) - b * np.conj(fi) * (1 - np.exp(1j * tau)))
    shape = problem.shape[1:]
    g = np.empty(problem.shape, complex)
    g[0] = np.broadcast_to(fp - corr, shape)
    g[1] = np.broadcast_to(fm + corr, shape)
    g[2] = np.broadcast_to(fi.real - r * b * (fp - fm) * np.sin(tau), shape)
    g[3] = np.broadcast_to(fi.imag + r * b * (fp - fm) * (np.cos(tau) - 1), shape)
    return g


@dataclass(frozen=True)
class HoppingPhase:
    """``S``, ``S_x`` and ``S_v`` on the ``(x, v)`` grid as functions of time."""

    S: Callable
    dSdx: Callable
    dSdv: Callable
    kind: str

    def integral_dSdv(self, t1: float, t2: float) -> np.ndarray:
        """Two-point Gauss rule for the time integral of ``S_v`` over ``[t1, t2]``."""
        h = t2 - t1
        c = 0.5 * (t1 + t2)
        d = 0.5 * h / math.sqrt(3)
        return 0.5 * h * (self.dSdv(c - d) + self.dSdv(c + d))


def build_hopping_phase(problem: HoppingProblem, T: float = 1.0, method: str = "auto",
                        quad: int = 64) -> HoppingPhase:
    """Phase of the coherence.

    ``'exact'`` (only ``U = 0``) integrates ``2E`` along straight
    characteristics with Gauss-Legendre quadrature; ``'characteristics'``
    traces the curved characteristics of ``x' = v, v' = -U'(x)`` back from
    every node with their Jacobian, so ``S_x`` and ``S_v`` need no
    differentiation in ``v`` (``S`` is not periodic in ``v``).
    """
    X, V = problem.grid
    if method == "auto":
        method = "exact" if problem.potential_free else "characteristics"
    if method == "exact":
        if not problem.potential_free:
            raise ValueError("the quadrature phase needs U = 0")
        z, w = np.polynomial.legendre.leggauss(quad)
        z = 0.5 * (z + 1)
        w = 0.5 * w

        def field(t, kernel):
            if t == 0:
                return np.zeros(X.shape)
            s = t * z
            arg = X[None] - V[None] * s[:, None, None]
            return t * np.tensordot(w, kernel(s[:, None, None], arg), axes=1)

        return HoppingPhase(
            lambda t: field(t, lambda s, a: 2 * np.asarray(problem.E(a), float)),
            lambda t: field(t, lambda s, a: 2 * np.asarray(problem.dE(a), float)),
            lambda t: field(t, lambda s, a: -2 * s * np.asarray(problem.dE(a), float)),
            "exact")
    if method == "characteristics":
        x0, v0 = X.reshape(-1), V.reshape(-1)
        n = x0.size
        hd = 1e-5

        def ddU(x):
            return (np.asarray(problem.dU(x + hd), float) - np.asarray(problem.dU(x - hd), float)) / (2 * hd)

        def rhs(sig, y):
            # backward flow in sig = t - s with Jacobian columns d/dx and d/dv
            Xs, Vs, Jxx, Jxv, Jvx, Jvv = y[:6 * n].reshape(6, n)
            dU = np.asarray(problem.dU(Xs), float) * np.ones(n)
            d2 = ddU(Xs) * np.ones(n)
            E2 = 2 * np.asarray(problem.E(Xs), float) * np.ones(n)
            dE2 = 2 * np.asarray(problem.dE(Xs), float) * np.ones(n)
            return np.concatenate([-Vs, dU, -Jvx, -Jvv, d2 * Jxx, d2 * Jxv,
                                   E2, dE2 * Jxx, dE2 * Jxv])

        y0 = np.concatenate([x0, v0, np.ones(n), np.zeros(n), np.zeros(n), np.ones(n), np.zeros(3 * n)])
        shape = X.shape

        @lru_cache(maxsize=512)
        def trace(t):
            if t == 0:
                return np.zeros((3,) + shape)
            sol = solve_ivp(rhs, (0.0, t), y0, method="DOP853", rtol=1e-11, atol=1e-12)
            return sol.y[6 * n:, -1].reshape((3,) + shape)

        return HoppingPhase(lambda t: trace(float(t))[0], lambda t: trace(float(t))[1],
                            lambda t: trace(float(t))[2], "characteristics")
    raise ValueError(f"unknown phase method {method!r}")


# ---------------------------------------------------------------------------
# assembly


def _coupling(b, tau):
    """Pointwise 4x4 coupling ``C(x, v, tau)``, shape ``(4, 4) + b.shape + tau.shape``."""
    b = np.asarray(b, float)[..., None]
    c, s = np.cos(tau), np.sin(tau)
    z = np.zeros(np.broadcast_shapes(b.shape, tau.shape))
    C = np.array([[z, z, 2 * b * c, 2 * b * s],
                  [z, z, -2 * b * c, -2 * b * s],
                  [-b * c, b * c, z, z],
                  [-b * s, b * s, z, z]])
    return C


@dataclass(frozen=True)
class HoppingAssembly:
    """Semi-discrete generator on ``(component, x, v, tau)``."""

    problem: HoppingProblem
    phase: HoppingPhase
    coupling: np.ndarray = field(repr=False)
    _ops: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return int(np.prod(self.problem.shape))

    @property
    def lambda_n(self) -> float:
        """Largest eigenvalue of ``H1``: ``max |b| / sqrt(2)`` over the grid."""
        return float(np.max(np.abs(self.problem.b_grid()))) / math.sqrt(2)

    def tau_speeds(self, t: float) -> np.ndarray:
        """``B = diag(E+/eps, E-/eps, 2E/eps, 2E/eps)``, shape ``(4, M_x, M_v)``."""
        p = self.problem
        x = p.x_axis.nodes
        E = (np.asarray(p.E(x), float) * np.ones_like(x))[:, None]
        dE = (np.asarray(p.dE(x), float) * np.ones_like(x))[:, None]
        Sv = self.phase.dSdv(t)
        two = 2 * E * np.ones_like(Sv)
        return np.stack([two - dE * Sv, two + dE * Sv, two, two]) / p.eps

    def _coupling_matrix(self):
        C = self.coupling
        blocks = [[sp.diags(C[i, j].reshape(-1)) for j in range(4)] for i in range(4)]
        return sp.bmat(blocks, format="csr")

    def h1(self) -> sp.csr_matrix:
        """Pointwise ``(C + C^T)/2``."""
        C = self._coupling_matrix()
        return ((C + C.T) * 0.5).tocsr()

    def transport(self, t: float) -> sp.csr_matrix:
        """Hermitian transport operator ``K`` with generator part ``-i K``."""
        o = self._ops
        B = self.tau_speeds(t)
        Btau = sp.block_diag([sp.kron(sp.diags(B[c].reshape(-1)), o["Pt"]) for c in range(4)])
        return (o["X"] + o["Av"] + Btau).tocsr()

    def generator(self, t: float) -> sp.csr_matrix:
        return (-1j * self.transport(t) + self._coupling_matrix()).tocsr()

    def h2(self, t: float) -> sp.csr_matrix:
        C = self._coupling_matrix()
        return (-self.transport(t) - 1j * (C - C.T) * 0.5).tocsr()


def assemble_hopping(problem: HoppingProblem, phase: HoppingPhase | None = None,
                     T: float = 1.0) -> HoppingAssembly:
    """Sparse Kronecker assembly of the spectral semi-discrete system."""
    phase = phase or build_hopping_phase(problem, T)
    xa, va, ta = problem.x_axis, problem.v_axis, problem.tau_axis
    Px = sp.csr_matrix(collocation_ops(xa).P)
    Pv = sp.csr_matrix(collocation_ops(va).P)
    Pt = sp.csr_matrix(collocation_ops(ta).P)
    Iv, It = sp.identity(va.M), sp.identity(ta.M)
    Xop = sp.kron(sp.identity(4), sp.kron(Px, sp.kron(sp.diags(va.nodes), It)))
    A = problem.speeds_v()
    Av = sp.block_diag([sp.kron(sp.diags(A[c]), sp.kron(Pv, It)) for c in range(4)])
    C = _coupling(problem.b_grid(), ta.nodes)
    return HoppingAssembly(problem, phase, C, {"X": Xop, "Av": Av, "Pt": Pt, "Iv": Iv})


# ---------------------------------------------------------------------------
# split evolution


class _Transport:
    """Exact Fourier-multiplier transports on arrays of shape ``(4, M_x, M_v, M_tau[, M_p])``."""

    def __init__(self, asm: HoppingAssembly, ndim: int):
        p = asm.problem
        self.asm = asm
        self.ndim = ndim
        pad = (1,) * (ndim - 4)
        kx = p.x_axis.freqs_fft
        kv = p.v_axis.freqs_fft
        self.kt = p.tau_axis.freqs_fft.reshape((1, 1, 1, -1) + pad)
        self.xmult = (kx[:, None] * p.v_axis.nodes[None, :]).reshape((1,) + (kx.size, kv.size, 1) + pad)
        A = p.speeds_v()
        self.vmult = (A[:, :, None] * kv[None, None, :]).reshape(A.shape + (kv.size, 1) + pad)
        x = p.x_axis.nodes
        self.E = (np.asarray(p.E(x), float) * np.ones_like(x))[:, None]
        self.dE = (np.asarray(p.dE(x), float) * np.ones_like(x))[:, None]
        self.pad = pad

    def x(self, g, h):
        hat = np.fft.fft(g, axis=1)
        hat *= np.exp(-1j * h * self.xmult)
        return np.fft.ifft(hat, axis=1)

    def v(self, g, h):
        hat = np.fft.fft(g, axis=2)
        hat *= np.exp(-1j * h * self.vmult)
        return np.fft.ifft(hat, axis=2)

    def tau(self, g, t1, t2):
        eps = self.asm.problem.eps
        I = self.asm.phase.integral_dSdv(t1, t2)
        base = 2 * self.E * (t2 - t1) * np.ones_like(I)
        shift = np.stack([base - self.dE * I, base + self.dE * I, base, base]) / eps
        hat = np.fft.fft(g, axis=3)
        hat *= np.exp(-1j * shift.reshape(shift.shape + (1,) + self.pad) * self.kt)
        return np.fft.ifft(hat, axis=3)


def _coupling_step(g, b, tau, h, mu=None):
    """Exact coupling substep per node.

    In the coordinates ``sigma = F+ + F-``, ``d = F+ - F-``,
    ``q = cos(tau) G + sin(tau) H`` and ``q' = -sin(tau) G + cos(tau) H`` only
    ``(d, q)`` move.  Without ``mu`` the original generator ``C`` acts; with
    ``mu`` (p frequencies, last axis) the Schrodingerised block
    ``C_skew - i mu C_sym`` acts, minus its scalar ``lambda0`` phase.
    """
    c = np.cos(tau)[None, None, :]
    s = np.sin(tau)[None, None, :]
    bb = b[:, :, None]
    if mu is not None:
        c, s, bb = c[..., None], s[..., None], bb[..., None]
        k12 = bb * (3 - 1j * mu)
        k21 = -bb * (3 + 1j * mu) / 2
        om = np.abs(bb) * np.sqrt((9 + mu ** 2) / 2)
    else:
        k12 = 4 * bb
        k21 = -bb
        om = 2 * np.abs(bb)
    cw = np.cos(om * h)
    sw = h * np.sinc(om * h / np.pi)
    sig = g[0] + g[1]
    d = g[0] - g[1]
    q = c * g[2] + s * g[3]
    qp = -s * g[2] + c * g[3]
    d, q = cw * d + sw * k12 * q, sw * k21 * d + cw * q
    out = np.empty_like(g)
    out[0] = 0.5 * (sig + d)
    out[1] = 0.5 * (sig - d)
    out[2] = c * q - s * qp
    out[3] = s * q + c * qp
    return out


def _split_evolve(asm: HoppingAssembly, g, T, dt, mu=None):
    """Strang sequence ``X V Tau C Tau V X`` with merged ``X`` half steps."""
    tr = _Transport(asm, g.ndim)
    b = asm.problem.b_grid()
    tau = asm.problem.tau_axis.nodes
    steps = time_steps(T, dt)
    g = tr.x(g, 0.5 * steps[0][1])
    for i, (t, h) in enumerate(steps):
        g = tr.v(g, 0.5 * h)
        g = tr.tau(g, t, t + 0.5 * h)
        g = _coupling_step(g, b, tau, h, mu)
        g = tr.tau(g, t + 0.5 * h, t + h)
        g = tr.v(g, 0.5 * h)
        hx = 0.5 * h + (0.5 * steps[i + 1][1] if i + 1 < len(steps) else 0.0)
        g = tr.x(g, hx)
    return g


# ---------------------------------------------------------------------------
# solving and diagnostics


@dataclass
class HoppingSolution:
    g: np.ndarray
    f: np.ndarray
    S: np.ndarray
    T: float
    info: dict = field(default_factory=dict)


def reconstruct(g: np.ndarray, S: np.ndarray, eps: float, tau_axis: FourierAxis) -> np.ndarray:
    """``(f+, f-, f^i)`` on ``(x, v)`` from the profiles at ``tau* = S/eps``."""
    tstar = np.mod(S / eps, 2 * np.pi)
    vals = np.stack([tau_axis.interp_rows(g[c], tstar) for c in range(4)])
    fi = np.exp(-1j * tstar) * (vals[2] + 1j * vals[3])
    return np.stack([vals[0], vals[1], fi])


def densities(f: np.ndarray, v_axis: FourierAxis) -> np.ndarray:
    """Rectangle rule over ``v`` (last axis); returns one row per field."""
    return np.sum(f, axis=-1) * v_axis.step


def solve_hopping(problem: HoppingProblem, T: float = 2.0, dt: float = 1e-2, strategy: str = "split",
                  coupling: str = "schrodinger", lambda0="auto", p_axis: FourierAxis | None = None,
                  n: int = 7, p_k: float | None = None, profile="cubic", phase: str = "auto",
                  config: EvolutionConfig | None = None) -> HoppingSolution:
    """Evolve the corrected profiles to ``T`` and reconstruct ``f``.

    ``strategy='split'`` alternates exact transports with a coupling substep
    that is either Schrodingerised on ``p_axis`` (default ``[-5, 5]`` with
    ``2**n`` nodes) or exponentiated directly (``coupling='exact'``).
    ``strategy='direct'`` Schrodingerises the whole sparse generator and is
    meant for small grids.
    """
    ph = build_hopping_phase(problem, T, phase)
    asm = assemble_hopping(problem, ph, T)
    g0 = hopping_initial(problem)
    lam0 = asm.lambda_n if lambda0 == "auto" else float(lambda0)
    pax = p_axis or make_axis(-5.0, 5.0, n)
    info = {"strategy": strategy, "coupling": coupling, "lambda_n": asm.lambda_n, "phase": ph.kind}
    if strategy == "split" and coupling == "exact":
        gT = _split_evolve(asm, g0, T, dt)
    elif strategy == "split":
        prof = np.asarray(extension_profile(profile)(pax.nodes), float)
        W = g0[..., None] * pax.to_coeffs(prof)[None, None, None, None, :]
        mu = pax.freqs
        W = _split_evolve(asm, W, T, dt, mu)
        W *= np.exp(1j * mu * lam0 * T)
        state = ExtendedState(W.reshape(-1, pax.M), pax, lam0, T)
        ps = max((asm.lambda_n - lam0) * T, 0.0)
        pk = ps if p_k is None else p_k
        gT = recover(state, p_k=pk, pstar=ps).reshape(problem.shape)
        info.update(lambda0=lam0, p_star=ps, p_axis=pax)
    elif strategy == "direct":
        if asm.dim > DIRECT_DIM_CAP:
            raise CapExceededError(f"direct strategy needs dim <= {DIRECT_DIM_CAP}, got {asm.dim}; "
                                   "use strategy='split'")
        H1 = asm.h1().toarray()
        S_ = SchrodSystem(H1, lambda t: asm.h2(t).toarray(), pax, lam0, extension_profile(profile), T)
        out = evolve(S_, S_.initial_state(g0.reshape(-1)), T, config or EvolutionConfig(dt=dt))
        ps = p_star(H1, T, lam0)
        pk = ps if p_k is None else p_k
        gT = recover(out, p_k=pk, pstar=ps).reshape(problem.shape)
        info.update(lambda0=lam0, p_star=ps, p_axis=pax)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    S_T = ph.S(T)
    f = reconstruct(gT, S_T, problem.eps, problem.tau_axis)
    info["imag_f_pm"] = float(np.max(np.abs(f[:2].imag)))
    return HoppingSolution(gT, f, S_T, T, info)


def reference_split_solver(problem: HoppingProblem, T: float, dt: float, m_x: int | None = None,
                           m_v: int | None = None):
    """Strang splitting on the original kinetic system.

    Transports in ``x`` and ``v`` are exact Fourier multipliers; the stiff
    source is a closed-form rotation of ``(d/2, Re f^i, Im f^i)`` per node,
    ``d = f+ - f-``, with ``f+ + f-`` frozen.  Returns ``x``, ``v`` and
    ``(f+, f-, f^i)`` with shape ``(3, M_x, M_v)``.
    """
    xa = problem.x_axis if m_x is None else make_axis(problem.x_axis.L, problem.x_axis.R, m_x)
    va = problem.v_axis if m_v is None else make_axis(problem.v_axis.L, problem.v_axis.R, m_v)
    X, V = np.meshgrid(xa.nodes, va.nodes, indexing="ij")
    fp = np.broadcast_to(problem.f_plus(X, V), X.shape).astype(complex)
    fm = np.broadcast_to(problem.f_minus(X, V), X.shape).astype(complex)
    fi = np.broadcast_to(problem.f_i(X, V), X.shape).astype(complex)
    f = np.stack([fp, fm, fi.real.astype(complex), fi.imag.astype(complex)])
    x = xa.nodes
    dU = np.asarray(problem.dU(x), float) * np.ones_like(x)
    dE = np.asarray(problem.dE(x), float) * np.ones_like(x)
    # f_t - A'(x) f_v = 0 moves with speed -A'
    vs = -np.stack([dU + dE, dU - dE, dU, dU])
    kx, kv = xa.freqs_fft, va.freqs_fft
    b = np.real(np.broadcast_to(problem.b(X, V), X.shape))
    w = 2 * (np.asarray(problem.E(x), float) * np.ones_like(x))[:, None] / problem.eps * np.ones_like(b)
    K = max(1, math.ceil(T / dt - 1e-9))
    h = T / K
    xhalf = np.exp(-0.5j * h * kx[:, None] * va.nodes[None, :])[None]
    xfull = xhalf ** 2
    vmul = np.exp(-0.5j * h * vs[:, :, None] * kv[None, None, :])
    # rotation of y = (d/2, R, I) generated by [[0, 2b, 0], [-2b, 0, w], [0, -w, 0]]
    th = np.sqrt(w ** 2 + 4 * b ** 2)
    Kmat = np.zeros((3, 3) + b.shape)
    Kmat[0, 1], Kmat[1, 0] = 2 * b, -2 * b
    Kmat[1, 2], Kmat[2, 1] = w, -w
    K2 = np.einsum("ij...,jk...->ik...", Kmat, Kmat)
    sn = h * np.sinc(th * h / np.pi)
    cs = np.where(th * h > 1e-6, (1 - np.cos(th * h)) / np.where(th > 0, th, 1) ** 2, 0.5 * h * h)
    R = np.eye(3)[:, :, None, None] + sn * Kmat + cs * K2
    f = np.fft.ifft(xhalf * np.fft.fft(f, axis=1), axis=1)
    for k in range(K):
        f = np.fft.ifft(vmul * np.fft.fft(f, axis=2), axis=2)
        y = np.stack([0.5 * (f[0] - f[1]), f[2], f[3]])
        y = np.einsum("ij...,j...->i...", R, y)
        sig = f[0] + f[1]
        f = np.stack([0.5 * sig + y[0], 0.5 * sig - y[0], y[1], y[2]])
        f = np.fft.ifft(vmul * np.fft.fft(f, axis=2), axis=2)
        f = np.fft.ifft((xfull if k + 1 < K else xhalf) * np.fft.fft(f, axis=1), axis=1)
    out = np.stack([f[0], f[1], f[2] + 1j * f[3]])
    return x, va.nodes, out
