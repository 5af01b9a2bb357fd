"""Order-of-magnitude resource counts for the simulated Hamiltonians.

Every count evaluates an O-expression with unit constants, so numbers are
order estimates rather than circuit sizes.  Logarithms are natural except
qubit and gate counts, which use base 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "HamiltonianStats",
    "BoundCheck",
    "QueryEstimate",
    "ResourceReport",
    "GATE_FACTOR_FORMULA",
    "hamiltonian_stats",
    "check_bounds",
    "lemma_queries",
    "b_smax",
    "schrodingerization_queries",
    "gate_count_constant",
    "resource_report",
]

GATE_FACTOR_FORMULA = "O(m_H + n polylog(n)) additional gates, n = bits of matrix-element precision"


@dataclass(frozen=True)
class HamiltonianStats:
    sparsity: int
    max_norm: float
    qubits: int
    dim: int


def _stats_single(H, tol):
    if sp.issparse(H):
        A = sp.csr_matrix(H, copy=True)
        A.data[np.abs(A.data) <= tol] = 0
        A.eliminate_zeros()
        rows = np.diff(A.indptr)
        cols = np.diff(A.tocsc().indptr)
        s = int(max(rows.max(initial=0), cols.max(initial=0)))
        mx = float(np.max(np.abs(A.data))) if A.nnz else 0.0
        return s, mx, A.shape[0]
    A = np.asarray(H)
    nz = np.abs(A) > tol
    s = int(max(nz.sum(axis=0).max(initial=0), nz.sum(axis=1).max(initial=0)))
    return s, float(np.max(np.abs(A), initial=0.0)), A.shape[0]


def hamiltonian_stats(H, tol: float = 1e-14) -> HamiltonianStats:
    """Sparsity, max-norm and qubit count of ``H``.

    ``H`` is a dense or sparse matrix, or a list of Kronecker factors whose
    product is the operator (sparsity and max-norm are multiplicative).
    """
    if isinstance(H, (list, tuple)):
        s, mx, dim = 1, 1.0, 1
        for F in H:
            si, mi, di = _stats_single(F, tol)
            s, mx, dim = s * si, mx * mi, dim * di
    else:
        s, mx, dim = _stats_single(H, tol)
    return HamiltonianStats(max(s, 1), mx, max(1, math.ceil(math.log2(dim))) if dim > 1 else 1, dim)


@dataclass(frozen=True)
class BoundCheck:
    """Measured sparsity and max-norm of ``H`` against structural bounds."""

    sparsity: int
    sparsity_bound: int
    max_norm: float
    max_norm_bound: float
    max_norm_bound_dp: float
    ok: bool


def check_bounds(H, H1, H2, mu_max: float, dp: float | None = None, tol: float = 1e-14) -> BoundCheck:
    """Compare ``H = H1 (x) D_p - H2 (x) I`` with its sparsity and max-norm bounds.

    ``H1`` must already include any spectral shift.  The max-norm bound uses
    ``||D_p||_max = mu_max``; the variant with ``1/dp`` is reported alongside.
    """
    sH = hamiltonian_stats(H, tol)
    s1 = hamiltonian_stats(H1, tol)
    s2 = hamiltonian_stats(H2, tol)
    sb = s1.sparsity + s2.sparsity
    mb = s1.max_norm * mu_max + s2.max_norm
    mdp = s1.max_norm / dp + s2.max_norm if dp else float("nan")
    ok = sH.sparsity <= sb and sH.max_norm <= mb * (1 + 1e-12) + 1e-300
    return BoundCheck(sH.sparsity, sb, sH.max_norm, mb, mdp, bool(ok))


def _check_eps(eps: float):
    if not 0 < eps < 1:
        raise ValueError(f"tolerance must lie in (0, 1), got {eps}")


def lemma_queries(s: int, T: float, max_norm: float, eps: float) -> float:
    """``s T ||H||_max + log(1/eps) / log log(1/eps)`` for sparse Hamiltonian simulation.

    The second term is only meaningful where ``log log(1/eps) > 0``, i.e.
    ``eps < 1/e``; larger tolerances are rejected.
    """
    _check_eps(eps)
    L = math.log(1 / eps)
    if math.log(L) <= 0:
        raise ValueError(f"log log(1/eps) must be positive, got eps={eps}")
    return s * T * max_norm + L / math.log(L)


def b_smax(b_samples) -> float:
    """Root-sum-of-squares over components of the time-sup of ``|b_i(t)|``.

    ``b_samples`` has shape ``(n_times, n)`` or ``(n,)`` for constant forcing.
    """
    b = np.abs(np.atleast_2d(np.asarray(b_samples)))
    return float(np.sqrt(np.sum(np.max(b, axis=0) ** 2)))


@dataclass(frozen=True)
class QueryEstimate:
    hamiltonian: float
    state_preparation: float
    smooth: bool


def schrodingerization_queries(norm_u0: float, norm_uT: float, smax_b: float, alpha_H: float,
                               T: float, mu_max: float, eps: float,
                               smooth: bool = False) -> QueryEstimate:
    """Hamiltonian-simulation and state-preparation query counts.

    With ``r = (||u0|| + T ||b||_smax)/||u(T)||`` the general count is
    ``r (alpha_H T mu_max + log(mu_max r / eps))`` and the smooth-profile
    count is ``r alpha_H T log(1/eps)``; state preparation costs ``r``.
    """
    _check_eps(eps)
    if not norm_uT > 0:
        raise ValueError("final norm must be positive")
    r = (norm_u0 + T * smax_b) / norm_uT
    if smooth:
        q = r * alpha_H * T * math.log(1 / eps)
    else:
        q = r * (alpha_H * T * mu_max + math.log(mu_max * r / eps))
    return QueryEstimate(q, r, smooth)


def gate_count_constant(m_x: int) -> float:
    """``m_x log2 m_x`` gates for constant convection (QFT-based transport)."""
    if int(m_x) != m_x or m_x < 1:
        raise ValueError("m_x must be a positive integer")
    return float(m_x * math.log2(m_x))


@dataclass(frozen=True)
class ResourceReport:
    """Counts for one assembled system; all values are order estimates."""

    sparsity: int
    max_norm: float
    qubits: int
    queries: float
    gates: float
    p_domain: tuple
    notes: str = ""
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("sparsity", "max_norm", "qubits", "queries", "gates", "notes")}
        d["p_domain"] = list(self.p_domain)
        d.update(self.extra)
        return d


def resource_report(system, T: float, eps: float = 1e-3, m_x: int | None = None,
                    u0=None, uT=None) -> ResourceReport:
    """Resource summary for a :class:`~ngoschrod.schrodingerize.SchrodSystem`.

    Uses the assembled Hamiltonian at ``t = 0``.  When ``u0``/``uT`` are
    given the smooth-profile query count is included.
    """
    H = system.hamiltonian(0.0, sparse=True)
    H1 = system.shifted_h1(0.0)
    H2 = system.h2_at(0.0)
    pax = system.p_axis
    bc = check_bounds(H, H1, H2, pax.mu_max, pax.step)
    st = hamiltonian_stats(H)
    q = lemma_queries(st.sparsity, T, st.max_norm, eps)
    extra = {"bound_ok": bc.ok, "sparsity_bound": bc.sparsity_bound, "max_norm_bound": bc.max_norm_bound,
             "max_norm_bound_dp": bc.max_norm_bound_dp, "gate_factor": GATE_FACTOR_FORMULA,
             "log_base": "natural for queries, 2 for qubits and gates"}
    if u0 is not None and uT is not None:
        alpha = max(float(np.linalg.norm(np.asarray(H1), 2)), float(np.linalg.norm(np.asarray(H2), 2)))
        est = schrodingerization_queries(float(np.linalg.norm(u0)), float(np.linalg.norm(uT)), 0.0, alpha,
                                         T, pax.mu_max, eps, smooth=True)
        extra.update(smooth_queries=est.hamiltonian, state_preparation=est.state_preparation)
    gates = gate_count_constant(m_x) if m_x else float("nan")
    return ResourceReport(st.sparsity, st.max_norm, st.qubits, q, gates, (pax.L, pax.R),
                          "order estimates with unit constants", extra)
