import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st
from scipy.integrate import trapezoid

from ngoschrod.errors import CapExceededError, DegenerateCorrectionError
from ngoschrod.hopping import (
    HoppingProblem,
    _coupling,
    _coupling_step,
    assemble_hopping,
    build_hopping_phase,
    densities,
    hopping_initial,
    paper_problem,
    reconstruct,
    reference_split_solver,
    solve_hopping,
)
from ngoschrod.spectral import make_axis


@pytest.fixture(scope="module")
def small():
    return paper_problem(1.0, k=2, l=3, m=3)


@pytest.mark.parametrize("eps", [1.0, 1 / 32])
def test_initial_profiles_at_tau_zero_equal_physical_data(eps):
    pb = paper_problem(eps, 2, 3, 3)
    g = hopping_initial(pb)
    fp, fm, fi = pb.initial_fields()
    assert np.array_equal(g[0, ..., 0], fp)
    assert np.array_equal(g[1, ..., 0], fm)
    assert np.array_equal(g[2, ..., 0], fi.real)
    assert np.array_equal(g[3, ..., 0], fi.imag)


def test_initial_rejects_nonpositive_gap(small):
    pb = HoppingProblem(lambda x: np.cos(x), small.dE, small.b, 1.0, small.f_plus, small.f_minus,
                        small.f_i, small.x_axis, small.v_axis, small.tau_axis)
    with pytest.raises(DegenerateCorrectionError):
        hopping_initial(pb)


def test_reconstruct_inverts_initial_data(small):
    g = hopping_initial(small)
    f = reconstruct(g, np.zeros(small.grid[0].shape), small.eps, small.tau_axis)
    fp, fm, fi = small.initial_fields()
    np.testing.assert_allclose(f[0], fp, atol=1e-13)
    np.testing.assert_allclose(f[2], fi, atol=1e-13)


def test_h1_top_eigenvalue_formula(small):
    asm = assemble_hopping(small, T=1.0)
    H1 = asm.h1().toarray()
    assert np.max(np.abs(H1 - H1.T)) == 0
    assert abs(np.linalg.eigvalsh(H1)[-1] - asm.lambda_n) <= 1e-10


def test_generator_split_hermitian(small):
    asm = assemble_hopping(small, T=1.0)
    for t in (0.0, 0.7):
        H2 = asm.h2(t)
        assert abs(H2 - H2.conj().T).max() <= 1e-12
        M = asm.generator(t)
        recon = asm.h1() + 1j * H2
        assert abs(recon - M).max() <= 1e-12


@given(st.floats(-2, 2), st.floats(0, 2 * math.pi), st.floats(1e-3, 0.5))
def test_exact_coupling_step_matches_expm(b, tau, h):
    rng = np.random.default_rng(0)
    g = rng.standard_normal((4, 1, 1, 1)) + 0j
    out = _coupling_step(g, np.array([[b]]), np.array([tau]), h)
    C = _coupling(np.array([[b]]), np.array([tau]))[:, :, 0, 0, 0]
    ref = sla.expm(h * C) @ g[:, 0, 0, 0]
    np.testing.assert_allclose(out[:, 0, 0, 0], ref, atol=1e-12)


@given(st.floats(-2, 2), st.floats(0, 2 * math.pi), st.floats(-30, 30), st.floats(1e-3, 0.2))
def test_schrodingerized_coupling_step_matches_expm(b, tau, mu, h):
    rng = np.random.default_rng(1)
    g = rng.standard_normal((4, 1, 1, 1, 1)) + 0j
    out = _coupling_step(g, np.array([[b]]), np.array([tau]), h, mu=np.array([mu]))
    C = _coupling(np.array([[b]]), np.array([tau]))[:, :, 0, 0, 0]
    K = 0.5 * (C - C.T) - 1j * mu * 0.5 * (C + C.T)
    ref = sla.expm(h * K) @ g[:, 0, 0, 0, 0]
    np.testing.assert_allclose(out[:, 0, 0, 0, 0], ref, atol=1e-11 * max(1.0, np.max(np.abs(ref))))


def test_phase_methods_agree():
    pb = paper_problem(1.0, 2, 4, 4)
    ex = build_hopping_phase(pb, 1.0, "exact")
    ch = build_hopping_phase(pb, 1.0, "characteristics")
    for t in (0.4, 1.0):
        np.testing.assert_allclose(ch.S(t), ex.S(t), atol=1e-9)
        np.testing.assert_allclose(ch.dSdx(t), ex.dSdx(t), atol=1e-9)
        np.testing.assert_allclose(ch.dSdv(t), ex.dSdv(t), atol=1e-9)


def test_curved_characteristics_phase_solves_phase_equation():
    # harmonic potential U = x^2/2 (not periodic, only used locally) with E = 1 + x^2/4
    pb = paper_problem(1.0, 2, 3, 3)
    pb = HoppingProblem(lambda x: 1 + x ** 2 / 4, lambda x: x / 2, pb.b, 1.0, pb.f_plus, pb.f_minus,
                        pb.f_i, pb.x_axis, pb.v_axis, pb.tau_axis, U=lambda x: x ** 2 / 2, dU=lambda x: x)
    ph = build_hopping_phase(pb, 1.0)
    assert ph.kind == "characteristics"
    X, V = pb.grid
    t = 0.8
    # backward flow is a rotation: X(s) = x cos(t-s) - v sin(t-s)
    s = np.linspace(0, t, 4001)
    Xs = X[..., None] * np.cos(t - s) - V[..., None] * np.sin(t - s)
    S_ref = trapezoid(2 * (1 + Xs ** 2 / 4), s, axis=-1)
    Sv_ref = trapezoid(Xs * (-np.sin(t - s)), s, axis=-1)
    np.testing.assert_allclose(ph.S(t), S_ref, atol=1e-6)
    np.testing.assert_allclose(ph.dSdv(t), Sv_ref, atol=1e-6)


def test_densities_rectangle_rule(small):
    vax = make_axis(-2 * math.pi, 2 * math.pi, 5)
    f = np.exp(-vax.nodes ** 2 / 2)[None, None, :] * np.ones((3, 4, 1))
    np.testing.assert_allclose(densities(f, vax), math.sqrt(2 * math.pi), rtol=1e-6)


@pytest.mark.parametrize("coupling", ["exact", "schrodinger"])
def test_split_solver_matches_reference_eps1(coupling):
    pb = paper_problem(1.0, 3, 4, 4)
    sol = solve_hopping(pb, 0.5, 0.02, coupling=coupling, n=7)
    _, _, fr = reference_split_solver(pb, 0.5, 0.005, 6, 4)
    ref = fr[:, ::4]
    rho, rho_ref = densities(sol.f, pb.v_axis), densities(ref, pb.v_axis)
    assert np.max(np.abs(rho - rho_ref)) / np.max(np.abs(rho_ref)) < 5e-2
    assert sol.info["imag_f_pm"] < 1e-2


def test_direct_strategy_agrees_with_split():
    pb = paper_problem(1.0, 2, 2, 3)
    a = solve_hopping(pb, 0.2, 0.01, strategy="direct", n=6)
    b = solve_hopping(pb, 0.2, 0.01, coupling="exact")
    assert np.max(np.abs(a.f - b.f)) < 1e-2


def test_direct_strategy_cap():
    with pytest.raises(CapExceededError):
        solve_hopping(paper_problem(1.0, 3, 4, 4), 0.1, 0.05, strategy="direct")
