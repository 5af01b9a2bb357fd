import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from conftest import random_hermitian, random_matrix
from ngoschrod.errors import RecoveryRegionError
from ngoschrod.evolve import (
    EvolutionConfig,
    evolve,
    implicit_midpoint_step,
    measurement_probability,
    p_star,
    predicted_aggregate,
    recover,
    recover_at,
    recovery_report,
    recovery_scan,
    snap_up,
    time_steps,
)
from ngoschrod.schrodingerize import hermitian_split, schrodingerize
from ngoschrod.spectral import make_axis

A4 = np.array([[0.3, 1, 0, 0.2], [-1, -0.5, 0.4, 0], [0, -0.4, 0.2, 0.6], [0.1, 0, -0.6, -0.8]])
U4 = np.array([1, 0.5, -0.3, 0.8])


def test_config_validation():
    with pytest.raises(ValueError):
        EvolutionConfig(dt=0)
    with pytest.raises(ValueError):
        EvolutionConfig(scheme="rk4")
    with pytest.raises(ValueError):
        EvolutionConfig(tol=1e-20)
    with pytest.raises(ValueError):
        EvolutionConfig(factor="qr")


def test_time_steps_land_on_T():
    steps = time_steps(1.0, 0.3)
    assert len(steps) == 4
    assert sum(h for _, h in steps) == pytest.approx(1.0)
    assert steps[-1][1] == pytest.approx(0.1)


@given(st.integers(2, 8), st.floats(1e-3, 0.5), st.integers(0, 2**31 - 1))
def test_midpoint_step_norm_drift(n, dt, seed):
    rng = np.random.default_rng(seed)
    H = random_hermitian(rng, n, 3.0)
    w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    w1 = implicit_midpoint_step(H, w, 0.0, dt)
    assert abs(np.linalg.norm(w1) - np.linalg.norm(w)) <= 1e-12 * np.linalg.norm(w)


def test_midpoint_step_cayley_oracle(rng):
    H = random_hermitian(rng, 4)
    w = rng.standard_normal(4) + 0j
    dt = 0.1
    I = np.eye(4)
    cay = np.linalg.inv(I + 0.5j * dt * H) @ (I - 0.5j * dt * H)
    np.testing.assert_allclose(implicit_midpoint_step(H, w, 0.0, dt), cay @ w, atol=1e-13)
    d = np.array([1.0, -2.0])
    np.testing.assert_allclose(implicit_midpoint_step(d, np.ones(2), 0.0, dt),
                               (1 - 0.5j * dt * d) / (1 + 0.5j * dt * d), atol=1e-15)


@pytest.mark.parametrize("scheme,factor", [("implicit_midpoint", "eig"), ("implicit_midpoint", "lu"),
                                           ("diagonal_exact", "eig")])
def test_evolve_constant_hamiltonian(rng, scheme, factor):
    H = random_hermitian(rng, 5)
    w = rng.standard_normal(5) + 0j
    out = evolve(H, w, 1.0, EvolutionConfig(dt=1e-3, scheme=scheme, factor=factor))
    np.testing.assert_allclose(out, sla.expm(-1j * H) @ w, atol=2e-6)


def test_evolve_time_dependent_matches_ode(rng):
    from scipy.integrate import solve_ivp
    H0 = random_hermitian(rng, 3)
    H1 = random_hermitian(rng, 3)
    H = lambda t: H0 + math.sin(t) * H1
    w = np.array([1.0, 0.2j, -0.4])
    out = evolve(H, w, 1.0, EvolutionConfig(dt=1e-3))
    ref = solve_ivp(lambda t, y: -1j * H(t) @ y, (0, 1), w.astype(complex), rtol=1e-11, atol=1e-12).y[:, -1]
    np.testing.assert_allclose(out, ref, atol=1e-5)


@pytest.mark.parametrize("scheme", ["implicit_midpoint", "diagonal_exact", "splitting"])
def test_schrodingerized_recovery_matches_expm(scheme):
    ax = make_axis(-8, 8, 8)
    S, st0 = schrodingerize(A4, ax, "cubic", 0.5, u0=U4, check_domain=False)
    out = evolve(S, st0, 1.0, EvolutionConfig(dt=1e-3, scheme=scheme))
    ps = p_star(S.h1_at(0.0), 1.0, 0.5)
    rec = recover(out, p_k=ps, pstar=ps)
    np.testing.assert_allclose(rec, sla.expm(A4) @ U4, atol=5e-3)


def test_time_dependent_schrodingerized_family():
    ax = make_axis(-8, 8, 6)
    S, st0 = schrodingerize(lambda t: A4, ax, "cubic", 0.5, u0=U4, check_domain=False)
    Sc, stc = schrodingerize(A4, ax, "cubic", 0.5, u0=U4, check_domain=False)
    a = evolve(S, st0, 1.0, EvolutionConfig(dt=1e-2))
    b = evolve(Sc, stc, 1.0, EvolutionConfig(dt=1e-2))
    np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-10)


def test_splitting_requires_schrodinger_system():
    with pytest.raises(ValueError):
        evolve(np.eye(2), np.ones(2), 1.0, EvolutionConfig(scheme="splitting"))


def test_p_star_and_snap_up():
    H1 = np.diag([-1.0, 2.0])
    assert p_star(H1, 0.5) == pytest.approx(1.0)
    assert p_star(H1, 0.5, lambda0=3.0) == 0.0
    ax = make_axis(-2, 2, 3)
    assert ax.nodes[snap_up(ax, 0.1)] == pytest.approx(0.5)
    assert snap_up(ax, 0.5) == 5
    with pytest.raises(RecoveryRegionError):
        snap_up(ax, 5.0)


def test_recover_rejects_below_pstar_and_modes():
    ax = make_axis(-4, 4, 4)
    v = np.exp(-np.abs(ax.nodes))[None, :]
    with pytest.raises(RecoveryRegionError):
        recover(v, ax, p_k=0.0, pstar=1.0)
    np.testing.assert_allclose(recover(v, ax, p_k=0.0, pstar=1.0, override=True), [1.0])
    # integral recovery of e^{-p}: e^{p_k} int_{p_k}^R e^{-p} dp -> 1 as dp -> 0
    assert recover(v, ax, p_k=1.0, mode="integral", quadrature="trapezoid")[0] == pytest.approx(1.0, abs=0.05)
    with pytest.raises(ValueError):
        recover(v, ax, mode="mean")
    with pytest.raises(ValueError):
        recover(v, ax, mode="integral", quadrature="simpson")


def test_recover_applies_shift_factor():
    ax = make_axis(-4, 4, 4)
    v = np.exp(-np.abs(ax.nodes))[None, :]
    assert recover(v, ax, p_k=1.0, lambda0=0.5, T=2.0)[0] == pytest.approx(math.e)
    np.testing.assert_allclose(recover_at(v, [1.0, 1.5], ax)[0], 1.0, atol=0.05)


def test_recovery_report_and_scan():
    ax = make_axis(-8, 8, 8)
    S, st0 = schrodingerize(A4, ax, "cubic", 0.0, u0=U4, check_domain=False)
    out = evolve(S, st0, 1.0, EvolutionConfig(dt=1.0, scheme="diagonal_exact"))
    ps = p_star(S.h1_at(0.0), 1.0)
    ref = sla.expm(A4) @ U4
    rep = recovery_report(out, pstar=ps, reference=ref)
    assert rep.p_k >= ps and rep.errors["max_abs"] < 5e-3
    assert rep.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
    scan = recovery_scan(out, None, ref, ["dp", "dp2", 1e-12], pstar=ps)
    assert scan["dp"].card >= scan["dp2"].card >= scan[1e-12].card
    assert np.all(scan["dp"].nodes >= ps - 1e-12)
    assert np.all(scan["dp"].errors <= ax.step)


@given(st.integers(0, 2**31 - 1), st.integers(3, 7))
def test_measurement_probabilities_sum_to_one(seed, m):
    rng = np.random.default_rng(seed)
    ax = make_axis(-3, 3, m)
    v = rng.standard_normal((3, ax.M)) + 1j * rng.standard_normal((3, ax.M))
    rep = measurement_probability(v, ax, pstar=0.5)
    assert abs(rep.probabilities.sum() - 1) <= 1e-12
    assert 0 <= rep.aggregate <= 1


def test_measurement_zero_state():
    with pytest.raises(ValueError):
        measurement_probability(np.zeros((2, 4)), make_axis(0, 1, 2))


@pytest.mark.parametrize("shift", [0.0, 1.0, 2.5])
def test_aggregate_probability_matches_prediction(shift):
    # H1 with top eigenvalue `shift` gives p* = shift; e^{-|p|} profile, symmetric domain
    ax = make_axis(-12, 12, 10)
    A = A4 + (shift - np.linalg.eigvalsh(hermitian_split(A4).H1)[-1]) * np.eye(4)
    S, st0 = schrodingerize(A, ax, "exp_abs", 0.0, u0=U4, check_domain=False)
    out = evolve(S, st0, 1.0, EvolutionConfig(dt=1.0, scheme="diagonal_exact"))
    ps = p_star(S.h1_at(0.0), 1.0)
    agg = measurement_probability(out.values, ax, ps).aggregate
    pred = predicted_aggregate(sla.expm(A) @ U4, U4, ps)
    assert abs(agg - pred) <= 5 * ax.step
