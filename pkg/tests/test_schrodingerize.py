import math
import warnings

import numpy as np
import pytest
import scipy.linalg as sla
from scipy.integrate import solve_ivp, trapezoid
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_hermitian, random_matrix
from ngoschrod.errors import InvalidHorizonError, MollifierResolutionError, UnsupportedError
from ngoschrod.schrodingerize import (
    PDomainWarning,
    SchrodSystem,
    choose_p_domain,
    eigen_extremes,
    extend_nonautonomous,
    extension_profile,
    gershgorin_bounds,
    hermitian_split,
    homogenize,
    homogenize_diag_forcing,
    mollifier,
    reduce_forced,
    reduce_shifted,
    schrodingerize,
    suggest_lambda0,
)
from ngoschrod.spectral import make_axis

finite = st.floats(-10, 10, allow_nan=False)


@given(arrays(complex, (5, 5), elements=st.complex_numbers(max_magnitude=10, allow_nan=False)))
def test_hermitian_split_reconstructs(M):
    s = hermitian_split(M)
    assert np.max(np.abs(s.H1 + 1j * s.H2 - M)) <= 1e-14 * max(1.0, np.max(np.abs(M)))
    assert np.max(np.abs(s.H1 - s.H1.conj().T)) == 0
    assert np.max(np.abs(s.H2 - s.H2.conj().T)) <= 1e-15 * max(1.0, np.max(np.abs(M)))


def test_hermitian_split_rejects_rectangular():
    with pytest.raises(ValueError):
        hermitian_split(np.ones((2, 3)))


def test_homogenize_solves_affine_system(rng):
    A = random_matrix(rng, 3, 0.5)
    b = rng.standard_normal(3) + 0j
    u0 = rng.standard_normal(3) + 0j
    T = 0.7
    hom = homogenize(A, b, u0, T)
    out = hom.original(sla.expm(hom.A_tilde * T) @ hom.u0_tilde)
    # exact affine solution e^{AT} u0 + A^{-1}(e^{AT} - I) b
    E = sla.expm(A * T)
    np.testing.assert_allclose(out, E @ u0 + np.linalg.solve(A, (E - np.eye(3)) @ b), atol=1e-12)
    with pytest.raises(InvalidHorizonError):
        homogenize(A, b, u0, 0.0)
    with pytest.raises(ValueError):
        homogenize(A, b[:2], u0, 1.0)


def test_homogenize_diag_forcing(rng):
    A = random_matrix(rng, 3, 0.3)
    F = rng.standard_normal(3) + 0j
    u0 = rng.standard_normal(3) + 0j
    hom = homogenize_diag_forcing(A, F, u0)
    out = hom.original(sla.expm(hom.A_tilde) @ hom.u0_tilde)
    E = sla.expm(A)
    np.testing.assert_allclose(out, E @ u0 + np.linalg.solve(A, (E - np.eye(3)) @ F), atol=1e-12)


@pytest.mark.parametrize("kind,order", [("exp_abs", 1), ("cubic", 2)])
def test_profiles_extend_exponential(kind, order):
    prof = extension_profile(kind)
    assert prof.order == order
    p = np.linspace(0, 5, 11)
    np.testing.assert_allclose(prof(p), np.exp(-p))
    np.testing.assert_allclose(prof(-p[p >= 1]), np.exp(-p[p >= 1]))


def test_cubic_profile_is_c1():
    prof = extension_profile("cubic")
    h = 1e-6
    for p0 in (-1.0, 0.0):
        left = (prof(p0 - h / 2) - prof(p0 - 3 * h / 2)) / h
        right = (prof(p0 + 3 * h / 2) - prof(p0 + h / 2)) / h
        assert abs(prof(p0 - 1e-12) - prof(p0 + 1e-12)) < 1e-9
        assert abs(left - right) < 1e-4


def test_custom_profile_requires_order():
    with pytest.raises(ValueError):
        extension_profile("custom", xi=np.exp)
    assert extension_profile("custom", xi=lambda p: np.exp(-np.abs(p)), order=1).order == 1
    with pytest.raises(ValueError):
        extension_profile("gauss")


def test_eigen_extremes_and_gershgorin(rng):
    H = random_hermitian(rng, 6)
    lo, hi = eigen_extremes(H)
    ev = np.linalg.eigvalsh(H)
    assert (lo, hi) == pytest.approx((ev[0], ev[-1]))
    g_lo, g_hi = gershgorin_bounds(H)
    assert g_lo <= lo + 1e-12 and hi <= g_hi + 1e-12
    fam = lambda t: H + t * np.eye(6)
    assert eigen_extremes(fam, [0.0, 1.0])[1] == pytest.approx(ev[-1] + 1)


def test_choose_p_domain_formula():
    H1 = np.diag([-2.0, 0.5])
    L, R = choose_p_domain(H1, 1.0, eps=1e-4, R_p=1.0)
    expect = min(math.log(1e-4) - 1.0 - 1.0, math.log(1e-4) - 2.0 - 0.5 - 1.0)
    assert L == pytest.approx(expect) and R == -L
    with pytest.raises(ValueError):
        choose_p_domain(H1, 1.0, eps=2.0)
    with pytest.raises(ValueError):
        choose_p_domain(H1, 1.0, R_p=0.5)


def test_schrod_hamiltonian_hermitian_and_block_structure(rng):
    A = random_matrix(rng, 3)
    s = hermitian_split(A)
    ax = make_axis(-4, 4, 3)
    S = SchrodSystem(s.H1, s.H2, ax, 0.3)
    H = S.hamiltonian()
    assert np.max(np.abs(H - H.conj().T)) <= 1e-12
    Hs = S.hamiltonian(sparse=True)
    np.testing.assert_allclose(Hs.toarray(), H)
    blocks = S.blocks()
    for l in range(ax.M):
        idx = np.arange(3) * ax.M + l
        np.testing.assert_allclose(H[np.ix_(idx, idx)], blocks[l], atol=1e-14)


def test_initial_state_samples_profile(rng):
    ax = make_axis(-6, 6, 5)
    u0 = rng.standard_normal(2) + 0j
    S = SchrodSystem(np.eye(2), np.zeros((2, 2)), ax)
    st0 = S.initial_state(u0)
    np.testing.assert_allclose(st0.values, u0[:, None] * extension_profile("cubic")(ax.nodes)[None, :],
                               atol=1e-13)
    with pytest.raises(ValueError):
        S.initial_state(np.ones(3))


def test_schrodingerize_warns_on_small_domain(rng):
    A = random_matrix(rng, 2)
    with pytest.warns(PDomainWarning):
        schrodingerize(A, make_axis(-1, 1, 3), u0=np.ones(2))
    with pytest.raises(ValueError):
        schrodingerize(A, make_axis(-1, 1, 3), check_domain=False)


@pytest.mark.parametrize("lamn,rule", [(3.0, "shift-to-top"), (-2.0, "negative-shift")])
def test_suggest_lambda0_rules(lamn, rule):
    H1 = np.diag([lamn - 1.0, lamn])
    ch = suggest_lambda0(H1, 1.0, dp=0.05, r=2, eps=1e-2)
    assert ch.rule == rule
    assert ch.interval[0] <= ch.value <= max(ch.interval[1], ch.value)
    if rule == "shift-to-top":
        assert ch.value == pytest.approx(lamn)


def test_reduce_shifted():
    red = reduce_shifted(np.array([1.0, 2.0]), 0.5 + 2j)
    np.testing.assert_allclose(red.generator, [3.0, 4.0])
    assert red.restore(np.ones(2), 2.0)[0] == pytest.approx(math.exp(-1.0))


@given(arrays(float, 4, elements=st.floats(0.2, 5)), arrays(float, 4, elements=finite),
       arrays(float, 4, elements=finite), st.floats(0, 3))
def test_reduce_forced_round_trip(h, F, y0, t):
    sign = np.array([1, -1, 1, -1])
    h = h * sign
    red = reduce_forced(np.diag(h), F)
    yt = red.lift(y0)
    # evolve the unitary problem exactly and restore
    yT = np.exp(-1j * h * t) * yt
    y = red.restore(yT, t, y0)
    exact = np.exp(-1j * h * t) * y0 + (1 - np.exp(-1j * h * t)) / (1j * h) * F
    assert np.max(np.abs(y - exact)) <= 1e-8 * max(1.0, np.max(np.abs(exact)))
    assert np.max(np.abs(red.restore(red.lift(y0), 0.0, y0) - y0)) <= 1e-8 * max(1.0, np.max(np.abs(y0)))


@given(arrays(float, 3, elements=finite), arrays(float, 3, elements=finite), st.floats(0, 5))
def test_reduce_forced_zero_mode_affine(F, y0, t):
    h = np.array([0.0, 1.0, 0.0])
    red = reduce_forced(h, F)
    assert red.zero_mask.tolist() == [True, False, True]
    y = red.restore(np.exp(-1j * h * t) * red.lift(y0), t, y0)
    zero = red.zero_mask
    assert np.max(np.abs(y[zero] - (y0[zero] + t * F[zero]))) <= 1e-12 * max(1.0, np.max(np.abs(y0) + t * np.abs(F)))


def test_reduce_forced_policies():
    h = np.array([0.0, 0.0, 2.0])
    with pytest.raises(UnsupportedError):
        reduce_forced(h, np.ones(3), policy="remove")
    red = reduce_forced(h, np.ones(3), policy="replace", replace_value=1.0)
    np.testing.assert_allclose(red.generator, [1.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        reduce_forced(h, np.ones(3), policy="drop")


def test_reduce_forced_dense_generator(rng):
    H = random_hermitian(rng, 3) + 3 * np.eye(3)
    F = rng.standard_normal(3)
    y0 = rng.standard_normal(3)
    red = reduce_forced(H, F)
    assert not red.diagonal
    t = 0.8
    yT = sla.expm(-1j * H * t) @ red.lift(y0)
    exact = sla.expm(-1j * H * t) @ y0 + np.linalg.solve(1j * H, (np.eye(3) - sla.expm(-1j * H * t)) @ F)
    np.testing.assert_allclose(red.restore(yT, t, y0), exact, atol=1e-10)


@pytest.mark.parametrize("kind", ["hat", "cosine"])
def test_mollifier_unit_mass(kind):
    z = mollifier(kind, 0.3)
    s = np.linspace(-1, 1, 200001)
    assert trapezoid(z(s), s) == pytest.approx(1.0, abs=1e-6)
    assert z(np.array([0.31]))[0] == 0


def test_extend_nonautonomous_tracks_time_dependent_solution():
    s_axis = make_axis(-1.0, 3.0, 8)
    H = lambda t: np.array([[1.0 + t, 0.2], [0.2, -t]])
    w0 = np.array([1.0, 0.5j])
    ext = extend_nonautonomous(H, w0, s_axis, omega=4 * s_axis.step)
    G = ext.generator
    assert np.max(np.abs(G - G.conj().T)) <= 1e-12
    T = 1.0
    zT = sla.expm(-1j * G * T) @ ext.z0
    w = ext.collapse(zT)
    ref = solve_ivp(lambda t, y: -1j * H(t) @ y, (0, T), w0.astype(complex), rtol=1e-11, atol=1e-12).y[:, -1]
    assert np.max(np.abs(w - ref)) < 5e-2
    with pytest.raises(MollifierResolutionError):
        extend_nonautonomous(H, w0, s_axis, omega=0.5 * s_axis.step)
