import numpy as np
import pytest
from hypothesis import given, strategies as st

from ngoschrod.errors import UnsupportedError
from ngoschrod.evolve import EvolutionConfig
from ngoschrod.experiments import scalar_problem
from ngoschrod.scalar import (
    ScalarProblem,
    assemble_solution,
    build_mode_systems,
    characteristics_oracle,
    mode_expand,
    secular_slope,
    solve_scalar,
)
from ngoschrod.spectral import make_axis


def test_problem_validation():
    ax = make_axis(0, 1, 3)
    one = lambda x: np.ones_like(x)
    with pytest.raises(ValueError):
        ScalarProblem(one, one, 1.0, 0.0, lambda x, t: x, lambda x: 0 * x, ax)
    with pytest.raises(UnsupportedError):
        ScalarProblem(one, lambda x: -one(x), 1.0, 0.1, lambda x, t: x, lambda x: 0 * x, ax)


def test_mode_expand_exact_modes():
    f0 = lambda x, t: (1 + x) * np.exp(1j * t) + 0.5 * np.exp(-2j * t)
    x = np.linspace(0, 1, 5)
    ex = mode_expand(f0, x)
    assert ex.K == 2
    np.testing.assert_allclose(ex.f[list(ex.ks).index(1)], 1 + x, atol=1e-13)
    np.testing.assert_allclose(ex.f[list(ex.ks).index(-2)], 0.5, atol=1e-13)
    np.testing.assert_allclose(ex.reconstruct(np.zeros(5), 1.0), f0(x, 0.0), atol=1e-13)
    with pytest.warns(UserWarning):
        mode_expand(f0, x, K=1)


def test_secular_slope():
    ax = make_axis(-np.pi / 2, np.pi / 2, 3)
    assert secular_slope(lambda x: 2 * x + np.sin(2 * x), ax) == pytest.approx(2.0)


@pytest.mark.parametrize("method", ["spectral", "upwind"])
def test_mode_systems_shapes(method):
    pb = scalar_problem("variable", 0.1, 3)
    sys_ = build_mode_systems(pb, method)
    assert sys_.M1.shape == (8, 8) and not sys_.constant_c
    assert sys_.forcing.shape == (1, 8)
    with pytest.raises(ValueError):
        build_mode_systems(pb, "weno")


def test_negative_speed_rejected():
    ax = make_axis(0, 1, 3)
    pb = ScalarProblem(lambda x: -np.ones_like(x), lambda x: np.ones_like(x), 1.0, 0.1,
                       lambda x, t: 1 + 0 * x, lambda x: 0 * x, ax)
    with pytest.raises(UnsupportedError):
        build_mode_systems(pb)


def test_variable_H1_top_eigenvalue_closed_form():
    # lambda_n(H1) = 113/30 - lam at m=4 with c = cos^2 x
    for lam in (1.0, -1.0, 4.0):
        H1 = build_mode_systems(scalar_problem("variable", 0.1, 4, lam)).alpha_split().H1
        assert np.linalg.eigvalsh(H1)[-1] == pytest.approx(113 / 30 - lam, abs=1e-10)


@pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
def test_constant_problem_exact(eps):
    pb = scalar_problem("const", eps, 4)
    sol = solve_scalar(pb, config=EvolutionConfig(dt=1e-3))
    ex = pb.exact_constant(1.0)
    assert np.max(np.abs(sol.u(eps) - ex)) / np.max(np.abs(ex)) <= 1e-4


def test_forced_schrodinger_path_agrees_with_diagonal():
    pb = scalar_problem("const", 0.1, 4)
    a = solve_scalar(pb, config=EvolutionConfig(dt=1e-3))
    b = solve_scalar(pb, config=EvolutionConfig(dt=1e-3), force_schrodinger=True, lambda0=0.0,
                     p_axis=make_axis(-10, 10, 9))
    assert np.max(np.abs(a.u(0.1) - b.u(0.1))) < 5e-2


def test_characteristics_oracle_constant_case():
    pb = scalar_problem("const", 0.1, 4)
    alpha, S = characteristics_oracle(pb, 0.7)
    x = pb.x_axis.nodes
    np.testing.assert_allclose(S[0], 0.7, atol=1e-10)
    np.testing.assert_allclose(alpha[0], np.exp(-0.7) * pb.u0(x - 0.7), atol=1e-10)


@given(st.floats(-3, 3), st.floats(0.01, 1))
def test_assemble_solution_single_mode(phase, eps):
    a = np.array([[1.0 + 0.5j]])
    S = np.array([[phase]])
    assert assemble_solution(a, S, eps)[0] == pytest.approx((1 + 0.5j) * np.exp(1j * phase / eps))
