import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singular_system.errors import DomainError
from singular_system.fields import rhs_family, unit_rhs
from singular_system.grid import RadialGrid, norm_X
from singular_system.mode_solver import (ModeSpec, k0_anchor_index, kernel_classification,
                                         relative_residual, solve_k0, solve_mode, solve_mode_bvp,
                                         solve_mode_t0, t0_constant, tail_exponent)
from singular_system.oracles import manufactured_k0, manufactured_mode, unit_rhs_solution


@pytest.mark.parametrize("sign", [1, -1])
@pytest.mark.parametrize("t", [0.0, 10.0, 1e3])
def test_k0_manufactured(prm, grid, sign, t):
    spec = ModeSpec(prm, 0, sign, t)
    a, b = manufactured_k0(spec, grid)
    sol = solve_k0(spec, b)
    assert norm_X(sol.a - a, prm.sigma) <= 1e-6
    assert relative_residual(sol) <= 1e-6


@pytest.mark.parametrize("sign", [1, -1])
@pytest.mark.parametrize("k", [1, 2, 5])
def test_t0_manufactured_and_exact(prm, grid, sign, k):
    spec = ModeSpec(prm, k, sign, 0.0)
    a, b = manufactured_mode(spec, grid)
    assert norm_X(solve_mode_t0(spec, b).a - a, prm.sigma) <= 1e-6
    exact = unit_rhs_solution(prm, k, sign, grid)
    sol = solve_mode_t0(spec, unit_rhs(grid, prm))
    assert norm_X(sol.a - exact, prm.sigma) <= 1e-12
    # variation-of-parameters bound on sup r^sigma |a| for norm_Y(b) = 1
    A, _ = sol.scaled()
    assert np.max(np.abs(A)) <= t0_constant(prm, k, sign)


@pytest.mark.parametrize("sign", [1, -1])
@pytest.mark.parametrize("k", [1, 3])
def test_bvp_agrees_with_t0(prm, grid, sign, k):
    for b in rhs_family(grid, prm, 3, seed=11):
        spec = ModeSpec(prm, k, sign, 0.0)
        ref = solve_mode_t0(spec, b)
        alt = solve_mode_bvp(spec, b)
        assert norm_X(alt.a - ref.a, prm.sigma) <= 1e-5 * norm_X(ref.a, prm.sigma)


@pytest.mark.parametrize("t", [10.0, 1e3, 1e5])
def test_bvp_residual_and_manufactured(prm, grid, t):
    spec = ModeSpec(prm, 2, -1, t)
    a, b = manufactured_mode(spec, grid)
    sol = solve_mode_bvp(spec, b)
    assert relative_residual(sol) <= 1e-6
    assert norm_X(sol.a - a, prm.sigma) <= 1e-6


def test_bvp_order_converges(prm):
    spec = ModeSpec(prm, 1, 1, 10.0)
    errs = []
    for m in (256, 512):
        g = RadialGrid(1e-6, m)
        a, b = manufactured_mode(spec, g)
        errs.append(norm_X(solve_mode_bvp(spec, b, order=2).a - a, prm.sigma))
    assert errs[0] / errs[1] > 3.0


def test_no_gamma_minus_component(prm, grid):
    spec = ModeSpec(prm, 1, -1, 0.0)
    sol = solve_mode_t0(spec, unit_rhs(grid, prm))
    assert tail_exponent(sol) == pytest.approx(-prm.sigma, abs=1e-3)


def test_k0_anchor(prm, grid):
    assert k0_anchor_index(ModeSpec(prm, 0, -1, 5.0), grid) is None
    assert k0_anchor_index(ModeSpec(prm, 0, 1, 0.5), grid) == grid.M
    # R_t = t^(-1/(xi-1)) = 10^-5 for t = 10
    j = k0_anchor_index(ModeSpec(prm, 0, 1, 10.0), grid)
    assert grid.r[j] == pytest.approx(1e-5, rel=grid.h)


def test_kernel_classification(prm):
    assert kernel_classification(ModeSpec(prm, 0, -1))["kernel"] == "trivial"
    assert kernel_classification(ModeSpec(prm, 0, 1))["kernel"] == "one-dimensional"
    for k in range(1, 8):
        assert kernel_classification(ModeSpec(prm, k, 1, 3.0))["kernel"] == "trivial"


def test_dispatch_and_errors(prm, coarse):
    b = unit_rhs(coarse, prm)
    assert solve_mode(ModeSpec(prm, 0, 1, 1.0), b).solve_method == "integrating-factor"
    assert solve_mode(ModeSpec(prm, 2, 1, 0.0), b).solve_method == "variation-of-parameters"
    assert solve_mode(ModeSpec(prm, 2, 1, 3.0), b).solve_method == "bvp-collocation"
    with pytest.raises(DomainError):
        solve_k0(ModeSpec(prm, 1, 1), b)
    with pytest.raises(DomainError):
        solve_mode_t0(ModeSpec(prm, 1, 1, 1.0), b)
    with pytest.raises(DomainError):
        ModeSpec(prm, 1, 1, -1.0)
    with pytest.raises(DomainError):
        ModeSpec(prm, 1, 1, lambda_k=3.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.sampled_from([1, -1]))
def test_k0_linearity(c1, c2, sign):
    from singular_system.params import derive_params
    prm = derive_params(3, 1.6)
    g = RadialGrid(1e-6, 256)
    f1, f2 = rhs_family(g, prm, 2)
    spec = ModeSpec(prm, 0, sign, 7.0)
    comb = solve_k0(spec, f1 * c1 + f2 * c2).a
    sep = solve_k0(spec, f1).a * c1 + solve_k0(spec, f2).a * c2
    scale = norm_X(solve_k0(spec, f1).a, prm.sigma) + norm_X(solve_k0(spec, f2).a, prm.sigma)
    assert norm_X(comb - sep, prm.sigma) <= 1e-11 * scale * (abs(c1) + abs(c2) + 1e-300)
