"""Tests for difference stencils, inner products and the spectral backend."""
import math

import numpy as np
import pytest

from smectic.core.errors import FieldError, ParameterError
from smectic.core.fields import PeriodicGrid, QTensorField, ScalarField, SymTensorField, director_wave, q_from_director
from smectic.core.operators import (
    OperatorKind,
    apply_kernel,
    biharmonic,
    build_kernel,
    diff,
    double_divergence,
    grad_inner,
    heat_semigroup,
    hessian,
    inner,
    laplacian,
    max_norm,
    norms,
    phi1,
    q1_function,
    q_function,
    second_difference,
    spectral_laplacian,
    weighted_norm,
    SERIES_CUTOFF,
)
from smectic.services.checks import norm_chain_excesses, norm_chain_pairs, random_q, random_scalar, random_sym


def _sin_x(grid: PeriodicGrid) -> ScalarField:
    return ScalarField(grid, np.sin(grid.coordinates()[0]))


def _fd_symbol(h: float) -> float:
    return (4.0 / h**2) * math.sin(h / 2.0) ** 2


class TestStencils:
    @pytest.mark.parametrize("mode", ["forward", "backward", "central"])
    def test_constant_has_zero_difference(self, grid, mode):
        f = ScalarField(grid, np.full(grid.shape, 3.0))
        assert np.all(diff(f, 0, mode).values == 0.0)
        assert np.all(diff(f, 1, mode).values == 0.0)

    def test_axis_out_of_range(self, grid):
        with pytest.raises(IndexError):
            diff(ScalarField.zeros(grid), 2)

    def test_forward_then_backward_symbol(self):
        grid = PeriodicGrid(d=2, J=64)
        f = _sin_x(grid)
        composite = diff(diff(f, 0, "backward"), 0, "forward")
        np.testing.assert_allclose(composite.values, -_fd_symbol(grid.h) * f.values, atol=1e-12)
        np.testing.assert_allclose(second_difference(f, 0).values, composite.values, atol=1e-12)

    def test_central_difference_of_sawtooth(self):
        grid = PeriodicGrid(d=1, J=16, L=16.0)
        f = ScalarField(grid, np.arange(16.0))
        central = diff(f, 0, "central").values
        np.testing.assert_allclose(central[1:-1], 1.0)
        assert central[0] != 1.0 and central[-1] != 1.0

    def test_laplacian_eigenfunction(self):
        grid = PeriodicGrid(d=2, J=64)
        f = _sin_x(grid)
        np.testing.assert_allclose(laplacian(f).values, -_fd_symbol(grid.h) * f.values, atol=1e-12)

    def test_biharmonic_eigenfunction(self):
        grid = PeriodicGrid(d=2, J=64)
        f = _sin_x(grid)
        np.testing.assert_allclose(biharmonic(f).values, _fd_symbol(grid.h) ** 2 * f.values, atol=1e-10)

    def test_laplacian_is_self_adjoint(self, grid, rng):
        f, g = random_scalar(grid, rng), random_scalar(grid, rng)
        assert inner(laplacian(f), g) == pytest.approx(inner(f, laplacian(g)), rel=1e-12)

    def test_biharmonic_factorizes(self, grid, rng):
        f, g = random_scalar(grid, rng), random_scalar(grid, rng)
        assert inner(biharmonic(f), g) == pytest.approx(inner(laplacian(f), laplacian(g)), rel=1e-12)

    def test_summation_by_parts(self, grid, rng):
        f, g = random_scalar(grid, rng), random_scalar(grid, rng)
        defect = inner(laplacian(f), g) + grad_inner(f, g)
        assert abs(defect) <= 1e-12 * norms(f).h1 * norms(g).h1

    def test_hessian_trace_is_laplacian(self, grid3d, rng):
        f = random_scalar(grid3d, rng)
        np.testing.assert_allclose(hessian(f).trace().values, laplacian(f).values, rtol=0, atol=1e-12)

    def test_hessian_off_diagonal_symbol(self):
        grid = PeriodicGrid(d=2, J=32)
        x, y = grid.coordinates()
        f = ScalarField(grid, np.sin(x) * np.sin(y))
        scale = (math.sin(grid.h) / grid.h) ** 2
        np.testing.assert_allclose(hessian(f).values[1], scale * np.cos(x) * np.cos(y), atol=1e-12)

    def test_constant_hessian_and_double_divergence_vanish(self, grid):
        assert np.all(hessian(ScalarField(grid, np.full(grid.shape, 2.0))).values == 0.0)
        T = SymTensorField(grid, np.ones((3,) + grid.shape))
        assert np.max(np.abs(double_divergence(T).values)) < 1e-12

    def test_double_divergence_is_adjoint_of_hessian(self, grid3d, rng):
        T, v = random_sym(grid3d, rng), random_scalar(grid3d, rng)
        lhs, rhs = inner(double_divergence(T), v), inner(T, hessian(v))
        assert abs(lhs - rhs) <= 1e-12 * norms(T).l2 * norms(v).h2

    def test_double_divergence_of_scaled_identity(self, grid, rng):
        c = random_scalar(grid, rng)
        T = SymTensorField(grid, np.stack([c.values, np.zeros(grid.shape), c.values]))
        np.testing.assert_allclose(double_divergence(T).values, laplacian(c).values, atol=1e-12)


class TestInnerProducts:
    def test_measure_of_domain(self, grid):
        one = ScalarField(grid, np.ones(grid.shape))
        assert inner(one, one) == pytest.approx((2 * math.pi) ** 2)

    def test_single_mode(self, grid):
        f = _sin_x(grid)
        assert inner(f, f) == pytest.approx((2 * math.pi) ** 2 / 2, rel=1e-13)

    def test_traceless_against_identity(self, grid, rng):
        Q = random_q(grid, rng)
        identity = SymTensorField(grid, np.stack([np.ones(grid.shape), np.zeros(grid.shape), np.ones(grid.shape)]))
        assert abs(inner(Q, identity)) < 1e-12

    def test_tensor_against_scalar_fails(self, grid):
        with pytest.raises(FieldError):
            inner(QTensorField.zeros(grid), ScalarField.zeros(grid))

    def test_grid_mismatch_fails(self, grid):
        with pytest.raises(FieldError):
            inner(ScalarField.zeros(grid), ScalarField.zeros(PeriodicGrid(d=2, J=8)))

    def test_norm_definitions(self, grid, rng):
        f = random_scalar(grid, rng)
        n = norms(f)
        assert n.l2**2 == pytest.approx(inner(f, f), rel=1e-13)
        assert n.h1**2 == pytest.approx(inner(f, f) + grad_inner(f, f), rel=1e-13)
        assert n.h2 >= n.h1 >= n.l2

    def test_max_norm_of_director_wave(self, grid):
        Q = q_from_director(grid, director_wave(grid))
        assert max_norm(Q) == pytest.approx(math.sqrt(0.5), abs=1e-14)


class TestSpectralBackend:
    def test_spectral_laplacian_matches_stencil(self, grid3d, rng):
        f = random_scalar(grid3d, rng)
        stencil = laplacian(f)
        assert max_norm(spectral_laplacian(f) - stencil) <= 1e-12 * max_norm(stencil)

    def test_generating_function_limits(self):
        zero = np.array([0.0])
        assert phi1(zero)[0] == 1.0
        assert q_function(zero)[0] == 1.0
        assert q1_function(zero)[0] == 1.0

    @pytest.mark.parametrize("fn", [phi1, q_function])
    def test_series_branch_is_continuous(self, fn):
        below, above = fn(np.array([SERIES_CUTOFF * (1 - 1e-9), SERIES_CUTOFF * (1 + 1e-9)]))
        assert below == pytest.approx(above, rel=1e-12)

    def test_scalar_bounds(self):
        z = np.concatenate([[0.0], np.logspace(-8, 2, 200)])
        q = q_function(z)
        assert np.all((q > 0) & (q <= 1.0))
        assert np.all(q1_function(z) >= 1.0 - 1e-15)

    def test_zero_mode(self, grid):
        kernel = build_kernel(grid, OperatorKind.TENSOR, 0.1, 0.5, 8.0, 0.01)
        assert kernel.lap_symbol[0, 0] == 0.0
        assert kernel.eigen[0, 0] == pytest.approx(4.0)
        assert kernel.exp_table[0, 0] == pytest.approx(math.exp(-0.04))
        assert np.all(kernel.eigen >= 4.0 - 1e-12)

    def test_two_mode_grid(self):
        grid = PeriodicGrid(d=1, J=2)
        kernel = build_kernel(grid, OperatorKind.DENSITY, 0.5, 1.0, 2.0, 0.1)
        lam = 4.0 / grid.h**2
        np.testing.assert_allclose(kernel.lap_symbol, [0.0, -lam])
        np.testing.assert_allclose(kernel.eigen, [2.0, 2 * 0.5 * lam**2 + 2.0])

    @pytest.mark.parametrize("name", ["coefficient", "kappa", "tau", "g"])
    def test_non_positive_arguments(self, grid, name):
        args = {"coefficient": 0.1, "g": 1.0, "kappa": 8.0, "tau": 0.1}
        args[name] = 0.0
        with pytest.raises(ParameterError):
            build_kernel(grid, OperatorKind.TENSOR, **args)

    def test_relaxation_shift(self, grid):
        kernel = build_kernel(grid, OperatorKind.TENSOR, 0.1, 1.0, 8.0, 0.1)
        shifted = kernel.with_relaxation(0.25)
        np.testing.assert_allclose(shifted.eigen, kernel.base + 2.0)
        assert kernel.with_relaxation(0.0).eigen[0, 0] == 0.0
        with pytest.raises(ParameterError):
            kernel.with_relaxation(-1.0)

    def test_exp_of_constant(self, grid):
        kernel = build_kernel(grid, OperatorKind.TENSOR, 0.1, 1.0, 8.0, 0.1)
        f = ScalarField(grid, np.full(grid.shape, 2.0))
        np.testing.assert_allclose(apply_kernel(kernel, "exp", f).values, 2.0 * math.exp(-0.8), rtol=1e-13)

    def test_exp_of_single_mode(self, grid):
        kernel = build_kernel(grid, OperatorKind.DENSITY, 0.7e-4, 1.0, 8.0, 0.5)
        f = _sin_x(grid)
        lam = 2 * 0.7e-4 * _fd_symbol(grid.h) ** 2 + 8.0
        np.testing.assert_allclose(apply_kernel(kernel, "exp", f).values, math.exp(-0.5 * lam) * f.values, atol=1e-13)

    def test_tensor_fields_are_transformed_componentwise(self, grid, rng):
        kernel = build_kernel(grid, OperatorKind.TENSOR, 0.1, 1.0, 8.0, 0.1)
        Q = random_q(grid, rng)
        out = apply_kernel(kernel, "phi1", Q)
        first = apply_kernel(kernel, "phi1", ScalarField(grid, Q.values[0]))
        np.testing.assert_allclose(out.values[0], first.values, atol=1e-13)

    def test_weighted_norm_chain(self, grid, rng):
        kernel = build_kernel(grid, OperatorKind.TENSOR, 0.1, 1.0, 8.0, 0.1)
        U = random_q(grid, rng)
        qq, q, plain, q1 = (weighted_norm(kernel, w, U) for w in ("QQ", "Q", "I", "Q1"))
        assert qq <= q <= plain <= q1
        assert plain == pytest.approx(inner(U, U), rel=1e-12)

    @pytest.mark.parametrize("tau", [1e-3, 0.1, 1.0])
    @pytest.mark.parametrize("kind,coefficient", [("tensor", 0.1), ("density", 0.7e-4)])
    def test_every_norm_ordering_holds(self, grid, rng, kind, coefficient, tau):
        kernel = build_kernel(grid, kind, coefficient, 1.0, 8.0, tau)
        sampler = random_q if kind == "tensor" else random_scalar
        assert norm_chain_pairs(kernel)[-1] == ("Q1", "L")
        for _ in range(5):
            U = sampler(grid, rng)
            assert weighted_norm(kernel, "QL", U) >= 0.0
            assert weighted_norm(kernel, "QL", U) <= weighted_norm(kernel, "L", U)
            assert weighted_norm(kernel, "Q1", U) <= weighted_norm(kernel, "L", U)
            assert max(norm_chain_excesses(kernel, U)) <= 1e-12

    def test_operator_weight_is_the_energy_form(self, grid, rng):
        U = random_scalar(grid, rng)
        kernel = build_kernel(grid, OperatorKind.TENSOR, 0.1, 1.0, 8.0, 0.1)
        expected = -0.1 * inner(laplacian(U), U) + 8.0 * inner(U, U)
        assert weighted_norm(kernel, "L", U) == pytest.approx(expected, rel=1e-12)

    def test_q1_ordering_needs_short_steps(self, grid):
        long_step = build_kernel(grid, OperatorKind.TENSOR, 0.1, 1.0, 8.0, 10.0)
        assert ("Q1", "L") not in norm_chain_pairs(long_step)
        weak = build_kernel(grid, OperatorKind.TENSOR, 0.1, 1.0, 1.0, 0.1)
        assert ("Q1", "L") not in norm_chain_pairs(weak)

    def test_weighted_norm_of_zero(self, grid):
        kernel = build_kernel(grid, OperatorKind.DENSITY, 0.7e-4, 1.0, 8.0, 0.1)
        assert weighted_norm(kernel, "Q1", ScalarField.zeros(grid)) == 0.0

    def test_small_tau_norm_approaches_l2(self, grid, rng):
        U = random_scalar(grid, rng)
        kernel = build_kernel(grid, OperatorKind.TENSOR, 0.1, 1.0, 8.0, 1e-6)
        assert weighted_norm(kernel, "Q", U) == pytest.approx(inner(U, U), rel=1e-4)

    def test_heat_semigroup_contracts_max_norm(self, grid, rng):
        for v in (random_scalar(grid, rng), random_q(grid, rng)):
            for t in (1e-3, 0.1, 1.0):
                assert max_norm(heat_semigroup(v, 0.1, t)) <= max_norm(v) * (1 + 1e-12)
