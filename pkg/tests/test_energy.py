"""Tests for model parameters and the discrete energies."""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from smectic.core.energy import (
    ModelParams,
    coupling_is_active,
    e1_breakdown,
    e1_discrete,
    f_bn,
    modified_energy,
    quadratic_energy,
)
from smectic.core.fields import QTensorField, ScalarField, frobenius_pointwise
from smectic.services.checks import random_q, random_scalar
from smectic.services.harness import standard_initial_data


class TestModelParams:
    def test_standard_parameters(self, params):
        assert params.coupled is True
        assert params.s_plus == pytest.approx(1.0)
        assert params.b_d == 0.0

    def test_three_dimensional_order(self):
        p = ModelParams(d=3, A=-1.0, B=0.5, C=2.0)
        assert p.coupled
        assert p.s_plus == pytest.approx((0.5 + math.sqrt(0.25 + 48.0)) / 8.0)
        assert p.b_d == pytest.approx(0.5 / math.sqrt(6.0))

    def test_decoupled_branch(self):
        p = ModelParams(A=1.0)
        assert p.coupled is False
        assert p.s_plus == 1.0

    def test_coupling_threshold(self):
        assert coupling_is_active(3, 0.0, 1.0, 1.0)
        assert not coupling_is_active(3, 0.1, 1.0, 1.0)
        assert not coupling_is_active(2, 0.0, 0.0, 1.0)

    def test_cubic_term_is_rejected_in_two_dimensions(self):
        with pytest.raises(ValidationError):
            ModelParams(B=0.3)

    def test_order_cannot_be_derived_above_threshold(self):
        with pytest.raises(ValidationError):
            ModelParams(A=1.0, coupled=True)

    @pytest.mark.parametrize("field", ["K", "C", "c", "B0", "q", "kappa1", "kappa2"])
    def test_positive_constants(self, field):
        with pytest.raises(ValidationError):
            ModelParams(**{field: 0.0})

    def test_unknown_field(self):
        with pytest.raises(ValidationError):
            ModelParams(kappa=1.0)

    def test_frozen(self, params):
        with pytest.raises(ValidationError):
            params.K = 1.0

    def test_round_trip(self, params):
        assert ModelParams.model_validate(params.model_dump()) == params


class TestEnergies:
    def test_bulk_density_of_initial_director(self, grid, params):
        Q0, _ = standard_initial_data(grid, params)
        np.testing.assert_allclose(f_bn(Q0, params).values, -0.125, atol=1e-14)

    def test_cubic_term_only_in_three_dimensions(self, grid3d, params3d, rng):
        Q = QTensorField(grid3d, 0.3 * rng.standard_normal((5,) + grid3d.shape))
        without = params3d.model_copy(update={"B": 0.0})
        full = Q.full()
        tr3 = np.einsum("ik...,kj...,ji...->...", full, full, full)
        expected = f_bn(Q, without).values - (params3d.B / 3.0) * tr3
        np.testing.assert_allclose(f_bn(Q, params3d).values, expected, atol=1e-13)

    def test_decoupled_energy_has_no_coupling(self, grid, random_state):
        Q, u = random_state
        terms = e1_breakdown(Q, u, ModelParams(A=1.0))
        assert terms.coupling_cross == 0.0 and terms.coupling_quad == 0.0

    def test_breakdown_sums_to_total(self, params, random_state):
        Q, u = random_state
        terms = e1_breakdown(Q, u, params)
        assert terms.total == pytest.approx(e1_discrete(Q, u, params))
        assert terms.coupling_quad >= 0.0

    def test_quadratic_energy_of_constants(self, grid, params):
        Q = QTensorField(grid, np.ones((2,) + grid.shape))
        u = ScalarField(grid, np.full(grid.shape, 0.5))
        assert quadratic_energy(Q, u, params) == (0.0, 0.0)

    def test_modified_energy_report(self, params, random_state):
        Q, u = random_state
        e1 = e1_discrete(Q, u, params)
        report = modified_energy(Q, u, e1 + 0.5, params)
        assert report.modified == pytest.approx(report.e0 + e1 + 0.5)
        assert report.g == pytest.approx(math.exp(0.5))
        assert report.e0 == pytest.approx(report.elastic + report.layer_bending)
        assert set(report.as_dict()) >= {"e0", "e1", "modified", "g"}

    def test_relaxation_overflow_is_infinite(self, params, random_state):
        Q, u = random_state
        assert modified_energy(Q, u, 1e6, params).g == math.inf

    @pytest.mark.parametrize("dim", [2, 3])
    def test_constant_density_energy(self, dim, grid, grid3d):
        g = grid if dim == 2 else grid3d
        p = ModelParams(d=dim, B=0.0 if dim == 2 else 0.5, b=0.3)
        c0 = 0.4
        volume = g.size * g.cell_volume
        terms = e1_breakdown(QTensorField.zeros(g), ScalarField(g, np.full(g.shape, c0)), p)
        assert terms.coupling_cross == 0.0
        assert terms.coupling_quad == pytest.approx(p.B0 * p.q**4 * c0**2 * volume / dim, rel=1e-12)
        assert terms.bulk_nematic == 0.0
        assert terms.bulk_smectic == pytest.approx(
            volume * (0.5 * p.a * c0**2 + p.b * c0**3 / 3.0 + 0.25 * p.c * c0**4), rel=1e-12
        )

    @pytest.mark.parametrize("dim", [2, 3])
    def test_lattice_shift_leaves_e1_unchanged(self, dim, grid, grid3d, params, params3d, rng):
        g, p = (grid, params) if dim == 2 else (grid3d, params3d)
        Q, u = random_q(g, rng, 0.3), random_scalar(g, rng, 0.25)
        reference = e1_discrete(Q, u, p)
        for _ in range(3):
            shift = tuple(int(k) for k in rng.integers(0, g.J, size=dim))
            grid_axes = tuple(range(dim))
            rolled_q = QTensorField(g, np.roll(Q.values, shift, axis=tuple(a + 1 for a in grid_axes)))
            rolled_u = ScalarField(g, np.roll(u.values, shift, axis=grid_axes))
            assert e1_discrete(rolled_q, rolled_u, p) == pytest.approx(reference, rel=1e-12)

    @pytest.mark.parametrize("dim", [2, 3])
    def test_e1_stays_within_a_fixed_bracket(self, dim, grid, grid3d, params, params3d, rng):
        g, p = (grid, params) if dim == 2 else (grid3d, params3d)
        u_max = 0.5
        volume = g.size * g.cell_volume
        m_max = 1.0 / p.s_plus + 1.0 / math.sqrt(dim)
        hess_max = math.sqrt(dim * 16.0 + dim * (dim - 1)) * u_max / g.h**2
        bracket = volume * (
            0.5 * abs(p.A) + 0.25 * p.C + abs(p.B) / 3.0
            + 0.5 * abs(p.a) * u_max**2 + abs(p.b) * u_max**3 / 3.0 + 0.25 * p.c * u_max**4
            + p.B0 * p.q**4 * m_max**2 * u_max**2
            + 2.0 * p.B0 * p.q**2 * hess_max * m_max * u_max
        )
        for _ in range(1000 if dim == 2 else 200):
            Q = random_q(g, rng)
            xi = frobenius_pointwise(Q).values
            Q = QTensorField(g, Q.values * rng.uniform(0.0, 1.0, g.shape) / np.maximum(xi, 1e-300))
            u = ScalarField(g, rng.uniform(-u_max, u_max, g.shape))
            assert abs(e1_discrete(Q, u, p)) <= bracket
