"""Tests for convergence studies and the stability sweep."""
import math

import pytest
from pydantic import ValidationError

from smectic.core.errors import ConfigurationError
from smectic.core.fields import PeriodicGrid, QTensorField, ScalarField
from smectic.core.stepper import initial_state
from smectic.services.harness import (
    ERROR_KEYS,
    ConvergenceConfig,
    ConvergenceRow,
    SweepConfig,
    convergence_study,
    fill_rates,
    format_study_table,
    observed_rate,
    stability_sweep,
    state_errors,
    steps_for,
)


class TestRates:
    def test_observed_rate(self):
        assert observed_rate(2e-3, 1e-3) == pytest.approx(1.0)
        assert observed_rate(1e-3, 1e-3) == 0.0

    @pytest.mark.parametrize("pair", [(0.0, 1e-3), (1e-3, 0.0), (math.nan, 1.0)])
    def test_undefined_rate(self, pair):
        assert observed_rate(*pair) is None

    def test_first_row_has_no_rates(self):
        rows = [ConvergenceRow(tau=t, steps=1, errors={k: t for k in ERROR_KEYS}) for t in (0.4, 0.2, 0.1)]
        fill_rates(rows)
        assert all(v is None for v in rows[0].rates.values())
        assert rows[2].rates["Q_l2"] == pytest.approx(1.0)
        assert rows[1].as_row()["u_h2_rate"] == pytest.approx(1.0)

    def test_table_formatting(self):
        rows = fill_rates([
            ConvergenceRow(tau=0.01, steps=1, errors={k: 8.3e-3 for k in ERROR_KEYS}),
            ConvergenceRow(tau=0.005, steps=2, errors={k: 4.15e-3 for k in ERROR_KEYS}),
        ])
        lines = format_study_table(rows).splitlines()
        assert lines[0].split()[0] == "tau"
        assert "8.30e-03 (--)" in lines[1]
        assert "4.15e-03 (1.00)" in lines[2]


class TestAlignment:
    def test_steps_for(self):
        assert steps_for(0.5, 2.0**-6) == 32

    @pytest.mark.parametrize("tau", [0.3, 0.0, 2.0])
    def test_misaligned(self, tau):
        with pytest.raises(ConfigurationError) as info:
            steps_for(1.0, tau)
        assert info.value.reason == "config:study.taus"

    def test_benchmark_must_be_finest(self):
        cfg = ConvergenceConfig(J=8, T=0.01, taus=[0.005, 0.0025], benchmark_tau=0.005)
        with pytest.raises(ConfigurationError) as info:
            convergence_study(cfg)
        assert info.value.reason == "config:study.benchmark_tau"

    def test_misaligned_ladder(self):
        cfg = ConvergenceConfig(J=8, T=0.01, taus=[0.003], benchmark_tau=0.001)
        with pytest.raises(ConfigurationError):
            convergence_study(cfg)


class TestConvergenceStudy:
    def test_repeated_step_size_gives_zero_rate(self):
        cfg = ConvergenceConfig(J=8, T=0.01, taus=[0.005, 0.005], benchmark_tau=0.00125)
        rows = convergence_study(cfg)
        assert rows[0].errors == rows[1].errors
        assert rows[1].rates["Q_l2"] == pytest.approx(0.0)

    def test_zero_dynamics(self, params):
        grid = PeriodicGrid(d=2, J=8)
        state0 = initial_state(QTensorField.zeros(grid), ScalarField.zeros(grid), params)
        cfg = ConvergenceConfig(J=8, T=0.01, taus=[0.005, 0.0025], benchmark_tau=0.00125)
        rows = convergence_study(cfg, state0)
        assert all(v == 0.0 for row in rows for v in row.errors.values())
        assert all(v is None for row in rows for v in row.rates.values())

    def test_threaded_study_matches_serial(self):
        base = dict(J=8, T=0.01, taus=[0.005, 0.0025], benchmark_tau=0.000625)
        serial = convergence_study(ConvergenceConfig(**base))
        threaded = convergence_study(ConvergenceConfig(**base, workers=2))
        assert [r.errors for r in serial] == [r.errors for r in threaded]

    def test_state_errors_against_itself(self, standard_state):
        assert all(v == 0.0 for v in state_errors(standard_state, standard_state).values())

    @pytest.mark.slow
    def test_small_study_is_first_order(self):
        cfg = ConvergenceConfig(J=16, T=0.25, taus=[2.0**-k for k in range(4, 8)], benchmark_tau=2.0**-10)
        rows = convergence_study(cfg)
        for key in ("Q_linf", "Q_l2", "Q_h1", "u_linf", "u_l2", "u_h2"):
            assert 0.8 <= rows[-1].rates[key] <= 1.4

    @pytest.mark.slow
    def test_desk_scale_study(self):
        rows = convergence_study(ConvergenceConfig())
        for row in rows[-3:]:
            for key in ("Q_linf", "Q_l2", "Q_h1", "u_linf", "u_l2", "u_h2"):
                assert 0.85 <= row.rates[key] <= 1.25


class TestStabilitySweep:
    def test_clean_sweep(self):
        cfg = SweepConfig(J=16, taus=[0.1, 10.0], kappa1_values=[40.0], mbp_taus=[1.0], n_steps=20)
        report = stability_sweep(cfg)
        assert report.violations == 0
        assert all(row.clean for row in report.energy)
        assert all(row.condition_met for row in report.max_bound)
        (bound,) = report.max_bound
        assert not bound.excursion
        assert bound.kappa1 >= max(bound.kappa0, bound.kappa0 / bound.g_min)
        assert bound.max_frobenius <= bound.eta * (1 + 1e-12)

    @pytest.mark.parametrize("values", [[0.0], [8.0, -1.0]])
    def test_stabilizer_values_must_be_positive(self, values):
        with pytest.raises(ValidationError):
            SweepConfig(kappa1_values=values)

    def test_mbp_steps_must_be_positive(self):
        with pytest.raises(ValidationError):
            SweepConfig(mbp_taus=[0.0])

    def test_eta_below_initial_bound(self):
        cfg = SweepConfig(J=8, taus=[0.1], kappa1_values=[8.0], mbp_taus=[0.1], n_steps=2, eta=0.5)
        with pytest.raises(ConfigurationError) as info:
            stability_sweep(cfg)
        assert info.value.reason == "config:sweep.eta"

    def test_small_stabilizer_is_recorded_not_raised(self):
        cfg = SweepConfig(J=8, taus=[0.1], kappa1_values=[0.5], mbp_taus=[10.0], n_steps=10)
        report = stability_sweep(cfg)
        (bound,) = report.max_bound
        assert bound.kappa1 == 0.5
        assert not bound.condition_met
