"""Temporal convergence studies and structure-preservation sweeps."""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat

from smectic.core.energy import ModelParams
from smectic.core.errors import ConfigurationError, DivergenceError
from smectic.core.fields import PeriodicGrid, QTensorField, ScalarField, director_wave, q_from_director
from smectic.core.operators import max_norm, norms
from smectic.core.stepper import Scheme, SimState, initial_state, run
from smectic.core.variations import admissible_eta, forcing_sup, kappa0_bound
from smectic.metrics import smectic_convergence_runs_total

logger = logging.getLogger(__name__)

ERROR_KEYS = ("Q_linf", "Q_l2", "Q_h1", "u_linf", "u_l2", "u_h2", "s")

# Relative slack when deciding that T / tau is a whole number of steps.
ALIGNMENT_TOLERANCE = 1e-9


# ==================== Initial data ====================

def standard_initial_data(
    grid: PeriodicGrid,
    p: ModelParams,
    amplitude: float = 0.25,
    wavenumber: Optional[float] = None,
) -> tuple[QTensorField, ScalarField]:
    """Director wave Q0 = n n^T - I/d with phase x + y and u0 = amplitude cos(k x)."""
    Q0 = q_from_director(grid, director_wave(grid))
    k = p.q if wavenumber is None else wavenumber
    x = grid.coordinates()[0]
    u0 = ScalarField(grid, amplitude * np.cos(k * x))
    return Q0, u0


def steps_for(T: float, tau: float, field_name: str = "study.taus") -> int:
    """Number of steps of size tau that land exactly on T."""
    if not tau > 0:
        raise ConfigurationError(field_name, f"time step must be positive, got {tau}")
    ratio = T / tau
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > ALIGNMENT_TOLERANCE * max(1.0, ratio):
        raise ConfigurationError(field_name, f"T={T} is not an integer multiple of tau={tau}")
    return n


# ==================== Convergence study ====================

class ConvergenceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelParams = Field(default_factory=ModelParams)
    J: int = Field(64, ge=2)
    L: float = Field(2.0 * math.pi, gt=0)
    T: float = Field(0.5, gt=0)
    taus: list[float] = Field(default_factory=lambda: [2.0**-k for k in range(6, 12)], min_length=1)
    benchmark_tau: float = Field(2.0**-13, gt=0)
    scheme: Scheme = Scheme.ETD
    u0_amplitude: float = 0.25
    u0_wavenumber: Optional[float] = None
    workers: int = Field(1, ge=1)


@dataclass
class ConvergenceRow:
    tau: float
    steps: int
    errors: dict[str, float]
    rates: dict[str, Optional[float]] = field(default_factory=dict)

    def as_row(self) -> dict:
        row = {"tau": self.tau, "steps": self.steps}
        for key in ERROR_KEYS:
            row[key] = self.errors[key]
            row[f"{key}_rate"] = self.rates.get(key)
        return row


STUDY_COLUMNS = ("tau", "steps") + tuple(
    col for key in ERROR_KEYS for col in (key, f"{key}_rate")
)


def state_errors(state: SimState, reference: SimState) -> dict[str, float]:
    """Errors in the grid norms used for the study tables."""
    eQ = norms(state.Q - reference.Q)
    eu = norms(state.u - reference.u)
    return {
        "Q_linf": eQ.linf,
        "Q_l2": eQ.l2,
        "Q_h1": eQ.h1,
        "u_linf": eu.linf,
        "u_l2": eu.l2,
        "u_h2": eu.h2,
        "s": abs(state.s - reference.s),
    }


def observed_rate(coarse: float, fine: float) -> Optional[float]:
    """log2 ratio of successive errors; None when either error vanishes."""
    if coarse <= 0 or fine <= 0 or not (math.isfinite(coarse) and math.isfinite(fine)):
        return None
    return math.log2(coarse / fine)


def fill_rates(rows: list[ConvergenceRow]) -> list[ConvergenceRow]:
    for prev, row in zip(rows, rows[1:]):
        row.rates = {key: observed_rate(prev.errors[key], row.errors[key]) for key in ERROR_KEYS}
    if rows:
        rows[0].rates = {key: None for key in ERROR_KEYS}
    return rows


def convergence_study(cfg: ConvergenceConfig, state0: Optional[SimState] = None) -> list[ConvergenceRow]:
    """Run the benchmark once, then every coarse step size, and tabulate errors and rates."""
    p = cfg.model
    if any(cfg.benchmark_tau >= tau for tau in cfg.taus):
        raise ConfigurationError(
            "study.benchmark_tau", "benchmark time step must be smaller than every study time step"
        )
    n_bench = steps_for(cfg.T, cfg.benchmark_tau, "study.benchmark_tau")
    ladder = [(tau, steps_for(cfg.T, tau)) for tau in cfg.taus]

    if state0 is None:
        grid = PeriodicGrid(d=p.d, J=cfg.J, L=cfg.L)
        Q0, u0 = standard_initial_data(grid, p, cfg.u0_amplitude, cfg.u0_wavenumber)
        state0 = initial_state(Q0, u0, p)

    t0 = time.time()
    logger.info(
        f"Convergence study: benchmark tau={cfg.benchmark_tau:.3e} ({n_bench} steps), {len(ladder)} coarse runs",
        extra={"component": "harness"},
    )
    benchmark = run(state0, cfg.benchmark_tau, n_bench, p, cfg.scheme).final
    smectic_convergence_runs_total.inc()

    def coarse(entry: tuple[float, int]) -> ConvergenceRow:
        tau, n = entry
        final = run(state0, tau, n, p, cfg.scheme).final
        smectic_convergence_runs_total.inc()
        return ConvergenceRow(tau=tau, steps=n, errors=state_errors(final, benchmark))

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(coarse, ladder))
    else:
        rows = [coarse(entry) for entry in ladder]

    fill_rates(rows)
    for row in rows:
        logger.info(
            f"tau={row.tau:.3e} Q_l2={row.errors['Q_l2']:.3e} u_l2={row.errors['u_l2']:.3e}",
            extra={"component": "harness"},
        )
    logger.info(f"Convergence study finished in {time.time() - t0:.1f}s", extra={"component": "harness"})
    return rows


def format_study_table(rows: list[ConvergenceRow]) -> str:
    """Aligned text table with 'error (rate)' cells, '--' where no rate exists."""
    header = ["tau"] + list(ERROR_KEYS)
    lines = []
    body = []
    for row in rows:
        cells = [f"{row.tau:.3e}"]
        for key in ERROR_KEYS:
            rate = row.rates.get(key)
            rate_text = "--" if rate is None else f"{rate:.2f}"
            cells.append(f"{row.errors[key]:.2e} ({rate_text})")
        body.append(cells)
    widths = [max(len(header[i]), *(len(r[i]) for r in body)) if body else len(header[i]) for i in range(len(header))]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for cells in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    return "\n".join(lines) + "\n"


# ==================== Stability sweep ====================

class SweepConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelParams = Field(default_factory=ModelParams)
    J: int = Field(32, ge=2)
    L: float = Field(2.0 * math.pi, gt=0)
    taus: list[float] = Field(default_factory=lambda: [0.01, 0.1, 1.0, 10.0], min_length=1)
    kappa1_values: list[PositiveFloat] = Field(default_factory=lambda: [1.0, 2.0, 5.0, 8.0, 16.0])
    mbp_taus: list[PositiveFloat] = Field(default_factory=lambda: [0.1, 1.0])
    n_steps: int = Field(100, ge=1)
    eta: Optional[float] = Field(None, gt=0)
    energy_tolerance: float = 1e-10
    feasibility_tolerance: float = 1e-12
    u0_amplitude: float = 0.25
    u0_wavenumber: Optional[float] = None
    scheme: Scheme = Scheme.ETD


@dataclass
class EnergyRow:
    tau: float
    steps: int
    monotonicity_violations: list[int]
    law_violations: list[int]
    feasibility_violations: list[int]
    xi_min: float
    xi_max: float
    branch_counts: dict[str, int]
    energy_drop: float

    @property
    def clean(self) -> bool:
        return not (self.monotonicity_violations or self.law_violations or self.feasibility_violations)


@dataclass
class MaxBoundRow:
    tau: float
    kappa1: float
    eta: float
    kappa0: float
    g_min: float
    u_inf: float
    max_frobenius: float
    condition_met: bool
    excursion: bool


@dataclass
class SweepReport:
    energy: list[EnergyRow]
    max_bound: list[MaxBoundRow]

    @property
    def violations(self) -> int:
        return sum(0 if row.clean else 1 for row in self.energy)


def audit_energy(trajectory_reports, p: ModelParams, energy_tolerance: float, feasibility_tolerance: float):
    """Step indices breaking monotonicity, the (1 - eta0) tau R law, or the relaxation bound s - s_tilde <= eta0 tau R."""
    mono, law, feas = [], [], []
    for r in trajectory_reports:
        slack = energy_tolerance * abs(r.energy_before)
        change = r.energy_after - r.energy_before
        if change > slack:
            mono.append(r.step)
        if change > -(1.0 - p.eta0) * r.tau * r.R + slack:
            law.append(r.step)
        if r.s - r.s_tilde > p.eta0 * r.tau * r.R + feasibility_tolerance:
            feas.append(r.step)
    return mono, law, feas


def stability_sweep(cfg: SweepConfig, state0: Optional[SimState] = None) -> SweepReport:
    """Energy audit across time steps and max-bound audit across stabilizers."""
    p = cfg.model
    if state0 is None:
        grid = PeriodicGrid(d=p.d, J=cfg.J, L=cfg.L)
        Q0, u0 = standard_initial_data(grid, p, cfg.u0_amplitude, cfg.u0_wavenumber)
        state0 = initial_state(Q0, u0, p)

    energy_rows: list[EnergyRow] = []
    for tau in cfg.taus:
        traj = run(state0, tau, cfg.n_steps, p, cfg.scheme)
        mono, law, feas = audit_energy(traj.reports, p, cfg.energy_tolerance, cfg.feasibility_tolerance)
        xis = [r.xi for r in traj.reports]
        row = EnergyRow(
            tau=tau,
            steps=len(traj.reports),
            monotonicity_violations=mono,
            law_violations=law,
            feasibility_violations=feas,
            xi_min=min(xis),
            xi_max=max(xis),
            branch_counts=traj.summary.branch_counts,
            energy_drop=traj.summary.energy_drop,
        )
        if not row.clean:
            logger.warning(
                f"Energy audit at tau={tau}: {len(mono)} monotonicity, {len(law)} law, "
                f"{len(feas)} feasibility violations",
                extra={"component": "harness"},
            )
        energy_rows.append(row)

    q0_max = max_norm(state0.Q)
    eta = cfg.eta
    if eta is None:
        eta = max(1.0, admissible_eta(p, forcing_sup(state0.u, p), floor=q0_max))
    if q0_max > eta:
        raise ConfigurationError("sweep.eta", f"initial max |Q|_F = {q0_max:.6f} exceeds eta = {eta}")

    bound_rows: list[MaxBoundRow] = []
    for tau in cfg.mbp_taus:
        for kappa1 in cfg.kappa1_values:
            pk = p.model_copy(update={"kappa1": kappa1})
            try:
                traj = run(state0, tau, cfg.n_steps, pk, cfg.scheme)
            except DivergenceError as exc:
                logger.warning(
                    f"Max bound run at tau={tau}, kappa1={kappa1} diverged at step {exc.step}",
                    extra={"component": "harness"},
                )
                bound_rows.append(MaxBoundRow(
                    tau=tau, kappa1=kappa1, eta=eta, kappa0=math.nan, g_min=math.nan,
                    u_inf=math.inf, max_frobenius=math.inf, condition_met=False, excursion=True,
                ))
                continue
            u_inf = max([max_norm(state0.u)] + [r.max_abs_u for r in traj.reports])
            kappa0 = kappa0_bound(pk, eta, u_inf)
            g_min = traj.summary.g_min
            max_frob = traj.summary.max_frobenius
            row = MaxBoundRow(
                tau=tau,
                kappa1=kappa1,
                eta=eta,
                kappa0=kappa0,
                g_min=g_min,
                u_inf=u_inf,
                max_frobenius=max_frob,
                condition_met=kappa1 >= max(kappa0, kappa0 / g_min),
                excursion=max_frob > eta * (1.0 + 1e-12),
            )
            if row.excursion:
                logger.warning(
                    f"Max bound excursion at tau={tau}, kappa1={kappa1}: {max_frob:.6f} > {eta}",
                    extra={"component": "harness"},
                )
            bound_rows.append(row)
    return SweepReport(energy=energy_rows, max_bound=bound_rows)
