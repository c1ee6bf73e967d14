"""First-order exponential SAV time stepping with relaxation of the auxiliary variable.

One step runs, in order: E1_h^n and g^n, the variations and stabilized
nonlinear terms, the spectral field updates, the provisional auxiliary value,
the relaxation of s, and finally the step report.
"""
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

from smectic.core.energy import ModelParams, e1_discrete, quadratic_energy
from smectic.core.errors import DivergenceError, ParameterError
from smectic.core.fields import GridField, PeriodicGrid, QTensorField, ScalarField
from smectic.core.operators import (
    OperatorKind,
    SpectralKernel,
    apply_kernel,
    apply_multiplier,
    build_kernel,
    inner,
    max_norm,
    weighted_norm,
)
from smectic.core.variations import g_factor, n_q, n_u, variations
from smectic.metrics import (
    smectic_divergence_total,
    smectic_max_frobenius_q,
    smectic_modified_energy,
    smectic_relaxation_total,
    smectic_step_duration_seconds,
    smectic_steps_total,
)

logger = logging.getLogger(__name__)

# Below this gap the second relaxation branch is numerically indeterminate.
XI_GAP_GUARD = 1e-14

DIAGNOSTIC_COLUMNS = (
    "step", "t", "tau", "E0", "E1h", "s", "s_tilde", "xi", "g", "R",
    "modified_energy", "max_abs_Q_F", "max_abs_u",
)


class Scheme(str, Enum):
    ETD = "etd"
    IMPLICIT = "implicit"


@dataclass(frozen=True)
class SimState:
    Q: QTensorField
    u: ScalarField
    s: float
    t: float = 0.0
    step: int = 0

    @property
    def grid(self) -> PeriodicGrid:
        return self.Q.grid


@dataclass(frozen=True)
class OperatorKernels:
    """L_Q and D_u tabulated at one time step."""

    tensor: SpectralKernel
    density: SpectralKernel

    @property
    def tau(self) -> float:
        return self.tensor.tau

    def with_relaxation(self, g: float) -> "OperatorKernels":
        return OperatorKernels(self.tensor.with_relaxation(g), self.density.with_relaxation(g))


def build_kernels(grid: PeriodicGrid, p: ModelParams, tau: float, g: float = 1.0) -> OperatorKernels:
    return OperatorKernels(
        tensor=build_kernel(grid, OperatorKind.TENSOR, p.K, g, p.kappa1, tau),
        density=build_kernel(grid, OperatorKind.DENSITY, p.B0, g, p.kappa2, tau),
    )


@dataclass(frozen=True)
class StepReport:
    step: int
    t: float
    tau: float
    xi: float
    s_tilde: float
    R: float
    g: float
    e0: float
    e1h: float
    s: float
    energy_before: float
    energy_provisional: float
    energy_after: float
    mbp: float
    max_abs_u: float
    branch: str

    def as_row(self) -> dict[str, float]:
        return {
            "step": self.step,
            "t": self.t,
            "tau": self.tau,
            "E0": self.e0,
            "E1h": self.e1h,
            "s": self.s,
            "s_tilde": self.s_tilde,
            "xi": self.xi,
            "g": self.g,
            "R": self.R,
            "modified_energy": self.energy_after,
            "max_abs_Q_F": self.mbp,
            "max_abs_u": self.max_abs_u,
        }


def initial_state(Q: QTensorField, u: ScalarField, p: ModelParams, t: float = 0.0) -> SimState:
    """State with s = E1_h so that g = 1 at the first step."""
    if Q.grid != u.grid:
        raise ParameterError("grid", "Q and u live on different grids")
    return SimState(Q=Q, u=u, s=e1_discrete(Q, u, p), t=t, step=0)


def modified_energy_value(Q: QTensorField, u: ScalarField, s: float, p: ModelParams) -> float:
    elastic, bending = quadratic_energy(Q, u, p)
    return elastic + bending + s


# ==================== Scalar stages ====================

def dissipation_rate(
    deltaQ: QTensorField,
    delta_u: ScalarField,
    tau: float,
    kernels: OperatorKernels,
) -> float:
    """(|dQ|^2_{Q1} + |du|^2_{Q1}) / tau^2, an energy per unit time."""
    if not tau > 0:
        raise ParameterError("tau", f"tau must be positive, got {tau}")
    total = weighted_norm(kernels.tensor, "Q1", deltaQ) + weighted_norm(kernels.density, "Q1", delta_u)
    return max(total, 0.0) / (tau * tau)


def xi_optimal(s_tilde: float, e1h_next: float, R: float, tau: float, eta0: float) -> float:
    """Largest admissible pull of s toward E1_h within the reserved dissipation."""
    if R < 0:
        raise ParameterError("R", f"dissipation rate must be non-negative, got {R}")
    if not tau > 0:
        raise ParameterError("tau", f"tau must be positive, got {tau}")
    if not 0.0 <= eta0 <= 1.0:
        raise ParameterError("eta0", f"eta0 must lie in [0, 1], got {eta0}")

    if e1h_next <= s_tilde:
        return 0.0
    gap = e1h_next - s_tilde
    if gap < XI_GAP_GUARD * (1.0 + abs(s_tilde)):
        return 0.0
    return max(0.0, 1.0 - eta0 * tau * R / gap)


def relaxation_branch(s_tilde: float, e1h_next: float, xi: float) -> str:
    if e1h_next <= s_tilde:
        return "exact"
    return "relaxed" if xi > 0 else "clipped"


# ==================== Field updates ====================

def _etd_update(kernel: SpectralKernel, f: GridField, N: GridField, tau: float) -> GridField:
    return apply_kernel(kernel, "exp", f) + apply_kernel(kernel, "phi1", N) * tau


def _implicit_update(kernel: SpectralKernel, f: GridField, N: GridField, tau: float) -> GridField:
    # (Q(z) + z) X = Q(z) f + tau N per mode
    denominator = kernel.q_table + tau * kernel.eigen
    return (
        apply_multiplier(kernel.grid, kernel.q_table / denominator, f)
        + apply_multiplier(kernel.grid, tau / denominator, N)
    )


_UPDATES = {
    Scheme.ETD: _etd_update,
    Scheme.IMPLICIT: _implicit_update,
}


def _step(
    state: SimState,
    tau: float,
    p: ModelParams,
    kernels: Optional[OperatorKernels],
    scheme: Scheme,
) -> tuple[SimState, StepReport]:
    if not tau > 0 or not math.isfinite(tau):
        raise ParameterError("tau", f"tau must be positive, got {tau}")
    if kernels is None:
        kernels = build_kernels(state.grid, p, tau)
    elif not math.isclose(kernels.tau, tau, rel_tol=1e-15, abs_tol=0.0):
        raise ParameterError("tau", f"kernels were built for tau={kernels.tau}, step uses {tau}")
    update = _UPDATES[Scheme(scheme)]
    next_index = state.step + 1

    Q, u, s = state.Q, state.u, state.s
    e1n = e1_discrete(Q, u, p)
    g = g_factor(s, e1n, next_index)

    mu = variations(Q, u, p)
    NQ = n_q(Q, u, g, p, mu=mu.mu_q)
    NU = n_u(Q, u, g, p, mu=mu.mu_u)

    shifted = kernels.with_relaxation(g)
    Q_next = update(shifted.tensor, Q, NQ, tau)
    u_next = update(shifted.density, u, NU, tau)
    if not (Q_next.is_finite() and u_next.is_finite()):
        raise DivergenceError(next_index, "field values are no longer finite")

    dQ = Q_next - Q
    du = u_next - u
    s_tilde = s + g * (inner(mu.mu_q, dQ) + inner(mu.mu_u, du))

    e1_next = e1_discrete(Q_next, u_next, p)
    R = dissipation_rate(dQ, du, tau, shifted)
    xi = xi_optimal(s_tilde, e1_next, R, tau, p.eta0)
    s_next = xi * s_tilde + (1.0 - xi) * e1_next

    elastic, bending = quadratic_energy(Q_next, u_next, p)
    e0_next = elastic + bending
    mbp = max_norm(Q_next)
    max_u = max_norm(u_next)
    if not all(math.isfinite(v) for v in (s_tilde, e1_next, s_next, R, mbp, max_u)):
        raise DivergenceError(next_index, "energy or auxiliary variable is no longer finite")

    t_next = state.t + tau
    report = StepReport(
        step=next_index,
        t=t_next,
        tau=tau,
        xi=xi,
        s_tilde=s_tilde,
        R=R,
        g=g,
        e0=e0_next,
        e1h=e1_next,
        s=s_next,
        energy_before=modified_energy_value(Q, u, s, p),
        energy_provisional=e0_next + s_tilde,
        energy_after=e0_next + s_next,
        mbp=mbp,
        max_abs_u=max_u,
        branch=relaxation_branch(s_tilde, e1_next, xi),
    )
    return SimState(Q=Q_next, u=u_next, s=s_next, t=t_next, step=next_index), report


def etd_step(
    state: SimState,
    tau: float,
    p: ModelParams,
    kernels: Optional[OperatorKernels] = None,
) -> tuple[SimState, StepReport]:
    """Exponential form: X+ = exp(-tau L) X + tau phi1(-tau L) N."""
    return _step(state, tau, p, kernels, Scheme.ETD)


def implicit_step(
    state: SimState,
    tau: float,
    p: ModelParams,
    kernels: Optional[OperatorKernels] = None,
) -> tuple[SimState, StepReport]:
    """Equivalent implicit form: Q(tau L)(X+ - X)/tau + L X+ = N."""
    return _step(state, tau, p, kernels, Scheme.IMPLICIT)


# ==================== Runs ====================

@dataclass
class RunSummary:
    steps: int
    final_time: float
    g_min: Optional[float]
    g_max: Optional[float]
    max_frobenius: float
    initial_energy: float
    final_energy: float
    branch_counts: dict[str, int] = field(default_factory=dict)

    @property
    def energy_drop(self) -> float:
        return self.initial_energy - self.final_energy

    def as_dict(self) -> dict:
        out = asdict(self)
        out["energy_drop"] = self.energy_drop
        return out


@dataclass
class Trajectory:
    initial: SimState
    final: SimState
    reports: list[StepReport]
    snapshots: list[SimState]
    summary: RunSummary


def summarize(initial: SimState, final: SimState, reports: list[StepReport], p: ModelParams) -> RunSummary:
    counts = {"exact": 0, "relaxed": 0, "clipped": 0}
    for r in reports:
        counts[r.branch] += 1
    g_values = [r.g for r in reports]
    return RunSummary(
        steps=len(reports),
        final_time=final.t,
        g_min=min(g_values) if g_values else None,
        g_max=max(g_values) if g_values else None,
        max_frobenius=max([max_norm(initial.Q)] + [r.mbp for r in reports]),
        initial_energy=modified_energy_value(initial.Q, initial.u, initial.s, p),
        final_energy=reports[-1].energy_after if reports else modified_energy_value(
            final.Q, final.u, final.s, p
        ),
        branch_counts=counts,
    )


def run(
    state0: SimState,
    tau: float,
    n_steps: int,
    p: ModelParams,
    scheme: Union[Scheme, str] = Scheme.ETD,
    on_step: Optional[Callable[[SimState, StepReport], None]] = None,
    keep_every: int = 0,
) -> Trajectory:
    """Advance ``n_steps`` steps; keeps every ``keep_every``-th state (0 keeps none)."""
    if n_steps < 0:
        raise ParameterError("n_steps", f"n_steps must be non-negative, got {n_steps}")
    if keep_every < 0:
        raise ParameterError("keep_every", f"keep_every must be non-negative, got {keep_every}")
    scheme = Scheme(scheme)
    kernels = build_kernels(state0.grid, p, tau)
    step_fn = etd_step if scheme is Scheme.ETD else implicit_step

    logger.info(
        f"Starting {scheme.value} run: {n_steps} steps at tau={tau} on J={state0.grid.J}, d={state0.grid.d}",
        extra={"component": "stepper"},
    )
    state = state0
    reports: list[StepReport] = []
    snapshots: list[SimState] = [state0] if keep_every else []
    for _ in range(n_steps):
        t0 = time.perf_counter()
        try:
            state, report = step_fn(state, tau, p, kernels)
        except DivergenceError as exc:
            smectic_divergence_total.inc()
            logger.error(f"Run diverged: {exc.detail}", extra={"component": "stepper"})
            raise
        smectic_step_duration_seconds.observe(time.perf_counter() - t0)
        smectic_steps_total.labels(scheme=scheme.value).inc()
        smectic_relaxation_total.labels(branch=report.branch).inc()
        smectic_modified_energy.set(report.energy_after)
        smectic_max_frobenius_q.set(report.mbp)
        logger.debug(
            f"step={report.step} E={report.energy_after:.12e} xi={report.xi:.3f} g={report.g:.6f}",
            extra={"component": "stepper"},
        )
        reports.append(report)
        if keep_every and state.step % keep_every == 0:
            snapshots.append(state)
        if on_step is not None:
            on_step(state, report)

    summary = summarize(state0, state, reports, p)
    logger.info(
        f"Finished run at t={state.t:.6g}: energy drop {summary.energy_drop:.6e}, "
        f"max |Q|_F {summary.max_frobenius:.6f}",
        extra={"component": "stepper"},
    )
    return Trajectory(initial=state0, final=state, reports=reports, snapshots=snapshots, summary=summary)


def max_state_difference(a: SimState, b: SimState) -> float:
    """Largest relative field difference between two states."""
    rel = []
    for x, y in ((a.Q, b.Q), (a.u, b.u)):
        scale = max(float(np.max(np.abs(y.values))), 1e-300)
        rel.append(float(np.max(np.abs(x.values - y.values))) / scale)
    return max(rel)
