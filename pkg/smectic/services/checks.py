"""Randomized invariant battery behind the ``check`` command."""
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from smectic.core.energy import ModelParams, e1_discrete
from smectic.core.fields import PeriodicGrid, QTensorField, ScalarField, SymTensorField
from smectic.core.operators import (
    build_kernel,
    double_divergence,
    grad_inner,
    heat_semigroup,
    hessian,
    inner,
    laplacian,
    max_norm,
    mixed_central,
    norms,
    spectral_laplacian,
    weighted_norm,
    OperatorKind,
    SpectralKernel,
)
from smectic.core.stepper import build_kernels, etd_step, implicit_step, initial_state, max_state_difference, run
from smectic.core.variations import mu_q, mu_u
from smectic.metrics import smectic_check_results_total
from smectic.services.harness import audit_energy, standard_initial_data

logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-12
GRADIENT_TOLERANCE = 1e-6
GRADIENT_STEP = 1e-5
EQUIVALENCE_TOLERANCE = 1e-10


class CheckConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    J: int = Field(16, ge=4)
    sbp_pairs: int = Field(100, ge=1)
    norm_fields: int = Field(1000, ge=1)
    gradient_states: int = Field(50, ge=1)
    equivalence_states: int = Field(20, ge=1)
    equivalence_taus: list[float] = Field(default_factory=lambda: [1e-3, 0.1, 10.0], min_length=1)
    norm_taus: list[float] = Field(default_factory=lambda: [1e-3, 0.1, 1.0], min_length=1)
    energy_taus: list[float] = Field(default_factory=lambda: [2.0**-8, 1.0], min_length=1)
    energy_steps: int = Field(20, ge=1)
    q_amplitude: float = Field(0.3, gt=0)
    u_amplitude: float = Field(0.25, gt=0)


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name} worst={self.worst:.3e}"
        return f"{text} {self.detail}" if self.detail else text


# ==================== Random fields ====================

def random_scalar(grid: PeriodicGrid, rng: np.random.Generator, scale: float = 1.0) -> ScalarField:
    return ScalarField(grid, scale * rng.standard_normal(grid.shape))


def random_q(grid: PeriodicGrid, rng: np.random.Generator, scale: float = 1.0) -> QTensorField:
    n = QTensorField.leading_shape(grid)
    return QTensorField(grid, scale * rng.standard_normal(n + grid.shape))


def random_sym(grid: PeriodicGrid, rng: np.random.Generator, scale: float = 1.0) -> SymTensorField:
    n = SymTensorField.leading_shape(grid)
    return SymTensorField(grid, scale * rng.standard_normal(n + grid.shape))


def _relative(defect: float, scale: float) -> float:
    return abs(defect) / max(scale, 1e-300)


# ==================== Individual checks ====================

def check_summation_by_parts(grid, rng, cfg: CheckConfig, p: ModelParams) -> CheckResult:
    worst = 0.0
    for _ in range(cfg.sbp_pairs):
        U, V = random_scalar(grid, rng), random_scalar(grid, rng)
        defect = inner(laplacian(U), V) + grad_inner(U, V)
        worst = max(worst, _relative(defect, norms(U).h1 * norms(V).h1))
    return CheckResult("summation_by_parts", worst <= IDENTITY_TOLERANCE, worst)


def check_mixed_self_adjoint(grid, rng, cfg: CheckConfig, p: ModelParams) -> CheckResult:
    worst = 0.0
    pairs = [(k, l) for k in range(grid.d) for l in range(grid.d) if k != l]
    for _ in range(cfg.sbp_pairs):
        U, V = random_scalar(grid, rng), random_scalar(grid, rng)
        for k, l in pairs:
            DU, DV = mixed_central(U, k, l), mixed_central(V, k, l)
            scale = norms(DU).l2 * norms(V).l2 + norms(U).l2 * norms(DV).l2
            worst = max(worst, _relative(inner(DU, V) - inner(U, DV), scale))
    return CheckResult("mixed_difference_self_adjoint", worst <= IDENTITY_TOLERANCE, worst)


def check_hessian_adjoint(grid, rng, cfg: CheckConfig, p: ModelParams) -> CheckResult:
    worst = 0.0
    for _ in range(cfg.sbp_pairs):
        T, v = random_sym(grid, rng), random_scalar(grid, rng)
        div2, hess = double_divergence(T), hessian(v)
        scale = norms(div2).l2 * norms(v).l2 + norms(T).l2 * norms(hess).l2
        worst = max(worst, _relative(inner(div2, v) - inner(T, hess), scale))
    return CheckResult("hessian_adjoint", worst <= IDENTITY_TOLERANCE, worst)


def check_spectral_laplacian(grid, rng, cfg: CheckConfig, p: ModelParams) -> CheckResult:
    worst = 0.0
    for _ in range(cfg.sbp_pairs):
        f = random_scalar(grid, rng)
        stencil = laplacian(f)
        worst = max(worst, _relative(max_norm(spectral_laplacian(f) - stencil), max_norm(stencil)))
    return CheckResult("spectral_laplacian", worst <= IDENTITY_TOLERANCE, worst)


def norm_chain_pairs(kernel: SpectralKernel) -> list[tuple[Optional[str], str]]:
    """(lower, upper) weight pairs that must be ordered for this kernel; None stands for 0."""
    pairs: list[tuple[Optional[str], str]] = [
        ("QQ", "Q"), ("Q", "I"), ("I", "Q1"), (None, "QL"), ("QL", "L"),
    ]
    # |U|_Q1^2 <= <L U, U> needs tau <= 1 and g kappa >= 2
    if kernel.tau <= 1.0 and kernel.g * kernel.kappa >= 2.0:
        pairs.append(("Q1", "L"))
    return pairs


def norm_chain_excesses(kernel: SpectralKernel, U) -> list[float]:
    """Relative amount by which each ordered pair is broken (<= 0 when it holds)."""
    pairs = norm_chain_pairs(kernel)
    names = {w for pair in pairs for w in pair if w is not None}
    values = {w: weighted_norm(kernel, w, U) for w in names}
    values[None] = 0.0
    return [
        (values[lo] - values[hi]) / max(abs(values[lo]), abs(values[hi]), 1e-300)
        for lo, hi in pairs
    ]


def check_norm_chains(grid, rng, cfg: CheckConfig, p: ModelParams) -> CheckResult:
    """Modified-norm orderings (Q^2 <= Q <= I <= Q1, 0 <= QL <= L, Q1 <= L) for both stabilized operators."""
    violations = 0
    worst = 0.0
    kernels = []
    for tau in cfg.norm_taus:
        kernels.append((build_kernel(grid, OperatorKind.TENSOR, p.K, 1.0, p.kappa1, tau), random_q))
        kernels.append((build_kernel(grid, OperatorKind.DENSITY, p.B0, 1.0, p.kappa2, tau), random_scalar))
    per_kernel = max(1, cfg.norm_fields // len(kernels))
    for kernel, sampler in kernels:
        for _ in range(per_kernel):
            for excess in norm_chain_excesses(kernel, sampler(grid, rng)):
                worst = max(worst, excess)
                if excess > IDENTITY_TOLERANCE:
                    violations += 1
    return CheckResult("weighted_norm_chains", violations == 0, worst, f"violations={violations}")


def _random_state(grid, rng, cfg: CheckConfig):
    return random_q(grid, rng, cfg.q_amplitude), random_scalar(grid, rng, cfg.u_amplitude)


def check_gradients(grid, rng, cfg: CheckConfig, p: ModelParams) -> CheckResult:
    """Central differences of E1_h against <mu, delta> in random directions."""
    worst = 0.0
    eps = GRADIENT_STEP
    for _ in range(cfg.gradient_states):
        Q, u = _random_state(grid, rng, cfg)
        dQ, du = random_q(grid, rng), random_scalar(grid, rng)

        fd_q = (e1_discrete(Q + dQ * eps, u, p) - e1_discrete(Q - dQ * eps, u, p)) / (2 * eps)
        muQ = mu_q(Q, u, p)
        worst = max(worst, _relative(fd_q - inner(muQ, dQ), norms(muQ).l2 * norms(dQ).l2))

        fd_u = (e1_discrete(Q, u + du * eps, p) - e1_discrete(Q, u - du * eps, p)) / (2 * eps)
        muU = mu_u(Q, u, p)
        worst = max(worst, _relative(fd_u - inner(muU, du), norms(muU).l2 * norms(du).l2))
    return CheckResult("variational_gradients", worst <= GRADIENT_TOLERANCE, worst)


def check_mu_traceless(grid, rng, cfg: CheckConfig, p: ModelParams) -> CheckResult:
    worst = 0.0
    for _ in range(cfg.gradient_states):
        Q, u = _random_state(grid, rng, cfg)
        full = mu_q(Q, u, p).full()
        trace = sum(full[k, k] for k in range(grid.d))
        worst = max(worst, float(np.max(np.abs(trace))))
    return CheckResult("mu_q_traceless", worst <= IDENTITY_TOLERANCE, worst)


def check_scheme_equivalence(grid, rng, cfg: CheckConfig, p: ModelParams) -> CheckResult:
    worst = 0.0
    for _ in range(cfg.equivalence_states):
        Q, u = _random_state(grid, rng, cfg)
        state = initial_state(Q, u, p)
        for tau in cfg.equivalence_taus:
            kernels = build_kernels(grid, p, tau)
            a, ra = etd_step(state, tau, p, kernels)
            b, rb = implicit_step(state, tau, p, kernels)
            worst = max(worst, max_state_difference(a, b))
            worst = max(worst, _relative(ra.s - rb.s, abs(rb.s) + 1.0))
    return CheckResult("etd_implicit_equivalence", worst <= EQUIVALENCE_TOLERANCE, worst)


def check_energy_law(grid, rng, cfg: CheckConfig, p: ModelParams) -> CheckResult:
    """Monotone modified energy, the dissipation law and xi feasibility on short runs."""
    Q0, u0 = standard_initial_data(grid, p)
    state0 = initial_state(Q0, u0, p)
    failures = 0
    worst = 0.0
    for tau in cfg.energy_taus:
        reports = run(state0, tau, cfg.energy_steps, p).reports
        mono, law, feas = audit_energy(reports, p, 1e-10, 1e-12)
        failures += len(mono) + len(law) + len(feas)
        for r in reports:
            if not 0.0 <= r.xi <= 1.0:
                failures += 1
            worst = max(worst, (r.energy_after - r.energy_before) / max(abs(r.energy_before), 1e-300))
    return CheckResult("energy_dissipation", failures == 0, worst, f"violations={failures}")


def check_heat_contraction(grid, rng, cfg: CheckConfig, p: ModelParams) -> CheckResult:
    worst = 0.0
    for t in (1e-3, 0.1, 1.0):
        for _ in range(cfg.sbp_pairs // 10 or 1):
            for v in (random_scalar(grid, rng), random_q(grid, rng)):
                ratio = max_norm(heat_semigroup(v, p.K, t)) / max_norm(v)
                worst = max(worst, ratio - 1.0)
    return CheckResult("heat_semigroup_contraction", worst <= IDENTITY_TOLERANCE, worst)


CHECKS: tuple[Callable[..., CheckResult], ...] = (
    check_summation_by_parts,
    check_mixed_self_adjoint,
    check_hessian_adjoint,
    check_spectral_laplacian,
    check_norm_chains,
    check_gradients,
    check_mu_traceless,
    check_scheme_equivalence,
    check_energy_law,
    check_heat_contraction,
)


def run_checks(p: ModelParams, cfg: Optional[CheckConfig] = None, seed: int = 0) -> list[CheckResult]:
    """Run every check with one seeded generator; results are in a fixed order."""
    cfg = cfg or CheckConfig()
    grid = PeriodicGrid(d=p.d, J=cfg.J)
    rng = np.random.default_rng(seed)
    results = []
    for check in CHECKS:
        result = check(grid, rng, cfg, p)
        smectic_check_results_total.labels(status="pass" if result.passed else "fail").inc()
        log = logger.info if result.passed else logger.warning
        log(result.line(), extra={"component": "checks"})
        results.append(result)
    return results
