"""Discrete variational derivatives, stabilized nonlinear terms and MBP stabilizer bounds."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from smectic.core.energy import ModelParams
from smectic.core.errors import DivergenceError, ParameterError
from smectic.core.fields import (
    QTensorField,
    ScalarField,
    SymTensorField,
    contract,
    deviatoric,
    frobenius_pointwise,
    m_tensor,
    matmul,
)
from smectic.core.operators import double_divergence, hessian

# exp overflows a double just above 709.
G_EXPONENT_LIMIT = 700.0


@dataclass(frozen=True)
class VariationPair:
    mu_q: QTensorField
    mu_u: ScalarField


def layer_forcing(u: ScalarField, p: ModelParams) -> QTensorField:
    """(2 B0 q^2 / s_plus) dev(u D^2 u), the u-driven part of mu_Q."""
    if not p.coupled:
        return QTensorField.zeros(u.grid)
    hess = hessian(u)
    udu = SymTensorField(u.grid, hess.values * u.values)
    return deviatoric(udu, p.d) * (2.0 * p.B0 * p.q**2 / p.s_plus)


def mu_q(Q: QTensorField, u: ScalarField, p: ModelParams) -> QTensorField:
    """Variation of E1_h with respect to Q (traceless by construction)."""
    full = Q.full()
    tr2 = contract(full, full)
    values = p.A * Q.values + p.C * tr2 * Q.values
    if p.d == 3 and p.B != 0:
        values = values - p.B * QTensorField.from_full(Q.grid, matmul(full, full)).values
    if p.coupled:
        values = values + layer_forcing(u, p).values
        values = values + (2.0 * p.B0 * p.q**4 / p.s_plus**2) * Q.values * u.values**2
    return QTensorField(Q.grid, values)


def mu_u(Q: QTensorField, u: ScalarField, p: ModelParams) -> ScalarField:
    """Variation of E1_h with respect to u."""
    v = u.values
    values = p.a * v + p.b * v**2 + p.c * v**3
    if p.coupled:
        M = m_tensor(Q, p.s_plus, p.d)
        M_full = M.full()
        hess = hessian(u)
        Mu = SymTensorField(M.grid, M.values * v)
        coupling = 2.0 * p.B0 * p.q**2
        values = values + coupling * contract(M_full, hess.full())
        values = values + coupling * double_divergence(Mu).values
        values = values + 2.0 * p.B0 * p.q**4 * contract(M_full, M_full) * v
    return ScalarField(u.grid, values)


def variations(Q: QTensorField, u: ScalarField, p: ModelParams) -> VariationPair:
    """Both variations of E1_h at one state, evaluated once per step."""
    return VariationPair(mu_q=mu_q(Q, u, p), mu_u=mu_u(Q, u, p))


def g_factor(s: float, e1h: float, step: int = 0) -> float:
    """Relaxation factor exp(s - E1_h)."""
    exponent = s - e1h
    if not math.isfinite(exponent) or exponent > G_EXPONENT_LIMIT:
        raise DivergenceError(step, f"relaxation exponent s - E1 = {exponent} is out of range")
    return math.exp(exponent)


def n_q(Q: QTensorField, u: ScalarField, g: float, p: ModelParams, mu: Optional[QTensorField] = None) -> QTensorField:
    """g (kappa1 Q - mu_Q)."""
    if mu is None:
        mu = mu_q(Q, u, p)
    return (Q * p.kappa1 - mu) * g


def n_u(Q: QTensorField, u: ScalarField, g: float, p: ModelParams, mu: Optional[ScalarField] = None) -> ScalarField:
    """g (kappa2 u - mu_u)."""
    if mu is None:
        mu = mu_u(Q, u, p)
    return (u * p.kappa2 - mu) * g


# ==================== Maximum bound helpers ====================

def kappa0_bound(p: ModelParams, eta: float, u_inf: float) -> float:
    """Smallest stabilizer for which |Q|_F <= eta is preserved, given |u| <= u_inf."""
    if not eta > 0:
        raise ParameterError("eta", f"eta must be positive, got {eta}")
    if u_inf < 0:
        raise ParameterError("u_inf", f"u_inf must be non-negative, got {u_inf}")
    a_tilde = p.A
    if p.coupled:
        a_tilde += 2.0 * p.B0 * p.q**4 * u_inf**2 / p.s_plus**2
    first = a_tilde + p.C * eta**2
    # A - 2 b_d xi + 3 C xi^2 is convex, so its max over [0, eta] sits at an endpoint
    second = max(p.A, p.A - 2.0 * p.b_d * eta + 3.0 * p.C * eta**2)
    return max(first, second)


def forcing_sup(u: ScalarField, p: ModelParams) -> float:
    """S = max over nodes of |(2 B0 q^2 / s_plus) dev(u D^2 u)|_F."""
    return float(np.max(frobenius_pointwise(layer_forcing(u, p)).values))


def bulk_margin(xi, p: ModelParams, S: float):
    """f_d(xi) = -A xi + b_d xi^2 - C xi^3 + S."""
    xi = np.asarray(xi, dtype=np.float64)
    out = -p.A * xi + p.b_d * xi**2 - p.C * xi**3 + S
    return float(out) if out.ndim == 0 else out


def admissible_eta(p: ModelParams, S: float, floor: float = 0.0) -> float:
    """Smallest eta >= floor with f_d(eta) <= 0."""
    if S < 0:
        raise ParameterError("S", f"forcing bound must be non-negative, got {S}")
    if floor > 0 and bulk_margin(floor, p, S) <= 0:
        return float(floor)
    roots = np.roots([-p.C, p.b_d, -p.A, S])
    slack = 1e-9 * max(1.0, floor)
    real = sorted(
        max(r.real, floor) for r in roots
        if abs(r.imag) <= 1e-12 * max(1.0, abs(r)) and r.real > max(floor - slack, 0.0)
    )
    for r in real:
        # nudge past the root so rounding cannot leave f_d(eta) > 0
        candidate = float(r)
        for _ in range(8):
            if bulk_margin(candidate, p, S) <= 0:
                return candidate
            candidate *= 1.0 + 1e-12
    raise ParameterError("eta", "no admissible bound found for the bulk margin")
