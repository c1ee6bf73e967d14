"""Forward-Euler integration of the unmodified gradient flow, used as an oracle."""
import logging

import numpy as np

from smectic.core.energy import ModelParams
from smectic.core.errors import ConfigurationError, ReferenceBlowUpError
from smectic.core.operators import biharmonic, laplacian, max_norm
from smectic.core.stepper import SimState
from smectic.core.energy import e1_discrete
from smectic.core.variations import variations
from smectic.metrics import smectic_reference_restarts_total

logger = logging.getLogger(__name__)

# Explicit Euler is stable for tau * lambda_max < 2; keep a margin.
CFL_LIMIT = 1.8
MICRO_STEP_FRACTION = 1e-4


def stiffness_bound(state: SimState, p: ModelParams) -> float:
    """Upper bound on the largest decay rate of the linearized explicit update."""
    grid = state.grid
    lap_max = 4.0 * grid.d / grid.h**2
    u_inf = max_norm(state.u)
    q_inf = max_norm(state.Q)
    reaction_q = abs(p.A) + 3.0 * p.C * q_inf**2 + 2.0 * p.B0 * p.q**4 * u_inf**2 / p.s_plus**2
    reaction_u = abs(p.a) + 2.0 * abs(p.b) * u_inf + 3.0 * p.c * u_inf**2 + 4.0 * p.B0 * p.q**2 * lap_max
    return max(p.K * lap_max + reaction_q, 2.0 * p.B0 * lap_max**2 + reaction_u)


def _integrate(state0: SimState, tau_micro: float, n_steps: int, p: ModelParams) -> SimState:
    Q, u = state0.Q, state0.u
    for _ in range(n_steps):
        mu = variations(Q, u, p)
        dQ = laplacian(Q) * p.K - mu.mu_q
        du = -(biharmonic(u) * (2.0 * p.B0)) - mu.mu_u
        Q, u = Q + dQ * tau_micro, u + du * tau_micro
        if not (np.isfinite(Q.values).all() and np.isfinite(u.values).all()):
            raise FloatingPointError("explicit update is no longer finite")
    t = state0.t + n_steps * tau_micro
    return SimState(Q=Q, u=u, s=e1_discrete(Q, u, p), t=t, step=state0.step + n_steps)


def brute_force_reference(
    state0: SimState,
    tau_micro: float,
    T: float,
    p: ModelParams,
    max_halvings: int = 6,
) -> SimState:
    """Integrate Q_t = K Lap Q - mu_Q, u_t = -2 B0 Lap^2 u - mu_u to time T.

    The returned state carries s = E1_h(T), so its auxiliary variable is the
    true nonlinear energy. The micro step is halved while the stiffness bound
    or a blow-up says the explicit update is unstable.
    """
    if not T > 0:
        raise ConfigurationError("reference.T", f"final time must be positive, got {T}")
    if not 0 < tau_micro <= MICRO_STEP_FRACTION * T:
        raise ConfigurationError(
            "reference.tau_micro", f"micro step must lie in (0, {MICRO_STEP_FRACTION} T], got {tau_micro}"
        )
    n_steps = int(round(T / tau_micro))
    if abs(n_steps * tau_micro - T) > 1e-9 * T:
        raise ConfigurationError("reference.tau_micro", f"T={T} is not a multiple of tau_micro={tau_micro}")

    stiffness = stiffness_bound(state0, p)
    halvings = 0
    while tau_micro * stiffness > CFL_LIMIT:
        if halvings >= max_halvings:
            raise ReferenceBlowUpError(tau_micro, f"micro step {tau_micro} violates the explicit stability limit")
        tau_micro /= 2.0
        n_steps *= 2
        halvings += 1
        logger.warning(
            f"Reference micro step reduced to {tau_micro:.3e} by the stability pre-check",
            extra={"component": "reference"},
        )

    while True:
        try:
            result = _integrate(state0, tau_micro, n_steps, p)
            break
        except FloatingPointError:
            if halvings >= max_halvings:
                raise ReferenceBlowUpError(tau_micro, f"explicit reference blew up at micro step {tau_micro}")
            tau_micro /= 2.0
            n_steps *= 2
            halvings += 1
            smectic_reference_restarts_total.inc()
            logger.warning(
                f"Reference blew up; restarting with micro step {tau_micro:.3e}",
                extra={"component": "reference"},
            )

    logger.info(
        f"Reference reached t={result.t:.6g} with {n_steps} micro steps of {tau_micro:.3e}",
        extra={"component": "reference"},
    )
    return result
