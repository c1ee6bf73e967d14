"""Bulk potentials, the nonlinear energy E1_h and the modified discrete energy."""
import math
from dataclasses import asdict, dataclass
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from smectic.core.fields import (
    QTensorField,
    ScalarField,
    SymTensorField,
    contract,
    m_tensor,
    matmul,
)
from smectic.core.operators import grad_inner, hessian, inner, laplacian


def coupling_is_active(d: int, A: float, B: float, C: float) -> bool:
    """Below the isotropic-nematic threshold the layer term couples to Q."""
    if d == 3:
        return A < B * B / (27.0 * C)
    return A < 0


def reference_order(d: int, A: float, B: float, C: float) -> float:
    """Equilibrium nematic order s_plus of the bulk potential."""
    if d == 2:
        return math.sqrt(-2.0 * A / C)
    return (B + math.sqrt(B * B - 24.0 * A * C)) / (4.0 * C)


class ModelParams(BaseModel):
    """Physical and scheme constants; defaults reproduce the standard 2D quench."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    K: float = Field(0.1, gt=0)
    A: float = -1.0
    B: float = 0.0
    C: float = Field(2.0, gt=0)
    a: float = -5.0
    b: float = 0.0
    c: float = Field(5.0, gt=0)
    B0: float = Field(0.7e-4, gt=0)
    q: float = Field(5.0, gt=0)
    s_plus: Optional[float] = Field(None, gt=0)
    kappa1: float = Field(8.0, gt=0)
    kappa2: float = Field(8.0, gt=0)
    eta0: float = Field(0.95, ge=0, le=1)
    d: Literal[2, 3] = 2
    coupled: Optional[bool] = None

    @model_validator(mode="after")
    def _resolve_branch(self) -> "ModelParams":
        if self.d == 2 and self.B != 0:
            raise ValueError("B must be 0 in two dimensions (no cubic invariant)")

        coupled = self.coupled
        if coupled is None:
            coupled = coupling_is_active(self.d, self.A, self.B, self.C)
            object.__setattr__(self, "coupled", coupled)

        if self.s_plus is None:
            if not coupled:
                s_plus = 1.0
            elif self.d == 2 and self.A >= 0:
                raise ValueError("s_plus cannot be derived in 2D unless A < 0; set it explicitly")
            else:
                s_plus = reference_order(self.d, self.A, self.B, self.C)
            object.__setattr__(self, "s_plus", s_plus)
        return self

    @property
    def b_d(self) -> float:
        """Cubic bulk constant entering the Frobenius estimate (0 in 2D)."""
        return 0.0 if self.d == 2 else abs(self.B) / math.sqrt(6.0)


@dataclass(frozen=True)
class NonlinearEnergyTerms:
    coupling_cross: float
    coupling_quad: float
    bulk_nematic: float
    bulk_smectic: float

    @property
    def total(self) -> float:
        return self.coupling_cross + self.coupling_quad + self.bulk_nematic + self.bulk_smectic


@dataclass(frozen=True)
class EnergyReport:
    e0: float
    e1: float
    modified: float
    s: float
    g: float
    elastic: float
    layer_bending: float
    bulk_nematic: float
    bulk_smectic: float
    coupling_cross: float
    coupling_quad: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


# ==================== Pointwise potentials ====================

def f_bn(Q: QTensorField, p: ModelParams) -> ScalarField:
    """Landau-de Gennes bulk density."""
    full = Q.full()
    tr2 = contract(full, full)
    density = 0.5 * p.A * tr2 + 0.25 * p.C * tr2 * tr2
    if p.d == 3:
        tr3 = contract(matmul(full, full), full)
        density = density - (p.B / 3.0) * tr3
    return ScalarField(Q.grid, density)


def f_s(u: ScalarField, p: ModelParams) -> ScalarField:
    v = u.values
    return ScalarField(u.grid, 0.5 * p.a * v**2 + (p.b / 3.0) * v**3 + 0.25 * p.c * v**4)


def density_weighted(M: SymTensorField, u: ScalarField) -> SymTensorField:
    """M u per node."""
    return M.like(M.values * u.values)


# ==================== Energies ====================

def e1_breakdown(Q: QTensorField, u: ScalarField, p: ModelParams) -> NonlinearEnergyTerms:
    w = Q.grid.cell_volume
    bulk_nematic = float(w * np.sum(f_bn(Q, p).values))
    bulk_smectic = float(w * np.sum(f_s(u, p).values))
    if not p.coupled:
        return NonlinearEnergyTerms(0.0, 0.0, bulk_nematic, bulk_smectic)

    Mu = density_weighted(m_tensor(Q, p.s_plus, p.d), u)
    cross = 2.0 * p.B0 * p.q**2 * inner(hessian(u), Mu)
    quad = p.B0 * p.q**4 * inner(Mu, Mu)
    return NonlinearEnergyTerms(cross, quad, bulk_nematic, bulk_smectic)


def e1_discrete(Q: QTensorField, u: ScalarField, p: ModelParams) -> float:
    return e1_breakdown(Q, u, p).total


def quadratic_energy(Q: QTensorField, u: ScalarField, p: ModelParams) -> tuple[float, float]:
    """(K/2 |grad Q|^2, B0 |Delta u|^2)."""
    lap_u = laplacian(u)
    return 0.5 * p.K * grad_inner(Q, Q), p.B0 * inner(lap_u, lap_u)


def _relaxation(s: float, e1: float) -> float:
    try:
        return math.exp(s - e1)
    except OverflowError:
        return math.inf


def modified_energy(
    Q: QTensorField,
    u: ScalarField,
    s: float,
    p: ModelParams,
    g: Optional[float] = None,
) -> EnergyReport:
    """E0 + s with the per-term breakdown of E0 and E1_h."""
    terms = e1_breakdown(Q, u, p)
    elastic, bending = quadratic_energy(Q, u, p)
    e0 = elastic + bending
    e1 = terms.total
    return EnergyReport(
        e0=e0,
        e1=e1,
        modified=e0 + s,
        s=s,
        g=_relaxation(s, e1) if g is None else g,
        elastic=elastic,
        layer_bending=bending,
        bulk_nematic=terms.bulk_nematic,
        bulk_smectic=terms.bulk_smectic,
        coupling_cross=terms.coupling_cross,
        coupling_quad=terms.coupling_quad,
    )
