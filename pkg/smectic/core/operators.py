"""Periodic finite-difference operators, grid inner products and the spectral backend.

Stencils wrap modulo J on every axis. Functions of the linear operators are
applied by real DFT diagonalization using the exact finite-difference symbol of
D+D-, so spectral and stencil results agree to roundoff.
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Literal, Union

import numpy as np
from scipy import fft

from smectic.config import get_settings
from smectic.core.errors import FieldError, ParameterError
from smectic.core.fields import (
    GridField,
    PeriodicGrid,
    ScalarField,
    SymTensorField,
    _TensorField,
    contract,
)

logger = logging.getLogger(__name__)

# Below this argument the generating functions switch to their Taylor series.
SERIES_CUTOFF = 1e-5

DiffMode = Literal["forward", "backward", "central"]


# ==================== Stencils ====================

def _array_axis(f: GridField, axis: int) -> int:
    d = f.grid.d
    if not 0 <= axis < d:
        raise IndexError(f"axis {axis} out of range for a {d}-dimensional grid")
    return f.values.ndim - d + axis


def _second_difference(values: np.ndarray, ax: int, h: float) -> np.ndarray:
    """D+D- along one array axis."""
    return (np.roll(values, -1, axis=ax) - 2.0 * values + np.roll(values, 1, axis=ax)) / (h * h)


def _central(values: np.ndarray, ax: int, h: float) -> np.ndarray:
    return (np.roll(values, -1, axis=ax) - np.roll(values, 1, axis=ax)) / (2.0 * h)


def diff(f: GridField, axis: int, mode: DiffMode = "forward") -> GridField:
    """One-sided or central first difference along ``axis``."""
    ax = _array_axis(f, axis)
    v, h = f.values, f.grid.h
    if mode == "forward":
        out = (np.roll(v, -1, axis=ax) - v) / h
    elif mode == "backward":
        out = (v - np.roll(v, 1, axis=ax)) / h
    elif mode == "central":
        out = _central(v, ax, h)
    else:
        raise ValueError(f"unknown difference mode: {mode}")
    return f.like(out)


def second_difference(f: GridField, axis: int) -> GridField:
    ax = _array_axis(f, axis)
    return f.like(_second_difference(f.values, ax, f.grid.h))


def mixed_central(f: GridField, axis_k: int, axis_l: int) -> GridField:
    """D^c_k D^c_l f."""
    ak, al = _array_axis(f, axis_k), _array_axis(f, axis_l)
    h = f.grid.h
    return f.like(_central(_central(f.values, al, h), ak, h))


def laplacian(f: GridField) -> GridField:
    """Sum over axes of D+D-; tensor fields are treated componentwise."""
    out = 0.0
    for axis in range(f.grid.d):
        out = out + _second_difference(f.values, _array_axis(f, axis), f.grid.h)
    return f.like(out)


def biharmonic(f: GridField) -> GridField:
    return laplacian(laplacian(f))


def hessian(f: ScalarField) -> SymTensorField:
    """Discrete Hessian: D+D- on the diagonal, D^c_k D^c_l off it."""
    grid = f.grid
    entries = []
    for k, l in SymTensorField.layout[grid.d]:
        if k == l:
            entries.append(_second_difference(f.values, k, grid.h))
        else:
            entries.append(_central(_central(f.values, l, grid.h), k, grid.h))
    return SymTensorField(grid, np.stack(entries))


def double_divergence(T: SymTensorField) -> ScalarField:
    """Adjoint of ``hessian`` under the full-tensor grid inner product."""
    grid = T.grid
    out = np.zeros(grid.shape)
    for c, (k, l) in enumerate(T.layout[grid.d]):
        if k == l:
            out += _second_difference(T.values[c], k, grid.h)
        else:
            out += 2.0 * _central(_central(T.values[c], l, grid.h), k, grid.h)
    return ScalarField(grid, out)


# ==================== Inner products and norms ====================

def _check_grids(f: GridField, g: GridField):
    if f.grid != g.grid:
        raise FieldError("inner product of fields on different grids")


def inner(f: GridField, g: GridField) -> float:
    """h^d-weighted nodal inner product; tensors contract all d^2 entries."""
    _check_grids(f, g)
    w = f.grid.cell_volume
    if isinstance(f, _TensorField) and isinstance(g, _TensorField):
        return float(w * np.sum(contract(f.full(), g.full())))
    if isinstance(f, _TensorField) or isinstance(g, _TensorField):
        raise FieldError("cannot take the inner product of a tensor and a scalar field")
    return float(w * np.sum(f.values * g.values))


def grad_inner(f: GridField, g: GridField) -> float:
    """[grad f, grad g] = sum over axes of <D+_k f, D+_k g>."""
    return sum(inner(diff(f, k), diff(g, k)) for k in range(f.grid.d))


@dataclass(frozen=True)
class Norms:
    l2: float
    linf: float
    h1: float
    h2: float

    def as_dict(self) -> dict[str, float]:
        return {"l2": self.l2, "linf": self.linf, "h1": self.h1, "h2": self.h2}


def max_norm(f: GridField) -> float:
    """Max over nodes of |f| (scalars) or |f|_F (tensors)."""
    if isinstance(f, _TensorField):
        full = f.full()
        return float(np.sqrt(np.max(contract(full, full))))
    return float(np.max(np.abs(f.values)))


def norms(f: GridField) -> Norms:
    l2_sq = inner(f, f)
    h1_sq = l2_sq + grad_inner(f, f)
    lap = laplacian(f)
    h2_sq = h1_sq + inner(lap, lap)
    return Norms(
        l2=float(np.sqrt(l2_sq)),
        linf=max_norm(f),
        h1=float(np.sqrt(h1_sq)),
        h2=float(np.sqrt(h2_sq)),
    )


# ==================== Spectral backend ====================

def _grid_axes(grid: PeriodicGrid, values: np.ndarray) -> tuple[int, ...]:
    return tuple(range(values.ndim - grid.d, values.ndim))


def forward_transform(grid: PeriodicGrid, values: np.ndarray) -> np.ndarray:
    return fft.rfftn(values, axes=_grid_axes(grid, values), workers=get_settings().fft_workers)


def inverse_transform(grid: PeriodicGrid, spectrum: np.ndarray) -> np.ndarray:
    return fft.irfftn(
        spectrum, s=grid.shape, axes=_grid_axes(grid, spectrum), workers=get_settings().fft_workers
    )


def laplacian_symbol(grid: PeriodicGrid) -> np.ndarray:
    """Eigenvalues of Delta_h on the real-transform half grid."""
    J, h = grid.J, grid.h
    per_axis = [np.fft.fftfreq(J, 1.0 / J)] * (grid.d - 1) + [np.fft.rfftfreq(J, 1.0 / J)]
    symbol = 0.0
    for axis, k in enumerate(per_axis):
        shape = [1] * grid.d
        shape[axis] = k.size
        symbol = symbol + (np.sin(np.pi * k / J) ** 2).reshape(shape)
    return -(4.0 / (h * h)) * symbol


def hermitian_multiplicity(grid: PeriodicGrid) -> np.ndarray:
    """How many full-spectrum modes each half-grid mode stands for."""
    J = grid.J
    last = np.full(J // 2 + 1, 2.0)
    last[0] = 1.0
    if J % 2 == 0:
        last[-1] = 1.0
    shape = [1] * grid.d
    shape[-1] = last.size
    return np.broadcast_to(last.reshape(shape), laplacian_symbol(grid).shape)


def apply_multiplier(grid: PeriodicGrid, multiplier: np.ndarray, f: GridField) -> GridField:
    """inverse-DFT(multiplier * DFT(f)); leading component axes broadcast."""
    if f.grid != grid:
        raise FieldError("field and multiplier live on different grids")
    return f.like(inverse_transform(grid, multiplier * forward_transform(grid, f.values)))


def spectral_laplacian(f: GridField) -> GridField:
    return apply_multiplier(f.grid, laplacian_symbol(f.grid), f)


def heat_semigroup(f: GridField, K: float, t: float) -> GridField:
    """exp(t K Delta_h) f."""
    return apply_multiplier(f.grid, np.exp(t * K * laplacian_symbol(f.grid)), f)


class OperatorKind(str, Enum):
    TENSOR = "tensor"    # L_Q = -K Delta_h + g kappa1
    DENSITY = "density"  # D_u = 2 B0 Delta_h^2 + g kappa2


def phi1(z: np.ndarray) -> np.ndarray:
    """(1 - e^-z) / z for z >= 0."""
    z = np.asarray(z, dtype=np.float64)
    small = z < SERIES_CUTOFF
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - z / 2.0 + z * z / 6.0, -np.expm1(-safe) / safe)


def q_function(z: np.ndarray) -> np.ndarray:
    """z / (e^z - 1) for z >= 0."""
    z = np.asarray(z, dtype=np.float64)
    small = z < SERIES_CUTOFF
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - z / 2.0 + z * z / 12.0, safe * np.exp(-safe) / -np.expm1(-safe))


def q1_function(z: np.ndarray) -> np.ndarray:
    return q_function(z) + np.asarray(z, dtype=np.float64) / 2.0


@dataclass(frozen=True, eq=False)
class SpectralKernel:
    """Per-mode eigenvalues of one stabilized linear operator and its function tables."""

    grid: PeriodicGrid
    kind: OperatorKind
    coefficient: float
    kappa: float
    tau: float
    g: float
    lap_symbol: np.ndarray
    base: np.ndarray
    eigen: np.ndarray
    exp_table: np.ndarray
    phi1_table: np.ndarray
    q_table: np.ndarray
    q1_table: np.ndarray

    def with_relaxation(self, g: float) -> "SpectralKernel":
        """Same operator with the shift g * kappa; only the tables are recomputed."""
        if not np.isfinite(g) or g < 0:
            raise ParameterError("g", f"relaxation factor must be finite and non-negative, got {g}")
        return replace(self, g=float(g), **_tabulate(self.base, g * self.kappa, self.tau))


def _tabulate(base: np.ndarray, shift: float, tau: float) -> dict[str, np.ndarray]:
    eigen = base + shift
    z = tau * eigen
    return {
        "eigen": eigen,
        "exp_table": np.exp(-z),
        "phi1_table": phi1(z),
        "q_table": q_function(z),
        "q1_table": q1_function(z),
    }


def build_kernel(
    grid: PeriodicGrid,
    kind: Union[OperatorKind, str],
    coefficient: float,
    g: float,
    kappa: float,
    tau: float,
) -> SpectralKernel:
    """Tabulate L_Q (coefficient K) or D_u (coefficient B0) at time step tau."""
    kind = OperatorKind(kind)
    for name, value in (("coefficient", coefficient), ("kappa", kappa), ("tau", tau), ("g", g)):
        if not np.isfinite(value) or value <= 0:
            raise ParameterError(name, f"{name} must be positive, got {value}")

    lap = laplacian_symbol(grid)
    if kind is OperatorKind.TENSOR:
        base = coefficient * (-lap)
    else:
        base = 2.0 * coefficient * lap * lap

    return SpectralKernel(
        grid=grid,
        kind=kind,
        coefficient=float(coefficient),
        kappa=float(kappa),
        tau=float(tau),
        g=float(g),
        lap_symbol=lap,
        base=base,
        **_tabulate(base, g * kappa, tau),
    )


def apply_kernel(kernel: SpectralKernel, which: Literal["exp", "phi1"], f: GridField) -> GridField:
    """exp(-tau L) f or phi1(-tau L) f; the caller applies the factor tau."""
    if which == "exp":
        table = kernel.exp_table
    elif which == "phi1":
        table = kernel.phi1_table
    else:
        raise ValueError(f"unknown kernel table: {which}")
    return apply_multiplier(kernel.grid, table, f)


def spectral_energy(grid: PeriodicGrid, weight: np.ndarray, f: GridField) -> float:
    """Plancherel form h^d / N * sum(weight * |DFT f|^2) over all reconstructed entries."""
    if f.grid != grid:
        raise FieldError("field and kernel live on different grids")
    values = f.full() if isinstance(f, _TensorField) else f.values
    power = np.abs(forward_transform(grid, values)) ** 2
    lead = tuple(range(power.ndim - grid.d))
    if lead:
        power = power.sum(axis=lead)
    total = np.sum(weight * hermitian_multiplicity(grid) * power)
    return float(grid.cell_volume / grid.size * total)


def weighted_norm(kernel: SpectralKernel, which: str, f: GridField) -> float:
    """Squared weighted norm <W U, U> for W in Q, Q1, QL (= Q(tau L) L), L, QQ (= Q^2) or I."""
    weights = {
        "Q": lambda: kernel.q_table,
        "Q1": lambda: kernel.q1_table,
        "QL": lambda: kernel.q_table * kernel.eigen,
        "L": lambda: kernel.eigen,
        "QQ": lambda: kernel.q_table ** 2,
        "I": lambda: np.ones_like(kernel.eigen),
    }
    if which not in weights:
        raise ValueError(f"unknown weighted norm: {which}")
    return spectral_energy(kernel.grid, weights[which](), f)
