"""Periodic collocated grids and the tensor/scalar field containers.

Nodes are stored in row-major order with axis order (x, y, z). Tensor fields
keep only their independent entries:

* ``QTensorField``  symmetric and traceless, (Q11, Q12) in 2D and
  (Q11, Q12, Q13, Q22, Q23) in 3D; the last diagonal entry is implied.
* ``SymTensorField`` symmetric, upper triangle row by row
  ((T11, T12, T22) in 2D, (T11, T12, T13, T22, T23, T33) in 3D).

All operations return new fields; containers never mutate their arrays.
"""
import math
from dataclasses import dataclass
from typing import ClassVar, Union

import numpy as np

from smectic.core.errors import FieldError, ParameterError

Q_COMPONENTS: dict[int, tuple[tuple[int, int], ...]] = {
    2: ((0, 0), (0, 1)),
    3: ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2)),
}
SYM_COMPONENTS: dict[int, tuple[tuple[int, int], ...]] = {
    d: tuple((i, j) for i in range(d) for j in range(i, d)) for d in (1, 2, 3)
}

DIRECTOR_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid of J nodes per axis on the cube [0, L)^d."""

    d: int
    J: int
    L: float = 2.0 * math.pi

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise FieldError(f"grid dimension must be 1, 2 or 3, got {self.d}")
        if int(self.J) != self.J or self.J < 1:
            raise FieldError(f"nodes per axis must be a positive integer, got {self.J}")
        if not math.isfinite(self.L) or self.L <= 0:
            raise FieldError(f"domain length must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.J

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.J,) * self.d

    @property
    def size(self) -> int:
        return self.J ** self.d

    @property
    def cell_volume(self) -> float:
        """Quadrature weight h^d of one node."""
        return self.h ** self.d

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Node coordinates, one array of ``shape`` per axis."""
        axis = np.arange(self.J) * self.h
        return tuple(np.meshgrid(*([axis] * self.d), indexing="ij"))


@dataclass(frozen=True, eq=False)
class GridField:
    """Common container: a grid plus a float64 array of leading_shape + grid.shape."""

    grid: PeriodicGrid
    values: np.ndarray

    component_names: ClassVar[tuple[str, ...]] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        expected = self.leading_shape(self.grid) + self.grid.shape
        if values.shape != expected:
            raise FieldError(
                f"{type(self).__name__} expects array shape {expected}, got {values.shape}"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def leading_shape(cls, grid: PeriodicGrid) -> tuple[int, ...]:
        return ()

    @classmethod
    def zeros(cls, grid: PeriodicGrid):
        return cls(grid, np.zeros(cls.leading_shape(grid) + grid.shape))

    def names(self) -> tuple[str, ...]:
        return self.component_names

    def like(self, values: np.ndarray):
        """Same kind of field on the same grid with new values."""
        return type(self)(self.grid, values)

    def copy(self):
        return self.like(self.values.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def _operand(self, other):
        if isinstance(other, GridField):
            if type(other) is not type(self):
                raise FieldError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
            if other.grid != self.grid:
                raise FieldError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self.like(self.values + self._operand(other))

    def __sub__(self, other):
        return self.like(self.values - self._operand(other))

    def __neg__(self):
        return self.like(-self.values)

    def __mul__(self, scalar: float):
        if isinstance(scalar, GridField):
            return NotImplemented
        return self.like(self.values * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float):
        return self.like(self.values / scalar)


class ScalarField(GridField):
    """One real value per node."""

    component_names = ("u",)

    @property
    def data(self) -> np.ndarray:
        return self.values


class _TensorField(GridField):
    """Tensor field stored by independent entries."""

    layout: ClassVar[dict[int, tuple[tuple[int, int], ...]]] = {}
    prefix: ClassVar[str] = "T"

    @classmethod
    def leading_shape(cls, grid: PeriodicGrid) -> tuple[int, ...]:
        if grid.d not in cls.layout:
            raise FieldError(f"{cls.__name__} is not defined for d={grid.d}")
        return (len(cls.layout[grid.d]),)

    @property
    def components(self) -> np.ndarray:
        return self.values

    def names(self) -> tuple[str, ...]:
        return tuple(f"{self.prefix}{i + 1}{j + 1}" for i, j in self.layout[self.grid.d])

    def full(self) -> np.ndarray:
        """Reconstructed d x d matrices, array of shape (d, d) + grid.shape."""
        d = self.grid.d
        out = np.empty((d, d) + self.grid.shape)
        for c, (i, j) in enumerate(self.layout[d]):
            out[i, j] = self.values[c]
            out[j, i] = self.values[c]
        return out


class SymTensorField(_TensorField):
    """Symmetric (not necessarily traceless) tensor per node."""

    layout = SYM_COMPONENTS
    prefix = "T"

    @classmethod
    def from_full(cls, grid: PeriodicGrid, matrices: np.ndarray) -> "SymTensorField":
        """Symmetric part of full matrices."""
        values = np.stack([
            0.5 * (matrices[i, j] + matrices[j, i]) for i, j in cls.layout[grid.d]
        ])
        return cls(grid, values)

    def trace(self) -> ScalarField:
        d = self.grid.d
        diag = [c for c, (i, j) in enumerate(self.layout[d]) if i == j]
        return ScalarField(self.grid, self.values[diag].sum(axis=0))


class QTensorField(_TensorField):
    """Symmetric traceless tensor per node; the last diagonal entry is implied."""

    layout = Q_COMPONENTS
    prefix = "Q"

    def full(self) -> np.ndarray:
        d = self.grid.d
        out = super().full()
        diag = [c for c, (i, j) in enumerate(self.layout[d]) if i == j]
        out[d - 1, d - 1] = -self.values[diag].sum(axis=0)
        return out

    @classmethod
    def from_full(cls, grid: PeriodicGrid, matrices: np.ndarray) -> "QTensorField":
        """Deviatoric symmetric part of full matrices."""
        d = grid.d
        trace = sum(matrices[k, k] for k in range(d))
        values = []
        for i, j in cls.layout[d]:
            if i == j:
                values.append(matrices[i, i] - trace / d)
            else:
                values.append(0.5 * (matrices[i, j] + matrices[j, i]))
        return cls(grid, np.stack(values))


AnyField = Union[ScalarField, QTensorField, SymTensorField]


# ==================== Pointwise algebra ====================

def identity_full(d: int, shape: tuple[int, ...]) -> np.ndarray:
    eye = np.zeros((d, d) + shape)
    for k in range(d):
        eye[k, k] = 1.0
    return eye


def contract(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise Frobenius product A : B of full matrix arrays."""
    return np.einsum("ij...,ij...->...", a, b)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise matrix product of full matrix arrays."""
    return np.einsum("ik...,kj...->ij...", a, b)


def frobenius_pointwise(Q: QTensorField) -> ScalarField:
    """|Q|_F per node, summing all d^2 reconstructed entries."""
    full = Q.full()
    return ScalarField(Q.grid, np.sqrt(contract(full, full)))


def deviatoric(T: SymTensorField, d: int) -> QTensorField:
    """T - (tr T / d) I per node."""
    if T.grid.d != d:
        raise FieldError(f"tensor field is {T.grid.d}-dimensional, expected {d}")
    return QTensorField.from_full(T.grid, T.full())


def m_tensor(Q: QTensorField, s_plus: float, d: int) -> SymTensorField:
    """M = Q / s_plus + I / d per node; tr M = 1."""
    if not s_plus > 0:
        raise ParameterError("s_plus", f"s_plus must be positive, got {s_plus}")
    if Q.grid.d != d:
        raise FieldError(f"tensor field is {Q.grid.d}-dimensional, expected {d}")
    full = Q.full() / s_plus + identity_full(d, Q.grid.shape) / d
    return SymTensorField.from_full(Q.grid, full)


def q_from_director(grid: PeriodicGrid, n: np.ndarray) -> QTensorField:
    """Uniaxial Q = n n^T - I/d from a unit director field of shape (d,) + grid.shape."""
    n = np.asarray(n, dtype=np.float64)
    if n.shape != (grid.d,) + grid.shape:
        raise FieldError(f"director must have shape {(grid.d,) + grid.shape}, got {n.shape}")
    defect = np.max(np.abs(np.sqrt(np.sum(n * n, axis=0)) - 1.0))
    if defect > DIRECTOR_TOLERANCE:
        raise FieldError(f"director is not a unit vector field (max |1 - |n|| = {defect:.3e})")
    full = np.einsum("i...,j...->ij...", n, n) - identity_full(grid.d, grid.shape) / grid.d
    return QTensorField.from_full(grid, full)


def director_wave(grid: PeriodicGrid) -> np.ndarray:
    """Director n = (cos(x+y), sin(x+y)[, 0]) used for the default initial data."""
    coords = grid.coordinates()
    if grid.d < 2:
        raise FieldError("director wave needs d >= 2")
    phase = coords[0] + coords[1]
    n = [np.cos(phase), np.sin(phase)]
    if grid.d == 3:
        n.append(np.zeros(grid.shape))
    return np.stack(n)
