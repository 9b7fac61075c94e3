"""Classical phase space: points, uniform grids, atomic supports, quadrature and differences."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import Protocol

import numpy as np
import numpy.typing as npt

from cqdyn.core.config import settings
from cqdyn.core.exceptions import (
    ConfigError,
    ContractViolationError,
    DomainError,
    ResolutionError,
    ShapeError,
)
from cqdyn.core.logging import get_logger

logger = get_logger(__name__)

type RealArray = npt.NDArray[np.float64]

SUPPORTED_DOF = (1, 3)


@dataclass(frozen=True, eq=False)
class PhaseSpacePoint:
    """A point z = (q, p) of the classical phase space."""

    q: RealArray
    p: RealArray

    def __post_init__(self) -> None:
        if self.q.shape != self.p.shape or self.q.ndim != 1:
            raise ShapeError("q and p must be vectors of equal length")
        if self.q.shape[0] not in SUPPORTED_DOF:
            raise DomainError(f"Classical dof count must be one of {SUPPORTED_DOF}")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise DomainError("Phase-space point has non-finite components")

    @classmethod
    def from_vector(cls, z: npt.ArrayLike) -> "PhaseSpacePoint":
        """Split a 2n-vector into positions and momenta."""
        arr = np.asarray(z, dtype=np.float64)
        half = arr.shape[0] // 2
        return cls(q=arr[:half].copy(), p=arr[half:].copy())

    @property
    def n(self) -> int:
        """Classical degrees of freedom."""
        return int(self.q.shape[0])

    def as_vector(self) -> RealArray:
        """Concatenated (q, p)."""
        return np.concatenate([self.q, self.p])


class Support(Protocol):
    """Quadrature support: points with measure weights.

    Both uniform grids and atomic supports satisfy this protocol, so
    every quadrature-based operation runs on either.
    """

    @property
    def points(self) -> RealArray: ...

    @property
    def weights(self) -> RealArray: ...

    @property
    def n(self) -> int: ...

    @property
    def size(self) -> int: ...


@dataclass(frozen=True)
class GridAxis:
    """One axis of a uniform grid."""

    lower: float
    upper: float
    count: int

    @property
    def spacing(self) -> float:
        return (self.upper - self.lower) / self.count

    @property
    def centers(self) -> RealArray:
        return self.lower + (np.arange(self.count) + 0.5) * self.spacing


@dataclass(frozen=True, eq=False)
class PhaseSpaceGrid:
    """Uniform midpoint grid over a box in R^{2n}.

    Axes are ordered q_1..q_n, p_1..p_n. Cells are enumerated
    lexicographically in the axis indices (last axis fastest).
    """

    axes: tuple[GridAxis, ...]

    @property
    def n(self) -> int:
        return len(self.axes) // 2

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(axis.count for axis in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacings(self) -> RealArray:
        return np.array([axis.spacing for axis in self.axes])

    @cached_property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    @cached_property
    def points(self) -> RealArray:
        mesh = np.meshgrid(*(axis.centers for axis in self.axes), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    @cached_property
    def weights(self) -> RealArray:
        return np.full(self.size, self.cell_volume)

    def point(self, index: int) -> PhaseSpacePoint:
        """Cell center of cell ``index``."""
        return PhaseSpacePoint.from_vector(self.points[index])

    def contains(self, z: npt.ArrayLike) -> bool:
        arr = np.asarray(z, dtype=np.float64)
        return bool(
            all(axis.lower <= x <= axis.upper for axis, x in zip(self.axes, arr, strict=True))
        )

    def cell_index(self, z: npt.ArrayLike) -> int:
        """Index of the cell containing ``z``.

        Raises:
            DomainError: If z lies outside the grid domain
        """
        arr = np.asarray(z, dtype=np.float64)
        if arr.shape != (len(self.axes),):
            raise ShapeError("Point dimension does not match the grid",
                             details={"point": list(arr.shape), "axes": len(self.axes)})
        if not self.contains(arr):
            raise DomainError("Point lies outside the grid domain", details={"point": arr.tolist()})
        idx = [
            min(int(np.floor((x - axis.lower) / axis.spacing)), axis.count - 1)
            for axis, x in zip(self.axes, arr, strict=True)
        ]
        return int(np.ravel_multi_index(tuple(idx), self.shape))


@dataclass(frozen=True, eq=False)
class AtomicSupport:
    """Finite set of phase-space points, each carrying unit measure.

    A block stored on an atomic support is the mass of a delta located
    at that point, so quadrature reduces to plain sums.
    """

    points: RealArray

    def __post_init__(self) -> None:
        if self.points.ndim != 2 or self.points.shape[1] % 2:
            raise ShapeError("Atomic support points must be an (m, 2n) array")
        if self.points.shape[1] // 2 not in SUPPORTED_DOF:
            raise DomainError(f"Classical dof count must be one of {SUPPORTED_DOF}")

    @property
    def n(self) -> int:
        return int(self.points.shape[1] // 2)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @cached_property
    def weights(self) -> RealArray:
        return np.ones(self.size)

    def index_of(self, z: npt.ArrayLike, tol: float | None = None) -> int | None:
        """Index of the support point within ``tol`` of ``z``, if any."""
        tol = settings.atom_merge_distance if tol is None else tol
        dist = np.linalg.norm(self.points - np.asarray(z, dtype=np.float64), axis=1)
        k = int(np.argmin(dist))
        return k if dist[k] <= tol else None


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real or complex values per support cell."""

    support: Support
    values: npt.NDArray[np.float64] | npt.NDArray[np.complex128]

    def __post_init__(self) -> None:
        if self.values.shape != (self.support.size,):
            raise ShapeError("Field length must equal the support size",
                             details={"values": list(self.values.shape), "cells": self.support.size})


def build_grid(axes: Sequence[tuple[float, float, int]]) -> PhaseSpaceGrid:
    """Build a uniform midpoint grid.

    Args:
        axes: (min, max, count) per axis, q-axes first then p-axes

    Returns:
        The grid

    Raises:
        ConfigError: If the axis specification is malformed
    """
    if len(axes) == 0 or len(axes) % 2:
        raise ConfigError("Grid needs an even, nonzero number of axes", key="grid.axes")
    if len(axes) // 2 not in SUPPORTED_DOF:
        raise ConfigError(f"Classical dof count must be one of {SUPPORTED_DOF}", key="grid.axes")
    built: list[GridAxis] = []
    for k, spec in enumerate(axes):
        if len(spec) != 3:
            raise ConfigError("Each axis is (min, max, count)", key=f"grid.axes.{k}")
        lower, upper, count = float(spec[0]), float(spec[1]), spec[2]
        if not isinstance(count, int | np.integer) or count < 1:
            raise ConfigError("Axis cell count must be a positive integer", key=f"grid.axes.{k}")
        if not (np.isfinite(lower) and np.isfinite(upper)) or lower >= upper:
            raise ConfigError("Axis needs finite min < max", key=f"grid.axes.{k}")
        built.append(GridAxis(lower=lower, upper=upper, count=int(count)))
    return PhaseSpaceGrid(axes=tuple(built))


def integrate(field: ScalarField) -> float | complex:
    """Midpoint quadrature sum_k f_k w_k in a fixed summation order."""
    total = np.sum(field.values * field.support.weights)
    if np.iscomplexobj(total):
        return complex(total)
    return float(total)


def field_from_function(support: Support, f: Callable[[RealArray], npt.ArrayLike]) -> ScalarField:
    """Evaluate a vectorized function of the (m, 2n) point array."""
    values = np.asarray(f(support.points))
    if not np.iscomplexobj(values):
        values = values.astype(np.float64)
    return ScalarField(support=support, values=np.broadcast_to(values, (support.size,)).copy())


def deposit_delta(z0: PhaseSpacePoint, grid: PhaseSpaceGrid) -> ScalarField:
    """Nearest-cell deposition of delta(z - z0).

    The containing cell carries 1/cell_volume, all others zero.

    Raises:
        DomainError: If z0 lies outside the grid domain
    """
    index = grid.cell_index(z0.as_vector())
    values = np.zeros(grid.size)
    values[index] = 1.0 / grid.cell_volume
    return ScalarField(support=grid, values=values)


def check_rotation(r: npt.ArrayLike, tol: float = 1e-10) -> RealArray:
    """Validate a 3x3 orthogonal matrix.

    Raises:
        ContractViolationError: If R^T R deviates from the identity
    """
    mat = np.asarray(r, dtype=np.float64)
    if mat.shape != (3, 3):
        raise ShapeError("Rotation must be 3x3", details={"shape": list(mat.shape)})
    defect = float(np.max(np.abs(mat.T @ mat - np.eye(3))))
    if defect > tol:
        raise ContractViolationError("Rotation matrix is not orthogonal", details={"defect": defect})
    return mat


def rotate_points(r: npt.ArrayLike, points: RealArray) -> RealArray:
    """Apply (q, p) -> (Rq, Rp) to an (m, 6) array of points."""
    mat = check_rotation(r)
    if points.ndim != 2 or points.shape[1] != 6:
        raise DomainError("Rotations act on n=3 phase space only")
    return np.concatenate([points[:, :3] @ mat.T, points[:, 3:] @ mat.T], axis=1)


def rotate_point(r: npt.ArrayLike, z: PhaseSpacePoint) -> PhaseSpacePoint:
    """Return (Rq, Rp).

    Raises:
        DomainError: If the point is not in n=3 phase space
        ContractViolationError: If R is not orthogonal
    """
    if z.n != 3:
        raise DomainError("Rotations act on n=3 phase space only")
    rotated = rotate_points(r, z.as_vector()[None, :])[0]
    return PhaseSpacePoint.from_vector(rotated)


def rotation_invariants(z: PhaseSpacePoint) -> tuple[float, float, float]:
    """The scalars (|q|, |p|, q.p) characterizing rotation-invariant profiles."""
    return float(np.linalg.norm(z.q)), float(np.linalg.norm(z.p)), float(z.q @ z.p)


def boundary_mass(field: ScalarField, cells: int | None = None) -> float:
    """Quadrature mass within ``cells`` cells of the grid boundary.

    Atomic supports have no boundary and report zero.
    """
    support = field.support
    if not isinstance(support, PhaseSpaceGrid):
        return 0.0
    cells = settings.boundary_cells if cells is None else cells
    if cells == 0:
        return 0.0
    values = np.abs(field.values).reshape(support.shape)
    mask = np.zeros(support.shape, dtype=bool)
    for axis, count in enumerate(support.shape):
        index = np.arange(count)
        near = (index < cells) | (index >= count - cells)
        shape = [1] * len(support.shape)
        shape[axis] = count
        mask |= near.reshape(shape)
    return float(np.sum(values[mask]) * support.cell_volume)


def difference_matrix(count: int, spacing: float, order: int) -> RealArray:
    """Dense first or second difference operator on one axis.

    Central differences in the interior, second-order one-sided at the
    boundaries; the second difference is the first applied twice.

    Raises:
        ResolutionError: If the axis has fewer than three cells
    """
    if count < 3:
        raise ResolutionError("Finite differences need at least 3 cells per axis",
                              details={"cells": count})
    first = np.gradient(np.eye(count), spacing, axis=0, edge_order=2)
    if order == 1:
        return np.asarray(first, dtype=np.float64)
    if order == 2:
        return np.asarray(first @ first, dtype=np.float64)
    raise ContractViolationError("Difference order must be 1 or 2", details={"order": order})


def _check_flux_axis(count: int) -> None:
    if count < 3:
        raise ResolutionError("Finite differences need at least 3 cells per axis",
                              details={"cells": count})


def flux_gradient_matrix(count: int, spacing: float) -> RealArray:
    """Central first difference in flux form with closed ends.

    Face values are the mean of the two neighbouring cells and the
    boundary faces carry no flux, so every column sums to zero.
    """
    _check_flux_axis(count)
    mat = np.zeros((count, count))
    for face in range(count - 1):
        mat[face, face : face + 2] += 0.5 / spacing
        mat[face + 1, face : face + 2] -= 0.5 / spacing
    return mat


def reflecting_laplacian(count: int, spacing: float) -> RealArray:
    """Second difference [1, -2, 1]/h^2 with reflecting ends.

    Symmetric and negative semidefinite, with zero column sums.
    """
    _check_flux_axis(count)
    mat = np.zeros((count, count))
    for face in range(count - 1):
        mat[face, face] -= 1.0
        mat[face, face + 1] += 1.0
        mat[face + 1, face] += 1.0
        mat[face + 1, face + 1] -= 1.0
    return mat / spacing**2


def _along_axis(values: npt.NDArray[np.complex128], grid: PhaseSpaceGrid,
                axis: int) -> npt.NDArray[np.complex128]:
    return np.moveaxis(values.reshape(grid.shape + values.shape[1:]), axis, 0)


def _velocity_along_axis(velocity: RealArray, grid: PhaseSpaceGrid, axis: int,
                         trailing: int) -> RealArray:
    moved = np.moveaxis(np.asarray(velocity, dtype=np.float64).reshape(grid.shape), axis, 0)
    return moved.reshape(moved.shape + (1,) * trailing)


def upwind_divergence(
    values: npt.NDArray[np.complex128], velocity: RealArray, grid: PhaseSpaceGrid, axis: int
) -> npt.NDArray[np.complex128]:
    """-d(v f)/dz along one axis with upwind face fluxes and closed ends.

    The flux through the face between cells k and k+1 is
    max(v_k, 0) f_k + min(v_{k+1}, 0) f_{k+1}. Off-diagonal entries of the
    operator are non-negative and its columns sum to zero.

    Args:
        values: Per-cell data, shape (cells, ...)
        velocity: Drift component per cell, shape (cells,)
        grid: Grid the data lives on
        axis: Axis of the derivative
    """
    _check_flux_axis(grid.shape[axis])
    f = _along_axis(values, grid, axis)
    v = _velocity_along_axis(velocity, grid, axis, values.ndim - 1)
    flux = np.maximum(v[:-1], 0.0) * f[:-1] + np.minimum(v[1:], 0.0) * f[1:]
    out = np.zeros_like(f)
    out[:-1] -= flux
    out[1:] += flux
    out /= grid.axes[axis].spacing
    return np.moveaxis(out, 0, axis).reshape(values.shape)


def upwind_divergence_adjoint(
    values: npt.NDArray[np.complex128], velocity: RealArray, grid: PhaseSpaceGrid, axis: int
) -> npt.NDArray[np.complex128]:
    """Transpose of :func:`upwind_divergence`: v_+ times the forward and v_- times the backward difference."""
    _check_flux_axis(grid.shape[axis])
    a = _along_axis(values, grid, axis)
    v = _velocity_along_axis(velocity, grid, axis, values.ndim - 1)
    jump = (a[1:] - a[:-1]) / grid.axes[axis].spacing
    out = np.zeros_like(a)
    out[:-1] += np.maximum(v[:-1], 0.0) * jump
    out[1:] += np.minimum(v[1:], 0.0) * jump
    return np.moveaxis(out, 0, axis).reshape(values.shape)


def apply_along_axis(
    matrix: RealArray, values: npt.NDArray[np.complex128], grid: PhaseSpaceGrid, axis: int
) -> npt.NDArray[np.complex128]:
    """Apply a one-axis operator to per-cell data of shape (cells, ...)."""
    trailing = values.shape[1:]
    shaped = values.reshape(grid.shape + trailing)
    moved = np.moveaxis(shaped, axis, 0)
    out = np.tensordot(matrix, moved, axes=(1, 0))
    return np.moveaxis(out, 0, axis).reshape(values.shape)


def derivative(field: ScalarField, axis: int, order: int = 1) -> ScalarField:
    """Finite-difference derivative of a grid field along one axis.

    Raises:
        ResolutionError: If the support is not a grid or the axis is too coarse
    """
    grid = field.support
    if not isinstance(grid, PhaseSpaceGrid):
        raise ResolutionError("Derivatives need a uniform grid support")
    mat = difference_matrix(grid.shape[axis], grid.axes[axis].spacing, order)
    out = apply_along_axis(mat, np.asarray(field.values, dtype=np.complex128), grid, axis)
    if not np.iscomplexobj(field.values):
        return ScalarField(support=grid, values=out.real.copy())
    return ScalarField(support=grid, values=out)
