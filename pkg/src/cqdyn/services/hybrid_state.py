"""The hybrid state rho(z): storage, reductions, expectations, positivity and rotations."""

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from cqdyn.core.config import settings
from cqdyn.core.exceptions import (
    ContractViolationError,
    ShapeError,
    UnsupportedSymmetryError,
)
from cqdyn.core.logging import get_logger
from cqdyn.models.state import (
    AtomDocument,
    AtomicStateDocument,
    AxisDocument,
    GridStateDocument,
    StateEnvelope,
    matrix_to_pairs,
    pairs_to_matrix,
)
from cqdyn.services.operator_algebra import (
    Operator,
    RealArray,
    dagger,
    is_hermitian,
)
from cqdyn.services.phase_space import (
    AtomicSupport,
    PhaseSpaceGrid,
    PhaseSpacePoint,
    ScalarField,
    Support,
    build_grid,
    rotate_points,
)

logger = get_logger(__name__)

type ClassicalFunction = Callable[[RealArray], npt.ArrayLike]


@dataclass(frozen=True, eq=False)
class HybridStateGrid:
    """Operator-valued density sampled on a quadrature support.

    ``blocks[k]`` is the d x d density at ``grid.points[k]`` per unit
    measure; on an :class:`AtomicSupport` it is the mass of the atom.
    """

    grid: Support
    blocks: Operator

    def __post_init__(self) -> None:
        if self.blocks.ndim != 3 or self.blocks.shape[0] != self.grid.size:
            raise ShapeError("Blocks must have shape (cells, d, d)",
                             details={"blocks": list(self.blocks.shape), "cells": self.grid.size})
        if self.blocks.shape[1] != self.blocks.shape[2]:
            raise ShapeError("Blocks must be square")

    @property
    def dim(self) -> int:
        return int(self.blocks.shape[1])

    @property
    def points(self) -> RealArray:
        return self.grid.points

    @property
    def masses(self) -> Operator:
        """Blocks multiplied by their quadrature weights."""
        return self.blocks * self.grid.weights[:, None, None]

    def with_blocks(self, blocks: Operator) -> "HybridStateGrid":
        return HybridStateGrid(grid=self.grid, blocks=blocks)

    def scaled(self, factor: complex) -> "HybridStateGrid":
        return self.with_blocks(self.blocks * factor)

    def vectorize(self) -> npt.NDArray[np.complex128]:
        """Flatten to (cells * d^2,), cell-major then row-major entries."""
        return self.blocks.reshape(-1).copy()

    @classmethod
    def devectorize(cls, grid: Support, vec: npt.ArrayLike, dim: int) -> "HybridStateGrid":
        arr = np.asarray(vec, dtype=np.complex128).reshape(grid.size, dim, dim)
        return cls(grid=grid, blocks=arr.copy())


@dataclass(frozen=True, eq=False)
class HybridStateAtomic:
    """Finite sum of phase-space point masses, each carrying a d x d block M_k."""

    points: RealArray
    blocks: Operator

    def __post_init__(self) -> None:
        if self.points.ndim != 2 or self.blocks.ndim != 3:
            raise ShapeError("Atomic state needs (m, 2n) points and (m, d, d) blocks")
        if self.points.shape[0] != self.blocks.shape[0]:
            raise ShapeError("Atom count mismatch between points and blocks")

    @property
    def dim(self) -> int:
        return int(self.blocks.shape[1])

    @property
    def masses(self) -> Operator:
        return self.blocks

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @classmethod
    def single(cls, z: PhaseSpacePoint | npt.ArrayLike, block: npt.ArrayLike) -> "HybridStateAtomic":
        vec = z.as_vector() if isinstance(z, PhaseSpacePoint) else np.asarray(z, dtype=np.float64)
        return cls(points=vec[None, :].astype(np.float64),
                   blocks=np.asarray(block, dtype=np.complex128)[None, :, :])

    def atom(self, k: int) -> tuple[PhaseSpacePoint, Operator]:
        return PhaseSpacePoint.from_vector(self.points[k]), self.blocks[k]

    def merged(self, distance: float | None = None) -> "HybridStateAtomic":
        """Sum the blocks of atoms closer than ``distance``; first occurrence keeps its position."""
        distance = settings.atom_merge_distance if distance is None else distance
        points: list[RealArray] = []
        blocks: list[Operator] = []
        for z, block in zip(self.points, self.blocks, strict=True):
            for k, existing in enumerate(points):
                if np.linalg.norm(existing - z) <= distance:
                    blocks[k] = blocks[k] + block
                    break
            else:
                points.append(z.copy())
                blocks.append(block.copy())
        if not points:
            return self
        return HybridStateAtomic(points=np.stack(points), blocks=np.stack(blocks))

    def combined(self, other: "HybridStateAtomic", factor: complex = 1.0) -> "HybridStateAtomic":
        """Atomic sum self + factor * other, merged."""
        return HybridStateAtomic(
            points=np.concatenate([self.points, other.points]),
            blocks=np.concatenate([self.blocks, factor * other.blocks]),
        ).merged()

    def scaled(self, factor: complex) -> "HybridStateAtomic":
        return HybridStateAtomic(points=self.points.copy(), blocks=self.blocks * factor)

    def to_support_state(self) -> HybridStateGrid:
        """The same measure as a state over an :class:`AtomicSupport`."""
        return HybridStateGrid(grid=AtomicSupport(points=self.points.copy()), blocks=self.blocks.copy())

    @classmethod
    def from_support_state(cls, state: HybridStateGrid) -> "HybridStateAtomic":
        """Point masses located at the support points of a grid-type state."""
        return cls(points=state.points.copy(), blocks=state.masses.copy())


type HybridState = HybridStateGrid | HybridStateAtomic


@dataclass(frozen=True, eq=False)
class HybridObservable:
    """Operator field A(z) = sum_t f_t(z) A_t.

    A single term (f, A) is the product f(z) A; sums are built with ``+``.
    A missing classical part means f = 1.
    """

    label: str
    terms: tuple[tuple[ClassicalFunction | None, Operator], ...] = field(default_factory=tuple)

    @classmethod
    def product(cls, label: str, quantum: npt.ArrayLike,
                classical: ClassicalFunction | None = None) -> "HybridObservable":
        return cls(label=label, terms=((classical, np.asarray(quantum, dtype=np.complex128)),))

    def __add__(self, other: "HybridObservable") -> "HybridObservable":
        return HybridObservable(label=f"{self.label}+{other.label}", terms=self.terms + other.terms)

    def relabeled(self, label: str) -> "HybridObservable":
        return HybridObservable(label=label, terms=self.terms)

    def scaled(self, factor: float) -> "HybridObservable":
        return HybridObservable(
            label=self.label, terms=tuple((f, factor * a) for f, a in self.terms)
        )

    @property
    def is_hermitian(self) -> bool:
        return all(is_hermitian(a) for _, a in self.terms)

    def classical_values(self, f: ClassicalFunction | None, points: RealArray) -> npt.NDArray[np.complex128]:
        if f is None:
            return np.ones(points.shape[0], dtype=np.complex128)
        values = np.asarray(f(points))
        return np.broadcast_to(values, (points.shape[0],)).astype(np.complex128)

    def operator_field(self, points: RealArray) -> Operator:
        """Evaluate A(z_k) at every point, shape (m, d, d)."""
        dim = self.terms[0][1].shape[0]
        out = np.zeros((points.shape[0], dim, dim), dtype=np.complex128)
        for f, a in self.terms:
            out += self.classical_values(f, points)[:, None, None] * a[None, :, :]
        return out

    def has_real_classical_parts(self, points: RealArray) -> bool:
        return all(
            np.allclose(self.classical_values(f, points).imag, 0.0) for f, _ in self.terms
        )


@dataclass(frozen=True)
class PositivityReport:
    """Smallest block eigenvalue over all cells or atoms, with its location."""

    min_eigenvalue: float
    index: int
    point: tuple[float, ...]


def check_normalization(state: HybridState) -> float:
    """Return |int Tr[rho(z)] dz - 1|."""
    total = complex(np.einsum("kaa->", state.masses))
    return abs(total - 1.0)


def reduce_classical(state: HybridState) -> ScalarField | RealArray:
    """Pointwise trace Tr[rho(z)].

    Returns:
        A density field for grid states; per-atom weights for atomic states
    """
    traces = np.real(np.einsum("kaa->k", state.blocks))
    if isinstance(state, HybridStateGrid):
        return ScalarField(support=state.grid, values=np.asarray(traces, dtype=np.float64))
    return np.asarray(traces, dtype=np.float64)


def reduce_quantum(state: HybridState) -> Operator:
    """Return int rho(z) dz (quadrature or atomic sum)."""
    return np.asarray(np.sum(state.masses, axis=0), dtype=np.complex128)


def expectation(obs: HybridObservable, state: HybridState) -> float | complex:
    """Return int Tr[A(z) rho(z)] dz.

    Hermitian observables with real classical parts return a real
    number; otherwise the complex value is returned.

    Raises:
        ContractViolationError: If a Hermitian observable yields an imaginary part > 1e-10
    """
    field_ops = obs.operator_field(state.points)
    value = complex(np.einsum("kab,kba->", field_ops, state.masses))
    if obs.is_hermitian and obs.has_real_classical_parts(state.points):
        if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
            raise ContractViolationError(
                "Hermitian observable produced a complex expectation",
                details={"observable": obs.label, "imag": value.imag},
            )
        return value.real
    return value


def classical_quantum_covariance(
    state: HybridState, classical: ClassicalFunction, quantum: Operator
) -> float:
    """Covariance <f A> - <f><A> between a classical function and a quantum operator."""
    joint = HybridObservable.product("fA", quantum, classical)
    f_only = HybridObservable.product("f", np.eye(state.dim), classical)
    a_only = HybridObservable.product("A", quantum)
    return float(np.real(expectation(joint, state) - expectation(f_only, state) * expectation(a_only, state)))


def purity(state: HybridState) -> float:
    """Quantum purity Tr[rho^2] of the reduced quantum state."""
    rho = reduce_quantum(state)
    return float(np.real(np.trace(rho @ rho)))


def positivity_report(state: HybridState) -> PositivityReport:
    """Minimum over cells/atoms of the smallest block eigenvalue."""
    lowest = np.linalg.eigvalsh(0.5 * (state.blocks + dagger(state.blocks)))[:, 0]
    k = int(np.argmin(lowest))
    return PositivityReport(
        min_eigenvalue=float(lowest[k]), index=k, point=tuple(float(x) for x in state.points[k])
    )


def product_state(
    support: Support, rho: Callable[[RealArray], Operator] | Operator, varrho: ScalarField
) -> HybridStateGrid:
    """Product form rho(z) varrho(z) with rho(z) a normalized conditional state."""
    if callable(rho):
        conditional = np.asarray(rho(support.points), dtype=np.complex128)
    else:
        conditional = np.broadcast_to(np.asarray(rho, dtype=np.complex128),
                                      (support.size, *np.shape(rho))).copy()
    return HybridStateGrid(grid=support, blocks=conditional * varrho.values[:, None, None])


def rotate_state(r: npt.ArrayLike, u: Operator, state: HybridState) -> HybridStateAtomic:
    """Apply (z_k, M_k) -> (R z_k, U M_k U^dagger).

    Grid states over an atomic support are rotated through their atomic
    form; uniform grids are not closed under rotation.

    Raises:
        UnsupportedSymmetryError: For states on a uniform grid
        ContractViolationError: If R is not orthogonal or U is not unitary
    """
    if isinstance(state, HybridStateGrid):
        if not isinstance(state.grid, AtomicSupport):
            raise UnsupportedSymmetryError("Uniform grids are not closed under rotations")
        state = HybridStateAtomic.from_support_state(state)
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (state.dim, state.dim):
        raise ShapeError("Unitary dimension does not match the state")
    defect = float(np.max(np.abs(u @ dagger(u) - np.eye(state.dim))))
    if defect > 1e-10:
        raise ContractViolationError("U is not unitary", details={"defect": defect})
    rotated_points = rotate_points(r, state.points)
    rotated_blocks = np.einsum("ab,kbc,cd->kad", u, state.blocks, dagger(u))
    return HybridStateAtomic(points=rotated_points, blocks=rotated_blocks)


def atomic_difference(a: HybridStateAtomic, b: HybridStateAtomic) -> float:
    """Largest block norm of the atomic measure a - b."""
    diff = a.combined(b, factor=-1.0)
    if diff.size == 0:
        return 0.0
    return float(np.max(np.linalg.norm(diff.blocks, axis=(1, 2))))


def state_to_document(state: HybridState, t: float = 0.0) -> StateEnvelope:
    """Encode a state in the checkpoint layout."""
    if isinstance(state, HybridStateAtomic):
        doc: GridStateDocument | AtomicStateDocument = AtomicStateDocument(
            dim=state.dim,
            atoms=[
                AtomDocument(z=[float(x) for x in z], M=matrix_to_pairs(block))
                for z, block in zip(state.points, state.blocks, strict=True)
            ],
        )
    elif isinstance(state.grid, PhaseSpaceGrid):
        doc = GridStateDocument(
            dim=state.dim,
            axes=[AxisDocument(min=a.lower, max=a.upper, count=a.count) for a in state.grid.axes],
            blocks=[matrix_to_pairs(block) for block in state.blocks],
        )
    else:
        doc = GridStateDocument(
            dim=state.dim,
            points=[[float(x) for x in z] for z in state.points],
            blocks=[matrix_to_pairs(block) for block in state.blocks],
        )
    return StateEnvelope(t=t, state=doc)


def state_from_document(envelope: StateEnvelope) -> HybridState:
    """Decode a checkpoint document.

    Raises:
        ShapeError: If the support description is missing or inconsistent
    """
    doc = envelope.state
    if isinstance(doc, AtomicStateDocument):
        if not doc.atoms:
            raise ShapeError("Atomic state document has no atoms")
        return HybridStateAtomic(
            points=np.array([atom.z for atom in doc.atoms], dtype=np.float64),
            blocks=np.stack([pairs_to_matrix(atom.M) for atom in doc.atoms]),
        )
    support: Support
    if doc.axes is not None:
        support = build_grid([(a.min, a.max, a.count) for a in doc.axes])
    elif doc.points is not None:
        support = AtomicSupport(points=np.array(doc.points, dtype=np.float64))
    else:
        raise ShapeError("Grid state document needs axes or points")
    blocks = np.stack([pairs_to_matrix(block) for block in doc.blocks])
    return HybridStateGrid(grid=support, blocks=blocks)


def state_to_json(state: HybridState, t: float = 0.0) -> str:
    """Serialize a state to the documented JSON layout."""
    return state_to_document(state, t).model_dump_json(indent=2)


def state_from_json(text: str) -> HybridState:
    """Parse a state from the documented JSON layout."""
    return state_from_document(StateEnvelope.model_validate_json(text))
